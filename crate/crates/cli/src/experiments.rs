//! Dispatch from a validated config to the numerical modules.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};

use kpzlab::bridges::Point;
use kpzlab::harmonic::{arctan_tail, sample_hit_law};
use kpzlab::rng::SeedStream;
use kpzlab::she::{
    check_time_reversal, check_time_reversal_with, default_dt, estimate_height_variance,
    estimate_yl_variance, von_mises_bump, IVarianceRun, Resolution,
};
use kpzlab::sigma::{
    estimate_sigma2, estimate_sigma2_r, fit_exponent, predicted_exponent, Coupling, EstimatorForm,
    FitResult, SigmaEstimate, SigmaRun,
};
use kpzlab::wedge::{
    entropic_repulsion, smallest_sandwich_constant, stay_probability_mc, survival_bounds,
    survival_probability, MonteCarloGrid,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{num, summary_path, write_atomic, Check, FitSummary, ResultTable, Summary};

/// Everything a run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub table: ResultTable,
    pub fits: Vec<FitSummary>,
    pub checks: Vec<Check>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Column sets, one per experiment.
pub fn schema(experiment: Experiment) -> &'static [&'static str] {
    match experiment {
        Experiment::SigmaSweep | Experiment::SigmaR => {
            &["experiment", "form", "r", "L", "n_samples", "n_grid", "mean", "std_error", "seed"]
        }
        Experiment::WedgeExit => &[
            "experiment", "a", "L", "series", "mc_coarse", "mc_fine", "std_error", "margin", "n_paths",
            "grid_steps", "seed",
        ],
        Experiment::WedgeKernel => &["experiment", "a", "L", "probability", "lower", "upper", "C", "seed"],
        Experiment::Harmonic => &[
            "experiment", "q", "L", "xi", "empirical_tail", "exact_tail", "std_error", "coarse_tail",
            "margin", "raw_tail", "n_hits", "seed",
        ],
        Experiment::SheVariance => &[
            "experiment", "alpha", "lambda", "t", "L", "n_x", "dt", "var_estimate", "std_error",
            "n_replicas", "seed",
        ],
        Experiment::YlVariance => &[
            "experiment", "L", "n_outer", "n_inner", "n_grid", "mean", "mean_se", "variance",
            "variance_se", "var_over_L", "sandwich_violations", "seed",
        ],
        Experiment::IVariance => &[
            "experiment", "t", "L", "n_x", "dt", "n_f", "n_outer", "n_noise", "i_variance", "std_error",
            "t_sigma2", "t_sigma2_se", "margin", "seed",
        ],
        Experiment::TimeReversal => &[
            "experiment", "direction", "t", "L", "n_x", "dt", "n_replicas", "mean", "mean_se", "variance",
            "variance_se", "seed",
        ],
        Experiment::Entropic => &["experiment", "L", "gamma", "accepted", "attempted", "p", "std_error", "seed"],
    }
}

fn point_seed(root: u64, index: usize) -> u64 {
    SeedStream::new(root).child(index as u64).key()
}

fn fit_summary(label: impl Into<String>, fit: &FitResult) -> FitSummary {
    FitSummary {
        label: label.into(),
        slope: fit.slope,
        intercept: fit.intercept,
        slope_halfwidth: fit.slope_halfwidth,
        points: fit.points.len(),
    }
}

fn grid_for(l: f64, per_unit: usize) -> usize {
    ((l * per_unit as f64).ceil() as usize).max(16)
}

/// Runs the experiment in memory.
pub fn execute(config: &ExperimentConfig, seed: u64) -> Result<RunOutcome> {
    let mut out = RunOutcome {
        table: ResultTable::new(schema(config.experiment)),
        fits: Vec::new(),
        checks: Vec::new(),
    };
    let name = config.experiment.name().to_string();
    match config.experiment {
        Experiment::SigmaSweep => sigma_sweep(config, seed, &name, &mut out)?,
        Experiment::SigmaR => sigma_r(config, seed, &name, &mut out)?,
        Experiment::WedgeExit => {
            let a = config.float("a");
            let k = config.float("sigmas");
            for (i, &l) in config.list("L_list").iter().enumerate() {
                let s = point_seed(seed, i);
                let series = survival_probability(a, l)?;
                let grid = MonteCarloGrid::per_unit(l, config.count("grid_per_unit"));
                let mc = stay_probability_mc(Point::new(0.0, 0.0), Point::new(0.0, 0.0), l, a, grid, config.count("n_samples"), s)?;
                out.table.push(vec![
                    name.clone(), num(a), num(l), num(series), num(mc.coarse.p()), num(mc.fine.p()),
                    num(mc.fine.std_error()), num(mc.margin()), mc.fine.trials.to_string(),
                    grid.fine_steps().to_string(), s.to_string(),
                ]);
                let mut c = Check::within(format!("survival a={a} L={l}"), mc.fine.p(), series, k * mc.fine.std_error());
                c.passed = mc.consistent_with(series, k);
                c.tolerance = k * mc.fine.std_error() + mc.margin();
                out.checks.push(c);
            }
        }
        Experiment::WedgeKernel => {
            let mut values = Vec::new();
            for &a in config.list("a_list") {
                for &l in config.list("L_list") {
                    values.push((a, l, survival_probability(a, l)?));
                }
            }
            let c_max = config.float("c_max");
            let c = smallest_sandwich_constant(&values, c_max);
            let shown = c.unwrap_or(c_max);
            for &(a, l, p) in &values {
                let (lo, hi) = survival_bounds(a, l, shown);
                out.table.push(vec![name.clone(), num(a), num(l), num(p), num(lo), num(hi), num(shown), seed.to_string()]);
            }
            out.checks.push(Check::at_most("sandwich constant", c.unwrap_or(f64::INFINITY), c_max, 0.0));
        }
        Experiment::Harmonic => {
            let (l, q) = (config.float("L"), config.float("q"));
            let k = config.float("sigmas");
            let law = sample_hit_law(l, q, config.count("n_grid"), config.count("n_samples"), seed)?;
            let ks = law.ks_test();
            let gap = std::f64::consts::SQRT_2 - 1.0;
            for &xi in config.list("xi_list") {
                let (p, se) = law.empirical_tail(xi);
                let coarse = law.coarse_tail(xi);
                let margin = (coarse - p).abs() / gap;
                let exact = arctan_tail(q, xi);
                let raw = law.raw_tail(xi);
                out.table.push(vec![
                    name.clone(), num(q), num(l), num(xi), num(p), num(exact), num(se), num(coarse),
                    num(margin), num(raw), law.fine.len().to_string(), seed.to_string(),
                ]);
                out.checks.push(Check::within(format!("tail xi={xi}"), p, exact, k * se + margin));
                let raw_se = (raw * (1.0 - raw) / law.fine.len() as f64).sqrt();
                out.checks.push(Check::at_most(format!("raw tail bound xi={xi}"), raw, exact, k * raw_se));
            }
            out.checks.push(Check::at_most("ks statistic", ks.ks_statistic, ks.ks_critical, ks.grid_margin));
        }
        Experiment::SheVariance => {
            let alpha = config.float("alpha");
            let lambda = config.float("lambda");
            let res = Resolution { cells_per_unit: config.float("cells_per_unit"), cell_budget: config.float("cell_budget") };
            let pts = estimate_height_variance(alpha, lambda, config.list("t_list"), config.count("n_replicas"), res, seed)?;
            for p in &pts {
                out.table.push(vec![
                    name.clone(), num(alpha), num(lambda), num(p.t), num(p.l), p.n_x.to_string(), num(p.dt),
                    num(p.var_estimate), num(p.std_error), p.n_replicas.to_string(), seed.to_string(),
                ]);
            }
            let fit = fit_exponent(&pts.iter().map(|p| (p.t, p.var_estimate, p.std_error)).collect::<Vec<_>>())?;
            out.fits.push(fit_summary(format!("alpha={alpha}"), &fit));
            let target = 1.0 - alpha / 2.0;
            let tol = config.float("slope_tol");
            out.checks.push(if alpha >= 2.0 / 3.0 - 1e-9 {
                Check::at_most("variance slope (upper bound)", fit.slope, target, tol)
            } else {
                Check::within("variance slope", fit.slope, target, tol)
            });
        }
        Experiment::YlVariance => {
            let mut ratios = Vec::new();
            for (i, &l) in config.list("L_list").iter().enumerate() {
                let s = point_seed(seed, i);
                let n_grid = grid_for(l, config.count("grid_per_unit"));
                let e = estimate_yl_variance(l, config.count("n_samples"), config.count("n_inner"), n_grid, s)?;
                out.table.push(vec![
                    name.clone(), num(l), e.n_outer.to_string(), e.n_inner.to_string(), n_grid.to_string(),
                    num(e.mean), num(e.mean_se), num(e.variance), num(e.variance_se), num(e.variance / l),
                    e.sandwich_violations.to_string(), s.to_string(),
                ]);
                out.checks.push(Check::at_least(format!("variance positive L={l}"), e.variance, 0.0, 0.0));
                out.checks.push(Check::within(format!("sandwich L={l}"), e.sandwich_violations as f64, 0.0, 0.0));
                ratios.push(e.variance / l);
            }
            let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
            let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
            out.checks.push(Check::at_most("var/L spread max/min - 1", hi / lo - 1.0, 0.0, config.float("ratio_tol")));
        }
        Experiment::IVariance => i_variance(config, seed, &name, &mut out)?,
        Experiment::TimeReversal => {
            let (t, l) = (config.float("t"), config.float("L"));
            let n_x = ((l * config.float("cells_per_unit")).round() as usize).max(4);
            let dt = default_dt(l / n_x as f64);
            let n = config.count("n_replicas");
            let rep = if config.flag("same_f_g") {
                let f = von_mises_bump(l, n_x, 0.25 * l, 2.0);
                check_time_reversal_with(t, l, n_x, dt, n, &f, &f, seed)?
            } else {
                check_time_reversal(t, l, n_x, dt, n, seed)?
            };
            for (dir, m, mse, v, vse) in [
                ("forward", rep.forward_mean, rep.forward_mean_se, rep.forward_var, rep.forward_var_se),
                ("swapped", rep.swapped_mean, rep.swapped_mean_se, rep.swapped_var, rep.swapped_var_se),
            ] {
                out.table.push(vec![
                    name.clone(), dir.into(), num(t), num(l), n_x.to_string(), num(dt), n.to_string(),
                    num(m), num(mse), num(v), num(vse), seed.to_string(),
                ]);
            }
            let k = config.float("sigmas");
            out.checks.push(Check::at_most("mean difference (sigmas)", rep.mean_z(), 0.0, k));
            out.checks.push(Check::at_most("variance difference (sigmas)", rep.var_z(), 0.0, k));
        }
        Experiment::Entropic => {
            let gamma = config.float("gamma");
            let mut ps = Vec::new();
            for (i, &l) in config.list("L_list").iter().enumerate() {
                let s = point_seed(seed, i);
                let e = entropic_repulsion(l, gamma, config.count("n_samples"), s)?;
                out.table.push(vec![
                    name.clone(), num(l), num(gamma), e.conditional.trials.to_string(), e.attempted.to_string(),
                    num(e.p()), num(e.std_error()), s.to_string(),
                ]);
                out.checks.push(Check::at_least(format!("floor L={l}"), e.p(), config.float("floor"), 0.0));
                ps.push(e.p());
            }
            let hi = ps.iter().copied().fold(f64::MIN, f64::max);
            let lo = ps.iter().copied().fold(f64::MAX, f64::min);
            out.checks.push(Check::at_least("min/max over L", lo / hi, config.float("min_ratio"), 0.0));
        }
    }
    Ok(out)
}

fn form_run(form: &str, l: f64, n: usize, n_grid: usize, seed: u64, antithetic: bool) -> Result<SigmaEstimate> {
    let (f, c) = match form {
        "definition" => (EstimatorForm::Definition, Coupling::half()),
        "shifted" => (EstimatorForm::Shifted, Coupling::half()),
        "wedge" => (EstimatorForm::Wedge, Coupling::half()),
        "independent" => (EstimatorForm::Shifted, Coupling::IndependentProduct),
        "identical" => (EstimatorForm::Shifted, Coupling::Identical),
        other => anyhow::bail!("unknown form {other}"),
    };
    Ok(SigmaRun::new(l, f, c, n, seed).with_grid(n_grid).with_antithetic(antithetic).run()?)
}

fn sigma_row(name: &str, form: &str, r: f64, e: &SigmaEstimate) -> Vec<String> {
    vec![
        name.into(), form.into(), num(r), num(e.l), e.n_samples.to_string(), e.n_grid.to_string(),
        num(e.mean), num(e.std_error), e.seed.to_string(),
    ]
}

fn fit_rows(rows: &[(f64, &SigmaEstimate)]) -> Result<FitResult> {
    Ok(fit_exponent(&rows.iter().map(|(l, e)| (*l, e.mean, e.std_error)).collect::<Vec<_>>())?)
}

fn sigma_sweep(config: &ExperimentConfig, seed: u64, name: &str, out: &mut RunOutcome) -> Result<()> {
    let forms = config.strings("forms");
    let fit_form = config.string("fit_form");
    let mut results: Vec<(String, SigmaEstimate)> = Vec::new();
    for (i, &l) in config.list("L_list").iter().enumerate() {
        let n_grid = grid_for(l, config.count("grid_per_unit"));
        for (j, form) in forms.iter().enumerate() {
            let s = SeedStream::new(seed).child(i as u64).child(j as u64).key();
            let e = form_run(form, l, config.count("n_samples"), n_grid, s, config.flag("antithetic"))?;
            let r = e.r();
            out.table.push(sigma_row(name, form, r, &e));
            results.push((form.clone(), e));
        }
        // pairwise agreement of the equal-in-expectation forms at this L
        let k = config.float("agreement_sigmas");
        let here: Vec<&(String, SigmaEstimate)> = results
            .iter()
            .filter(|(f, e)| e.l == l && ["definition", "shifted", "wedge"].contains(&f.as_str()))
            .collect();
        for a in 0..here.len() {
            for b in a + 1..here.len() {
                let (ea, eb) = (&here[a].1, &here[b].1);
                let se = ea.std_error.hypot(eb.std_error);
                out.checks.push(Check::within(
                    format!("{} vs {} at L={l}", here[a].0, here[b].0),
                    ea.mean - eb.mean,
                    0.0,
                    k * se,
                ));
            }
        }
    }
    if forms.iter().any(|f| f == fit_form) {
        let pts: Vec<(f64, &SigmaEstimate)> = results.iter().filter(|(f, _)| f == fit_form).map(|(_, e)| (e.l, e)).collect();
        if pts.len() >= 3 {
            let fit = fit_rows(&pts)?;
            out.fits.push(fit_summary(fit_form, &fit));
            out.checks.push(Check::within(
                format!("{fit_form} slope"),
                fit.slope,
                config.float("target_slope"),
                config.float("slope_tol"),
            ));
        }
    }
    Ok(())
}

fn sigma_r(config: &ExperimentConfig, seed: u64, name: &str, out: &mut RunOutcome) -> Result<()> {
    let r = config.float("r");
    let n = config.count("n_samples");
    let mut main = Vec::new();
    let mut oracle = Vec::new();
    for (i, &l) in config.list("L_list").iter().enumerate() {
        let n_grid = grid_for(l, config.count("grid_per_unit"));
        let s = SeedStream::new(seed).child(i as u64);
        let e = estimate_sigma2_r(l, r, n, n_grid, s.child(0).key())?;
        out.table.push(sigma_row(name, "definition", r, &e));
        main.push(e);
        if r == 0.0 {
            let e = form_run("independent", l, n, n_grid, s.child(1).key(), false)?;
            out.table.push(sigma_row(name, "independent", r, &e));
            oracle.push(e);
        }
    }
    let target = predicted_exponent(r)?;
    let fit = fit_rows(&main.iter().map(|e| (e.l, e)).collect::<Vec<_>>())?;
    out.fits.push(fit_summary(format!("r={r}"), &fit));
    out.checks.push(Check::within(format!("slope at r={r}"), fit.slope, target, config.float("slope_tol")));
    if !oracle.is_empty() {
        let fit = fit_rows(&oracle.iter().map(|e| (e.l, e)).collect::<Vec<_>>())?;
        out.fits.push(fit_summary("independent", &fit));
        out.checks.push(Check::within("independent-bridge slope", fit.slope, -1.0, config.float("oracle_slope_tol")));
    }
    Ok(())
}

fn i_variance(config: &ExperimentConfig, seed: u64, name: &str, out: &mut RunOutcome) -> Result<()> {
    let l = config.float("L");
    let n_x = ((l * config.float("cells_per_unit")).round() as usize).max(4);
    let dt = default_dt(l / n_x as f64);
    let root = SeedStream::new(seed);
    let sigma_seed = root.child(1000).key();
    let n_sigma = config.count("n_samples");
    let fine = (64.0 * l).ceil() as usize;
    let sigma = estimate_sigma2(l, n_sigma, fine.max(1024), EstimatorForm::Definition, sigma_seed)?;
    // same paths, lattice-sized grid: the difference measures discretisation
    let coarse = estimate_sigma2(l, n_sigma, n_x, EstimatorForm::Definition, sigma_seed)?;
    let margin = (coarse.mean - sigma.mean).abs();
    let k = config.float("sigmas");
    let mut results = Vec::new();
    for (i, &t) in config.list("t_list").iter().enumerate() {
        let run = IVarianceRun {
            t,
            l,
            n_f: config.count("n_f"),
            n_outer: config.count("n_replicas"),
            n_noise: config.count("n_noise"),
            n_x,
            dt,
            cell_budget: config.float("cell_budget"),
            seed: root.child(i as u64).key(),
        };
        let e = run.run()?;
        out.table.push(vec![
            name.into(), num(t), num(l), n_x.to_string(), num(dt), e.n_f.to_string(), e.n_outer.to_string(),
            e.n_noise.to_string(), num(e.variance), num(e.std_error), num(t * sigma.mean),
            num(t * sigma.std_error), num(t * margin), run.seed.to_string(),
        ]);
        let se = e.std_error.hypot(t * sigma.std_error);
        out.checks.push(Check::within(format!("Var I at t={t} vs t*sigma^2"), e.variance, t * sigma.mean, k * se + t * margin));
        results.push((t, e));
    }
    if let Some((t0, e0)) = results.first() {
        for (t, e) in &results[1..] {
            let scale = t / t0;
            let se = e.std_error.hypot(scale * e0.std_error);
            out.checks.push(Check::within(format!("linearity t={t} vs t={t0}"), e.variance, scale * e0.variance, k * se));
        }
    }
    Ok(())
}

/// Runs a config and writes the CSV and the summary atomically. Returns the
/// summary; nothing is written if the run fails.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary> {
    let seed = config.effective_seed()?;
    let start = Instant::now();
    let outcome = execute(config, seed).with_context(|| format!("running {}", config.experiment))?;
    let csv = outcome.table.to_csv()?;
    let path = Path::new(&config.output_path);
    let summary = Summary {
        experiment: config.experiment.name().into(),
        seed,
        output_path: config.output_path.clone(),
        rows: outcome.table.rows.len(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        passed: outcome.passed(),
        fits: outcome.fits,
        checks: outcome.checks,
    };
    write_atomic(path, &csv)?;
    write_atomic(&summary_path(path), summary.to_toml()?.as_bytes())?;
    Ok(summary)
}
