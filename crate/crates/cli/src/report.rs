//! Exponent fits from result CSVs, compared with the predicted exponents.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use kpzlab::sigma::{fit_exponent, predicted_exponent, FitPoint};

use crate::config::Experiment;
use crate::experiments::schema;

/// One compared claim.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub source: String,
    pub claim: String,
    pub predicted: f64,
    pub measured: f64,
    pub halfwidth: f64,
    pub tolerance: f64,
    /// Only an upper bound is claimed.
    pub upper_only: bool,
}

impl ReportRow {
    pub fn passed(&self) -> bool {
        if self.upper_only {
            self.measured <= self.predicted + self.tolerance
        } else {
            (self.measured - self.predicted).abs() <= self.tolerance
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// Files with a known schema but no exponent claim.
    pub skipped: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ReportRow::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:<34} {:>10} {:>10} {:>10} {:>8}  verdict",
            "source", "claim", "predicted", "measured", "+/-", "tol"
        )?;
        for r in &self.rows {
            let pred = if r.upper_only { format!("<={:.4}", r.predicted) } else { format!("{:.4}", r.predicted) };
            writeln!(
                f,
                "{:<28} {:<34} {:>10} {:>10.4} {:>10.4} {:>8.3}  {}",
                r.source,
                r.claim,
                pred,
                r.measured,
                r.halfwidth,
                r.tolerance,
                if r.passed() { "PASS" } else { "FAIL" }
            )?;
        }
        for s in &self.skipped {
            writeln!(f, "{s}: no exponent claim in this table")?;
        }
        Ok(())
    }
}

/// A parsed CSV: header plus rows keyed by column name.
struct Table {
    experiment: Experiment,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).expect("schema checked")
    }

    fn float(&self, line: u64, row: &[String], name: &str) -> Result<f64> {
        let v = &row[self.col(name)];
        v.parse::<f64>().map_err(|_| anyhow!("line {line}: column {name}: not a number: {v:?}"))
    }
}

fn parse_table(text: &str) -> Result<Table> {
    if text.trim().is_empty() {
        bail!("line 1: empty file");
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header: Vec<String> = match records.next() {
        Some(r) => r.map_err(|e| anyhow!("line 1: {e}"))?.iter().map(String::from).collect(),
        None => bail!("line 1: empty file"),
    };
    let experiment = Experiment::ALL
        .iter()
        .copied()
        .filter(|&e| schema(e).iter().copied().eq(header.iter().map(String::as_str)))
        .collect::<Vec<_>>();
    if experiment.is_empty() {
        bail!("line 1: unknown column set: {}", header.join(","));
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.record() + 1).unwrap_or(0);
            anyhow!("line {line}: {e}")
        })?;
        let line = rec.position().map(|p| p.record() + 1).unwrap_or(0);
        rows.push((line, rec.iter().map(String::from).collect::<Vec<_>>()));
    }
    if rows.is_empty() {
        bail!("line 2: no data rows");
    }
    // sigma-sweep and sigma-r share columns; the tag column decides
    let tag = &rows[0].1[0];
    let experiment = experiment
        .into_iter()
        .find(|e| e.name() == tag)
        .ok_or_else(|| anyhow!("line {}: experiment tag {tag:?} does not match the columns", rows[0].0))?;
    for (line, row) in &rows {
        if row[0] != tag.as_str() {
            bail!("line {line}: mixed experiment tags");
        }
    }
    Ok(Table { experiment, header, rows })
}

fn claims(source: &str, t: &Table) -> Result<Vec<ReportRow>> {
    let mut out = Vec::new();
    match t.experiment {
        Experiment::SigmaSweep | Experiment::SigmaR => {
            let mut groups: BTreeMap<(String, String), Vec<FitPoint>> = BTreeMap::new();
            for (line, row) in &t.rows {
                let r = t.float(*line, row, "r")?;
                let p = (t.float(*line, row, "L")?, t.float(*line, row, "mean")?, t.float(*line, row, "std_error")?);
                let form = row[t.col("form")].clone();
                groups.entry((form, num_key(r))).or_default().push(p);
            }
            for ((form, r), pts) in groups {
                let r: f64 = r.parse()?;
                let (predicted, tolerance) = match form.as_str() {
                    "independent" => (-1.0, 0.05),
                    "identical" => (0.0, 0.1),
                    _ if t.experiment == Experiment::SigmaR => (predicted_exponent(r)?, 0.12),
                    _ => (predicted_exponent(r)?, 0.1),
                };
                let fit = fit_exponent(&pts).with_context(|| format!("{source}: fitting {form}"))?;
                out.push(ReportRow {
                    source: source.into(),
                    claim: format!("sigma^2 vs L, {form}, r={r}"),
                    predicted,
                    measured: fit.slope,
                    halfwidth: fit.slope_halfwidth,
                    tolerance,
                    upper_only: false,
                });
            }
        }
        Experiment::SheVariance => {
            let mut groups: BTreeMap<(String, String), Vec<FitPoint>> = BTreeMap::new();
            for (line, row) in &t.rows {
                let a = t.float(*line, row, "alpha")?;
                let lam = t.float(*line, row, "lambda")?;
                let p = (t.float(*line, row, "t")?, t.float(*line, row, "var_estimate")?, t.float(*line, row, "std_error")?);
                groups.entry((num_key(a), num_key(lam))).or_default().push(p);
            }
            for ((a, lam), pts) in groups {
                let alpha: f64 = a.parse()?;
                let fit = fit_exponent(&pts).with_context(|| format!("{source}: fitting alpha={alpha}"))?;
                out.push(ReportRow {
                    source: source.into(),
                    claim: format!("Var h vs t, alpha={alpha}, lambda={lam}"),
                    predicted: 1.0 - alpha / 2.0,
                    measured: fit.slope,
                    halfwidth: fit.slope_halfwidth,
                    tolerance: 0.15,
                    upper_only: alpha >= 2.0 / 3.0 - 1e-9,
                });
            }
        }
        _ => {}
    }
    Ok(out)
}

fn num_key(x: f64) -> String {
    format!("{x}")
}

/// Report for CSV contents already in memory.
pub fn report_text(source: &str, text: &str) -> Result<Report> {
    let t = parse_table(text).with_context(|| source.to_string())?;
    let rows = claims(source, &t)?;
    let mut rep = Report::default();
    if rows.is_empty() {
        rep.skipped.push(source.into());
    }
    rep.rows = rows;
    Ok(rep)
}

pub fn report<P: AsRef<Path>>(paths: &[P]) -> Result<Report> {
    let mut rep = Report::default();
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let part = report_text(&p.display().to_string(), &text)?;
        rep.rows.extend(part.rows);
        rep.skipped.extend(part.skipped);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep_csv(slope: f64) -> String {
        let mut s = String::from("experiment,form,r,L,n_samples,n_grid,mean,std_error,seed\r\n");
        for (i, l) in [16.0f64, 32.0, 64.0, 128.0, 256.0, 512.0].iter().enumerate() {
            let m = 2.0 * l.powf(slope);
            s += &format!("sigma-sweep,definition,0.5,{l},100000,{},{m},{},{i}\r\n", 8.0 * l, 0.02 * m);
        }
        s
    }

    #[test]
    fn slope_inside_band_passes() {
        let rep = report_text("a.csv", &sweep_csv(-0.52)).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!((rep.rows[0].measured + 0.52).abs() < 1e-9);
        assert!(rep.passed());
    }

    #[test]
    fn she_slope_outside_band_fails() {
        let mut s = String::from("experiment,alpha,lambda,t,L,n_x,dt,var_estimate,std_error,n_replicas,seed\r\n");
        for t in [4.0f64, 8.0, 16.0, 32.0] {
            let v = 0.1 * t.powf(1.3);
            s += &format!("she-variance,0,4,{t},4,32,0.001,{v},{},2000,1\r\n", 0.05 * v);
        }
        let rep = report_text("b.csv", &s).unwrap();
        assert!((rep.rows[0].predicted - 1.0).abs() < 1e-12);
        assert!(!rep.passed());
        assert!(rep.to_string().contains("FAIL"));
    }

    #[test]
    fn empty_and_malformed_inputs() {
        let e = report_text("e.csv", "").unwrap_err();
        assert!(format!("{e:#}").contains("line 1"));
        let e = report_text("h.csv", "experiment,form,r,L,n_samples,n_grid,mean,std_error,seed\r\n").unwrap_err();
        assert!(format!("{e:#}").contains("no data rows"));
        let e = report_text("u.csv", "a,b\r\n1,2\r\n").unwrap_err();
        assert!(format!("{e:#}").contains("unknown column set"));
        let mut bad = sweep_csv(-0.5);
        bad += "sigma-sweep,definition,0.5,oops,1,1,1,1,1\r\n";
        let e = report_text("m.csv", &bad).unwrap_err();
        assert!(format!("{e:#}").contains("line 8"), "{e:#}");
        let mut short = sweep_csv(-0.5);
        short += "sigma-sweep,definition\r\n";
        let e = report_text("s.csv", &short).unwrap_err();
        assert!(format!("{e:#}").contains("line 8"), "{e:#}");
    }

    #[test]
    fn upper_bound_claim() {
        let mut s = String::from("experiment,alpha,lambda,t,L,n_x,dt,var_estimate,std_error,n_replicas,seed\r\n");
        for t in [4.0f64, 8.0, 16.0, 32.0] {
            let v = t.powf(0.4);
            s += &format!("she-variance,0.6666666666666666,1,{t},4,32,0.001,{v},{},2000,1\r\n", 0.05 * v);
        }
        let rep = report_text("c.csv", &s).unwrap();
        assert!(rep.rows[0].upper_only && rep.passed());
    }
}
