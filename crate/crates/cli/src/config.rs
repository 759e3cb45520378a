//! Flat TOML experiment configs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use toml::{Table, Value};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "KPZLAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    SigmaSweep,
    SigmaR,
    WedgeExit,
    WedgeKernel,
    Harmonic,
    SheVariance,
    YlVariance,
    IVariance,
    TimeReversal,
    Entropic,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Self::SigmaSweep,
        Self::SigmaR,
        Self::WedgeExit,
        Self::WedgeKernel,
        Self::Harmonic,
        Self::SheVariance,
        Self::YlVariance,
        Self::IVariance,
        Self::TimeReversal,
        Self::Entropic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::SigmaSweep => "sigma-sweep",
            Self::SigmaR => "sigma-r",
            Self::WedgeExit => "wedge-exit",
            Self::WedgeKernel => "wedge-kernel",
            Self::Harmonic => "harmonic",
            Self::SheVariance => "she-variance",
            Self::YlVariance => "yl-variance",
            Self::IVariance => "i-variance",
            Self::TimeReversal => "time-reversal",
            Self::Entropic => "entropic",
        }
    }

    /// Keys accepted for this experiment besides experiment, seed, output_path.
    fn schema(&self) -> Vec<Field> {
        use Kind::*;
        let l_list = |d: &[f64]| Field::new("L_list", FloatList { min: 1.0 }, Some(Val::List(d.to_vec())));
        let count = |k: &'static str, min: i64, d: i64| Field::new(k, Count { min }, Some(Val::Int(d)));
        let float = |k: &'static str, lo: f64, hi: f64, d: Option<f64>| {
            Field::new(k, Float { lo, hi }, d.map(Val::Float))
        };
        let inf = f64::INFINITY;
        match self {
            Self::SigmaSweep => vec![
                l_list(&[16.0, 32.0, 64.0, 128.0, 256.0, 512.0]),
                count("n_samples", 100, 100_000),
                count("grid_per_unit", 1, 8),
                Field::new("forms", StrList(&["definition", "shifted", "wedge", "independent", "identical"]), Some(Val::Strs(vec!["definition".into()]))),
                Field::new("fit_form", Str(&["definition", "shifted", "wedge", "independent", "identical"]), Some(Val::Str("definition".into()))),
                Field::new("antithetic", Bool, Some(Val::Bool(false))),
                float("target_slope", -inf, inf, Some(-0.5)),
                float("slope_tol", 0.0, inf, Some(0.1)),
                float("agreement_sigmas", 0.0, inf, Some(4.0)),
            ],
            Self::SigmaR => vec![
                float("r", 0.0, 1.0, None).exclusive_hi(),
                l_list(&[16.0, 32.0, 64.0, 128.0, 256.0, 512.0]),
                count("n_samples", 100, 100_000),
                count("grid_per_unit", 1, 8),
                float("slope_tol", 0.0, inf, Some(0.12)),
                float("oracle_slope_tol", 0.0, inf, Some(0.05)),
            ],
            Self::WedgeExit => vec![
                float("a", 0.0, inf, Some(2.0)).exclusive_lo(),
                l_list(&[16.0]),
                count("n_samples", 1, 1_000_000),
                count("grid_per_unit", 1, 32),
                float("sigmas", 0.0, inf, Some(3.0)),
            ],
            Self::WedgeKernel => vec![
                Field::new("a_list", FloatList { min: 0.0 }, Some(Val::List(vec![1.0, 2.0, 4.0]))),
                l_list(&[16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]),
                float("c_max", 1.0, inf, Some(100.0)),
            ],
            Self::Harmonic => vec![
                float("L", 0.0, inf, Some(64.0)).exclusive_lo(),
                float("q", 0.0, inf, Some(1.0)).exclusive_lo(),
                count("n_samples", 100, 100_000),
                count("n_grid", 16, 16_384),
                Field::new("xi_list", FloatList { min: 0.0 }, Some(Val::List(vec![0.5, 1.0, 2.0, 4.0]))),
                float("sigmas", 0.0, inf, Some(3.0)),
            ],
            Self::SheVariance => vec![
                float("alpha", 0.0, 2.0 / 3.0, None),
                float("lambda", 0.0, inf, None).exclusive_lo(),
                Field::new("t_list", FloatList { min: 0.0 }, Some(Val::List(vec![4.0, 8.0, 16.0, 32.0]))),
                count("n_replicas", 2, 2000),
                float("cells_per_unit", 1.0, inf, Some(8.0)),
                float("cell_budget", 1.0, inf, Some(2e10)),
                float("slope_tol", 0.0, inf, Some(0.15)),
            ],
            Self::YlVariance => vec![
                l_list(&[16.0, 64.0, 256.0]),
                count("n_samples", 2, 2000),
                count("n_inner", 100, 100),
                count("grid_per_unit", 1, 8),
                float("ratio_tol", 0.0, inf, Some(0.2)),
            ],
            Self::IVariance => vec![
                Field::new("t_list", FloatList { min: 0.0 }, Some(Val::List(vec![1.0, 2.0]))),
                float("L", 0.0, inf, Some(4.0)).exclusive_lo(),
                count("n_f", 2, 200),
                count("n_replicas", 2, 2000),
                count("n_noise", 2, 2),
                float("cells_per_unit", 1.0, inf, Some(8.0)),
                count("n_samples", 100, 100_000),
                float("cell_budget", 1.0, inf, Some(2e10)),
                float("sigmas", 0.0, inf, Some(4.0)),
            ],
            Self::TimeReversal => vec![
                float("t", 0.0, inf, Some(1.0)).exclusive_lo(),
                float("L", 0.0, inf, Some(4.0)).exclusive_lo(),
                float("cells_per_unit", 1.0, inf, Some(8.0)),
                count("n_replicas", 2, 4000),
                Field::new("same_f_g", Bool, Some(Val::Bool(false))),
                float("sigmas", 0.0, inf, Some(4.0)),
            ],
            Self::Entropic => vec![
                l_list(&[8.0, 16.0, 32.0, 64.0]),
                float("gamma", 0.0, 0.5, Some(0.4)).exclusive_lo().exclusive_hi(),
                count("n_samples", 1, 400_000),
                float("floor", 0.0, 1.0, Some(0.01)),
                float("min_ratio", 0.0, 1.0, Some(0.2)),
            ],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float { lo: f64, hi: f64 },
    Count { min: i64 },
    FloatList { min: f64 },
    Str(&'static [&'static str]),
    StrList(&'static [&'static str]),
    Bool,
}

#[derive(Debug, Clone)]
struct Field {
    key: &'static str,
    kind: Kind,
    default: Option<Val>,
    open_lo: bool,
    open_hi: bool,
}

impl Field {
    fn new(key: &'static str, kind: Kind, default: Option<Val>) -> Self {
        Self { key, kind, default, open_lo: false, open_hi: false }
    }

    fn exclusive_lo(mut self) -> Self {
        self.open_lo = true;
        self
    }

    fn exclusive_hi(mut self) -> Self {
        self.open_hi = true;
        self
    }

    fn bound_text(&self, lo: f64, hi: f64) -> String {
        let l = if self.open_lo { "(" } else { "[" };
        let r = if self.open_hi { ")" } else { "]" };
        let fmt = |v: f64| if v.is_infinite() { "inf".to_string() } else { format!("{v}") };
        format!("{l}{}, {}{r}", fmt(lo), fmt(hi))
    }

    fn in_bounds(&self, v: f64, lo: f64, hi: f64) -> bool {
        let above = if self.open_lo { v > lo } else { v >= lo };
        let below = if self.open_hi { v < hi } else { v <= hi };
        v.is_finite() && above && below
    }

    fn parse(&self, value: &Value) -> Result<Val, String> {
        let as_float = |v: &Value| match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        match self.kind {
            Kind::Float { lo, hi } => {
                let v = as_float(value).ok_or("expected a number")?;
                if !self.in_bounds(v, lo, hi) {
                    return Err(format!("{v} outside {}", self.bound_text(lo, hi)));
                }
                Ok(Val::Float(v))
            }
            Kind::Count { min } => match value {
                Value::Integer(i) if *i >= min => Ok(Val::Int(*i)),
                Value::Integer(i) => Err(format!("{i} is below the minimum {min}")),
                _ => Err("expected an integer".into()),
            },
            Kind::FloatList { min } => {
                let items = value.as_array().ok_or("expected a list of numbers")?;
                if items.is_empty() {
                    return Err("list must not be empty".into());
                }
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let v = as_float(item).ok_or_else(|| format!("element {i} is not a number"))?;
                    if !(v.is_finite() && v > min || (min > 0.0 && v == min)) {
                        return Err(format!("element {i} = {v} must be {}", if min > 0.0 { format!(">= {min}") } else { "positive".into() }));
                    }
                    out.push(v);
                }
                Ok(Val::List(out))
            }
            Kind::Str(choices) => {
                let s = value.as_str().ok_or("expected a string")?;
                if !choices.contains(&s) {
                    return Err(format!("`{s}` is not one of {}", choices.join(", ")));
                }
                Ok(Val::Str(s.to_string()))
            }
            Kind::StrList(choices) => {
                let items = value.as_array().ok_or("expected a list of strings")?;
                if items.is_empty() {
                    return Err("list must not be empty".into());
                }
                let mut out = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let s = item.as_str().ok_or_else(|| format!("element {i} is not a string"))?;
                    if !choices.contains(&s) {
                        return Err(format!("element {i} `{s}` is not one of {}", choices.join(", ")));
                    }
                    out.push(s.to_string());
                }
                Ok(Val::Strs(out))
            }
            Kind::Bool => value.as_bool().map(Val::Bool).ok_or_else(|| "expected true or false".into()),
        }
    }
}

/// A validated parameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum Val {
    Int(i64),
    Float(f64),
    List(Vec<f64>),
    Str(String),
    Strs(Vec<String>),
    Bool(bool),
}

impl Val {
    fn to_toml(&self) -> Value {
        match self {
            Val::Int(i) => Value::Integer(*i),
            Val::Float(f) => Value::Float(*f),
            Val::List(v) => Value::Array(v.iter().map(|f| Value::Float(*f)).collect()),
            Val::Str(s) => Value::String(s.clone()),
            Val::Strs(v) => Value::Array(v.iter().map(|s| Value::String(s.clone())).collect()),
            Val::Bool(b) => Value::Boolean(*b),
        }
    }
}

/// One violation found while validating a config.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid config ({} problem{}):", self.violations.len(), if self.violations.len() == 1 { "" } else { "s" })?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.key, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn single(key: &str, message: impl Into<String>) -> Self {
        Self { violations: vec![Violation { key: key.into(), message: message.into() }] }
    }

    pub fn mentions(&self, key: &str) -> bool {
        self.violations.iter().any(|v| v.key == key)
    }
}

/// A validated experiment configuration with all defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_path: String,
    params: BTreeMap<&'static str, Val>,
}

impl ExperimentConfig {
    pub fn float(&self, key: &str) -> f64 {
        match self.params.get(key) {
            Some(Val::Float(f)) => *f,
            Some(Val::Int(i)) => *i as f64,
            other => panic!("no numeric parameter {key}: {other:?}"),
        }
    }

    pub fn count(&self, key: &str) -> usize {
        match self.params.get(key) {
            Some(Val::Int(i)) => *i as usize,
            other => panic!("no count parameter {key}: {other:?}"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.params.get(key) {
            Some(Val::List(v)) => v,
            other => panic!("no list parameter {key}: {other:?}"),
        }
    }

    pub fn string(&self, key: &str) -> &str {
        match self.params.get(key) {
            Some(Val::Str(s)) => s,
            other => panic!("no string parameter {key}: {other:?}"),
        }
    }

    pub fn strings(&self, key: &str) -> &[String] {
        match self.params.get(key) {
            Some(Val::Strs(v)) => v,
            other => panic!("no string list parameter {key}: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.params.get(key) {
            Some(Val::Bool(b)) => *b,
            other => panic!("no boolean parameter {key}: {other:?}"),
        }
    }

    /// Replaces one parameter; the key must belong to the experiment.
    pub fn set(&mut self, key: &str, value: Val) -> Result<(), ConfigError> {
        let field = self
            .experiment
            .schema()
            .into_iter()
            .find(|f| f.key == key)
            .ok_or_else(|| ConfigError::single(key, format!("unknown key for {}", self.experiment)))?;
        let parsed = field.parse(&value.to_toml()).map_err(|m| ConfigError::single(key, m))?;
        self.params.insert(field.key, parsed);
        Ok(())
    }

    /// Canonical TOML text: fixed key order, every parameter explicit.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: Value| {
            let mut t = Table::new();
            t.insert(k.to_string(), v);
            out.push_str(&toml::to_string(&t).expect("plain values serialize"));
        };
        push("experiment", Value::String(self.experiment.name().into()));
        push("seed", Value::Integer(self.seed as i64));
        push("output_path", Value::String(self.output_path.clone()));
        for field in self.experiment.schema() {
            push(field.key, self.params[field.key].to_toml());
        }
        out
    }

    /// Seed from the environment override if set, else the configured one.
    pub fn effective_seed(&self) -> Result<u64, ConfigError> {
        match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| ConfigError::single(SEED_ENV, format!("`{s}` is not a non-negative integer"))),
            Err(_) => Ok(self.seed),
        }
    }
}

/// Parses and validates a config, reporting every violation at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::single("<document>", e.to_string().trim().to_string()))?;
    let mut violations = Vec::new();
    let mut bad = |key: &str, msg: String| violations.push(Violation { key: key.into(), message: msg });

    let experiment = match table.get("experiment") {
        None => {
            bad("experiment", "missing required key".into());
            None
        }
        Some(Value::String(s)) => match s.parse::<Experiment>() {
            Ok(e) => Some(e),
            Err(m) => {
                bad("experiment", m);
                None
            }
        },
        Some(_) => {
            bad("experiment", "expected a string".into());
            None
        }
    };
    let seed = match table.get("seed") {
        None => {
            bad("seed", "missing required key".into());
            0
        }
        Some(Value::Integer(i)) if *i >= 0 => *i as u64,
        Some(_) => {
            bad("seed", "expected a non-negative integer".into());
            0
        }
    };
    let output_path = match table.get("output_path") {
        None => {
            bad("output_path", "missing required key".into());
            String::new()
        }
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => {
            bad("output_path", "expected a non-empty string".into());
            String::new()
        }
    };

    let mut params = BTreeMap::new();
    if let Some(exp) = experiment {
        let schema = exp.schema();
        for key in table.keys() {
            let known = ["experiment", "seed", "output_path"].contains(&key.as_str())
                || schema.iter().any(|f| f.key == key);
            if !known {
                bad(key, format!("unknown key for experiment {exp}"));
            }
        }
        for field in &schema {
            match table.get(field.key) {
                Some(v) => match field.parse(v) {
                    Ok(val) => {
                        params.insert(field.key, val);
                    }
                    Err(m) => bad(field.key, m),
                },
                None => match &field.default {
                    Some(d) => {
                        params.insert(field.key, d.clone());
                    }
                    None => bad(field.key, "missing required key".into()),
                },
            }
        }
    }
    if !violations.is_empty() {
        return Err(ConfigError { violations });
    }
    Ok(ExperimentConfig {
        experiment: experiment.expect("validated"),
        seed,
        output_path,
        params,
    })
}
