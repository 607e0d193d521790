//! `key = value` run configuration.

use std::fmt;
use std::path::PathBuf;

use pullin_core::{
    BoundaryCondition, DeviceParams, Grid1D, Grid2D, InitialProfile, Model, SolverThresholds,
};
use thiserror::Error;

/// Where a setting came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Line(usize),
    Override(String),
    Defaults,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override(s) => write!(f, "--set {s}"),
            Origin::Defaults => f.write_str("defaults"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{origin}: {message}")]
pub struct ConfigError {
    pub origin: Origin,
    pub message: String,
}

fn fail<T>(origin: &Origin, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        origin: origin.clone(),
        message: message.into(),
    })
}

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: DeviceParams,
    pub thresholds: SolverThresholds,
    pub nx: usize,
    pub neta: usize,
    pub t_end: f64,
    pub u0: InitialProfile,
    pub output_dir: PathBuf,
    /// First continuation step.
    pub dlambda0: f64,
    /// Continuation end point.
    pub lambda_max: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: DeviceParams::default(),
            thresholds: SolverThresholds::default(),
            nx: 129,
            neta: 65,
            t_end: 50.0,
            u0: InitialProfile::Zero,
            output_dir: PathBuf::from("out"),
            dlambda0: 0.05,
            lambda_max: 10.0,
        }
    }
}

pub const KEYS: [&str; 21] = [
    "epsilon",
    "beta",
    "tau",
    "lambda",
    "gamma",
    "model",
    "bc",
    "nx",
    "neta",
    "dt0",
    "dt_min",
    "dt_max",
    "t_end",
    "kappa_stop",
    "norm_cap",
    "newton_tol",
    "steady_tol",
    "u0",
    "output_dir",
    "dlambda0",
    "lambda_max",
];

fn number(origin: &Origin, key: &str, value: &str) -> Result<f64, ConfigError> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => fail(origin, format!("{key}: expected a finite number, got '{value}'")),
    }
}

fn count(origin: &Origin, key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse::<usize>()
        .or_else(|_| fail(origin, format!("{key}: expected a positive integer, got '{value}'")))
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, origin: &Origin, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.params;
        let th = &mut self.thresholds;
        match key {
            "epsilon" => p.epsilon = number(origin, key, value)?,
            "beta" => p.beta = number(origin, key, value)?,
            "tau" => p.tau = number(origin, key, value)?,
            "lambda" => p.lambda = number(origin, key, value)?,
            "gamma" => p.gamma = number(origin, key, value)?,
            "model" => {
                p.model = value
                    .parse::<Model>()
                    .or_else(|e| fail(origin, e.to_string()))?
            }
            "bc" => {
                p.bc = value
                    .parse::<BoundaryCondition>()
                    .or_else(|e| fail(origin, e.to_string()))?
            }
            "nx" => self.nx = count(origin, key, value)?,
            "neta" => self.neta = count(origin, key, value)?,
            "dt0" => th.dt0 = number(origin, key, value)?,
            "dt_min" => th.dt_min = number(origin, key, value)?,
            "dt_max" => th.dt_max = number(origin, key, value)?,
            "t_end" => self.t_end = number(origin, key, value)?,
            "kappa_stop" => th.kappa_stop = number(origin, key, value)?,
            "norm_cap" => th.norm_cap = number(origin, key, value)?,
            "newton_tol" => th.newton_tol = number(origin, key, value)?,
            "steady_tol" => th.steady_tol = number(origin, key, value)?,
            "u0" => {
                self.u0 = InitialProfile::parse(value).or_else(|e| fail(origin, e.to_string()))?
            }
            "output_dir" => {
                if value.is_empty() {
                    return fail(origin, "output_dir must not be empty");
                }
                self.output_dir = PathBuf::from(value)
            }
            "dlambda0" => self.dlambda0 = number(origin, key, value)?,
            "lambda_max" => self.lambda_max = number(origin, key, value)?,
            _ => return fail(origin, format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Cross-field constraints.
    pub fn check(&self) -> Result<(), String> {
        self.params.validate().map_err(|e| e.to_string())?;
        self.thresholds.validate().map_err(|e| e.to_string())?;
        let base = Grid1D::new(self.nx).map_err(|e| format!("nx: {e}"))?;
        Grid2D::new(base, self.neta).map_err(|e| format!("neta: {e}"))?;
        if !(self.t_end > 0.0) {
            return Err("t_end must be positive".into());
        }
        if !(self.dlambda0 > 0.0) {
            return Err("dlambda0 must be positive".into());
        }
        if !(self.lambda_max > 0.0) {
            return Err("lambda_max must be positive".into());
        }
        Ok(())
    }

    /// Every key in canonical order; `parse_config(render(c)) == c`.
    pub fn render(&self) -> String {
        let p = &self.params;
        let th = &self.thresholds;
        let values: [String; 21] = [
            num(p.epsilon),
            num(p.beta),
            num(p.tau),
            num(p.lambda),
            num(p.gamma),
            p.model.to_string(),
            p.bc.to_string(),
            self.nx.to_string(),
            self.neta.to_string(),
            num(th.dt0),
            num(th.dt_min),
            num(th.dt_max),
            num(self.t_end),
            num(th.kappa_stop),
            num(th.norm_cap),
            num(th.newton_tol),
            num(th.steady_tol),
            self.u0.render(),
            self.output_dir.display().to_string(),
            num(self.dlambda0),
            num(self.lambda_max),
        ];
        KEYS.iter()
            .zip(values.iter())
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Shortest round-trip form, exponent notation for small and large values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// One `key = value` setting with its origin.
#[derive(Debug, Clone)]
struct Entry {
    origin: Origin,
    key: String,
    value: String,
}

fn entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let origin = Origin::Line(k + 1);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return fail(&origin, format!("expected 'key = value', got '{line}'"));
        };
        let key = key.trim();
        if out.iter().any(|e| e.key == key) {
            return fail(&origin, format!("duplicate key '{key}'"));
        }
        out.push(Entry {
            origin,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

fn override_entry(spec: &str) -> Result<Entry, ConfigError> {
    let origin = Origin::Override(spec.to_string());
    let Some((key, value)) = spec.split_once('=') else {
        return fail(&origin, "expected key=value");
    };
    Ok(Entry {
        origin,
        key: key.trim().to_string(),
        value: value.trim().to_string(),
    })
}

fn apply(entries: &[Entry]) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::default();
    for e in entries {
        c.set(&e.origin, &e.key, &e.value)?;
    }
    Ok(c)
}

/// Resolve a violated constraint to the setting responsible for it: the
/// latest entry whose removal lets the remaining settings pass.
fn blame(entries: &[Entry], message: String) -> ConfigError {
    for skip in (0..entries.len()).rev() {
        let rest: Vec<Entry> = entries
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != skip)
            .map(|(_, e)| e.clone())
            .collect();
        if let Ok(c) = apply(&rest) {
            if c.check().is_ok() {
                return ConfigError {
                    origin: entries[skip].origin.clone(),
                    message,
                };
            }
        }
    }
    ConfigError {
        origin: entries.last().map_or(Origin::Defaults, |e| e.origin.clone()),
        message,
    }
}

/// Parse a configuration file, then apply `--set key=value` overrides.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut all = entries(text)?;
    for s in overrides {
        all.push(override_entry(s)?);
    }
    let c = apply(&all)?;
    match c.check() {
        Ok(()) => Ok(c),
        Err(m) => Err(blame(&all, m)),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with_overrides(text, &[])
}
