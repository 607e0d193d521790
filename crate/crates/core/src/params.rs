//! Device parameters, model selectors and solver thresholds.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which membrane model drives the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Curvature-exact bending and stretching with the free-boundary potential.
    Full,
    /// Linearized bending/stretching, free-boundary potential kept.
    SmallDeformation,
    /// Linearized mechanics with the vanishing-aspect-ratio forcing `1/(1+u)^2`.
    SmallGap,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Full, Model::SmallDeformation, Model::SmallGap];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Full => "full",
            Model::SmallDeformation => "small_deformation",
            Model::SmallGap => "small_gap",
        }
    }

    /// Reduced models use the linear operator `beta D^4 - tau D^2`.
    pub fn is_reduced(self) -> bool {
        !matches!(self, Model::Full)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Model::Full),
            "small_deformation" => Ok(Model::SmallDeformation),
            "small_gap" => Ok(Model::SmallGap),
            _ => Err(Error::Parse(format!("unknown model '{s}'"))),
        }
    }
}

/// Boundary conditions at `x = -1` and `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// `u = u' = 0`
    Clamped,
    /// `u = u'' = 0`
    Pinned,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Clamped => "clamped",
            BoundaryCondition::Pinned => "pinned",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamped" => Ok(BoundaryCondition::Clamped),
            "pinned" => Ok(BoundaryCondition::Pinned),
            _ => Err(Error::Parse(format!("unknown boundary condition '{s}'"))),
        }
    }
}

/// Dimensionless device constants.
///
/// `gamma` is carried for completeness but only the damping-dominated case
/// `gamma = 0` is supported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    pub epsilon: f64,
    pub beta: f64,
    pub tau: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub model: Model,
    pub bc: BoundaryCondition,
}

impl Default for DeviceParams {
    fn default() -> Self {
        DeviceParams {
            epsilon: 0.5,
            beta: 1.0,
            tau: 1.0,
            lambda: 0.1,
            gamma: 0.0,
            model: Model::Full,
            bc: BoundaryCondition::Clamped,
        }
    }
}

impl DeviceParams {
    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_bc(mut self, bc: BoundaryCondition) -> Self {
        self.bc = bc;
        self
    }

    pub fn with_stiffness(mut self, beta: f64, tau: f64) -> Self {
        self.beta = beta;
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("beta", self.beta),
            ("tau", self.tau),
            ("lambda", self.lambda),
        ] {
            if !v.is_finite() {
                return bad(&format!("{name} must be finite"));
            }
            if v < 0.0 {
                return bad(&format!("{name} must be nonnegative"));
            }
        }
        if self.gamma != 0.0 {
            return bad("only gamma = 0 is supported");
        }
        if self.beta + self.tau <= 0.0 {
            return bad("beta + tau must be positive");
        }
        if self.epsilon == 0.0 && self.model != Model::SmallGap {
            if self.model == Model::Full {
                return bad("model=full requires epsilon > 0");
            }
            return bad("epsilon = 0 is only allowed with model=small_gap");
        }
        if self.model == Model::Full && self.beta <= 0.0 {
            return bad("model=full requires beta > 0");
        }
        if self.bc == BoundaryCondition::Pinned && !self.model.is_reduced() {
            return bad("pinned BC only for reduced models");
        }
        Ok(())
    }
}

/// Event thresholds and step-size controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverThresholds {
    /// Touchdown margin: states with `min(u) <= -1 + kappa_stop` count as touched down.
    pub kappa_stop: f64,
    /// Blowup cap on the discrete H2-type norm.
    pub norm_cap: f64,
    pub newton_tol: f64,
    /// Steadiness threshold on `||u^{n+1} - u^n||_2 / dt`.
    pub steady_tol: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl Default for SolverThresholds {
    fn default() -> Self {
        SolverThresholds {
            kappa_stop: 1e-3,
            norm_cap: 1e4,
            newton_tol: 1e-10,
            steady_tol: 1e-9,
            dt0: 1e-4,
            dt_min: 1e-9,
            dt_max: 1e-3,
        }
    }
}

impl SolverThresholds {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidThresholds(m.to_string()));
        if !(self.kappa_stop > 0.0 && self.kappa_stop < 1.0) {
            return bad("kappa_stop must lie in (0, 1)");
        }
        if !(self.norm_cap > 0.0) {
            return bad("norm_cap must be positive");
        }
        if !(self.newton_tol > 0.0) || !(self.steady_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.dt_min > 0.0) {
            return bad("dt_min must be positive");
        }
        if !(self.dt_min <= self.dt0 && self.dt0 <= self.dt_max) {
            return bad("require dt_min <= dt0 <= dt_max");
        }
        Ok(())
    }

    /// Fixed step size: adaptivity off.
    pub fn fixed_step(mut self, dt: f64) -> Self {
        self.dt0 = dt;
        self.dt_min = dt;
        self.dt_max = dt;
        self
    }
}
