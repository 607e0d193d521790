//! Membrane states, nodal functions, initial profiles and discrete norms.

use std::ops::{Deref, DerefMut};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::io;
use crate::params::BoundaryCondition;

/// Nodal deflection (in units of the gap height) at time `t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MembraneState {
    pub u: Vec<f64>,
    pub t: f64,
}

impl MembraneState {
    pub fn new(u: Vec<f64>, t: f64) -> Self {
        MembraneState { u, t }
    }

    pub fn zero(grid: &Grid1D) -> Self {
        MembraneState {
            u: vec![0.0; grid.n()],
            t: 0.0,
        }
    }

    pub fn min(&self) -> f64 {
        min_value(&self.u)
    }
}

pub(crate) fn min_value(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Values on the nodes of a [`Grid1D`]; carrier for forcing terms, operator
/// outputs and residuals. Boundary entries are zero for operator outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalFunction(pub Vec<f64>);

impl NodalFunction {
    pub fn zeros(n: usize) -> Self {
        NodalFunction(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Max norm over interior nodes.
    pub fn interior_max_abs(&self) -> f64 {
        let n = self.0.len();
        max_abs(&self.0[1..n - 1])
    }
}

impl Deref for NodalFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for NodalFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for NodalFunction {
    fn from(v: Vec<f64>) -> Self {
        NodalFunction(v)
    }
}

/// Initial deflection choices.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Zero,
    /// `a (1 - x^2)^2`
    Bump(f64),
    /// `x,u` CSV on the active grid.
    File(PathBuf),
}

impl InitialProfile {
    pub fn render(&self) -> String {
        match self {
            InitialProfile::Zero => "zero".to_string(),
            InitialProfile::Bump(a) => format!("bump:{a}"),
            InitialProfile::File(p) => format!("file:{}", p.display()),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(InitialProfile::Zero);
        }
        if let Some(a) = s.strip_prefix("bump:") {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad bump amplitude '{a}'")))?;
            return Ok(InitialProfile::Bump(a));
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(InitialProfile::File(PathBuf::from(p.trim())));
        }
        Err(Error::Parse(format!(
            "initial profile must be zero, bump:<a> or file:<path>, got '{s}'"
        )))
    }
}

pub fn bump(a: f64, x: f64) -> f64 {
    let s = 1.0 - x * x;
    a * s * s
}

const BC_TOL: f64 = 1e-8;

/// Build the initial state `u(0, .)`.
pub fn initial_profile(
    spec: &InitialProfile,
    grid: &Grid1D,
    bc: BoundaryCondition,
) -> Result<MembraneState> {
    let u = match spec {
        InitialProfile::Zero => vec![0.0; grid.n()],
        InitialProfile::Bump(a) => {
            let mut u = grid.sample(|x| bump(*a, x));
            // (1-x^2)^2 vanishes at the ends; make that bitwise.
            let n = grid.n();
            u[0] = 0.0;
            u[n - 1] = 0.0;
            u
        }
        InitialProfile::File(path) => {
            let u = io::read_profile(path, grid)?;
            check_boundary(&u, grid, bc)?;
            u
        }
    };
    let m = min_value(&u);
    if m <= -1.0 {
        return Err(Error::InitialTouchdown(m));
    }
    Ok(MembraneState { u, t: 0.0 })
}

/// Compatibility of sampled data with the boundary conditions.
///
/// Values at `x = +-1` must vanish to `1e-8`. The derivative condition is
/// checked with a one-sided second-order stencil whose truncation error is
/// `O(h^2)`, so its tolerance carries an `h^2` allowance.
pub fn check_boundary(u: &[f64], grid: &Grid1D, bc: BoundaryCondition) -> Result<()> {
    let n = grid.n();
    let h = grid.h();
    if u[0].abs() > BC_TOL || u[n - 1].abs() > BC_TOL {
        return Err(Error::IncompatibleInitial(format!(
            "u(+-1) = ({}, {})",
            u[0],
            u[n - 1]
        )));
    }
    let allowance = BC_TOL + 16.0 * h * h * max_abs(u);
    match bc {
        BoundaryCondition::Clamped => {
            let left = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
            let right = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
            if left.abs() > allowance || right.abs() > allowance {
                return Err(Error::IncompatibleInitial(format!(
                    "u'(+-1) = ({left}, {right})"
                )));
            }
        }
        BoundaryCondition::Pinned => {
            let left = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h);
            let right = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / (h * h);
            let allowance = BC_TOL + 16.0 * h * max_abs(u);
            if left.abs() > allowance || right.abs() > allowance {
                return Err(Error::IncompatibleInitial(format!(
                    "u''(+-1) = ({left}, {right})"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// `(||u||_2^2 + ||D^2 u||_2^2)^{1/2}`
    H2d,
}

/// Discrete norms with trapezoidal quadrature.
///
/// `H2d` uses centered second differences inside and second-order one-sided
/// stencils at the two end nodes. It is the blowup monitor used in place of
/// the `H^4` norm.
pub fn discrete_norm(grid: &Grid1D, u: &[f64], kind: NormKind) -> f64 {
    let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
    let l2sq = grid.trapezoid(&sq);
    match kind {
        NormKind::L2 => l2sq.sqrt(),
        NormKind::H2d => {
            let d2 = second_differences(grid, u);
            let d2sq: Vec<f64> = d2.iter().map(|v| v * v).collect();
            (l2sq + grid.trapezoid(&d2sq)).sqrt()
        }
    }
}

fn second_differences(grid: &Grid1D, u: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let h2 = grid.h() * grid.h();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = ((u[i + 1] + u[i - 1]) - 2.0 * u[i]) / h2;
    }
    d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
    d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    d
}
