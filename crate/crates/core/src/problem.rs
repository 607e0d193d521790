//! Model dispatch: which operator, trace term and energy belong to a model.

use crate::banded::BandedMatrix;
use crate::elliptic::{
    electrostatic_energy, small_gap_trace, solve_potential, trace_rhs, PotentialField, TraceTerm,
};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D};
use crate::operators::{apply_h, mechanical_energy, Coefficients};
use crate::params::{DeviceParams, Model};
use crate::state::{min_value, NodalFunction};

/// A validated device together with its discretization.
///
/// The reduced models use the linear mechanics `beta D^4 - tau D^2`; this is
/// obtained by evaluating the curvature-exact operators with `eps = 0`, while
/// the small-deformation model keeps the true `eps` in the potential problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: DeviceParams,
    pub grid: Grid2D,
    mech: DeviceParams,
}

impl Problem {
    pub fn new(params: DeviceParams, nx: usize, neta: usize) -> Result<Self> {
        params.validate()?;
        let grid = Grid2D::new(Grid1D::new(nx)?, neta)?;
        Ok(Self::on_grid(params, grid))
    }

    /// Like [`Problem::new`] on an existing grid; `params` must be valid.
    pub fn on_grid(params: DeviceParams, grid: Grid2D) -> Self {
        let mut mech = params.clone();
        if params.model.is_reduced() {
            mech.epsilon = 0.0;
        }
        Problem { params, grid, mech }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut p = self.clone();
        p.params.lambda = lambda;
        p.mech.lambda = lambda;
        p
    }

    #[inline]
    pub fn grid1(&self) -> &Grid1D {
        &self.grid.base
    }

    pub fn n(&self) -> usize {
        self.grid.base.n()
    }

    pub fn lambda(&self) -> f64 {
        self.params.lambda
    }

    /// Parameters governing the mechanical operators (`eps = 0` when reduced).
    pub fn mechanics(&self) -> &DeviceParams {
        &self.mech
    }

    pub fn coefficients(&self, u: &[f64]) -> Coefficients {
        Coefficients::of(self.grid1(), u, &self.mech)
    }

    /// Interior matrix of `A(u)` (the linear operator for reduced models).
    pub fn operator(&self, u: &[f64]) -> BandedMatrix {
        self.coefficients(u).assemble(self.grid1(), &self.mech)
    }

    /// `A(u) v` at every node, zero on the boundary.
    pub fn apply_operator(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.coefficients(u).apply(self.grid1(), v, &self.mech)
    }

    pub fn h(&self, u: &[f64]) -> NodalFunction {
        apply_h(self.grid1(), u, &self.mech)
    }

    pub fn potential(&self, u: &[f64], kappa_stop: f64) -> Result<PotentialField> {
        solve_potential(&self.grid, u, &self.params, kappa_stop, None)
    }

    /// The trace term `g(u)` of the active model.
    pub fn trace(&self, u: &[f64], kappa_stop: f64) -> Result<TraceTerm> {
        match self.params.model {
            Model::SmallGap => {
                let m = min_value(u);
                if !(m >= -1.0 + kappa_stop) {
                    return Err(Error::DegenerateDomain(m));
                }
                Ok(small_gap_trace(u))
            }
            Model::Full | Model::SmallDeformation => {
                let field = self.potential(u, kappa_stop)?;
                Ok(trace_rhs(&field, u, &self.params))
            }
        }
    }

    /// `lambda g(u)`, skipping the potential solve when `lambda = 0`.
    pub fn forcing(&self, u: &[f64], kappa_stop: f64) -> Result<Vec<f64>> {
        let lambda = self.params.lambda;
        if lambda == 0.0 {
            return Ok(vec![0.0; u.len()]);
        }
        let g = self.trace(u, kappa_stop)?;
        Ok(g.g.iter().map(|g| lambda * g).collect())
    }

    /// `R(u) = A(u) u + lambda g(u) + h(u)`, zero on the boundary.
    pub fn residual(&self, u: &[f64], kappa_stop: f64) -> Result<NodalFunction> {
        let n = u.len();
        let mut r = self.apply_operator(u, u);
        let f = self.forcing(u, kappa_stop)?;
        let h = self.h(u);
        for i in 1..n - 1 {
            r[i] += f[i] + h[i];
        }
        Ok(NodalFunction(r))
    }

    /// Electrostatic term `lambda int |grad psi|^2` of the active model.
    pub fn electrostatic(&self, u: &[f64], kappa_stop: f64) -> Result<f64> {
        let lambda = self.params.lambda;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        match self.params.model {
            Model::SmallGap => {
                let m = min_value(u);
                if !(m >= -1.0 + kappa_stop) {
                    return Err(Error::DegenerateDomain(m));
                }
                let f: Vec<f64> = u.iter().map(|v| 1.0 / (1.0 + v)).collect();
                Ok(lambda * self.grid1().trapezoid(&f))
            }
            Model::Full | Model::SmallDeformation => {
                let field = self.potential(u, kappa_stop)?;
                Ok(electrostatic_energy(&field, u, &self.params))
            }
        }
    }

    /// Total energy `E(u) = mechanical - electrostatic`.
    pub fn energy(&self, u: &[f64], kappa_stop: f64) -> Result<f64> {
        let mech = mechanical_energy(self.grid1(), u, &self.mech);
        Ok(mech - self.electrostatic(u, kappa_stop)?)
    }
}

/// Total energy with a precomputed potential (`phi` unused for `small_gap`).
pub fn total_energy(
    grid: &Grid1D,
    u: &[f64],
    phi: Option<&PotentialField>,
    params: &DeviceParams,
) -> f64 {
    let mut mech = params.clone();
    if params.model.is_reduced() {
        mech.epsilon = 0.0;
    }
    let e_mech = mechanical_energy(grid, u, &mech);
    let e_el = match (params.model, phi) {
        (_, _) if params.lambda == 0.0 => 0.0,
        (Model::SmallGap, _) | (_, None) => {
            let f: Vec<f64> = u.iter().map(|v| 1.0 / (1.0 + v)).collect();
            params.lambda * grid.trapezoid(&f)
        }
        (_, Some(field)) => electrostatic_energy(field, u, params),
    };
    e_mech - e_el
}
