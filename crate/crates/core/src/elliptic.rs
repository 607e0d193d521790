//! Electrostatic potential between the ground plate and the deflected membrane.
//!
//! The physical domain `{-1 < x < 1, -1 < z < u(x)}` is mapped onto the fixed
//! rectangle `[-1, 1] x [0, 1]` by `eta = (1 + z) / (1 + u(x))`. With
//! `a = u' / (1 + u)` the anisotropic Laplace equation
//! `eps^2 psi_xx + psi_zz = 0` becomes
//!
//! ```text
//! eps^2 [phi_xx - 2 eta a phi_xeta + (eta a)^2 phi_etaeta
//!        + eta (2 a^2 - u''/(1+u)) phi_eta] + phi_etaeta / (1+u)^2 = -f
//! ```
//!
//! discretized with centered second-order differences (9-point stencil) and
//! solved by banded LU. `f` is zero except in manufactured-solution checks.

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::grid::{is_even, Grid2D};
use crate::operators::nodal_derivatives;
use crate::params::DeviceParams;
use crate::state::{min_value, NodalFunction};

/// Nodal potential on the transformed rectangle, `eta` running fastest.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub grid: Grid2D,
    pub phi: Vec<f64>,
}

impl PotentialField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.phi[self.grid.index(i, j)]
    }

    /// `phi(x, eta) = eta`, the exact potential of the flat membrane and of
    /// the vanishing-aspect-ratio limit.
    pub fn linear(grid: &Grid2D) -> Self {
        let n = grid.base.n();
        let m = grid.m();
        let mut phi = vec![0.0; n * m];
        for i in 0..n {
            phi[i * m..(i + 1) * m].copy_from_slice(grid.eta());
        }
        PotentialField {
            grid: grid.clone(),
            phi,
        }
    }

    /// `d phi / d eta` at the membrane from the 3-point one-sided stencil.
    pub fn membrane_slope(&self, i: usize) -> f64 {
        let m = self.grid.m();
        let k = self.grid.k();
        (3.0 * self.at(i, m - 1) - 4.0 * self.at(i, m - 2) + self.at(i, m - 3)) / (2.0 * k)
    }
}

/// Squared potential gradient on the membrane,
/// `g(u) = eps^2 |psi_x(x, u)|^2 + |psi_z(x, u)|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTerm {
    pub g: NodalFunction,
}

fn check_domain(u: &[f64], kappa_stop: f64) -> Result<()> {
    let m = min_value(u);
    if !(m >= -1.0 + kappa_stop) {
        return Err(Error::DegenerateDomain(m));
    }
    Ok(())
}

/// Per-column coefficients of the transformed operator.
struct Column {
    gap: f64,
    a: f64,
    curv: f64,
}

fn columns(grid: &Grid2D, u: &[f64]) -> Vec<Column> {
    let n = grid.base.n();
    let h = grid.base.h();
    let mut cols = Vec::with_capacity(n);
    for i in 0..n {
        let gap = 1.0 + u[i];
        if i == 0 || i == n - 1 {
            cols.push(Column {
                gap,
                a: 0.0,
                curv: 0.0,
            });
            continue;
        }
        let up = (u[i + 1] - u[i - 1]) / (2.0 * h);
        let upp = ((u[i + 1] + u[i - 1]) - 2.0 * u[i]) / (h * h);
        cols.push(Column {
            gap,
            a: up / gap,
            curv: upp / gap,
        });
    }
    cols
}

/// Solve the transformed potential problem for the deflection `u`.
///
/// `source` (length `n * m`, same layout as the field) is only used for
/// verification; production callers pass `None`. For `eps = 0` without a
/// source the closed form `phi = eta` is returned.
pub fn solve_potential(
    grid: &Grid2D,
    u: &[f64],
    params: &DeviceParams,
    kappa_stop: f64,
    source: Option<&[f64]>,
) -> Result<PotentialField> {
    let n = grid.base.n();
    let m = grid.m();
    assert_eq!(u.len(), n, "profile does not match the 2-D grid");
    check_domain(u, kappa_stop)?;
    if let Some(f) = source {
        assert_eq!(f.len(), n * m);
    }
    let e2 = params.epsilon * params.epsilon;
    if e2 == 0.0 && source.is_none() {
        return Ok(PotentialField::linear(grid));
    }

    let h = grid.base.h();
    let k = grid.k();
    let eta = grid.eta();
    let cols = columns(grid, u);
    let size = n * m;
    let mut mat = BandedMatrix::zeros(size, m + 1, m + 1);
    let mut rhs = vec![0.0; size];
    for i in 0..n {
        for j in 0..m {
            let r = grid.index(i, j);
            if i == 0 || i == n - 1 || j == 0 || j == m - 1 {
                mat.set(r, r, 1.0);
                rhs[r] = eta[j];
                continue;
            }
            let c = &cols[i];
            let y = eta[j];
            let cxx = e2;
            let cxe = -2.0 * e2 * y * c.a;
            let cee = e2 * (y * c.a) * (y * c.a) + 1.0 / (c.gap * c.gap);
            let ce = e2 * y * (2.0 * c.a * c.a - c.curv);
            // Row negated so that the diagonal is positive.
            let xx = cxx / (h * h);
            let ee = cee / (k * k);
            let e1 = ce / (2.0 * k);
            let xe = cxe / (4.0 * h * k);
            mat.set(r, r, 2.0 * xx + 2.0 * ee);
            mat.set(r, grid.index(i + 1, j), -xx);
            mat.set(r, grid.index(i - 1, j), -xx);
            mat.set(r, grid.index(i, j + 1), -ee - e1);
            mat.set(r, grid.index(i, j - 1), -ee + e1);
            mat.set(r, grid.index(i + 1, j + 1), -xe);
            mat.set(r, grid.index(i + 1, j - 1), xe);
            mat.set(r, grid.index(i - 1, j + 1), xe);
            mat.set(r, grid.index(i - 1, j - 1), -xe);
            rhs[r] = source.map_or(0.0, |f| f[r]);
        }
    }
    let mut phi = mat.solve_refined(&rhs, 1).ok_or(Error::SingularTransformed)?;
    let source_even = source.map_or(true, |f| mirror_even(grid, f));
    if is_even(u) && source_even {
        symmetrize_columns(grid, &mut phi);
    }
    Ok(PotentialField {
        grid: grid.clone(),
        phi,
    })
}

fn mirror_even(grid: &Grid2D, f: &[f64]) -> bool {
    let n = grid.base.n();
    let m = grid.m();
    (0..n / 2).all(|i| {
        (0..m).all(|j| f[grid.index(i, j)].to_bits() == f[grid.index(n - 1 - i, j)].to_bits())
    })
}

/// Replace the field by its even part in `x`. The solution for even data is
/// even; this removes the rounding asymmetry of the elimination order.
fn symmetrize_columns(grid: &Grid2D, phi: &mut [f64]) {
    let n = grid.base.n();
    let m = grid.m();
    for i in 0..n / 2 {
        for j in 0..m {
            let a = grid.index(i, j);
            let b = grid.index(n - 1 - i, j);
            let s = 0.5 * (phi[a] + phi[b]);
            phi[a] = s;
            phi[b] = s;
        }
    }
}

/// Residual of the discrete transformed equation at interior nodes (max norm).
pub fn transformed_residual(
    field: &PotentialField,
    u: &[f64],
    params: &DeviceParams,
    source: Option<&[f64]>,
) -> f64 {
    let grid = &field.grid;
    let n = grid.base.n();
    let m = grid.m();
    let h = grid.base.h();
    let k = grid.k();
    let e2 = params.epsilon * params.epsilon;
    let cols = columns(grid, u);
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let c = &cols[i];
        for j in 1..m - 1 {
            let y = grid.eta()[j];
            let p = |di: isize, dj: isize| {
                field.at((i as isize + di) as usize, (j as isize + dj) as usize)
            };
            let pxx = (p(1, 0) + p(-1, 0) - 2.0 * p(0, 0)) / (h * h);
            let pee = (p(0, 1) + p(0, -1) - 2.0 * p(0, 0)) / (k * k);
            let pe = (p(0, 1) - p(0, -1)) / (2.0 * k);
            let pxe = (p(1, 1) - p(1, -1) - p(-1, 1) + p(-1, -1)) / (4.0 * h * k);
            let lhs = e2
                * (pxx - 2.0 * y * c.a * pxe
                    + (y * c.a) * (y * c.a) * pee
                    + y * (2.0 * c.a * c.a - c.curv) * pe)
                + pee / (c.gap * c.gap);
            let f = source.map_or(0.0, |f| f[grid.index(i, j)]);
            worst = worst.max((lhs + f).abs());
        }
    }
    worst
}

/// `g(x_i) = (1 + eps^2 u'(x_i)^2) (phi_eta(x_i, 1))^2 / (1 + u(x_i))^2`.
///
/// On the membrane `psi = 1`, so the tangential derivative vanishes and
/// `psi_x = -u' psi_z` there; the trace collapses to this closed form.
pub fn trace_rhs(field: &PotentialField, u: &[f64], params: &DeviceParams) -> TraceTerm {
    let grid = &field.grid;
    let n = grid.base.n();
    let e2 = params.epsilon * params.epsilon;
    let (s, _) = nodal_derivatives(u, grid.base.h(), params.bc);
    let g = (0..n)
        .map(|i| {
            let gap = 1.0 + u[i];
            let d = field.membrane_slope(i);
            (1.0 + e2 * s[i] * s[i]) * d * d / (gap * gap)
        })
        .collect();
    TraceTerm {
        g: NodalFunction(g),
    }
}

/// Vanishing-aspect-ratio trace `1 / (1 + u)^2`.
pub fn small_gap_trace(u: &[f64]) -> TraceTerm {
    TraceTerm {
        g: NodalFunction(u.iter().map(|v| 1.0 / ((1.0 + v) * (1.0 + v))).collect()),
    }
}

/// `lambda * int_{Omega(u)} (eps^2 psi_x^2 + psi_z^2)`, evaluated on the
/// transformed rectangle with Jacobian `1 + u` and the trapezoidal rule.
/// This is the magnitude of the (negative) electrostatic energy term.
pub fn electrostatic_energy(field: &PotentialField, u: &[f64], params: &DeviceParams) -> f64 {
    if params.lambda == 0.0 {
        return 0.0;
    }
    let grid = &field.grid;
    let n = grid.base.n();
    let m = grid.m();
    let h = grid.base.h();
    let k = grid.k();
    let e2 = params.epsilon * params.epsilon;
    let (s, _) = nodal_derivatives(u, h, params.bc);
    let d_x = |i: usize, j: usize| -> f64 {
        if i == 0 {
            (-3.0 * field.at(0, j) + 4.0 * field.at(1, j) - field.at(2, j)) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * field.at(n - 1, j) - 4.0 * field.at(n - 2, j) + field.at(n - 3, j)) / (2.0 * h)
        } else {
            (field.at(i + 1, j) - field.at(i - 1, j)) / (2.0 * h)
        }
    };
    let d_eta = |i: usize, j: usize| -> f64 {
        if j == 0 {
            (-3.0 * field.at(i, 0) + 4.0 * field.at(i, 1) - field.at(i, 2)) / (2.0 * k)
        } else if j == m - 1 {
            field.membrane_slope(i)
        } else {
            (field.at(i, j + 1) - field.at(i, j - 1)) / (2.0 * k)
        }
    };
    let mut total = 0.0;
    for i in 0..n {
        let gap = 1.0 + u[i];
        let a = s[i] / gap;
        let wx = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut col = 0.0;
        for j in 0..m {
            let y = grid.eta()[j];
            let pe = d_eta(i, j);
            let psi_x = d_x(i, j) - y * a * pe;
            let psi_z = pe / gap;
            let wy = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
            col += wy * (e2 * psi_x * psi_x + psi_z * psi_z);
        }
        total += wx * col * gap;
    }
    params.lambda * total * h * k
}
