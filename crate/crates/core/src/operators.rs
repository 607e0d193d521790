//! Finite-difference discretization of the quasilinear bending/stretching
//! operator `K`, its splitting `K(u) = A(u) u + h(u)`, the linear reduced
//! operator, the mechanical energy and spectral diagnostics.
//!
//! All operators act on the interior nodes `1..n-1`; the boundary values are
//! zero and the second boundary condition enters through one ghost node per
//! end: `u_{-1} = u_1` (clamped) or `u_{-1} = -u_1` (pinned).
//!
//! The discrete operators are exact gradients of the discrete mechanical
//! energy returned by [`mechanical_energy`] (divided by the grid spacing), so
//! the evolution is a discrete gradient flow.

use nalgebra::DMatrix;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::params::{BoundaryCondition, DeviceParams};
use crate::state::NodalFunction;

pub type Complex64 = nalgebra::Complex<f64>;

/// Principal Dirichlet eigenvalue of `-d^2/dx^2` on `(-1, 1)`.
pub const MU1: f64 = std::f64::consts::PI * std::f64::consts::PI / 4.0;

fn ghost_sign(bc: BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::Clamped => 1.0,
        BoundaryCondition::Pinned => -1.0,
    }
}

/// Nodal values extended by one ghost node at each end (index shift by one).
/// With zero boundary values the ghosts are `g u_1` and `g u_{n-2}`.
fn extend(u: &[f64], bc: BoundaryCondition) -> Vec<f64> {
    let n = u.len();
    let g = ghost_sign(bc);
    let mut e = Vec::with_capacity(n + 2);
    e.push(g * u[1] + (1.0 - g) * u[0]);
    e.extend_from_slice(u);
    e.push(g * u[n - 2] + (1.0 - g) * u[n - 1]);
    e
}

/// Centered first and second differences at every node (ghosts at the ends).
pub(crate) fn nodal_derivatives(u: &[f64], h: f64, bc: BoundaryCondition) -> (Vec<f64>, Vec<f64>) {
    let e = extend(u, bc);
    let n = u.len();
    let mut s = vec![0.0; n];
    let mut q = vec![0.0; n];
    let h2 = h * h;
    for j in 0..n {
        s[j] = (e[j + 2] - e[j]) / (2.0 * h);
        q[j] = ((e[j + 2] + e[j]) - 2.0 * e[j + 1]) / h2;
    }
    (s, q)
}

/// Frozen coefficients of `A(w)`: `W^{-5/2}` at nodes for bending and
/// `W^{-1/2}` at cell midpoints (from the midpoint slope) for stretching,
/// `W = 1 + eps^2 (w')^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub bend: Vec<f64>,
    pub stretch: Vec<f64>,
}

impl Coefficients {
    pub fn of(grid: &Grid1D, w: &[f64], params: &DeviceParams) -> Self {
        let h = grid.h();
        let e2 = params.epsilon * params.epsilon;
        let (s, _) = nodal_derivatives(w, h, params.bc);
        let bend = s.iter().map(|s| (1.0 + e2 * s * s).powf(-2.5)).collect();
        let stretch = w
            .windows(2)
            .map(|p| {
                let sigma = (p[1] - p[0]) / h;
                (1.0 + e2 * sigma * sigma).powf(-0.5)
            })
            .collect();
        Coefficients { bend, stretch }
    }

    pub fn unit(grid: &Grid1D) -> Self {
        Coefficients {
            bend: vec![1.0; grid.n()],
            stretch: vec![1.0; grid.n() - 1],
        }
    }

    /// Entrywise `self - other`.
    pub fn minus(&self, other: &Coefficients) -> Coefficients {
        Coefficients {
            bend: self.bend.iter().zip(&other.bend).map(|(a, b)| a - b).collect(),
            stretch: self
                .stretch
                .iter()
                .zip(&other.stretch)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `beta D2(c D2 v) - tau D1(c D1 v)` evaluated matrix-free at the nodes.
    pub fn apply(&self, grid: &Grid1D, v: &[f64], params: &DeviceParams) -> Vec<f64> {
        let n = grid.n();
        let h = grid.h();
        let h2 = h * h;
        let (_, q) = nodal_derivatives(v, h, params.bc);
        let b: Vec<f64> = q.iter().zip(&self.bend).map(|(q, c)| q * c).collect();
        let flux: Vec<f64> = v
            .windows(2)
            .zip(&self.stretch)
            .map(|(p, c)| c * ((p[1] - p[0]) / h))
            .collect();
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let bending = params.beta * (((b[i + 1] + b[i - 1]) - 2.0 * b[i]) / h2);
            let stretching = -params.tau * ((flux[i] - flux[i - 1]) / h);
            out[i] = bending + stretching;
        }
        out
    }

    /// Banded matrix on the interior unknowns.
    pub fn assemble(&self, grid: &Grid1D, params: &DeviceParams) -> BandedMatrix {
        let n = grid.n();
        let ni = n - 2;
        let h = grid.h();
        let h2 = h * h;
        let g = ghost_sign(params.bc);
        let b = params.beta / (h2 * h2);
        let t = params.tau / h2;
        // Bending weight of node j as seen from its neighbours; a boundary
        // node couples back through its ghost.
        let w = |j: usize| {
            if j == 0 || j == n - 1 {
                (1.0 + g) * self.bend[j]
            } else {
                self.bend[j]
            }
        };
        let mut a = BandedMatrix::zeros(ni, 2, 2);
        for i in 1..n - 1 {
            let r = i - 1;
            let diag = b * ((w(i - 1) + w(i + 1)) + 4.0 * self.bend[i])
                + t * (self.stretch[i - 1] + self.stretch[i]);
            a.set(r, r, diag);
            if i + 1 <= n - 2 {
                let off = -2.0 * b * (self.bend[i] + self.bend[i + 1]) - t * self.stretch[i];
                a.set(r, r + 1, off);
                a.set(r + 1, r, off);
            }
            if i + 2 <= n - 2 {
                let off = b * self.bend[i + 1];
                a.set(r, r + 2, off);
                a.set(r + 2, r, off);
            }
        }
        a
    }
}

/// `A(w)` (or the linear operator when `w` is `None`) with its metadata.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    /// Interior matrix.
    pub matrix: BandedMatrix,
    pub bc: BoundaryCondition,
    pub profile: Option<Vec<f64>>,
    coefficients: Coefficients,
    grid: Grid1D,
    beta: f64,
    tau: f64,
}

impl OperatorMatrix {
    fn new(grid: &Grid1D, c: Coefficients, params: &DeviceParams, profile: Option<Vec<f64>>) -> Self {
        OperatorMatrix {
            matrix: c.assemble(grid, params),
            bc: params.bc,
            profile,
            coefficients: c,
            grid: grid.clone(),
            beta: params.beta,
            tau: params.tau,
        }
    }

    /// Apply to a full nodal vector in nested divergence form; boundary
    /// entries of the result are zero.
    ///
    /// This is the same linear map as [`OperatorMatrix::matvec`], but avoids
    /// summing entries of size `||A|| ||v||` that cancel to `O(||A v||)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let p = DeviceParams {
            beta: self.beta,
            tau: self.tau,
            bc: self.bc,
            ..DeviceParams::default()
        };
        self.coefficients.apply(&self.grid, v, &p)
    }

    /// Banded matrix-vector product on the interior, zero on the boundary.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let inner = self.matrix.matvec(&v[1..n - 1]);
        let mut out = vec![0.0; n];
        out[1..n - 1].copy_from_slice(&inner);
        out
    }

    pub fn dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

/// `A(w) v = beta (v'' W^{-5/2})'' - tau (v' W^{-1/2})'` with `W` frozen from `w`.
pub fn assemble_a(grid: &Grid1D, w: &[f64], params: &DeviceParams) -> OperatorMatrix {
    OperatorMatrix::new(grid, Coefficients::of(grid, w, params), params, Some(w.to_vec()))
}

/// `beta D^4 - tau D^2` under the active boundary condition.
pub fn linear_operator(grid: &Grid1D, params: &DeviceParams) -> OperatorMatrix {
    OperatorMatrix::new(grid, Coefficients::unit(grid), params, None)
}

/// The quasilinear operator `K(u)` evaluated directly from its three terms.
pub fn apply_k(grid: &Grid1D, u: &[f64], params: &DeviceParams) -> NodalFunction {
    let n = grid.n();
    let h = grid.h();
    let h2 = h * h;
    let e2 = params.epsilon * params.epsilon;
    let (s, q) = nodal_derivatives(u, h, params.bc);
    let mut bend = vec![0.0; n];
    let mut cubic = vec![0.0; n];
    for j in 0..n {
        let w = 1.0 + e2 * s[j] * s[j];
        bend[j] = q[j] * w.powf(-2.5);
        cubic[j] = s[j] * q[j] * q[j] * w.powf(-3.5);
    }
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let sl = (u[i] - u[i - 1]) / h;
        let sr = (u[i + 1] - u[i]) / h;
        let fl = (1.0 + e2 * sl * sl).powf(-0.5) * sl;
        let fr = (1.0 + e2 * sr * sr).powf(-0.5) * sr;
        let bending = params.beta * (((bend[i + 1] + bend[i - 1]) - 2.0 * bend[i]) / h2);
        let stretching = -params.tau * ((fr - fl) / h);
        let third = 2.5 * e2 * params.beta * ((cubic[i + 1] - cubic[i - 1]) / (2.0 * h));
        out[i] = bending + stretching + third;
    }
    NodalFunction(out)
}

/// `h(v) = (5/2) eps^2 beta (v' (v'')^2 W^{-7/2})'`.
pub fn apply_h(grid: &Grid1D, v: &[f64], params: &DeviceParams) -> NodalFunction {
    let n = grid.n();
    let h = grid.h();
    let e2 = params.epsilon * params.epsilon;
    let mut out = vec![0.0; n];
    if e2 == 0.0 || params.beta == 0.0 {
        return NodalFunction(out);
    }
    let (s, q) = nodal_derivatives(v, h, params.bc);
    let p: Vec<f64> = (0..n)
        .map(|j| s[j] * q[j] * q[j] * (1.0 + e2 * s[j] * s[j]).powf(-3.5))
        .collect();
    let pre = 2.5 * e2 * params.beta;
    for i in 1..n - 1 {
        out[i] = pre * ((p[i + 1] - p[i - 1]) / (2.0 * h));
    }
    NodalFunction(out)
}

/// Bending plus stretching energy
/// `(beta/2) int (u'')^2 W^{-5/2} + (tau/eps^2) int (sqrt(W) - 1)`.
///
/// The stretching integrand is evaluated as `tau s^2 / (sqrt(W) + 1)`, which
/// has the `eps -> 0` limit `(tau/2) s^2` built in.
pub fn mechanical_energy(grid: &Grid1D, u: &[f64], params: &DeviceParams) -> f64 {
    let n = grid.n();
    let h = grid.h();
    let e2 = params.epsilon * params.epsilon;
    let (s, q) = nodal_derivatives(u, h, params.bc);
    let dens: Vec<f64> = (0..n)
        .map(|j| q[j] * q[j] * (1.0 + e2 * s[j] * s[j]).powf(-2.5))
        .collect();
    let bending = 0.5 * params.beta * grid.trapezoid(&dens);
    let stretching: f64 = u
        .windows(2)
        .map(|p| {
            let sigma = (p[1] - p[0]) / h;
            sigma * sigma / ((1.0 + e2 * sigma * sigma).sqrt() + 1.0)
        })
        .sum::<f64>()
        * h
        * params.tau;
    bending + stretching
}

/// `||W||_inf` over nodes and midpoints.
pub fn w_sup(grid: &Grid1D, w: &[f64], params: &DeviceParams) -> f64 {
    let h = grid.h();
    let e2 = params.epsilon * params.epsilon;
    let (s, _) = nodal_derivatives(w, h, params.bc);
    let nodal = s.iter().map(|s| 1.0 + e2 * s * s);
    let mid = w.windows(2).map(|p| {
        let sigma = (p[1] - p[0]) / h;
        1.0 + e2 * sigma * sigma
    });
    nodal.chain(mid).fold(1.0, f64::max)
}

/// `2 varsigma(w) = beta mu1^2 ||W||^{-5/2} + tau mu1 ||W||^{-1/2}`.
pub fn spectral_bound(grid: &Grid1D, w: &[f64], params: &DeviceParams) -> f64 {
    let ws = w_sup(grid, w, params);
    params.beta * MU1 * MU1 * ws.powf(-2.5) + params.tau * MU1 * ws.powf(-0.5)
}

/// All eigenvalues of a dense real matrix.
pub fn eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::EigenFailure)?;
    let ev = schur.complex_eigenvalues();
    let out: Vec<Complex64> = ev.iter().copied().collect();
    if out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(out)
    } else {
        Err(Error::EigenFailure)
    }
}

/// Eigenvalues of `-A(w)` against the analytic upper bound `-2 varsigma(w)`.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Eigenvalues of `-A(w)`, sorted by decreasing real part.
    pub eigenvalues: Vec<Complex64>,
    /// `2 varsigma(w) > 0`.
    pub bound: f64,
    /// `max Re(eig) + bound`; positive values exceed the analytic bound.
    pub margin: f64,
    /// Allowed discretization slack `10 h^2 ||A||_inf`.
    pub tolerance: f64,
    /// `max |Im| / |Re|` over the spectrum.
    pub max_imag_ratio: f64,
    pub violation: bool,
}

impl SpectralReport {
    pub fn max_real(&self) -> f64 {
        self.eigenvalues[0].re
    }
}

pub fn spectral_report(grid: &Grid1D, w: &[f64], params: &DeviceParams) -> Result<SpectralReport> {
    let a = assemble_a(grid, w, params);
    let norm = a.matrix.norm_inf();
    let mut ev: Vec<Complex64> = eigenvalues(-a.dense())?;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    let bound = spectral_bound(grid, w, params);
    let margin = ev[0].re + bound;
    let tolerance = 10.0 * grid.h() * grid.h() * norm;
    let max_imag_ratio = ev
        .iter()
        .map(|z| z.im.abs() / z.re.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(SpectralReport {
        eigenvalues: ev,
        bound,
        margin,
        tolerance,
        max_imag_ratio,
        violation: margin > tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::is_even;
    use crate::params::Model;
    use crate::state::bump;

    fn params(eps: f64) -> DeviceParams {
        DeviceParams::default().with_epsilon(eps)
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn k_of_zero_vanishes() {
        let g = Grid1D::new(33).unwrap();
        let k = apply_k(&g, &vec![0.0; 33], &params(0.5));
        assert!(k.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn k_collapses_to_linear_operator_at_eps_zero() {
        let g = Grid1D::new(65).unwrap();
        let u = g.sample(|x| bump(-0.3, x) * (1.0 + 0.3 * x));
        let p = params(0.0);
        let k = apply_k(&g, &u, &p);
        let l = linear_operator(&g, &p).apply(&u);
        let scale = linear_operator(&g, &p).matrix.norm_inf() * 0.3;
        assert!(max_diff(&k, &l) <= 1e-14 * scale, "{}", max_diff(&k, &l));
        assert!(apply_h(&g, &u, &p).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn a_of_zero_is_linear_stencil() {
        let g = Grid1D::new(33).unwrap();
        let p = params(0.5);
        let a = assemble_a(&g, &vec![0.0; 33], &p).matrix;
        let l = linear_operator(&g, &p).matrix;
        assert_eq!(a, l);
        // Interior rows of beta D^4 - tau D^2 with beta = tau = 1.
        let h = g.h();
        let h4 = h.powi(4);
        let h2 = h * h;
        let r = 10;
        assert!((a.get(r, r) - (6.0 / h4 + 2.0 / h2)).abs() < 1e-9 * a.get(r, r));
        assert!((a.get(r, r + 1) - (-4.0 / h4 - 1.0 / h2)).abs() < 1e-9 / h4);
        assert!((a.get(r, r + 2) - 1.0 / h4).abs() < 1e-9 / h4);
        // Clamped first row: 7 on the diagonal.
        assert!((a.get(0, 0) - (7.0 / h4 + 2.0 / h2)).abs() < 1e-9 / h4);
    }

    #[test]
    fn pinned_first_row() {
        let g = Grid1D::new(33).unwrap();
        let p = params(0.0)
            .with_model(Model::SmallGap)
            .with_bc(BoundaryCondition::Pinned)
            .with_stiffness(1.0, 0.0);
        let a = linear_operator(&g, &p).matrix;
        let h4 = g.h().powi(4);
        assert!((a.get(0, 0) - 5.0 / h4).abs() < 1e-9 / h4);
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let g = Grid1D::new(65).unwrap();
        let w = g.sample(|x| bump(-0.2, x) * (1.0 - 0.5 * x));
        let a = assemble_a(&g, &w, &params(0.5)).dense();
        let asym = (&a - a.transpose()).amax();
        assert!(asym < 1e-12 * a.amax(), "{asym}");
    }

    #[test]
    fn matrix_free_apply_matches_assembly() {
        let g = Grid1D::new(65).unwrap();
        let p = params(0.5);
        let w = g.sample(|x| bump(-0.2, x));
        let v = g.sample(|x| bump(0.1, x) * (1.0 + x));
        let c = Coefficients::of(&g, &w, &p);
        let lhs = c.apply(&g, &v, &p);
        let rhs = assemble_a(&g, &w, &p).matvec(&v);
        let scale = c.assemble(&g, &p).norm_inf() * 0.2;
        assert!(max_diff(&lhs, &rhs) < 1e-14 * scale);
    }

    #[test]
    fn splitting_identity_example() {
        let g = Grid1D::new(65).unwrap();
        let p = params(0.5);
        let u = g.sample(|x| bump(-0.3, x));
        let k = apply_k(&g, &u, &p);
        let au = assemble_a(&g, &u, &p).apply(&u);
        let hu = apply_h(&g, &u, &p);
        let split: Vec<f64> = au.iter().zip(hu.iter()).map(|(a, b)| a + b).collect();
        let d = max_diff(&k, &split);
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn evenness_is_exact() {
        let g = Grid1D::new(65).unwrap();
        let p = params(0.5);
        let u = g.sample(|x| bump(-0.3, x) * (1.0 + 2.0 * x * x));
        assert!(is_even(&u));
        assert!(is_even(&apply_k(&g, &u, &p)));
        assert!(is_even(&apply_h(&g, &u, &p)));
        let a = assemble_a(&g, &u, &p).matrix;
        let ni = a.n();
        for r in 0..ni {
            for c in 0..ni {
                assert_eq!(a.get(r, c).to_bits(), a.get(ni - 1 - r, ni - 1 - c).to_bits());
            }
        }
    }

    #[test]
    fn h_vanishes_at_zero_and_is_cubic() {
        let g = Grid1D::new(65).unwrap();
        let p = params(1.0);
        assert!(apply_h(&g, &vec![0.0; 65], &p).iter().all(|&v| v == 0.0));
        let v0 = g.sample(|x| bump(1.0, x));
        let ratio = |s: f64| {
            let v: Vec<f64> = v0.iter().map(|x| s * x).collect();
            apply_h(&g, &v, &p).interior_max_abs() / s.powi(3)
        };
        let r = [ratio(1e-2), ratio(1e-3), ratio(1e-4)];
        assert!(((r[0] - r[1]) / r[1]).abs() < 1e-2);
        assert!(((r[1] - r[2]) / r[2]).abs() < 1e-2);
    }

    #[test]
    fn energy_gradient_is_k() {
        // Central finite differences of the discrete energy reproduce h * K(u).
        let g = Grid1D::new(33).unwrap();
        let p = params(0.5);
        let u = g.sample(|x| bump(-0.4, x) * (1.0 + 0.5 * x));
        let k = apply_k(&g, &u, &p);
        let d = 1e-6;
        for i in 1..32 {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += d;
            dn[i] -= d;
            let fd = (mechanical_energy(&g, &up, &p) - mechanical_energy(&g, &dn, &p)) / (2.0 * d);
            let want = g.h() * k[i];
            assert!((fd - want).abs() < 1e-6 * (1.0 + want.abs()), "i={i} {fd} {want}");
        }
    }

    #[test]
    fn energy_stretching_limit() {
        let g = Grid1D::new(129).unwrap();
        let u = g.sample(|x| bump(-0.3, x));
        let only_tension = |eps: f64| {
            let p = params(eps).with_stiffness(0.0, 1.0);
            mechanical_energy(&g, &u, &p)
        };
        let limit = only_tension(0.0);
        let gaps: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| ((only_tension(e) - limit) / limit).abs())
            .collect();
        assert!((gaps[0] / gaps[1] - 4.0).abs() < 0.2);
        assert!((gaps[1] / gaps[2] - 4.0).abs() < 0.2);
    }

    #[test]
    fn spectral_bound_flat() {
        let g = Grid1D::new(33).unwrap();
        let p = params(0.7);
        let b = spectral_bound(&g, &vec![0.0; 33], &p);
        assert!((b - (MU1 * MU1 + MU1)).abs() < 1e-14);
    }

    #[test]
    fn spectral_report_bent_profile() {
        let g = Grid1D::new(65).unwrap();
        let p = params(0.5);
        let w = g.sample(|x| bump(-0.2, x));
        let r = spectral_report(&g, &w, &p).unwrap();
        assert!(r.max_imag_ratio < 1e-8);
        assert!(r.max_real() <= -r.bound + r.tolerance);
        assert!(!r.violation);
        assert!(r.bound > 0.0);
    }
}
