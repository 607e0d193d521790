//! Independent reference computations shared by the integration tests and
//! the acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pullin_core::{Grid1D, Grid2D, PotentialField};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// First root of `cosh(mu) cos(mu) = 1`; the clamped-clamped beam on an
/// interval of length `L` has ground eigenvalue `(mu / L)^4` for `d^4/dx^4`.
pub fn clamped_beam_root() -> f64 {
    let f = |m: f64| m.cosh() * m.cos() - 1.0;
    let (mut lo, mut hi) = (4.5_f64, 5.0_f64);
    assert!(f(lo) * f(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ground eigenvalue of `d^4/dx^4` on `(-1, 1)` with clamped ends.
pub fn clamped_beam_eigenvalue() -> f64 {
    (clamped_beam_root() / 2.0).powi(4)
}

/// Random clamped-compatible profile with `min(u)` in `[-depth_max, -0.05]`.
///
/// `u = (1 - x^2)^2 p(x)` with a random cubic `p` and a random sine mode;
/// the factor `(1 - x^2)^2` enforces `u = u' = 0` at the ends.
pub fn random_profile(rng: &mut ChaCha8Rng, grid: &Grid1D, depth_max: f64) -> Vec<f64> {
    let c: [f64; 4] = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-0.5..0.5),
    ];
    let k = rng.random_range(1..4) as f64;
    let shape: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            let p = -1.0 + c[0] * x + c[1] * x * x + c[2] * x * x * x;
            (1.0 - x * x).powi(2) * (p + c[3] * (k * std::f64::consts::PI * x).sin())
        })
        .collect();
    let lo = shape.iter().cloned().fold(f64::INFINITY, f64::min);
    let depth = rng.random_range(0.05..depth_max);
    let mut u: Vec<f64> = shape.iter().map(|s| depth * s / lo.abs()).collect();
    let n = u.len();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    u
}

/// Physical coordinates of the node `(i, j)`: `z = -1 + eta (1 + u_i)`.
fn physical(grid: &Grid2D, u: &[f64], i: usize, j: usize) -> (f64, f64) {
    (grid.base.x(i), -1.0 + grid.eta()[j] * (1.0 + u[i]))
}

/// Corner function `Im(zeta^2 log zeta)` of the quarter plane and its
/// gradient in `(X, Y)`, with `zeta = X + iY`.
fn corner_mode(xx: f64, yy: f64) -> (f64, f64, f64) {
    let r = xx.hypot(yy);
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let th = yy.atan2(xx);
    let lr = r.ln();
    let s = r * r * ((2.0 * th).sin() * lr + th * (2.0 * th).cos());
    // F' = zeta (2 log zeta + 1); d/dX = Im F', d/dY = Re F'.
    let (a, b) = (2.0 * lr + 1.0, 2.0 * th);
    let re = xx * a - yy * b;
    let im = xx * b + yy * a;
    (s, im, re)
}

/// `eps^2 psi_x^2 + psi_z^2` on the membrane from a local least-squares
/// cubic fit of the nodal potential in physical coordinates.
///
/// Near the side walls the fit also carries the `r^2 log r` mode of the
/// corner between wall and membrane (in the stretched variable
/// `(x + 1) / eps`), which polynomials cannot represent.
pub fn direct_trace(field: &PotentialField, u: &[f64], eps: f64) -> Vec<f64> {
    let grid = &field.grid;
    let n = grid.base.n();
    let m = grid.m();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2).min(n - 5);
            let (x0, z0) = (grid.base.x(i), u[i]);
            // (sign, wall) of the nearest corner when the stencil is close to it.
            let corner = if lo < 4 {
                Some((1.0, -1.0))
            } else if lo + 5 > n - 4 {
                Some((-1.0, 1.0))
            } else {
                None
            };
            let local = |x: f64, z: f64| -> (f64, f64, f64) {
                let (sg, wall) = corner.unwrap();
                let (v, dx, dy) = corner_mode(sg * (x - wall) / eps, -z);
                (v, sg * dx / eps, -dy)
            };
            let mut rows = Vec::new();
            let mut rhs = Vec::new();
            for ii in lo..lo + 5 {
                for jj in m - 4..m {
                    let (x, z) = physical(grid, u, ii, jj);
                    let (dx, dz) = (x - x0, z - z0);
                    let mut row = vec![
                        1.0,
                        dx,
                        dz,
                        dx * dx,
                        dx * dz,
                        dz * dz,
                        dx * dx * dx,
                        dx * dx * dz,
                        dx * dz * dz,
                        dz * dz * dz,
                    ];
                    if corner.is_some() {
                        row.push(local(x, z).0);
                    }
                    rows.push(row);
                    rhs.push(field.at(ii, jj));
                }
            }
            let cols = rows[0].len();
            let a = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]);
            let b = DVector::from_vec(rhs);
            let coef = a
                .svd(true, true)
                .solve(&b, 1e-14)
                .expect("least-squares fit");
            let (mut px, mut pz) = (coef[1], coef[2]);
            if corner.is_some() {
                let (_, gx, gz) = local(x0, z0);
                px += coef[10] * gx;
                pz += coef[10] * gz;
            }
            eps * eps * px * px + pz * pz
        })
        .collect()
}

/// `lambda int (eps^2 psi_x^2 + psi_z^2)` for the piecewise-linear
/// interpolant of the nodal potential on the physical mesh.
pub fn p1_energy(field: &PotentialField, u: &[f64], eps: f64, lambda: f64) -> f64 {
    let grid = &field.grid;
    let n = grid.base.n();
    let m = grid.m();
    let tri = |a: (usize, usize), b: (usize, usize), c: (usize, usize)| -> f64 {
        let pa = physical(grid, u, a.0, a.1);
        let pb = physical(grid, u, b.0, b.1);
        let pc = physical(grid, u, c.0, c.1);
        let (fa, fb, fc) = (field.at(a.0, a.1), field.at(b.0, b.1), field.at(c.0, c.1));
        let det = (pb.0 - pa.0) * (pc.1 - pa.1) - (pc.0 - pa.0) * (pb.1 - pa.1);
        let gx = ((fb - fa) * (pc.1 - pa.1) - (fc - fa) * (pb.1 - pa.1)) / det;
        let gz = ((pb.0 - pa.0) * (fc - fa) - (pc.0 - pa.0) * (fb - fa)) / det;
        0.5 * det.abs() * (eps * eps * gx * gx + gz * gz)
    };
    let mut total = 0.0;
    for i in 0..n - 1 {
        for j in 0..m - 1 {
            total += tri((i, j), (i + 1, j), (i + 1, j + 1));
            total += tri((i, j), (i + 1, j + 1), (i, j + 1));
        }
    }
    lambda * total
}

/// Manufactured potential `phi* = eta + eta (1 - eta) sin(pi x)` for the
/// deflection `u = -0.3 (1 - x^2)^2`; returns `(source, exact)` on the grid,
/// with the source `f = -L phi*` from the continuous transformed operator.
pub fn manufactured(grid: &Grid2D, eps: f64) -> (Vec<f64>, Vec<f64>) {
    use std::f64::consts::PI;
    let n = grid.base.n();
    let m = grid.m();
    let e2 = eps * eps;
    let mut src = vec![0.0; n * m];
    let mut exact = vec![0.0; n * m];
    for i in 0..n {
        let x = grid.base.x(i);
        let u = -0.3 * (1.0 - x * x).powi(2);
        let up = 1.2 * x * (1.0 - x * x);
        let upp = 1.2 * (1.0 - 3.0 * x * x);
        let gap = 1.0 + u;
        let a = up / gap;
        let (s, c) = ((PI * x).sin(), (PI * x).cos());
        for j in 0..m {
            let y = grid.eta()[j];
            let phi = y + y * (1.0 - y) * s;
            let pxx = -PI * PI * y * (1.0 - y) * s;
            let pe = 1.0 + (1.0 - 2.0 * y) * s;
            let pee = -2.0 * s;
            let pxe = PI * (1.0 - 2.0 * y) * c;
            let l = e2
                * (pxx - 2.0 * y * a * pxe
                    + (y * a) * (y * a) * pee
                    + y * (2.0 * a * a - upp / gap) * pe)
                + pee / (gap * gap);
            let k = grid.index(i, j);
            src[k] = -l;
            exact[k] = phi;
        }
    }
    (src, exact)
}

/// Observed orders `log2(e_k / e_{k+1})` for a sequence of halvings.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
