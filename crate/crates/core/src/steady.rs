//! Steady states `A(U) U + lambda g(U) + h(U) = 0`: Newton's method,
//! natural-parameter continuation in `lambda`, pull-in estimation and
//! linearized stability.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evolution::{run, OutcomeKind};
use crate::grid::{is_even, symmetrize};
use crate::operators::{eigenvalues, Complex64};
use crate::params::SolverThresholds;
use crate::problem::Problem;
use crate::state::{discrete_norm, max_abs, min_value, MembraneState, NodalFunction, NormKind};

const MAX_NEWTON: usize = 50;
const MAX_HALVINGS: usize = 20;
/// Relative step size below which an iterate is at the rounding floor.
const STEP_FLOOR: f64 = 1e-12;

/// `R(v) = A(v) v + lambda g(v) + h(v)` on interior nodes.
pub fn steady_residual(problem: &Problem, v: &[f64], kappa_stop: f64) -> Result<NodalFunction> {
    problem.residual(v, kappa_stop)
}

fn interior_inf(r: &[f64]) -> f64 {
    let n = r.len();
    max_abs(&r[1..n - 1])
}

/// Dense Jacobian of `R` on the interior unknowns.
///
/// `A(v)` enters exactly; the derivatives of `g`, `h` and of the coefficient
/// map `v -> A(v)` are forward differences, each formed separately so the
/// large `A(v) v` term does not cancel.
pub fn jacobian(problem: &Problem, v: &[f64], kappa_stop: f64) -> Result<DMatrix<f64>> {
    let n = v.len();
    let ni = n - 2;
    let a = problem.operator(v).to_dense();
    let mech = problem.mechanics();
    let nonlinear = mech.epsilon != 0.0;
    let lambda = problem.lambda();
    let delta = f64::EPSILON.sqrt() * (1.0 + max_abs(v));
    let base_coeff = problem.coefficients(v);
    let base_h = problem.h(v);
    let base_g = if lambda != 0.0 {
        Some(problem.trace(v, kappa_stop)?.g)
    } else {
        None
    };
    if !nonlinear && base_g.is_none() {
        return Ok(a);
    }
    let columns: Vec<Vec<f64>> = (0..ni)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            let mut vp = v.to_vec();
            vp[j + 1] += delta;
            let mut col = vec![0.0; n];
            if nonlinear {
                let dc = problem.coefficients(&vp).minus(&base_coeff);
                let da = dc.apply(problem.grid1(), v, mech);
                let hp = problem.h(&vp);
                for i in 1..n - 1 {
                    col[i] += da[i] / delta + (hp[i] - base_h[i]) / delta;
                }
            }
            if let Some(g0) = &base_g {
                let gp = problem.trace(&vp, kappa_stop)?.g;
                for i in 1..n - 1 {
                    col[i] += lambda * (gp[i] - g0[i]) / delta;
                }
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    let mut j = a;
    for (c, col) in columns.iter().enumerate() {
        for r in 0..ni {
            j[(r, c)] += col[r + 1];
        }
    }
    Ok(j)
}

/// Converged steady state with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub state: MembraneState,
    pub iterations: usize,
    /// `||R||_inf` at the returned state.
    pub residual: f64,
}

/// Damped Newton iteration for `R(v) = 0` starting at `v_init`.
///
/// Converges when `||R||_inf < newton_tol`. Evaluating `A(v) v` carries a
/// rounding error of order `eps ||A(v)||_inf ||v||_inf`, which on fine grids
/// and large deflections exceeds `newton_tol`; an iterate whose residual is
/// below that floor is also accepted once a damped step can no longer reduce
/// it, or once the full step is below `1e-12 max(1, ||v||_inf)`.
pub fn newton_solve(
    problem: &Problem,
    v_init: &[f64],
    thresholds: &SolverThresholds,
) -> Result<NewtonReport> {
    let kappa = thresholds.kappa_stop;
    let n = v_init.len();
    if n != problem.n() {
        return Err(Error::GridMismatch(format!(
            "initial guess has {n} values for {} nodes",
            problem.n()
        )));
    }
    if !(min_value(v_init) > -1.0 + kappa) {
        return Err(Error::IterateTouchedDown);
    }
    let mut v = v_init.to_vec();
    let mut r = problem.residual(&v, kappa)?;
    let mut rn = interior_inf(&r);
    let done = |v: Vec<f64>, it: usize, rn: f64| NewtonReport {
        state: MembraneState::new(v, 0.0),
        iterations: it,
        residual: rn,
    };
    for it in 0..MAX_NEWTON {
        if rn < thresholds.newton_tol {
            return Ok(done(v, it, rn));
        }
        let jac = jacobian(problem, &v, kappa)?;
        let rhs = DVector::from_iterator(n - 2, r[1..n - 1].iter().map(|x| -x));
        let sol = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian)?;
        if !sol.iter().all(|x| x.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        let mut step = vec![0.0; n];
        step[1..n - 1].copy_from_slice(sol.as_slice());
        if is_even(&v) {
            symmetrize(&mut step);
        }
        let tiny = max_abs(&step) <= STEP_FLOOR * max_abs(&v).max(1.0);
        let floor = f64::EPSILON * problem.operator(&v).norm_inf() * max_abs(&v);
        let at_floor = rn <= floor;
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut domain_exit = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = v.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
            if min_value(&trial) > -1.0 + kappa {
                domain_exit = false;
                let rt = problem.residual(&trial, kappa)?;
                let rtn = interior_inf(&rt);
                if rtn < rn {
                    accepted = Some((trial, rt, rtn));
                    break;
                }
            } else {
                domain_exit = true;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, rt, rtn)) => {
                v = trial;
                r = rt;
                rn = rtn;
                if tiny {
                    return Ok(done(v, it + 1, rn));
                }
            }
            None if tiny || at_floor => return Ok(done(v, it + 1, rn)),
            None if domain_exit => return Err(Error::IterateTouchedDown),
            None => {
                return Err(Error::NewtonStagnation {
                    iterations: it + 1,
                    residual: rn,
                })
            }
        }
    }
    if rn < thresholds.newton_tol {
        return Ok(done(v, MAX_NEWTON, rn));
    }
    Err(Error::NewtonStagnation {
        iterations: MAX_NEWTON,
        residual: rn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Spectrum of the linearization `A(U) + B` at a steady state.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// All eigenvalues, sorted by increasing real part.
    pub eigenvalues: Vec<Complex64>,
    /// Spectral gap: smallest real part.
    pub gap: f64,
    pub stability: Stability,
}

/// Eigenvalues of the linearized steady operator at `u`.
pub fn linear_stability(problem: &Problem, u: &[f64], kappa_stop: f64) -> Result<StabilityReport> {
    let j = jacobian(problem, u, kappa_stop)?;
    let mut ev = eigenvalues(j)?;
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let gap = ev[0].re;
    let stability = if gap > 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    Ok(StabilityReport {
        eigenvalues: ev,
        gap,
        stability,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub lambda: f64,
    pub u: Vec<f64>,
    pub min_u: f64,
    pub l2_u: f64,
    pub h2d_u: f64,
    pub stability: Stability,
    /// Smallest real part of the linearized spectrum (`NaN` if unknown).
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchTermination {
    /// The branch reached `lambda_max`.
    LambdaMax,
    /// Step halving exhausted near a detected fold.
    Fold,
    /// Step halving exhausted without fold evidence.
    NewtonStagnation { lambda: f64 },
}

impl fmt::Display for BranchTermination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchTermination::LambdaMax => f.write_str("lambda_max"),
            BranchTermination::Fold => f.write_str("fold"),
            BranchTermination::NewtonStagnation { lambda } => {
                write!(f, "Newton stagnation near lambda={lambda}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyBranch {
    pub points: Vec<BranchPoint>,
    pub fold_bracket: Option<(f64, f64)>,
    pub termination: BranchTermination,
}

impl SteadyBranch {
    /// `lambda,min_u,l2_u,h2d_u,stable,gap`, then `# fold_bracket lo hi` if any.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,min_u,l2_u,h2d_u,stable,gap\n");
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.lambda, p.min_u, p.l2_u, p.h2d_u, p.stability, p.gap
            );
        }
        if let Some((lo, hi)) = self.fold_bracket {
            let _ = writeln!(s, "# fold_bracket {lo} {hi}");
        }
        let _ = writeln!(s, "# termination {}", self.termination);
        s
    }
}

const FOLD_FACTOR: f64 = 1e-6;
const FOLD_LOOKBACK: usize = 5;

fn branch_point(problem: &Problem, u: Vec<f64>, kappa: f64) -> BranchPoint {
    let g = problem.grid1();
    let (stability, gap) = match linear_stability(problem, &u, kappa) {
        Ok(r) => (r.stability, r.gap),
        Err(_) => (Stability::Unknown, f64::NAN),
    };
    BranchPoint {
        lambda: problem.lambda(),
        min_u: min_value(&u),
        l2_u: discrete_norm(g, &u, NormKind::L2),
        h2d_u: discrete_norm(g, &u, NormKind::H2d),
        u,
        stability,
        gap,
    }
}

/// Natural-parameter continuation of the stable branch from `(0, U = 0)`.
///
/// Converged corrector iterates whose linearization is not stable are
/// treated as corrector failures: they lie on a different branch.
pub fn continue_branch(
    problem: &Problem,
    dlambda0: f64,
    lambda_max: f64,
    thresholds: &SolverThresholds,
) -> Result<SteadyBranch> {
    if !(dlambda0 > 0.0) {
        return Err(Error::InvalidParams("dlambda0 must be positive".into()));
    }
    let kappa = thresholds.kappa_stop;
    let n = problem.n();
    let start = newton_solve(&problem.with_lambda(0.0), &vec![0.0; n], thresholds)?;
    let mut points = vec![branch_point(&problem.with_lambda(0.0), start.state.u, kappa)];
    let mut dl = dlambda0;
    loop {
        let last = points.last().unwrap();
        if last.lambda >= lambda_max {
            return Ok(SteadyBranch {
                points,
                fold_bracket: None,
                termination: BranchTermination::LambdaMax,
            });
        }
        let lam = (last.lambda + dl).min(lambda_max);
        let mut guess = last.u.clone();
        if points.len() >= 2 {
            let prev = &points[points.len() - 2];
            let s = (lam - last.lambda) / (last.lambda - prev.lambda);
            let secant: Vec<f64> = last
                .u
                .iter()
                .zip(&prev.u)
                .map(|(a, b)| a + s * (a - b))
                .collect();
            if min_value(&secant) > -1.0 + kappa {
                guess = secant;
            }
        }
        let pr = problem.with_lambda(lam);
        let solved = newton_solve(&pr, &guess, thresholds)
            .map(|r| branch_point(&pr, r.state.u, kappa))
            .ok()
            .filter(|p| p.stability == Stability::Stable);
        match solved {
            Some(p) => points.push(p),
            None => {
                dl *= 0.5;
                if dl < FOLD_FACTOR * dlambda0 {
                    let last = points.last().unwrap();
                    let back = &points[points.len().saturating_sub(1 + FOLD_LOOKBACK)];
                    let fold = points.len() > 1 && last.gap <= 0.5 * back.gap;
                    let (fold_bracket, termination) = if fold {
                        (
                            Some((last.lambda, last.lambda + 2.0 * dl)),
                            BranchTermination::Fold,
                        )
                    } else {
                        (
                            None,
                            BranchTermination::NewtonStagnation {
                                lambda: last.lambda,
                            },
                        )
                    };
                    return Ok(SteadyBranch {
                        points,
                        fold_bracket,
                        termination,
                    });
                }
            }
        }
    }
}

/// Pull-in threshold from two independent estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct PullInEstimate {
    /// Bisection bracket: converged at `lo`, touchdown at `hi`.
    pub dynamic: (f64, f64),
    /// Initial upper bracket end (first touchdown while doubling from 1).
    pub lambda_hi: f64,
    pub branch: SteadyBranch,
    /// Relative distance between the brackets (`0` when they overlap).
    pub relative_gap: Option<f64>,
    /// Brackets overlap or lie within 2% of each other.
    pub agree: bool,
}

impl PullInEstimate {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("estimator,lo,hi\n");
        let _ = writeln!(s, "dynamic,{},{}", self.dynamic.0, self.dynamic.1);
        match self.branch.fold_bracket {
            Some((lo, hi)) => {
                let _ = writeln!(s, "fold,{lo},{hi}");
            }
            None => {
                let _ = writeln!(s, "fold,NaN,NaN");
            }
        }
        let gap = self.relative_gap.map_or("NaN".to_string(), |g| g.to_string());
        let _ = writeln!(s, "# relative_gap {gap} agree {}", self.agree);
        let _ = writeln!(s, "# fold_termination {}", self.branch.termination);
        s
    }
}

pub const BISECTION_STEPS: usize = 12;
const AGREEMENT: f64 = 0.02;
const MAX_DOUBLINGS: usize = 30;

/// `Ok(true)` on touchdown, `Ok(false)` on convergence.
fn touches_down(
    problem: &Problem,
    lambda: f64,
    thresholds: &SolverThresholds,
    t_end: f64,
) -> Result<bool> {
    let pr = problem.with_lambda(lambda);
    let (_, out) = run(&pr, &MembraneState::zero(pr.grid1()), thresholds, t_end)?;
    match out.kind {
        OutcomeKind::Touchdown => Ok(true),
        OutcomeKind::Converged => Ok(false),
        OutcomeKind::TimeLimit | OutcomeKind::BlowupNorm => Err(Error::Inconclusive(lambda)),
    }
}

/// Bisection on the evolution outcome from `u0 = 0`, cross-checked against
/// the fold of the steady branch.
///
/// With `parallel` the midpoint and both quarter points of the bracket are
/// evaluated concurrently and two bisection steps are taken per round. The
/// evaluated points on the bisection path are the same as in the serial
/// order, so the bracket is identical.
pub fn estimate_pull_in(
    problem: &Problem,
    thresholds: &SolverThresholds,
    t_end: f64,
    parallel: bool,
) -> Result<PullInEstimate> {
    let mut hi = 1.0;
    let mut doublings = 0;
    while !touches_down(problem, hi, thresholds, t_end)? {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::Inconclusive(hi));
        }
    }
    let lambda_hi = hi;
    let mut lo = 0.0;
    let mut steps = 0;
    while steps < BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if parallel && steps + 2 <= BISECTION_STEPS {
            let q1 = 0.5 * (lo + mid);
            let q3 = 0.5 * (mid + hi);
            let results: Vec<Result<bool>> = [mid, q1, q3]
                .par_iter()
                .map(|&l| touches_down(problem, l, thresholds, t_end))
                .collect();
            let mut it = results.into_iter();
            let (rm, r1, r3) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
            if rm? {
                hi = mid;
                if r1? {
                    hi = q1;
                } else {
                    lo = q1;
                }
            } else {
                lo = mid;
                if r3? {
                    hi = q3;
                } else {
                    lo = q3;
                }
            }
            steps += 2;
        } else {
            if touches_down(problem, mid, thresholds, t_end)? {
                hi = mid;
            } else {
                lo = mid;
            }
            steps += 1;
        }
    }
    let branch = continue_branch(problem, lambda_hi / 64.0, lambda_hi, thresholds)?;
    let relative_gap = branch.fold_bracket.map(|(flo, fhi)| {
        let sep = (flo.max(lo) - fhi.min(hi)).max(0.0);
        sep / (0.25 * (flo + fhi + lo + hi))
    });
    Ok(PullInEstimate {
        dynamic: (lo, hi),
        lambda_hi,
        branch,
        agree: relative_gap.map_or(false, |g| g < AGREEMENT),
        relative_gap,
    })
}
