//! Linearly implicit time stepping of `u_t + A(u) u = -lambda g(u) - h(u)`.
//!
//! Each step freezes `A`, `g` and `h` at the current state and solves
//! `(I + dt A(u^n)) (u^{n+1} - u^n) = -dt R(u^n)` with
//! `R(u) = A(u) u + lambda g(u) + h(u)`, which is the same update as
//! `(I + dt A(u^n)) u^{n+1} = u^n - dt (lambda g(u^n) + h(u^n))` but keeps
//! the increment free of cancellation near steady states.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{is_even, symmetrize};
use crate::params::{Model, SolverThresholds};
use crate::problem::Problem;
use crate::state::{discrete_norm, min_value, MembraneState, NormKind};
use crate::elliptic::{electrostatic_energy, small_gap_trace, trace_rhs};
use crate::operators::mechanical_energy;

/// Target number of stored states; storage stays within twice this.
const STORE_TARGET: usize = 1000;

/// A state together with its forcing and energy, sharing one potential solve.
#[derive(Debug, Clone)]
struct Evaluated {
    state: MembraneState,
    /// `lambda g(u) + h(u)`
    forcing: Vec<f64>,
    energy: f64,
}

fn evaluate(problem: &Problem, state: MembraneState, kappa_stop: f64) -> Result<Evaluated> {
    let u = &state.u;
    let params = &problem.params;
    let lambda = params.lambda;
    let mut forcing = vec![0.0; u.len()];
    let mut electro = 0.0;
    if lambda != 0.0 {
        let m = min_value(u);
        if !(m >= -1.0 + kappa_stop) {
            return Err(Error::DegenerateDomain(m));
        }
        let g = match params.model {
            Model::SmallGap => {
                let f: Vec<f64> = u.iter().map(|v| 1.0 / (1.0 + v)).collect();
                electro = lambda * problem.grid1().trapezoid(&f);
                small_gap_trace(u)
            }
            Model::Full | Model::SmallDeformation => {
                let field = problem.potential(u, kappa_stop)?;
                electro = electrostatic_energy(&field, u, params);
                trace_rhs(&field, u, params)
            }
        };
        for (f, g) in forcing.iter_mut().zip(g.g.iter()) {
            *f = lambda * g;
        }
    }
    let h = problem.h(u);
    let n = u.len();
    for i in 1..n - 1 {
        forcing[i] += h[i];
    }
    forcing[0] = 0.0;
    forcing[n - 1] = 0.0;
    let energy = mechanical_energy(problem.grid1(), u, problem.mechanics()) - electro;
    Ok(Evaluated {
        state,
        forcing,
        energy,
    })
}

/// Result of one attempted step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    Accepted(MembraneState),
    /// The candidate left the admissible set and `dt > dt_min`; retry smaller.
    Rejected { min_u: f64 },
}

fn increment(problem: &Problem, u: &[f64], forcing: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = u.len();
    let au = problem.apply_operator(u, u);
    let rhs: Vec<f64> = (1..n - 1).map(|i| -dt * (au[i] + forcing[i])).collect();
    let mut m = problem.operator(u);
    m.scale(dt);
    let m = m.shifted(1.0);
    let inner = m.solve(&rhs).ok_or(Error::ImplicitStepSingular)?;
    let mut delta = vec![0.0; n];
    delta[1..n - 1].copy_from_slice(&inner);
    if is_even(u) {
        symmetrize(&mut delta);
    }
    Ok(delta)
}

fn try_step(
    problem: &Problem,
    current: &Evaluated,
    dt: f64,
    thresholds: &SolverThresholds,
) -> Result<(StepResult, f64)> {
    let u = &current.state.u;
    let delta = increment(problem, u, &current.forcing, dt)?;
    let next: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
    let dnorm = discrete_norm(problem.grid1(), &delta, NormKind::L2);
    let m = min_value(&next);
    if !(m > -1.0 + thresholds.kappa_stop) && dt > thresholds.dt_min {
        return Ok((StepResult::Rejected { min_u: m }, dnorm));
    }
    Ok((
        StepResult::Accepted(MembraneState::new(next, current.state.t + dt)),
        dnorm,
    ))
}

/// One linearly implicit Euler step from `state`.
pub fn step(
    problem: &Problem,
    state: &MembraneState,
    dt: f64,
    thresholds: &SolverThresholds,
) -> Result<StepResult> {
    let current = evaluate(problem, state.clone(), thresholds.kappa_stop)?;
    Ok(try_step(problem, &current, dt, thresholds)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    Converged,
    Touchdown,
    BlowupNorm,
    TimeLimit,
}

impl OutcomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Converged => "converged",
            OutcomeKind::Touchdown => "touchdown",
            OutcomeKind::BlowupNorm => "blowup_norm",
            OutcomeKind::TimeLimit => "time_limit",
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Terminal classification of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub kind: OutcomeKind,
    pub t_final: f64,
    pub min_u: f64,
    pub l2_u: f64,
    pub h2d_u: f64,
    pub last_dt: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Touchdown and norm-cap triggers fired on the same step.
    pub ambiguous: bool,
    pub reason: String,
}

impl SimOutcome {
    /// `kind,t_final,min_u,reason`
    pub fn record(&self) -> String {
        format!(
            "{},{},{},{}",
            self.kind,
            self.t_final,
            self.min_u,
            self.reason.replace(',', ";")
        )
    }
}

/// Scalar history of every accepted step plus a decimated set of states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub min_u: Vec<f64>,
    pub l2_u: Vec<f64>,
    pub h2d_u: Vec<f64>,
    /// `NaN` where the final state is outside the domain of the energy.
    pub energy: Vec<f64>,
    /// Step that produced each row (`0` for the initial row).
    pub dt: Vec<f64>,
    /// Stored states, strictly increasing in time, all with `min(u) > -1`.
    pub states: Vec<MembraneState>,
    /// Last accepted state.
    pub final_state: MembraneState,
    stride: usize,
    accepted: usize,
}

impl Trajectory {
    fn push_row(&mut self, problem: &Problem, s: &MembraneState, energy: f64, dt: f64) {
        let g = problem.grid1();
        self.times.push(s.t);
        self.min_u.push(s.min());
        self.l2_u.push(discrete_norm(g, &s.u, NormKind::L2));
        self.h2d_u.push(discrete_norm(g, &s.u, NormKind::H2d));
        self.energy.push(energy);
        self.dt.push(dt);
    }

    fn store(&mut self, s: &MembraneState) {
        if self.accepted % self.stride == 0 && s.min() > -1.0 {
            self.states.push(s.clone());
            if self.states.len() >= 2 * STORE_TARGET {
                let kept: Vec<MembraneState> = self.states.iter().step_by(2).cloned().collect();
                self.states = kept;
                self.stride *= 2;
            }
        }
    }

    fn finish(&mut self, s: &MembraneState) {
        if s.min() > -1.0 && self.states.last().map_or(true, |l| l.t < s.t) {
            self.states.push(s.clone());
        }
        self.final_state = s.clone();
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,min_u,l2_u,h2d_u,energy,dt`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("t,min_u,l2_u,h2d_u,energy,dt\n");
        for k in 0..self.times.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                self.times[k], self.min_u[k], self.l2_u[k], self.h2d_u[k], self.energy[k], self.dt[k]
            );
        }
        s
    }
}

fn energy_or_nan(problem: &Problem, s: &MembraneState) -> f64 {
    if s.min() > -1.0 {
        problem.energy(&s.u, 0.0).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    }
}

/// Integrate from `u0` until steadiness, touchdown, norm blowup or `t_end`.
pub fn run(
    problem: &Problem,
    u0: &MembraneState,
    thresholds: &SolverThresholds,
    t_end: f64,
) -> Result<(Trajectory, SimOutcome)> {
    thresholds.validate()?;
    let grid = problem.grid1();
    let n = grid.n();
    if u0.u.len() != n {
        return Err(Error::GridMismatch(format!(
            "initial profile has {} values for {} nodes",
            u0.u.len(),
            n
        )));
    }
    let m0 = u0.min();
    if !(m0 > -1.0) {
        return Err(Error::InitialTouchdown(m0));
    }
    let kappa = thresholds.kappa_stop;
    let mut traj = Trajectory {
        stride: 1,
        final_state: u0.clone(),
        ..Default::default()
    };
    let outcome = |kind: OutcomeKind, s: &MembraneState, last_dt, steps, rejected, ambiguous, reason: String| {
        SimOutcome {
            kind,
            t_final: s.t,
            min_u: s.min(),
            l2_u: discrete_norm(grid, &s.u, NormKind::L2),
            h2d_u: discrete_norm(grid, &s.u, NormKind::H2d),
            last_dt,
            steps,
            rejected,
            ambiguous,
            reason,
        }
    };
    if m0 <= -1.0 + kappa {
        traj.push_row(problem, u0, energy_or_nan(problem, u0), 0.0);
        traj.finish(u0);
        let o = outcome(
            OutcomeKind::Touchdown,
            u0,
            0.0,
            0,
            0,
            false,
            "initial state within kappa_stop of the ground plate".into(),
        );
        return Ok((traj, o));
    }

    let mut current = evaluate(problem, u0.clone(), kappa)?;
    traj.push_row(problem, &current.state, current.energy, 0.0);
    traj.store(&current.state);
    let mut dt = thresholds.dt0;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    // Relative slack so that rounding in `t` cannot produce a sliver step.
    let t_slack = 1e-12 * t_end.abs().max(1.0);
    loop {
        let t = current.state.t;
        if t >= t_end - t_slack {
            let s = current.state.clone();
            traj.finish(&s);
            let o = outcome(
                OutcomeKind::TimeLimit,
                &s,
                dt,
                steps,
                rejected,
                false,
                format!("reached t_end={t_end}"),
            );
            return Ok((traj, o));
        }
        let dt_try = dt.min(t_end - t);
        let (res, dnorm) = try_step(problem, &current, dt_try, thresholds)?;
        let next = match res {
            StepResult::Rejected { .. } => {
                rejected += 1;
                dt = (dt / 2.0).max(thresholds.dt_min);
                continue;
            }
            StepResult::Accepted(s) => s,
        };
        steps += 1;
        traj.accepted += 1;
        let touchdown = !(next.min() > -1.0 + kappa);
        let h2d = discrete_norm(grid, &next.u, NormKind::H2d);
        let blowup = !(h2d <= thresholds.norm_cap);
        if touchdown || blowup {
            traj.push_row(problem, &next, energy_or_nan(problem, &next), dt_try);
            traj.finish(&next);
            let ambiguous = touchdown && blowup;
            let (kind, reason) = if touchdown {
                (
                    OutcomeKind::Touchdown,
                    format!("min(u) <= -1 + kappa_stop with dt at dt_min={}", thresholds.dt_min),
                )
            } else {
                (
                    OutcomeKind::BlowupNorm,
                    format!("H2d norm {h2d:e} exceeds norm_cap={}", thresholds.norm_cap),
                )
            };
            let reason = if ambiguous {
                format!("{reason} (ambiguous: both triggers fired)")
            } else {
                reason
            };
            let o = outcome(kind, &next, dt_try, steps, rejected, ambiguous, reason);
            return Ok((traj, o));
        }
        current = evaluate(problem, next, kappa)?;
        traj.push_row(problem, &current.state, current.energy, dt_try);
        traj.store(&current.state);
        if dnorm / dt_try < thresholds.steady_tol {
            let s = current.state.clone();
            traj.finish(&s);
            let o = outcome(
                OutcomeKind::Converged,
                &s,
                dt_try,
                steps,
                rejected,
                false,
                format!("||du||/dt below steady_tol={}", thresholds.steady_tol),
            );
            return Ok((traj, o));
        }
        dt = (1.2 * dt).min(thresholds.dt_max);
    }
}

/// Exponential decay rate of `||u(t) - U||_2` over the last decade of decay.
pub fn decay_rate(trajectory: &Trajectory, steady: &[f64]) -> Result<f64> {
    let unreliable = |m: &str| Err(Error::DecayFitUnreliable(m.to_string()));
    let states = &trajectory.states;
    if states.len() < 4 {
        return unreliable("fewer than 4 stored states");
    }
    if steady.len() != states[0].u.len() {
        return Err(Error::GridMismatch("steady profile length".into()));
    }
    if !(trajectory.final_state.min() > -1.0) {
        return unreliable("trajectory touched down");
    }
    let n = steady.len();
    let h = 2.0 / (n - 1) as f64;
    let dist: Vec<f64> = states
        .iter()
        .map(|s| {
            let sq: Vec<f64> = s.u.iter().zip(steady).map(|(a, b)| (a - b) * (a - b)).collect();
            let inner: f64 = sq[1..n - 1].iter().sum();
            ((inner + 0.5 * (sq[0] + sq[n - 1])) * h).sqrt()
        })
        .collect();
    let d_end = *dist.last().unwrap();
    let d_max = dist.iter().cloned().fold(0.0, f64::max);
    if !(d_end > 0.0) || dist.iter().any(|&d| d < d_end) {
        return unreliable("distance does not end at its minimum");
    }
    if d_max < 100.0 * d_end {
        return unreliable("less than two decades of decay");
    }
    let start = dist
        .iter()
        .rposition(|&d| d > 10.0 * d_end)
        .map_or(0, |k| k + 1);
    let window = start..dist.len();
    if window.len() < 4 {
        return unreliable("fewer than 4 samples in the last decade");
    }
    if dist[window.clone()].windows(2).any(|w| w[1] >= w[0]) {
        return unreliable("non-monotone tail");
    }
    let ts: Vec<f64> = window.clone().map(|k| states[k].t).collect();
    let ys: Vec<f64> = window.map(|k| dist[k].ln()).collect();
    let len = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / len;
    let ym = ys.iter().sum::<f64>() / len;
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let rate = -sxy / sxx;
    if !(rate > 0.0) {
        return unreliable("non-positive fitted rate");
    }
    Ok(rate)
}
