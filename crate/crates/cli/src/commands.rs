//! Subcommand implementations. Each returns the process exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pullin_core::io::{format_profile, format_spectrum, write_profile};
use pullin_core::{
    continue_branch, estimate_pull_in, initial_profile, linear_stability, newton_solve, run,
    spectral_report, Error as CoreError, MembraneState, Model, OutcomeKind, Problem, SimOutcome,
    Trajectory,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_TIME_LIMIT: i32 = 1;
pub const EXIT_TOUCHDOWN: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_CONFIG: i32 = 5;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Solver(#[from] CoreError),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => EXIT_CONFIG,
            CommandError::Solver(e) => match e {
                CoreError::InitialTouchdown(_)
                | CoreError::IncompatibleInitial(_)
                | CoreError::GridMismatch(_)
                | CoreError::InvalidParams(_)
                | CoreError::InvalidThresholds(_)
                | CoreError::EvenGrid(_)
                | CoreError::GridTooSmall { .. }
                | CoreError::Parse(_) => EXIT_CONFIG,
                CoreError::Io(_) => EXIT_CONFIG,
                _ => EXIT_SOLVER,
            },
            CommandError::Output { .. } => EXIT_SOLVER,
        }
    }
}

type Result<T> = std::result::Result<T, CommandError>;

pub fn outcome_exit(kind: OutcomeKind) -> i32 {
    match kind {
        OutcomeKind::Converged => EXIT_OK,
        OutcomeKind::TimeLimit => EXIT_TIME_LIMIT,
        OutcomeKind::Touchdown => EXIT_TOUCHDOWN,
        OutcomeKind::BlowupNorm => EXIT_BLOWUP,
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CommandError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Create the output directory and write `manifest.txt`.
fn prepare(cfg: &RunConfig, command: &str) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        CommandError::Config(format!(
            "output_dir {} is not writable: {e}",
            cfg.output_dir.display()
        ))
    })?;
    let mut m = String::new();
    let _ = writeln!(m, "# pullin-cli {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "# command {command}");
    let _ = writeln!(
        m,
        "# blowup monitor: discrete H2d norm (values plus second differences), a surrogate for the H4 norm"
    );
    m.push_str(&cfg.render());
    write(&cfg.output_dir, "manifest.txt", &m)
}

fn problem(cfg: &RunConfig) -> Result<Problem> {
    Ok(Problem::new(cfg.params, cfg.nx, cfg.neta)?)
}

fn start(cfg: &RunConfig, pr: &Problem) -> Result<MembraneState> {
    Ok(initial_profile(&cfg.u0, pr.grid1(), cfg.params.bc)?)
}

const OUTCOME_HEADER: &str = "kind,t_final,min_u,reason\n";

pub fn simulate(cfg: &RunConfig) -> Result<i32> {
    prepare(cfg, "simulate")?;
    let pr = problem(cfg)?;
    let u0 = start(cfg, &pr)?;
    let (traj, out) = run(&pr, &u0, &cfg.thresholds, cfg.t_end)?;
    let dir = &cfg.output_dir;
    write(dir, "trajectory.csv", &traj.to_csv())?;
    write(dir, "final_profile.csv", &format_profile(pr.grid1(), &traj.final_state.u))?;
    write(dir, "outcome.txt", &format!("{OUTCOME_HEADER}{}\n", out.record()))?;
    println!("{} at t={} (min u {})", out.kind, out.t_final, out.min_u);
    Ok(outcome_exit(out.kind))
}

pub fn steady(cfg: &RunConfig) -> Result<i32> {
    prepare(cfg, "steady")?;
    let pr = problem(cfg)?;
    let u0 = start(cfg, &pr)?;
    let rep = newton_solve(&pr, &u0.u, &cfg.thresholds)?;
    let stab = linear_stability(&pr, &rep.state.u, cfg.thresholds.kappa_stop)?;
    let dir = &cfg.output_dir;
    write(dir, "steady_profile.csv", &format_profile(pr.grid1(), &rep.state.u))?;
    let mut spec = format!("# gap={} stability={}\nre,im\n", stab.gap, stab.stability);
    for z in &stab.eigenvalues {
        let _ = writeln!(spec, "{},{}", z.re, z.im);
    }
    write(dir, "steady_spectrum.csv", &spec)?;
    let summary = format!(
        "lambda,iterations,residual,min_u,stability,gap\n{},{},{},{},{},{}\n",
        pr.lambda(),
        rep.iterations,
        rep.residual,
        rep.state.min(),
        stab.stability,
        stab.gap
    );
    write(dir, "steady.csv", &summary)?;
    println!(
        "steady state at lambda={} after {} iterations: min u {}, {} (gap {})",
        pr.lambda(),
        rep.iterations,
        rep.state.min(),
        stab.stability,
        stab.gap
    );
    Ok(EXIT_OK)
}

pub fn branch(cfg: &RunConfig) -> Result<i32> {
    prepare(cfg, "branch")?;
    let pr = problem(cfg)?;
    let br = continue_branch(&pr, cfg.dlambda0, cfg.lambda_max, &cfg.thresholds)?;
    let dir = &cfg.output_dir;
    write(dir, "branch.csv", &br.to_csv())?;
    let profiles = dir.join("branch");
    fs::create_dir_all(&profiles).map_err(|e| CommandError::Output {
        path: profiles.display().to_string(),
        message: e.to_string(),
    })?;
    for (k, p) in br.points.iter().enumerate() {
        write_profile(&profiles.join(format!("profile_{k:04}.csv")), pr.grid1(), &p.u)?;
    }
    println!(
        "{} branch points up to lambda={}; termination: {}",
        br.points.len(),
        br.points.last().map_or(0.0, |p| p.lambda),
        br.termination
    );
    if let Some((lo, hi)) = br.fold_bracket {
        println!("fold bracket [{lo}, {hi}]");
    }
    Ok(EXIT_OK)
}

pub fn pullin(cfg: &RunConfig, parallel: bool) -> Result<i32> {
    prepare(cfg, "pullin")?;
    let pr = problem(cfg)?;
    let est = estimate_pull_in(&pr, &cfg.thresholds, cfg.t_end, parallel)?;
    let dir = &cfg.output_dir;
    write(dir, "pullin.csv", &est.to_csv())?;
    write(dir, "branch.csv", &est.branch.to_csv())?;
    println!("dynamic bracket [{}, {}]", est.dynamic.0, est.dynamic.1);
    match est.branch.fold_bracket {
        Some((lo, hi)) => println!("fold bracket [{lo}, {hi}]"),
        None => println!("no fold found ({})", est.branch.termination),
    }
    println!("agree: {}", est.agree);
    Ok(EXIT_OK)
}

pub fn spectrum(cfg: &RunConfig) -> Result<i32> {
    prepare(cfg, "spectrum")?;
    let pr = problem(cfg)?;
    let w = start(cfg, &pr)?;
    let rep = spectral_report(pr.grid1(), &w.u, pr.mechanics())?;
    write(&cfg.output_dir, "spectrum.csv", &format_spectrum(&rep))?;
    println!(
        "max Re {} against bound {} (margin {}, tolerance {})",
        rep.max_real(),
        -rep.bound,
        rep.margin,
        rep.tolerance
    );
    Ok(EXIT_OK)
}

/// Evolution and steady state of one model; failures become text.
struct ModelResult {
    model: Model,
    evolution: std::result::Result<(Trajectory, SimOutcome), String>,
    steady: std::result::Result<(Vec<f64>, f64), String>,
}

fn one_model(cfg: &RunConfig, model: Model) -> ModelResult {
    let params = cfg.params.with_model(model);
    let setup = params
        .validate()
        .and_then(|_| Problem::new(params, cfg.nx, cfg.neta))
        .and_then(|pr| initial_profile(&cfg.u0, pr.grid1(), params.bc).map(|u| (pr, u)));
    let (pr, u0) = match setup {
        Ok(v) => v,
        Err(e) => {
            return ModelResult {
                model,
                evolution: Err(e.to_string()),
                steady: Err(e.to_string()),
            }
        }
    };
    let evolution = run(&pr, &u0, &cfg.thresholds, cfg.t_end).map_err(|e| e.to_string());
    let steady = newton_solve(&pr, &vec![0.0; pr.n()], &cfg.thresholds)
        .map(|r| (r.state.u, r.residual))
        .map_err(|e| e.to_string());
    ModelResult {
        model,
        evolution,
        steady,
    }
}

fn clean(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

pub fn compare(cfg: &RunConfig, parallel: bool) -> Result<i32> {
    prepare(cfg, "compare")?;
    let results: Vec<ModelResult> = if parallel {
        Model::ALL.par_iter().map(|&m| one_model(cfg, m)).collect()
    } else {
        Model::ALL.iter().map(|&m| one_model(cfg, m)).collect()
    };
    let mut table = String::from("model,outcome,t_final,min_u_final,steady_min_u,steady_residual\n");
    for r in &results {
        let (outcome, t, m) = match &r.evolution {
            Ok((_, o)) => (o.kind.to_string(), o.t_final.to_string(), o.min_u.to_string()),
            Err(e) => (format!("error: {}", clean(e)), "NaN".into(), "NaN".into()),
        };
        let (sm, sr) = match &r.steady {
            Ok((u, res)) => (
                u.iter().cloned().fold(f64::INFINITY, f64::min).to_string(),
                res.to_string(),
            ),
            Err(e) => (format!("error: {}", clean(e)), "NaN".into()),
        };
        let _ = writeln!(table, "{},{outcome},{t},{m},{sm},{sr}", r.model);
    }
    let grid = pullin_core::Grid1D::new(cfg.nx).map_err(CommandError::Solver)?;
    let mut profiles = String::from("x");
    for r in &results {
        let _ = write!(profiles, ",evolution_{}", r.model);
    }
    for r in &results {
        let _ = write!(profiles, ",steady_{}", r.model);
    }
    profiles.push('\n');
    for i in 0..grid.n() {
        let _ = write!(profiles, "{}", grid.x(i));
        for r in &results {
            let v = r.evolution.as_ref().map_or(f64::NAN, |(t, _)| t.final_state.u[i]);
            let _ = write!(profiles, ",{v}");
        }
        for r in &results {
            let v = r.steady.as_ref().map_or(f64::NAN, |(u, _)| u[i]);
            let _ = write!(profiles, ",{v}");
        }
        profiles.push('\n');
    }
    write(&cfg.output_dir, "compare.csv", &table)?;
    write(&cfg.output_dir, "compare_profiles.csv", &profiles)?;
    print!("{table}");
    Ok(EXIT_OK)
}

/// One evolution run per `lambda`; the table row order follows `lambdas`.
pub fn sweep_table(cfg: &RunConfig, lambdas: &[f64], parallel: bool) -> String {
    let row = |&lambda: &f64| -> String {
        let params = cfg.params.with_lambda(lambda);
        let result = Problem::new(params, cfg.nx, cfg.neta)
            .and_then(|pr| {
                let u0 = initial_profile(&cfg.u0, pr.grid1(), params.bc)?;
                run(&pr, &u0, &cfg.thresholds, cfg.t_end)
            })
            .map(|(_, o)| o);
        match result {
            Ok(o) => format!("{lambda},{},{},{}\n", o.kind, o.t_final, o.min_u),
            Err(e) => format!("{lambda},error: {},NaN,NaN\n", clean(&e.to_string())),
        }
    };
    let rows: Vec<String> = if parallel {
        lambdas.par_iter().map(row).collect()
    } else {
        lambdas.iter().map(row).collect()
    };
    let mut s = String::from("lambda,outcome,t_final,min_u_final\n");
    rows.iter().for_each(|r| s.push_str(r));
    s
}

pub fn sweep(cfg: &RunConfig, lambdas: &[f64], parallel: bool) -> Result<i32> {
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(CommandError::Config(format!(
            "--lambdas: values must be nonnegative, got {bad}"
        )));
    }
    prepare(cfg, "sweep")?;
    let table = sweep_table(cfg, lambdas, parallel);
    write(&cfg.output_dir, "sweep.csv", &table)?;
    print!("{table}");
    Ok(EXIT_OK)
}
