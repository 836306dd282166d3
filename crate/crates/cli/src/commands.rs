//! Subcommand implementations.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;
use spheroidal::energetics::{self, DensityGrid, GridConfig, ParsevalConfig};
use spheroidal::equilibrium::{self, EquilibriumSolution, LimitingEquilibrium};
use spheroidal::particles::{self, FlowOptions, ParticleConfig, ShapeFit};
use spheroidal::potentials::{self, Spheroid};
use spheroidal::{EnergyParams, Error};

use crate::output::{csv_preamble, json_envelope, read_result, Artifact};
use crate::{LimitArgs, MapArgs, ParsevalArgs, SimulateArgs, SolveArgs, SweepArgs, VerifyArgs};

/// Failure of a subcommand, mapped to an exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub struct Outcome {
    pub artifact: Artifact,
    /// Human-readable notes for standard error.
    pub notes: Vec<String>,
    pub passed: bool,
}

impl Outcome {
    fn ok(artifact: Artifact) -> Self {
        Self {
            artifact,
            notes: Vec::new(),
            passed: true,
        }
    }
}

type CmdResult = Result<Outcome, CliError>;

fn solvable(n: usize, alpha: f64) -> Result<EnergyParams, CliError> {
    EnergyParams::for_solving(n, alpha).map_err(|e| CliError::Config(e.to_string()))
}

pub fn solve(args: &SolveArgs) -> CmdResult {
    if !(args.tol > 0.0) {
        return Err(CliError::Config("--tol must be positive".into()));
    }
    let p = solvable(args.model.n, args.model.alpha)?;
    let sol = equilibrium::solve_equilibrium(p.alpha, p.n)?;
    let residual = equilibrium::stationarity_f(sol.t, p.alpha, p.n)?;
    if residual.abs() > args.tol {
        return Err(CliError::Numerical(format!(
            "stationarity residual {residual:e} exceeds --tol {:e}",
            args.tol
        )));
    }
    Ok(Outcome::ok(json_envelope("solve", args, &sol)))
}

#[derive(Serialize)]
struct SweepRow {
    alpha: f64,
    t: f64,
    a: f64,
    b: f64,
    c_alpha: f64,
    energy: f64,
}

pub fn sweep(args: &SweepArgs) -> CmdResult {
    let alpha_max = args.alpha_max.unwrap_or(args.n as f64 - 2.0);
    if args.steps < 2 {
        return Err(CliError::Config("--steps must be at least 2".into()));
    }
    if !(args.alpha_min < alpha_max) {
        return Err(CliError::Config(
            "--alpha-min must be below --alpha-max".into(),
        ));
    }
    solvable(args.n, args.alpha_min)?;
    solvable(args.n, alpha_max)?;
    let mut rows = Vec::with_capacity(args.steps);
    for k in 0..args.steps {
        let alpha =
            args.alpha_min + (alpha_max - args.alpha_min) * k as f64 / (args.steps - 1) as f64;
        let sol = equilibrium::solve_equilibrium(alpha, args.n)?;
        let energy = energetics::exact_energy(&sol.spheroid(), alpha)?;
        rows.push(SweepRow {
            alpha,
            t: sol.t,
            a: sol.a,
            b: sol.b,
            c_alpha: sol.c_alpha,
            energy,
        });
    }
    let decreasing = rows.windows(2).all(|w| w[1].t < w[0].t);
    let mut text = csv_preamble("sweep", args);
    text.push_str("alpha,t,a,b,c_alpha,energy\n");
    for r in &rows {
        text.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.alpha, r.t, r.a, r.b, r.c_alpha, r.energy
        ));
    }
    text.push_str(&format!("# t_strictly_decreasing={decreasing}\n"));
    let mut out = Outcome::ok(Artifact::Text(text));
    out.notes
        .push(format!("t strictly decreasing in alpha: {decreasing}"));
    Ok(out)
}

pub fn potential_map(args: &MapArgs) -> CmdResult {
    if args.steps < 2 || !(args.extent > 0.0) {
        return Err(CliError::Config(
            "--steps must be >= 2 and --extent positive".into(),
        ));
    }
    let n = args.model.n;
    let alpha = args.model.alpha;
    let s = match (args.a, args.b) {
        (Some(a), Some(b)) => {
            EnergyParams::new(n, alpha).map_err(|e| CliError::Config(e.to_string()))?;
            Spheroid::new(a, b, n)?
        }
        _ => {
            let p = solvable(n, alpha)?;
            equilibrium::solve_equilibrium(p.alpha, p.n)?.spheroid()
        }
    };
    let half = args.extent * s.a.max(s.b);
    let rows = potentials::potential_map(
        &s,
        alpha,
        (-half, half),
        (0.0, half),
        (args.steps, args.steps),
    )?;
    let mut buf = csv_preamble("potential-map", args).into_bytes();
    buf.extend(format!("# spheroid a={:.17e} b={:.17e}\n", s.a, s.b).bytes());
    potentials::write_potential_map(&rows, &mut buf)?;
    Ok(Outcome::ok(Artifact::Text(
        String::from_utf8_lossy(&buf).into_owned(),
    )))
}

#[derive(Serialize)]
struct VerifyResult<'a> {
    solution: &'a EquilibriumSolution,
    report: &'a energetics::ElReport,
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let sol = match &args.solution {
        Some(path) => {
            let value = read_result(path).map_err(CliError::Config)?;
            let sol: EquilibriumSolution = serde_json::from_value(value).map_err(|e| {
                CliError::Config(format!("{} is not a solution: {e}", path.display()))
            })?;
            sol.validate()?;
            sol
        }
        None => {
            let p = solvable(args.model.n, args.model.alpha)?;
            equilibrium::solve_equilibrium(p.alpha, p.n)?
        }
    };
    if !(args.el_tol > 0.0) || !(args.z_max_factor > 1.0) {
        return Err(CliError::Config(
            "--el-tol must be positive and --z-max-factor above 1".into(),
        ));
    }
    let grid = GridConfig {
        interior_points: args.interior_points,
        z_points: args.z_points,
        z_max_factor: args.z_max_factor,
        smoke_steps: args.smoke_steps,
    };
    let report = energetics::verify(&sol, &grid, args.el_tol)?;
    let passed = report.passed;
    let mut out = Outcome::ok(json_envelope(
        "verify",
        args,
        &VerifyResult {
            solution: &sol,
            report: &report,
        },
    ));
    out.passed = passed;
    if !passed {
        out.notes.push("verification failed; see the report".into());
    }
    Ok(out)
}

#[derive(Serialize)]
struct SimulateResult {
    seed: u64,
    alpha: f64,
    n: usize,
    particles: usize,
    steps: usize,
    converged: bool,
    stagnated: bool,
    initial_energy: f64,
    final_energy: f64,
    fit: ShapeFit,
    /// Continuum prediction, when alpha is in the solvable range.
    equilibrium: Option<EquilibriumSolution>,
    snapshot: Option<String>,
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let n = args.model.n;
    let params =
        EnergyParams::new(n, args.model.alpha).map_err(|e| CliError::Config(e.to_string()))?;
    if !(args.model.alpha > -1.0) {
        return Err(CliError::Config(
            "the particle energy needs alpha > -1".into(),
        ));
    }
    if args.particles < n + 1 || args.max_iterations == 0 || !(args.rel_decrease > 0.0) {
        return Err(CliError::Config(
            "--particles must exceed n, --max-iterations be positive and --rel-decrease positive"
                .into(),
        ));
    }
    let cfg = ParticleConfig::uniform_ball(args.particles, params, args.seed)?;
    let opts = FlowOptions {
        max_iterations: args.max_iterations,
        rel_decrease: args.rel_decrease,
        ..FlowOptions::default()
    };
    let res = particles::run(cfg, &opts)?;
    let fit = particles::fit_shape(&res.config.points, n)?;
    let snapshot = match &args.snapshot {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            w.write_all(csv_preamble("simulate", args).as_bytes())?;
            particles::write_snapshot(&res.config, &mut w)?;
            w.flush()?;
            Some(path.display().to_string())
        }
        None => None,
    };
    let equilibrium = match EnergyParams::for_solving(n, args.model.alpha) {
        Ok(_) => Some(equilibrium::solve_equilibrium(args.model.alpha, n)?),
        Err(_) => None,
    };
    let mut notes = Vec::new();
    if res.stagnated {
        notes.push("flow stagnated: step size underflowed before convergence".into());
    } else if !res.converged {
        notes.push("flow hit --max-iterations before convergence".into());
    }
    let result = SimulateResult {
        seed: args.seed,
        alpha: args.model.alpha,
        n,
        particles: args.particles,
        steps: res.config.iteration,
        converged: res.converged,
        stagnated: res.stagnated,
        initial_energy: res.initial_energy,
        final_energy: res.final_energy,
        fit,
        equilibrium,
        snapshot,
    };
    Ok(Outcome {
        artifact: json_envelope("simulate", args, &result),
        notes,
        passed: true,
    })
}

#[derive(Serialize)]
struct LimitRow {
    eps: f64,
    alpha: f64,
    t: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct LimitResult {
    limit: LimitingEquilibrium,
    residual: f64,
    table: Vec<LimitRow>,
}

pub fn limit(args: &LimitArgs) -> CmdResult {
    spheroidal::special_functions::check_dim(args.n)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if args.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(CliError::Config("every --eps must lie in (0, 1)".into()));
    }
    let limit = equilibrium::limiting_equilibrium(args.n)?;
    let residual = equilibrium::stationarity_f(limit.t_star, -1.0, args.n)?;
    let table = args
        .eps
        .iter()
        .map(|&eps| {
            let alpha = -1.0 + eps;
            let t = equilibrium::solve_aspect_ratio(alpha, args.n)?;
            Ok(LimitRow {
                eps,
                alpha,
                t,
                abs_diff: (t - limit.t_star).abs(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Outcome::ok(json_envelope(
        "limit",
        args,
        &LimitResult {
            limit,
            residual,
            table,
        },
    )))
}

pub fn parseval(args: &ParsevalArgs) -> CmdResult {
    if args.grid < 4 || !(args.box_factor >= 1.0) || !(args.bound > 0.0) {
        return Err(CliError::Config(
            "--grid must be >= 4, --box-factor >= 1 and --bound positive".into(),
        ));
    }
    let density = DensityGrid::smooth_bump(args.grid, 1.0, args.box_factor)?;
    let cfg = ParsevalConfig {
        bound: args.bound,
        ..ParsevalConfig::default()
    };
    let result = energetics::parseval_check_with(&density, args.alpha, &cfg)?;
    let mut out = Outcome::ok(json_envelope("parseval", args, &result));
    if let Some(w) = &result.warning {
        out.notes.push(format!("warning: {w}"));
    }
    Ok(out)
}
