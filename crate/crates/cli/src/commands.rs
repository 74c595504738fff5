use std::path::{Path, PathBuf};

use serde_json::json;

use covsteer_core::controller::expected_cost;
use covsteer_core::montecarlo::{covariance_ode, mean_ode, simulate as run_mc, PathEnsemble};
use covsteer_core::{
    check_controllability, empirical_moments, synthesize, ControllabilityReport, Error, GainSchedule, LtvSystem, Scenario,
    SteeringProblem, Synthesis,
};

use crate::output;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_SIMULATION: u8 = 4;

const SIM_SCHEDULE_POINTS: usize = 20_001;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Setup,
    Solve,
    Simulate,
}

fn fail(stage: Stage, e: Error) -> CliError {
    let code = match (&e, stage) {
        (
            Error::InvalidModel(_)
            | Error::Dimension { .. }
            | Error::DerivativeOrder { .. }
            | Error::Scenario(_)
            | Error::KernelMismatch { .. }
            | Error::UnreachableFromDeterministicStart { .. }
            | Error::OutOfScope(_)
            | Error::Io(_),
            _,
        ) => EXIT_VALIDATION,
        (Error::Simulation(_), _) | (_, Stage::Simulate) => EXIT_SIMULATION,
        _ => EXIT_SOLVER,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

#[derive(Debug, Default)]
pub struct SimOverrides {
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default)]
pub struct EmitOptions {
    pub out: Option<PathBuf>,
    pub gains: Option<PathBuf>,
    pub pi: Option<PathBuf>,
}

/// A file path naming a scenario, or the name of a built-in one.
fn load(source: &str) -> Result<Scenario, CliError> {
    let path = Path::new(source);
    if !path.exists() {
        if let Some(s) = Scenario::builtin(source) {
            return Ok(s);
        }
    }
    Scenario::load(path).map_err(|e| fail(Stage::Setup, e))
}

struct Loaded {
    scenario: Scenario,
    system: LtvSystem,
    problem: SteeringProblem,
    out: PathBuf,
}

fn prepare(scenario: Scenario, out: Option<PathBuf>) -> Result<Loaded, CliError> {
    let system = scenario.build_system().map_err(|e| fail(Stage::Setup, e))?;
    let problem = scenario.build_problem().map_err(|e| fail(Stage::Setup, e))?;
    problem.check_against(&system).map_err(|e| fail(Stage::Setup, e))?;
    system
        .validate(&scenario.check_grid())
        .into_result()
        .map_err(|e| fail(Stage::Setup, e))?;
    let out = out.unwrap_or_else(|| PathBuf::from(&scenario.output.dir));
    Ok(Loaded {
        scenario,
        system,
        problem,
        out,
    })
}

fn print_report(name: &str, r: &ControllabilityReport) {
    println!("controllability of {name} on {} grid points", r.grid.len());
    println!("  uniform          {}", r.uniform);
    println!("  total            {}", r.total);
    println!("  index invariant  {}", r.index_invariant);
    if let Some(t) = r.uniform_witness {
        println!("  rank Theta_n drops at t = {t}");
    }
    if let Some((s, t)) = r.total_witness {
        println!("  Gramian degenerate on [{s}, {t}]");
    }
    if let Some(t) = r.index_witness {
        println!("  ranks change at t = {t}");
    }
    let worst = r.min_gramian_eig.iter().map(|g| g.min_eig).fold(f64::INFINITY, f64::min);
    if worst.is_finite() {
        println!("  smallest Gramian eigenvalue  {worst:.6e}");
    }
    if !r.note.is_empty() {
        println!("  note: {}", r.note);
    }
}

fn certify(l: &Loaded) -> Result<ControllabilityReport, CliError> {
    let report = check_controllability(&l.system, &l.scenario.check_grid(), l.scenario.solver.rank_tol)
        .map_err(|e| fail(Stage::Setup, e))?;
    print_report(&l.scenario.name, &report);
    let value = serde_json::to_value(&report).expect("report serializes");
    output::json(&l.out.join("controllability.json"), &value).map_err(|e| fail(Stage::Setup, e))?;
    Ok(report)
}

fn require_total(report: &ControllabilityReport) -> Result<(), CliError> {
    if report.total {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_VALIDATION,
            message: "total controllability could not be certified".into(),
        })
    }
}

pub fn check(source: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    let l = prepare(load(source)?, out)?;
    let report = certify(&l)?;
    require_total(&report)
}

fn solve_loaded(l: &Loaded, emit: &EmitOptions) -> Result<Synthesis, CliError> {
    require_total(&certify(l)?)?;
    let syn = match synthesize(&l.system, &l.problem, &l.scenario.solve_options()) {
        Ok(s) => s,
        Err(e) => {
            if let Error::SolverDiverged { trace, .. } = &e {
                let _ = output::trace_csv(&l.out.join("trace.csv"), trace);
                let _ = output::json(&l.out.join("trace.json"), &json!(trace));
            }
            return Err(fail(Stage::Solve, e));
        }
    };
    let w = |r: covsteer_core::Result<()>| r.map_err(|e| fail(Stage::Solve, e));
    w(output::trace_csv(&l.out.join("trace.csv"), &syn.trace))?;
    if l.scenario.output.gains || emit.gains.is_some() {
        let path = emit.gains.clone().unwrap_or_else(|| l.out.join("gains.csv"));
        w(output::gains_csv(&path, &syn.schedule))?;
    }
    if l.scenario.output.pi || emit.pi.is_some() {
        let path = emit.pi.clone().unwrap_or_else(|| l.out.join("pi.csv"));
        w(output::pi_csv(&path, &syn.schedule))?;
    }
    let solution = json!({
        "scenario": l.scenario.name,
        "pi0": rows(&syn.pi0),
        "residual": syn.trace.final_residual,
        "converged": syn.trace.converged,
        "iterations": syn.trace.iterates.len(),
        "homotopy_used": syn.trace.homotopy_used,
        "jacobian_condition": finite_or_null(syn.trace.jacobian_condition),
    });
    w(output::json(&l.out.join("solution.json"), &solution))?;
    println!("Pi0 = {}", fmt_matrix(&syn.pi0));
    println!("residual = {:.3e}", syn.trace.final_residual);
    Ok(syn)
}

pub fn solve(source: &str, emit: &EmitOptions) -> Result<(), CliError> {
    let l = prepare(load(source)?, emit.out.clone())?;
    solve_loaded(&l, emit).map(|_| ())
}

fn rows(m: &covsteer_core::Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn fmt_vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_matrix(m: &covsteer_core::Mat) -> String {
    let r: Vec<String> = rows(m)
        .iter()
        .map(|r| r.iter().map(|x| format!("{x:.10}")).collect::<Vec<_>>().join(", "))
        .collect();
    format!("[{}]", r.join("; "))
}

fn simulate_loaded(l: &Loaded, sim: &SimOverrides, emit: &EmitOptions) -> Result<(), CliError> {
    let syn = solve_loaded(l, emit)?;
    let mut opts = l.scenario.simulation_options();
    opts.n_paths = sim.paths.unwrap_or(opts.n_paths);
    opts.dt = sim.dt.unwrap_or(opts.dt);
    opts.seed = sim.seed.unwrap_or(opts.seed);
    // the 1001-point schedule is too coarse for the simulator near stiff ends
    let dense = GainSchedule::sample(&syn.law, SIM_SCHEDULE_POINTS).map_err(|e| fail(Stage::Simulate, e))?;
    let ens = run_mc(&l.system, &dense, &l.problem, &opts).map_err(|e| fail(Stage::Simulate, e))?;
    let w = |r: covsteer_core::Result<()>| r.map_err(|e| fail(Stage::Simulate, e));
    if l.scenario.output.moments {
        w(output::moments_csv(&l.out.join("moments.csv"), &ens))?;
    }
    if l.scenario.output.paths {
        w(output::paths_csv(&l.out.join("paths.csv"), &ens))?;
    }
    let summary = summarize(l, &syn, &dense, &ens).map_err(|e| fail(Stage::Simulate, e))?;
    w(output::json(&l.out.join("summary.json"), &summary))?;
    Ok(())
}

fn summarize(l: &Loaded, syn: &Synthesis, dense: &GainSchedule, ens: &PathEnsemble) -> covsteer_core::Result<serde_json::Value> {
    let (m, c) = empirical_moments(ens, 1.0)?;
    let sigma_path = covariance_ode(&l.system, dense, &l.problem.sigma0)?;
    let mu_path = mean_ode(&l.system, dense, &l.problem.mu0)?;
    let grid = &syn.schedule.grid;
    let sig: Vec<_> = grid.iter().map(|&t| sigma_path.eval(t)).collect();
    let mu: Vec<_> = grid.iter().map(|&t| mu_path.eval(t).column(0).into_owned()).collect();
    let cost = expected_cost(&l.system, &syn.schedule, &sig, &mu)?;
    let (energy, energy_se) = ens.energy_estimate();
    println!("terminal mean       {}", fmt_vector(m.as_slice()));
    println!("terminal covariance {}", fmt_matrix(&c));
    let mut v = json!({
        "paths": ens.n_paths,
        "dt": ens.dt,
        "terminal_mean": m.as_slice(),
        "terminal_covariance": rows(&c),
        "ode_terminal_mean": mu_path.terminal().as_slice(),
        "ode_terminal_covariance": rows(&sigma_path.terminal()),
        "expected_cost": cost,
        "mc_control_energy": energy,
        "mean_jump_count": ens.mean_jump_count(),
    });
    if let Ok((mse, cse)) = ens.batch_standard_errors(1.0) {
        println!("standard errors     {} / {}", fmt_vector(mse.as_slice()), fmt_matrix(&cse));
        v["terminal_mean_se"] = json!(mse.as_slice());
        v["terminal_covariance_se"] = json!(rows(&cse));
        v["mc_control_energy_se"] = json!(energy_se);
    }
    Ok(v)
}

pub fn simulate(source: &str, sim: &SimOverrides, emit: &EmitOptions) -> Result<(), CliError> {
    let l = prepare(load(source)?, emit.out.clone())?;
    simulate_loaded(&l, sim, emit)
}

pub fn reproduce(name: &str, sim: &SimOverrides, emit: &EmitOptions) -> Result<(), CliError> {
    let scenario = Scenario::builtin(name).expect("built-in example");
    let out = emit.out.clone().or_else(|| Some(PathBuf::from(format!("reproduce-{name}"))));
    let l = prepare(scenario, out)?;
    simulate_loaded(&l, sim, emit)
}
