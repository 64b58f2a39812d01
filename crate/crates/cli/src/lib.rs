//! Command-line front end over the diagnosis library: single runs, parallel
//! load-factor sweeps, and plot-ready CSV emission. All numeric file output
//! is per-unit.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use gridiag_core::case_io::{
    parse_json, parse_matpower, scale_load, to_per_unit, CaseError, NetworkCase,
};
use gridiag_core::diagnosis::{
    run_baseline_powerflow, solve_dense, solve_sparse, solve_vreg, DiagnosisError,
    DiagnosisOptions, DiagnosisResult, DiagnosisStatus, Violation,
};
use gridiag_core::network_model::{build_model, CircuitModel, CompensationPlacement, ModelError};
use gridiag_core::reference_oracles::PowerFlowStatus;

mod output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Case(#[from] CaseError),
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Diagnosis(#[from] DiagnosisError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "gridiag",
    version,
    about = "Diagnose power-grid voltage collapse with sparse compensation currents"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Diagnose one case at a single load factor.
    Solve(SolveArgs),
    /// Run independent diagnoses over a load-factor range.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// MATPOWER M-file in source units.
    Matpower,
    /// Canonical JSON, already per-unit.
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Plain power flow plus a bounds scan, no compensation.
    Powerflow,
    /// Minimum-norm compensation restoring power balance.
    Dense,
    /// Reweighted search for few compensation buses.
    Sparse,
    /// Sparse compensation with voltage bounds enforced.
    Vreg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Placement {
    /// Compensation may attach to every bus except the slack.
    All,
    /// Compensation only at load (PQ) buses.
    Pq,
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Case file to diagnose.
    #[arg(long)]
    pub case: PathBuf,

    /// Input format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,

    /// Problem to solve.
    #[arg(long, value_enum)]
    pub mode: Mode,

    /// Override the lower voltage bound for every bus, per-unit.
    #[arg(long)]
    pub vmin: Option<f64>,

    /// Override the upper voltage bound for every bus, per-unit.
    #[arg(long)]
    pub vmax: Option<f64>,

    /// Where compensation sources may attach.
    #[arg(long, value_enum, default_value_t = Placement::All)]
    pub placement: Placement,

    /// Force purely reactive compensation currents.
    #[arg(long)]
    pub reactive_only: bool,

    /// Directory for result files; created when missing.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,

    /// Primal feasibility tolerance of the inner solver.
    #[arg(long)]
    pub tol_feas: Option<f64>,

    /// Newton iteration cap per subproblem.
    #[arg(long)]
    pub max_iters: Option<usize>,

    /// Reserved. The solver is deterministic and ignores it.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Demand multiplier applied to every bus.
    #[arg(long, default_value_t = 1.0)]
    pub load_factor: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Load-factor range as start:stop:step, stop inclusive.
    #[arg(long)]
    pub load_factors: String,
}

pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_USAGE
        }
    }
}

fn load_network(args: &CommonArgs) -> Result<NetworkCase, CliError> {
    let text = std::fs::read_to_string(&args.case)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.case.display())))?;
    let format = args.format.unwrap_or_else(|| {
        match args.case.extension().and_then(|e| e.to_str()) {
            Some("json") => InputFormat::Json,
            _ => InputFormat::Matpower,
        }
    });
    let case = match format {
        InputFormat::Matpower => to_per_unit(&parse_matpower(&text)?)?,
        InputFormat::Json => parse_json(&text)?,
    };
    Ok(case.with_bounds(args.vmin, args.vmax)?)
}

fn diagnosis_options(args: &CommonArgs) -> DiagnosisOptions {
    let mut opts = DiagnosisOptions::default();
    if let Some(tol) = args.tol_feas {
        opts.solver.tol_feas = tol;
    }
    if let Some(iters) = args.max_iters {
        opts.solver.max_newton_iters = iters;
    }
    opts.reactive_only = args.reactive_only;
    opts
}

fn placement_of(p: Placement) -> CompensationPlacement {
    match p {
        Placement::All => CompensationPlacement::AllNonSlack,
        Placement::Pq => CompensationPlacement::PqOnly,
    }
}

/// Baseline-only run: the JSON mirrors the fields a diagnosis result shares
/// with a plain power flow.
#[derive(Serialize)]
struct PowerflowReport {
    mode: &'static str,
    status: PowerFlowStatus,
    iterations: usize,
    residual_inf: f64,
    bus_ids: Vec<u32>,
    v_mag: Vec<f64>,
    violations: Vec<Violation>,
}

fn cmd_solve(args: &SolveArgs) -> Result<i32, CliError> {
    let case = load_network(&args.common)?;
    let model = build_for(&case, &args.common, args.load_factor)?;
    std::fs::create_dir_all(&args.common.out_dir)?;

    let opts = diagnosis_options(&args.common);
    if args.common.mode == Mode::Powerflow {
        let started = Instant::now();
        let baseline = run_baseline_powerflow(&model, &opts.solver);
        let wall = started.elapsed().as_secs_f64();
        let report = PowerflowReport {
            mode: "powerflow",
            status: baseline.outcome.status,
            iterations: baseline.outcome.iterations,
            residual_inf: baseline.outcome.residual_inf,
            bus_ids: model.bus_ids.clone(),
            v_mag: baseline.v_mag.clone(),
            violations: baseline.violations.clone(),
        };
        output::write_powerflow_files(&args.common.out_dir, &case, &model, &baseline, &report)?;
        println!(
            "status={} support=0 violations_before={} violations_after={} wall_s={wall:.3}",
            status_word(baseline.outcome.status),
            baseline.violations.len(),
            baseline.violations.len(),
        );
        return Ok(match baseline.outcome.status {
            PowerFlowStatus::Converged => EXIT_OK,
            PowerFlowStatus::Diverged => EXIT_NOT_CONVERGED,
        });
    }

    let result = dispatch(&model, args.common.mode, &opts)?;
    output::write_result_files(&args.common.out_dir, &case, &model, &result)?;
    println!("{}", summary_line(&result));
    Ok(if result.status == DiagnosisStatus::Converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn build_for(case: &NetworkCase, args: &CommonArgs, factor: f64) -> Result<CircuitModel, CliError> {
    let scaled = scale_load(case, factor)?;
    Ok(build_model(&scaled, placement_of(args.placement))?)
}

fn dispatch(
    model: &CircuitModel,
    mode: Mode,
    opts: &DiagnosisOptions,
) -> Result<DiagnosisResult, CliError> {
    let result = match mode {
        Mode::Dense => solve_dense(model, opts)?,
        Mode::Sparse => solve_sparse(model, opts)?,
        Mode::Vreg => solve_vreg(model, &model.bounds, opts)?,
        Mode::Powerflow => unreachable!("handled by cmd_solve"),
    };
    log::info!(
        "{:?} finished: status {:?}, support {}, {} subproblems",
        mode,
        result.status,
        result.support.len(),
        result.subproblem_history.len()
    );
    Ok(result)
}

fn status_word(status: PowerFlowStatus) -> &'static str {
    match status {
        PowerFlowStatus::Converged => "converged",
        PowerFlowStatus::Diverged => "diverged",
    }
}

fn diagnosis_status_word(status: DiagnosisStatus) -> &'static str {
    match status {
        DiagnosisStatus::Converged => "converged",
        DiagnosisStatus::MaxIter => "max_iter",
        DiagnosisStatus::NumericalFailure => "numerical_failure",
        DiagnosisStatus::BoundsInfeasible => "bounds_infeasible",
    }
}

fn total_wall(result: &DiagnosisResult) -> f64 {
    result.wall_time.iter().map(|p| p.seconds).sum()
}

fn summary_line(result: &DiagnosisResult) -> String {
    format!(
        "status={} support={} violations_before={} violations_after={} wall_s={:.3}",
        diagnosis_status_word(result.status),
        result.support.len(),
        result.violations_before.len(),
        result.violations_after.len(),
        total_wall(result),
    )
}

/// Expands `start:stop:step` (stop inclusive) into concrete factors.
pub fn parse_sweep_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "load-factor range must be start:stop:step, got {spec:?}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad number {p:?} in range {spec:?}")))
        })
        .collect::<Result<_, _>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(CliError::Usage(format!("range {spec:?} has non-finite parts")));
    }
    if step <= 0.0 {
        return Err(CliError::Usage(format!("range step must be > 0, got {step}")));
    }
    if stop < start {
        return Err(CliError::Usage(format!("range stop {stop} is below start {start}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

/// One sweep row; `status` is a word, never an error value, so a failed run
/// leaves a diagnosable row instead of aborting the sweep.
struct SweepRow {
    factor: f64,
    status: String,
    support: usize,
    violations_before: usize,
    violations_after: usize,
    inner_iterations: usize,
    subproblems: usize,
    wall_s: f64,
}

fn sweep_row(case: &NetworkCase, args: &SweepArgs, factor: f64) -> SweepRow {
    let opts = diagnosis_options(&args.common);
    let model = match build_for(case, &args.common, factor) {
        Ok(m) => m,
        Err(err) => {
            return SweepRow {
                factor,
                status: format!("error({err})"),
                support: 0,
                violations_before: 0,
                violations_after: 0,
                inner_iterations: 0,
                subproblems: 0,
                wall_s: 0.0,
            }
        }
    };

    if args.common.mode == Mode::Powerflow {
        let started = Instant::now();
        let baseline = run_baseline_powerflow(&model, &opts.solver);
        return SweepRow {
            factor,
            status: status_word(baseline.outcome.status).to_string(),
            support: 0,
            violations_before: baseline.violations.len(),
            violations_after: baseline.violations.len(),
            inner_iterations: baseline.outcome.iterations,
            subproblems: 0,
            wall_s: started.elapsed().as_secs_f64(),
        };
    }

    match dispatch(&model, args.common.mode, &opts) {
        Ok(result) => SweepRow {
            factor,
            status: diagnosis_status_word(result.status).to_string(),
            support: result.support.len(),
            violations_before: result.violations_before.len(),
            violations_after: result.violations_after.len(),
            inner_iterations: result
                .subproblem_history
                .iter()
                .map(|r| r.inner_iterations)
                .sum(),
            subproblems: result.subproblem_history.len(),
            wall_s: total_wall(&result),
        },
        Err(err) => SweepRow {
            factor,
            status: format!("error({err})"),
            support: 0,
            violations_before: 0,
            violations_after: 0,
            inner_iterations: 0,
            subproblems: 0,
            wall_s: 0.0,
        },
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let factors = parse_sweep_range(&args.load_factors)?;
    let case = load_network(&args.common)?;
    std::fs::create_dir_all(&args.common.out_dir)?;

    let rows: Vec<SweepRow> =
        factors.par_iter().map(|&f| sweep_row(&case, args, f)).collect();

    let mut csv = String::from(
        "load_factor,mode,status,support,violations_before,violations_after,inner_iterations,subproblems,wall_s\n",
    );
    let mode = format!("{:?}", args.common.mode).to_lowercase();
    for row in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{:.3}",
            output::sig12(row.factor),
            mode,
            row.status,
            row.support,
            row.violations_before,
            row.violations_after,
            row.inner_iterations,
            row.subproblems,
            row.wall_s,
        )
        .expect("writing to a string");
    }
    std::fs::write(args.common.out_dir.join("sweep.csv"), &csv)?;
    print!("{csv}");

    let all_clean = rows.iter().all(|r| r.status == "converged");
    Ok(if all_clean { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[cfg(test)]
mod tests {
    use super::parse_sweep_range;

    #[test]
    fn range_expansion_is_inclusive() {
        let f = parse_sweep_range("1.4:1.6:0.05").unwrap();
        assert_eq!(f.len(), 5);
        assert!((f[0] - 1.4).abs() < 1e-12);
        assert!((f[4] - 1.6).abs() < 1e-12);
    }

    #[test]
    fn degenerate_range_is_a_single_row() {
        let f = parse_sweep_range("1.0:1.0:0.1").unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0], 1.0);
    }

    #[test]
    fn bad_ranges_are_usage_errors() {
        assert!(parse_sweep_range("1:2").is_err());
        assert!(parse_sweep_range("1:2:0").is_err());
        assert!(parse_sweep_range("2:1:0.1").is_err());
        assert!(parse_sweep_range("a:b:c").is_err());
        assert!(parse_sweep_range("1:inf:1").is_err());
    }
}
