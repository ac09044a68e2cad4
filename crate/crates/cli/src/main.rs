//! `lfsim`: run leader-follower opinion dynamics scenarios, sweep seeds,
//! check hypotheses, and reshape output for plotting.
//!
//! Exit codes: 0 on success; 1 for anything wrong with the invocation or the
//! scenario (usage, unreadable input, syntax, validation); 2 for failures
//! while running or writing (non-finite states, output I/O).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lfsim_cli::config::{load_config, ConfigError};
use lfsim_cli::output::{
    metrics_doc, plot_data_csv, to_json_string, trajectory_csv, write_text, OutputError,
};
use lfsim_cli::sweep::{parse_seed_range, run_sweep, SweepError};
use lfsim_core::analysis::{
    follower_limit_report, standard_reports, HypothesisReport, LimitPrediction, TheoremId,
};
use lfsim_core::engine::{run, RunError, TerminalReason, Trajectory};
use lfsim_core::model::Mode;
use lfsim_core::scenario::{CompiledScenario, OutputSpec};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "lfsim",
    version,
    about = "Deterministic opinion dynamics with leader groups: simulate, sweep, check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory table and metrics.
    Run {
        /// Scenario file, or the name of a bundled preset (figure1, figure2).
        scenario: String,
        /// Replace the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for outputs; defaults to $LFSIM_OUT_DIR, then the
        /// working directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Trajectory file; defaults to <scenario>.trajectory.csv.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Metrics file; defaults to <scenario>.metrics.json.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Dip threshold used by the recurring-dip report.
        #[arg(long, default_value_t = 0.995)]
        delta: f64,
        /// Minimum qualifying steps for the recurring-dip report; defaults
        /// to 1% of the window, at least one step.
        #[arg(long)]
        quota: Option<usize>,
    },
    /// Run a scenario once per seed in a range and write a summary.
    Sweep {
        scenario: String,
        /// Inclusive seed range, written a..b.
        #[arg(long)]
        seeds: String,
        /// Worker threads; 0 lets the runtime decide. Output bytes do not
        /// depend on this.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Summary file; defaults to <scenario>.sweep.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run a scenario and print hypothesis reports as JSON.
    Check {
        scenario: String,
        /// Restrict to one claim: 1 (recurring dips), 2 (single-group
        /// contraction), c1 (follower limit), c2 (multi-group separation).
        #[arg(long)]
        theorem: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.995)]
        delta: f64,
        #[arg(long)]
        quota: Option<usize>,
    },
    /// Reshape a trajectory table into one value per row for plotting.
    PlotData {
        /// A trajectory CSV produced by `run`.
        trajectory: PathBuf,
        /// Keep only this coordinate.
        #[arg(long)]
        coord: Option<usize>,
        /// Output file; prints to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario, listing every violation.
    Validate { scenario: String },
}

enum CliError {
    /// Problems with the invocation or the scenario; exit code 1.
    Input(String),
    /// Failures during simulation or while writing output; exit code 2.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Invalid(_) => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            e.print().ok();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, seed, out_dir, trajectory, metrics, delta, quota } => {
            cmd_run(&scenario, seed, out_dir, trajectory, metrics, delta, quota)
        }
        Command::Sweep { scenario, seeds, workers, out, out_dir } => {
            cmd_sweep(&scenario, &seeds, workers, out, out_dir)
        }
        Command::Check { scenario, theorem, seed, delta, quota } => {
            cmd_check(&scenario, theorem.as_deref(), seed, delta, quota)
        }
        Command::PlotData { trajectory, coord, out } => cmd_plot_data(&trajectory, coord, out),
        Command::Validate { scenario } => cmd_validate(&scenario),
    }
}

fn out_dir_or_default(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("LFSIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn resolve_output(
    dir: &Path,
    explicit: Option<PathBuf>,
    from_scenario: Option<&str>,
    default_name: String,
) -> PathBuf {
    let path = explicit
        .unwrap_or_else(|| PathBuf::from(from_scenario.map(str::to_owned).unwrap_or(default_name)));
    if path.is_absolute() {
        path
    } else {
        dir.join(path)
    }
}

fn terminal_label(t: &TerminalReason) -> &'static str {
    match t {
        TerminalReason::MaxSteps => "max_steps",
        TerminalReason::DisplacementTol => "displacement_tol",
        TerminalReason::LimitTol => "limit_tol",
    }
}

/// The follower-limit prediction, when the scenario has followers to predict.
fn maybe_limit(compiled: &CompiledScenario, trajectory: &Trajectory) -> Option<LimitPrediction> {
    if compiled.params.mode == Mode::Mixed && !compiled.structure.follower_ids.is_empty() {
        Some(follower_limit_report(compiled, trajectory))
    } else {
        None
    }
}

fn compile(scenario: &str, seed: Option<u64>) -> Result<(CompiledScenario, OutputSpec, String), CliError> {
    let (mut cfg, stem) = load_config(scenario)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let compiled = cfg
        .build()
        .map_err(|violations| CliError::from(ConfigError::Invalid { violations }))?;
    Ok((compiled, cfg.output, stem))
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario: &str,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    trajectory_path: Option<PathBuf>,
    metrics_path: Option<PathBuf>,
    delta: f64,
    quota: Option<usize>,
) -> Result<(), CliError> {
    let (compiled, output, stem) = compile(scenario, seed)?;
    let trajectory = run(&compiled)?;
    let reports = standard_reports(&compiled, &trajectory, delta, quota);
    let limit = maybe_limit(&compiled, &trajectory);

    let dir = out_dir_or_default(out_dir);
    let traj_file = resolve_output(
        &dir,
        trajectory_path,
        output.trajectory.as_deref(),
        format!("{stem}.trajectory.csv"),
    );
    let metrics_file = resolve_output(
        &dir,
        metrics_path,
        output.metrics.as_deref(),
        format!("{stem}.metrics.json"),
    );

    write_text(&traj_file, &trajectory_csv(&compiled.structure, &trajectory))?;
    let doc = metrics_doc(&compiled, &trajectory, &reports, limit.as_ref());
    let json = to_json_string(&doc)
        .map_err(|e| CliError::Runtime(format!("cannot serialize metrics: {e}")))?;
    write_text(&metrics_file, &json)?;

    println!("wrote {}", traj_file.display());
    println!("wrote {}", metrics_file.display());
    println!(
        "steps={} terminal={} final_leader_dist={:?}",
        trajectory.steps(),
        terminal_label(&trajectory.terminal),
        trajectory
            .metrics
            .last()
            .map(|r| r.leader_dist.clone())
            .unwrap_or_else(|| trajectory.initial.leader_dist.clone()),
    );
    Ok(())
}

fn cmd_sweep(
    scenario: &str,
    seeds: &str,
    workers: usize,
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    let (cfg, stem) = load_config(scenario)?;
    let (first, last) = parse_seed_range(seeds).map_err(CliError::Input)?;
    let summary = run_sweep(&cfg, first, last, workers)?;

    let dir = out_dir_or_default(out_dir);
    let out_file = resolve_output(&dir, out, None, format!("{stem}.sweep.json"));
    let json = to_json_string(&summary)
        .map_err(|e| CliError::Runtime(format!("cannot serialize summary: {e}")))?;
    write_text(&out_file, &json)?;

    println!("wrote {}", out_file.display());
    println!(
        "runs={} steps_min={} steps_max={} steps_mean={}",
        summary.runs.len(),
        summary.steps_min,
        summary.steps_max,
        summary.steps_mean,
    );
    Ok(())
}

#[derive(Serialize)]
struct CheckDoc {
    schema: &'static str,
    reports: Vec<HypothesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    follower_limit: Option<LimitPrediction>,
}

fn cmd_check(
    scenario: &str,
    theorem: Option<&str>,
    seed: Option<u64>,
    delta: f64,
    quota: Option<usize>,
) -> Result<(), CliError> {
    let (compiled, _, _) = compile(scenario, seed)?;
    let trajectory = run(&compiled)?;
    let all = standard_reports(&compiled, &trajectory, delta, quota);

    let doc = match theorem {
        None => CheckDoc {
            schema: "lfsim-check-v1",
            follower_limit: maybe_limit(&compiled, &trajectory),
            reports: all,
        },
        Some("1") => {
            let reports: Vec<_> =
                all.into_iter().filter(|r| r.theorem == TheoremId::Theorem1).collect();
            if reports.is_empty() {
                return Err(CliError::Input(
                    "the recurring-dip check applies to mixed-mode scenarios only".into(),
                ));
            }
            CheckDoc { schema: "lfsim-check-v1", reports, follower_limit: None }
        }
        Some("2") => {
            if compiled.params.mode != Mode::Mixed || compiled.structure.m() != 1 {
                return Err(CliError::Input(
                    "the contraction check needs a mixed-mode scenario with exactly one leader group"
                        .into(),
                ));
            }
            let reports: Vec<_> =
                all.into_iter().filter(|r| r.theorem == TheoremId::Theorem2).collect();
            CheckDoc { schema: "lfsim-check-v1", reports, follower_limit: None }
        }
        Some("c1") => {
            let limit = maybe_limit(&compiled, &trajectory).ok_or_else(|| {
                CliError::Input(
                    "the follower-limit prediction needs a mixed-mode scenario with followers"
                        .into(),
                )
            })?;
            CheckDoc { schema: "lfsim-check-v1", reports: Vec::new(), follower_limit: Some(limit) }
        }
        Some("c2") => {
            if compiled.params.mode != Mode::Mixed || compiled.structure.m() < 2 {
                return Err(CliError::Input(
                    "the separation check needs a mixed-mode scenario with at least two leader groups"
                        .into(),
                ));
            }
            let reports: Vec<_> =
                all.into_iter().filter(|r| r.theorem == TheoremId::Corollary2).collect();
            CheckDoc { schema: "lfsim-check-v1", reports, follower_limit: None }
        }
        Some(other) => {
            return Err(CliError::Input(format!(
                "unknown claim {other:?}; expected 1, 2, c1, or c2"
            )));
        }
    };

    let json = to_json_string(&doc)
        .map_err(|e| CliError::Runtime(format!("cannot serialize reports: {e}")))?;
    print!("{json}");
    Ok(())
}

fn cmd_plot_data(
    trajectory: &Path,
    coord: Option<usize>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let table = std::fs::read_to_string(trajectory).map_err(|e| {
        CliError::Input(format!("cannot read {}: {e}", trajectory.display()))
    })?;
    let long = plot_data_csv(&table, coord).map_err(CliError::Input)?;
    match out {
        Some(path) => {
            write_text(&path, &long)?;
            println!("wrote {}", path.display());
        }
        None => print!("{long}"),
    }
    Ok(())
}

fn cmd_validate(scenario: &str) -> Result<(), CliError> {
    let (cfg, _) = load_config(scenario)?;
    match cfg.build() {
        Ok(compiled) => {
            println!(
                "ok: {} agents ({} followers, {} leader groups), dimension {}",
                compiled.structure.n_agents,
                compiled.structure.follower_ids.len(),
                compiled.structure.m(),
                compiled.structure.dimension(),
            );
            Ok(())
        }
        Err(violations) => Err(ConfigError::Invalid { violations }.into()),
    }
}
