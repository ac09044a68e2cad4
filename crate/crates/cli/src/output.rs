//! Rendering runs to files: the trajectory table, the metrics document, and
//! the plotting reshape.
//!
//! Every float is printed as `{:.16e}` — 17 significant digits — which is
//! enough for bit-exact round trips, so two runs agree exactly when their
//! output files agree byte for byte.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use lfsim_core::analysis::{HypothesisReport, LimitPrediction};
use lfsim_core::engine::{InitialRecord, StepRecord, TerminalReason, Trajectory};
use lfsim_core::model::{GroupStructure, Mode, Norm, Role};
use lfsim_core::scenario::CompiledScenario;
use serde::Serialize;

#[derive(Debug)]
pub struct OutputError {
    pub path: std::path::PathBuf,
    pub message: String,
}

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for OutputError {}

/// Write `text` to `path`, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    let wrap = |e: io::Error| OutputError { path: path.to_path_buf(), message: e.to_string() };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(wrap)?;
        }
    }
    std::fs::write(path, text).map_err(wrap)
}

fn push_f64(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String cannot fail");
}

/// Render the recorded states as CSV: header `t,agent,group,role,x0..`, one
/// row per (state, agent), sorted by time then agent id. Followers carry
/// group `F`; leader group `k` (zero-based) carries `L{k+1}`.
pub fn trajectory_csv(structure: &GroupStructure, trajectory: &Trajectory) -> String {
    let dim = trajectory.snapshots[0].dim;
    let labels: Vec<(String, &'static str)> = structure
        .roles()
        .into_iter()
        .map(|role| match role {
            Role::Follower { .. } => ("F".to_owned(), "follower"),
            Role::Leader { group, .. } => (format!("L{}", group + 1), "leader"),
        })
        .collect();

    let mut out = String::with_capacity(64 * trajectory.snapshots.len() * structure.n_agents + 64);
    out.push_str("t,agent,group,role");
    for c in 0..dim {
        write!(out, ",x{c}").unwrap();
    }
    out.push('\n');
    for snap in &trajectory.snapshots {
        for agent in 0..snap.n() {
            let (group, role) = &labels[agent];
            write!(out, "{},{agent},{group},{role}", snap.t).unwrap();
            for &v in snap.row(agent) {
                out.push(',');
                push_f64(&mut out, v);
            }
            out.push('\n');
        }
    }
    out
}

/// Everything a run reports besides the raw states: identifying parameters,
/// per-step series, terminal condition, and the hypothesis reports.
#[derive(Serialize)]
pub struct MetricsDoc<'a> {
    pub schema: &'static str,
    pub mode: Mode,
    pub seed: u64,
    pub dimension: usize,
    pub n_agents: usize,
    pub epsilon: f64,
    pub norm: Norm,
    pub snapshot_stride: usize,
    pub steps: usize,
    pub terminal: &'a TerminalReason,
    pub initial: &'a InitialRecord,
    pub per_step: &'a [StepRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub follower_limit: Option<&'a LimitPrediction>,
    pub reports: &'a [HypothesisReport],
}

pub fn metrics_doc<'a>(
    scenario: &'a CompiledScenario,
    trajectory: &'a Trajectory,
    reports: &'a [HypothesisReport],
    follower_limit: Option<&'a LimitPrediction>,
) -> MetricsDoc<'a> {
    MetricsDoc {
        schema: "lfsim-metrics-v1",
        mode: scenario.params.mode,
        seed: scenario.seed,
        dimension: trajectory.snapshots[0].dim,
        n_agents: scenario.structure.n_agents,
        epsilon: scenario.params.epsilon,
        norm: scenario.params.norm,
        snapshot_stride: trajectory.snapshot_stride,
        steps: trajectory.steps(),
        terminal: &trajectory.terminal,
        initial: &trajectory.initial,
        per_step: &trajectory.metrics,
        follower_limit,
        reports,
    }
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON with every float in 17-significant-digit scientific
/// notation, newline-terminated.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut bytes = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut bytes, SciFormatter);
    value.serialize(&mut ser)?;
    bytes.push(b'\n');
    Ok(String::from_utf8(bytes).expect("JSON output is UTF-8"))
}

/// Reshape a trajectory table into one value per row —
/// `t,agent,group,role,coord,value` — which plotting tools consume directly.
/// `coord` restricts the output to a single coordinate. Values are copied
/// through verbatim, so the reshape loses no precision.
pub fn plot_data_csv(trajectory_table: &str, coord: Option<usize>) -> Result<String, String> {
    let mut lines = trajectory_table.lines();
    let header = lines.next().ok_or("empty input table")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[..4] != ["t", "agent", "group", "role"] {
        return Err(format!(
            "unexpected header {header:?}; expected t,agent,group,role,x0,..."
        ));
    }
    let dim = cols.len() - 4;
    for (c, name) in cols[4..].iter().enumerate() {
        if *name != format!("x{c}") {
            return Err(format!("unexpected coordinate column {name:?} at position {c}"));
        }
    }
    let selected: Vec<usize> = match coord {
        Some(c) if c >= dim => {
            return Err(format!("coordinate {c} out of range; the table has {dim} coordinate(s)"));
        }
        Some(c) => vec![c],
        None => (0..dim).collect(),
    };

    let mut out = String::with_capacity(trajectory_table.len());
    out.push_str("t,agent,group,role,coord,value\n");
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                cols.len(),
                fields.len()
            ));
        }
        for &c in &selected {
            writeln!(
                out,
                "{},{},{},{},{c},{}",
                fields[0],
                fields[1],
                fields[2],
                fields[3],
                fields[4 + c]
            )
            .unwrap();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lfsim_core::engine::run;
    use lfsim_core::model::Opinion;
    use lfsim_core::scenario::{
        FollowerSpec, Initializer, LeaderSpec, ScenarioConfig, Termination,
    };
    use lfsim_core::schedule::ScheduleSpec;
    use lfsim_core::standard_reports;

    fn tiny_run() -> (CompiledScenario, Trajectory) {
        let cfg = ScenarioConfig {
            dimension: 2,
            epsilon: 1.0,
            norm: Default::default(),
            mode: Default::default(),
            seed: 7,
            followers: Some(FollowerSpec {
                size: Some(2),
                members: None,
                init: Initializer::Explicit {
                    opinions: vec![Opinion(vec![0.1, 0.2]), Opinion(vec![0.3, 0.1])],
                },
                beta: vec![ScheduleSpec::Constant { value: 0.2 }],
            }),
            leaders: vec![LeaderSpec {
                size: Some(1),
                members: None,
                target: Opinion(vec![0.5, 0.5]),
                init: Initializer::Explicit { opinions: vec![Opinion(vec![0.4, 0.4])] },
                alpha: Some(ScheduleSpec::Constant { value: 0.5 }),
                weight: None,
            }],
            legacy: None,
            termination: Termination { max_steps: 3, tol_disp: 0.0, tol_lim: None },
            output: Default::default(),
        };
        let compiled = cfg.build().unwrap();
        let trajectory = run(&compiled).unwrap();
        (compiled, trajectory)
    }

    #[test]
    fn trajectory_table_has_one_row_per_state_and_agent() {
        let (compiled, trajectory) = tiny_run();
        let table = trajectory_csv(&compiled.structure, &trajectory);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "t,agent,group,role,x0,x1");
        assert_eq!(lines.len(), 1 + trajectory.snapshots.len() * 3);
        assert!(lines[1].starts_with("0,0,F,follower,"));
        assert!(lines[3].starts_with("0,2,L1,leader,"));
        // Sorted by (t, agent): the time column never decreases, and agent
        // ids restart from zero exactly when it increases.
        let mut prev = (0usize, 0usize);
        for row in &lines[1..] {
            let mut parts = row.split(',');
            let t: usize = parts.next().unwrap().parse().unwrap();
            let agent: usize = parts.next().unwrap().parse().unwrap();
            assert!((t, agent) > prev || (t, agent) == (0, 0));
            prev = (t, agent);
        }
    }

    #[test]
    fn floats_render_with_seventeen_significant_digits() {
        let (compiled, trajectory) = tiny_run();
        let table = trajectory_csv(&compiled.structure, &trajectory);
        let first = table.lines().nth(1).unwrap();
        let x0 = first.split(',').nth(4).unwrap();
        assert_eq!(x0, "1.0000000000000001e-1");
        assert_eq!(x0.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn metrics_json_round_trips_exact_floats() {
        let (compiled, trajectory) = tiny_run();
        let reports = standard_reports(&compiled, &trajectory, 0.995, None);
        let doc = metrics_doc(&compiled, &trajectory, &reports, None);
        let text = to_json_string(&doc).unwrap();
        assert!(text.ends_with('\n'));
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema"], "lfsim-metrics-v1");
        assert_eq!(value["epsilon"].as_f64().unwrap(), 1.0);
        assert_eq!(value["steps"].as_u64().unwrap(), 3);
        assert_eq!(value["per_step"].as_array().unwrap().len(), 3);
        let c0 = value["initial"]["leader_dist"][0].as_f64().unwrap();
        let direct = {
            let s = &trajectory.snapshots[0];
            let g = &compiled.structure.leader_groups[0].target.0;
            compiled.params.norm.distance(s.row(2), g)
        };
        assert_eq!(c0, direct);
    }

    #[test]
    fn plot_reshape_emits_one_row_per_value() {
        let (compiled, trajectory) = tiny_run();
        let table = trajectory_csv(&compiled.structure, &trajectory);
        let data_rows = table.lines().count() - 1;

        let long = plot_data_csv(&table, None).unwrap();
        assert_eq!(long.lines().next().unwrap(), "t,agent,group,role,coord,value");
        assert_eq!(long.lines().count(), 1 + data_rows * 2);

        let only_x1 = plot_data_csv(&table, Some(1)).unwrap();
        assert_eq!(only_x1.lines().count(), 1 + data_rows);
        let sample = only_x1.lines().nth(1).unwrap();
        assert_eq!(sample.split(',').nth(4).unwrap(), "1");
        // The value field is byte-identical to the source table's x1 column.
        assert_eq!(
            sample.split(',').nth(5).unwrap(),
            table.lines().nth(1).unwrap().split(',').nth(5).unwrap()
        );
    }

    #[test]
    fn plot_reshape_rejects_foreign_tables() {
        assert!(plot_data_csv("a,b,c\n1,2,3\n", None).is_err());
        let (compiled, trajectory) = tiny_run();
        let table = trajectory_csv(&compiled.structure, &trajectory);
        let err = plot_data_csv(&table, Some(2)).unwrap_err();
        assert!(err.contains("out of range"), "{err}");
    }
}
