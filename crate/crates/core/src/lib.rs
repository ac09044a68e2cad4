//! Deterministic simulation engine and analysis toolkit for
//! bounded-confidence opinion dynamics with leader groups.
//!
//! Populations mix a follower crowd with any number of leader groups, each
//! pulling toward a fixed target. Leaders average with visible members of
//! their own group and lean toward their target; followers average their
//! visible peers and blend in each visible leader group's mean, weighted by
//! per-step interaction degrees. Visibility is bounded confidence: agents
//! within `epsilon` of each other, under a selectable norm.
//!
//! Everything is a pure function of the scenario description: interaction
//! degrees and initial opinions come from counter-based draws keyed by
//! `(seed, agent, group, step)`, so any part of a run can be regenerated
//! without storing it. Floating-point evaluation order is fixed and
//! documented in [`model`], making runs reproducible bit for bit across
//! platforms and thread counts.

pub mod analysis;
pub mod engine;
pub mod model;
pub mod neighbors;
pub mod oracle;
pub mod scenario;
pub mod schedule;

pub use analysis::{
    check_corollary2_separation, check_theorem1, check_theorem2, follower_distance,
    follower_limit_report, geometric_bound_check, leader_distance, predicted_follower_limit,
    standard_reports, Counterexample, Evidence, GeometricBoundReport, HypothesisReport,
    LimitPrediction, TheoremId, Verdict,
};
pub use engine::{
    draw_degrees, follower_distances, follower_homes, leader_distances, run, step,
    step_with_degrees, InitialRecord, OpinionState, RunError, StepOutcome, StepRecord,
    TerminalReason, Trajectory,
};
pub use model::{
    follower_update, leader_update, legacy_follower_update, legacy_leader_update,
    validate_structure, DegreeAssignment, GroupStructure, LeaderGroup, Mode, ModelParams, Norm,
    Opinion, Role, Violation,
};
pub use neighbors::{
    connectivity_report, cross_system_interaction, neighbors_grid, neighbors_naive,
    neighbors_naive_per_agent, ConnectivityReport, NeighborSets,
};
pub use oracle::{hk_reference_step, oracle_step};
pub use scenario::{
    CompiledScenario, EpsilonSpec, FollowerSpec, Initializer, LeaderSpec, LegacySpec, OutputSpec,
    ScenarioConfig, Termination,
};
pub use schedule::{
    alpha_history, degree_sup_history, draw_alpha, draw_beta_vector, draw_init_uniform,
    FormulaFamily, ScheduleSpec,
};
