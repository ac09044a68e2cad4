//! Step evaluation and full runs.
//!
//! A step maps the population state at `t` to the state at `t + 1`:
//! neighbor sets are built from the current state, interaction degrees come
//! from the caller (or are drawn from schedules), and every agent's new
//! opinion is produced by the update rules in [`crate::model`]. Runs repeat
//! steps until a stopping rule fires and record per-step metrics alongside a
//! strided set of state snapshots.

use serde::Serialize;

use crate::model::{
    follower_update, leader_update, legacy_follower_update, legacy_leader_update, DegreeAssignment,
    GroupStructure, Mode, ModelParams, Norm,
};
use crate::neighbors::{
    connectivity_report, cross_system_interaction, neighbors_grid, neighbors_naive,
    neighbors_naive_per_agent, NeighborSets,
};
use crate::scenario::CompiledScenario;
use crate::schedule::{draw_alpha, draw_beta_vector, ScheduleSpec};

/// Population opinions at one time step, row-major: agent `i` occupies
/// `data[i * dim .. (i + 1) * dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpinionState {
    pub t: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl OpinionState {
    pub fn n(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the first agent with a non-finite coordinate, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| p / self.dim)
    }
}

/// Everything one step produces besides the new state. Connectivity flags
/// describe the *old* state (the interactions the step actually used).
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: OpinionState,
    /// Largest per-agent movement of this step, under the scenario norm.
    pub max_displacement: f64,
    pub group_seen: Vec<bool>,
    pub full_group_seen: Vec<bool>,
    pub multi_group_follower: bool,
    /// Follower-group pairs whose drawn weight was discarded because the
    /// follower saw nobody in that group.
    pub zeroed_betas: usize,
    /// Legacy mode: follower class terms dropped because the class was not
    /// visible.
    pub legacy_reallocations: usize,
    /// The neighbor sets the step used, for further inspection.
    pub sets: NeighborSets,
}

/// Metrics of one executed step `t -> t + 1`. Distances are measured on the
/// new state; degrees and connectivity describe the step's inputs at `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    /// Per leader group: largest member distance to the group target.
    pub leader_dist: Vec<f64>,
    /// Per leader group: largest follower distance to the group target, when
    /// the scenario has followers.
    pub follower_dist: Option<Vec<f64>>,
    /// Largest follower distance to the predicted follower limit, when the
    /// scenario predicts one.
    pub follower_limit_dist: Option<f64>,
    /// Per leader group: largest drawn self-reliance degree (legacy: largest
    /// drawn target pull weight).
    pub max_alpha: Vec<f64>,
    /// Largest drawn own-crowd weight `1 - sum_k beta_k` over followers.
    pub max_one_minus_beta_sum: Option<f64>,
    pub max_displacement: f64,
    pub group_seen: Vec<bool>,
    pub full_group_seen: Vec<bool>,
    pub multi_group_follower: bool,
    /// Some interaction crossed the follower-to-group home assignment made
    /// at the start of the run.
    pub cross_system: bool,
    pub zeroed_betas: usize,
    pub legacy_reallocations: usize,
}

/// Same distance and connectivity readings for the initial state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialRecord {
    pub leader_dist: Vec<f64>,
    pub follower_dist: Option<Vec<f64>>,
    pub follower_limit_dist: Option<f64>,
    pub group_seen: Vec<bool>,
    pub full_group_seen: Vec<bool>,
    pub multi_group_follower: bool,
    pub cross_system: bool,
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    MaxSteps,
    DisplacementTol,
    LimitTol,
}

/// Result of a full run. `snapshots` always contains the initial state first
/// and the final state last; intermediate states appear at multiples of
/// `snapshot_stride`. `metrics` has one entry per executed step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<OpinionState>,
    pub snapshot_stride: usize,
    pub initial: InitialRecord,
    pub metrics: Vec<StepRecord>,
    pub terminal: TerminalReason,
}

impl Trajectory {
    pub fn final_state(&self) -> &OpinionState {
        self.snapshots.last().expect("snapshots always hold the initial state")
    }

    /// Number of executed steps; the final state carries this time index.
    pub fn steps(&self) -> usize {
        self.metrics.len()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RunError {
    #[error("agent {agent} produced a non-finite opinion at step {step}")]
    NonFinite { agent: usize, step: usize },
}

/// Builds the neighbor sets a step of this scenario uses, honoring per-agent
/// thresholds in legacy mode and the grid accelerator for larger mixed-mode
/// populations.
pub fn neighbor_sets_for(
    state: &OpinionState,
    structure: &GroupStructure,
    params: &ModelParams,
) -> NeighborSets {
    if let Some(eps) = &params.agent_epsilons {
        return neighbors_naive_per_agent(state, structure, eps, params.norm);
    }
    if structure.n_agents >= 32 {
        neighbors_grid(state, structure, params.epsilon, params.norm)
    } else {
        neighbors_naive(state, structure, params.epsilon, params.norm)
    }
}

fn rows<'a>(state: &'a OpinionState, ids: &[usize]) -> Vec<&'a [f64]> {
    ids.iter().map(|&j| state.row(j)).collect()
}

fn max_distance(state: &OpinionState, ids: &[usize], point: &[f64], norm: Norm) -> f64 {
    ids.iter()
        .map(|&i| norm.distance(state.row(i), point))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Per-group largest member distance to the group target.
pub fn leader_distances(state: &OpinionState, structure: &GroupStructure, norm: Norm) -> Vec<f64> {
    structure
        .leader_groups
        .iter()
        .map(|lg| max_distance(state, &lg.members, &lg.target.0, norm))
        .collect()
}

/// Per-group largest follower distance to the group target; absent when the
/// scenario has no followers.
pub fn follower_distances(
    state: &OpinionState,
    structure: &GroupStructure,
    norm: Norm,
) -> Option<Vec<f64>> {
    if structure.follower_ids.is_empty() {
        return None;
    }
    Some(
        structure
            .leader_groups
            .iter()
            .map(|lg| max_distance(state, &structure.follower_ids, &lg.target.0, norm))
            .collect(),
    )
}

/// Advances the state one step with explicitly supplied degrees.
pub fn step_with_degrees(
    state: &OpinionState,
    structure: &GroupStructure,
    params: &ModelParams,
    degrees: &DegreeAssignment,
) -> StepOutcome {
    let sets = neighbor_sets_for(state, structure, params);
    let dim = state.dim;
    let mut next = OpinionState { t: state.t + 1, dim, data: vec![0.0; state.data.len()] };
    let mut zeroed_betas = 0usize;
    let mut legacy_reallocations = 0usize;

    match params.mode {
        Mode::Mixed => {
            for (fpos, &id) in structure.follower_ids.iter().enumerate() {
                let fnbrs = rows(state, &sets.follower_sets[fpos]);
                let lnbrs: Vec<Vec<&[f64]>> = sets.follower_leader_sets[fpos]
                    .iter()
                    .map(|ids| rows(state, ids))
                    .collect();
                let beta = &degrees.beta[fpos];
                for (k, ids) in sets.follower_leader_sets[fpos].iter().enumerate() {
                    if ids.is_empty() && beta[k] != 0.0 {
                        zeroed_betas += 1;
                    }
                }
                let new = follower_update(&fnbrs, &lnbrs, beta);
                next.row_mut(id).copy_from_slice(&new.0);
            }
            for (k, lg) in structure.leader_groups.iter().enumerate() {
                for (j, &id) in lg.members.iter().enumerate() {
                    let nbrs = rows(state, &sets.leader_own_sets[k][j]);
                    let new = leader_update(&nbrs, degrees.alpha[k][j], &lg.target.0);
                    next.row_mut(id).copy_from_slice(&new.0);
                }
            }
        }
        Mode::Legacy => {
            for (fpos, &id) in structure.follower_ids.iter().enumerate() {
                let fnbrs = rows(state, &sets.follower_sets[fpos]);
                let pos_nbrs = rows(state, &sets.follower_leader_sets[fpos][0]);
                let neg_nbrs = rows(state, &sets.follower_leader_sets[fpos][1]);
                let alpha = degrees.beta[fpos][0];
                let beta = degrees.beta[fpos][1];
                if pos_nbrs.is_empty() && alpha != 0.0 {
                    legacy_reallocations += 1;
                }
                if neg_nbrs.is_empty() && beta != 0.0 {
                    legacy_reallocations += 1;
                }
                let new = legacy_follower_update(&fnbrs, &pos_nbrs, &neg_nbrs, alpha, beta);
                next.row_mut(id).copy_from_slice(&new.0);
            }
            for (k, lg) in structure.leader_groups.iter().enumerate() {
                for (j, &id) in lg.members.iter().enumerate() {
                    let nbrs = rows(state, &sets.leader_own_sets[k][j]);
                    let new = legacy_leader_update(&nbrs, degrees.alpha[k][j], &lg.target.0);
                    next.row_mut(id).copy_from_slice(&new.0);
                }
            }
        }
    }

    let max_displacement = (0..state.n())
        .map(|i| params.norm.distance(next.row(i), state.row(i)))
        .fold(0.0f64, f64::max);
    let report = connectivity_report(&sets, structure);

    StepOutcome {
        state: next,
        max_displacement,
        group_seen: report.group_seen,
        full_group_seen: report.full_group_seen,
        multi_group_follower: report.multi_group_follower,
        zeroed_betas,
        legacy_reallocations,
        sets,
    }
}

/// Draws every agent's degrees for step `t` from the scenario schedules.
/// `alpha_specs[k]` governs group `k` (legacy: its target pull weight);
/// `beta_specs[k]` governs every follower's weight toward group `k`.
pub fn draw_degrees(
    structure: &GroupStructure,
    alpha_specs: &[ScheduleSpec],
    beta_specs: &[ScheduleSpec],
    t: usize,
    seed: u64,
) -> DegreeAssignment {
    let alpha = structure
        .leader_groups
        .iter()
        .enumerate()
        .map(|(k, lg)| {
            lg.members
                .iter()
                .map(|&id| draw_alpha(&alpha_specs[k], id, k, t, seed))
                .collect()
        })
        .collect();
    let beta = structure
        .follower_ids
        .iter()
        .map(|&id| draw_beta_vector(beta_specs, id, t, seed))
        .collect();
    DegreeAssignment { alpha, beta }
}

/// One schedule-driven step: draw degrees for step `state.t`, then advance.
pub fn step(
    state: &OpinionState,
    structure: &GroupStructure,
    params: &ModelParams,
    alpha_specs: &[ScheduleSpec],
    beta_specs: &[ScheduleSpec],
    seed: u64,
) -> StepOutcome {
    let degrees = draw_degrees(structure, alpha_specs, beta_specs, state.t, seed);
    step_with_degrees(state, structure, params, &degrees)
}

/// Follower-position home groups: the group whose target is nearest at the
/// initial state, lowest index on ties.
pub fn follower_homes(state: &OpinionState, structure: &GroupStructure, norm: Norm) -> Vec<usize> {
    structure
        .follower_ids
        .iter()
        .map(|&i| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (k, lg) in structure.leader_groups.iter().enumerate() {
                let d = norm.distance(state.row(i), &lg.target.0);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn follower_limit_dist(
    state: &OpinionState,
    structure: &GroupStructure,
    limits: Option<&Vec<Vec<f64>>>,
    norm: Norm,
) -> Option<f64> {
    let limits = limits?;
    if structure.follower_ids.is_empty() {
        return None;
    }
    Some(
        structure
            .follower_ids
            .iter()
            .map(|&i| norm.distance(state.row(i), &limits[i]))
            .fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Runs a compiled scenario to termination.
///
/// Stopping rules are checked after each step in a fixed order: displacement
/// tolerance first, then limit tolerance, with the step budget as the
/// fallback. Draws are keyed by (seed, agent, group, step), so a run is a
/// pure function of its compiled scenario.
pub fn run(scenario: &CompiledScenario) -> Result<Trajectory, RunError> {
    let structure = &scenario.structure;
    let params = &scenario.params;
    let norm = params.norm;
    let stride = scenario.snapshot_stride;
    let term = &scenario.termination;

    let mut state = scenario.initial.clone();
    let homes = follower_homes(&state, structure, norm);

    let initial_sets = neighbor_sets_for(&state, structure, params);
    let initial_report = connectivity_report(&initial_sets, structure);
    let initial = InitialRecord {
        leader_dist: leader_distances(&state, structure, norm),
        follower_dist: follower_distances(&state, structure, norm),
        follower_limit_dist: follower_limit_dist(
            &state,
            structure,
            scenario.predicted_limits.as_ref(),
            norm,
        ),
        group_seen: initial_report.group_seen,
        full_group_seen: initial_report.full_group_seen,
        multi_group_follower: initial_report.multi_group_follower,
        cross_system: cross_system_interaction(&initial_sets, structure, &homes),
    };
    drop(initial_sets);

    let mut snapshots = vec![state.clone()];
    let mut metrics: Vec<StepRecord> = Vec::new();
    let mut terminal = TerminalReason::MaxSteps;

    for step_idx in 0..term.max_steps {
        let degrees = draw_degrees(
            structure,
            &scenario.alpha_specs,
            &scenario.beta_specs,
            step_idx,
            scenario.seed,
        );
        let outcome = step_with_degrees(&state, structure, params, &degrees);

        if let Some(agent) = outcome.state.first_non_finite() {
            return Err(RunError::NonFinite { agent, step: step_idx });
        }

        let cross = cross_system_interaction(&outcome.sets, structure, &homes);
        let max_alpha: Vec<f64> = degrees
            .alpha
            .iter()
            .map(|g| g.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let max_one_minus_beta_sum = if structure.follower_ids.is_empty() {
            None
        } else {
            Some(
                degrees
                    .beta
                    .iter()
                    .map(|b| {
                        let mut sum = 0.0;
                        for &v in b {
                            sum += v;
                        }
                        1.0 - sum
                    })
                    .fold(f64::NEG_INFINITY, f64::max),
            )
        };

        state = outcome.state;
        let record = StepRecord {
            t: step_idx,
            leader_dist: leader_distances(&state, structure, norm),
            follower_dist: follower_distances(&state, structure, norm),
            follower_limit_dist: follower_limit_dist(
                &state,
                structure,
                scenario.predicted_limits.as_ref(),
                norm,
            ),
            max_alpha,
            max_one_minus_beta_sum,
            max_displacement: outcome.max_displacement,
            group_seen: outcome.group_seen,
            full_group_seen: outcome.full_group_seen,
            multi_group_follower: outcome.multi_group_follower,
            cross_system: cross,
            zeroed_betas: outcome.zeroed_betas,
            legacy_reallocations: outcome.legacy_reallocations,
        };

        if state.t % stride == 0 {
            snapshots.push(state.clone());
        }

        let stop_disp = term.tol_disp > 0.0 && record.max_displacement < term.tol_disp;
        let stop_lim = term.tol_lim.is_some_and(|tol| {
            let leaders_ok = record.leader_dist.iter().all(|&d| d < tol);
            let followers_ok = record.follower_limit_dist.map_or(true, |d| d < tol);
            leaders_ok && followers_ok
        });
        metrics.push(record);

        if stop_disp {
            terminal = TerminalReason::DisplacementTol;
            break;
        }
        if stop_lim {
            terminal = TerminalReason::LimitTol;
            break;
        }
    }

    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state.clone());
    }

    Ok(Trajectory { snapshots, snapshot_stride: stride, initial, metrics, terminal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LeaderGroup, Opinion};
    use crate::scenario::{
        FollowerSpec, Initializer, LeaderSpec, OutputSpec, ScenarioConfig, Termination,
    };

    fn single_group(n: usize, target: f64) -> GroupStructure {
        GroupStructure {
            n_agents: n,
            follower_ids: vec![],
            leader_groups: vec![LeaderGroup {
                members: (0..n).collect(),
                target: Opinion(vec![target]),
            }],
        }
    }

    fn mixed_params(epsilon: f64) -> ModelParams {
        ModelParams { epsilon, norm: Norm::Euclidean, mode: Mode::Mixed, agent_epsilons: None }
    }

    #[test]
    fn leader_step_matches_direct_evaluation() {
        let structure = single_group(2, 1.0);
        let state = OpinionState { t: 0, dim: 1, data: vec![0.0, 0.5] };
        let degrees = DegreeAssignment { alpha: vec![vec![0.5, 0.5]], beta: vec![] };
        let out = step_with_degrees(&state, &structure, &mixed_params(10.0), &degrees);
        let mean = (0.0 + 0.5) / 2.0;
        let expect = 0.5 * mean + 0.5 * 1.0;
        assert_eq!(out.state.data, vec![expect, expect]);
        assert_eq!(out.state.t, 1);
        assert_eq!(out.zeroed_betas, 0);
    }

    #[test]
    fn follower_step_tracks_zeroed_weights_and_frees_their_mass() {
        // Follower at 0 sees group 0 (at 0.4) but not group 1 (at 5.0).
        let structure = GroupStructure {
            n_agents: 3,
            follower_ids: vec![0],
            leader_groups: vec![
                LeaderGroup { members: vec![1], target: Opinion(vec![1.0]) },
                LeaderGroup { members: vec![2], target: Opinion(vec![-1.0]) },
            ],
        };
        let state = OpinionState { t: 0, dim: 1, data: vec![0.0, 0.4, 5.0] };
        let degrees = DegreeAssignment {
            alpha: vec![vec![1.0], vec![1.0]],
            beta: vec![vec![0.25, 0.25]],
        };
        let out = step_with_degrees(&state, &structure, &mixed_params(0.5), &degrees);
        assert_eq!(out.zeroed_betas, 1);
        // Weight 0.25 toward the unseen group returns to the follower's own
        // crowd: 0.75 * 0 + 0.25 * 0.4.
        assert_eq!(out.state.data[0], 0.75 * 0.0 + 0.25 * 0.4);
        // Leaders with full self-reliance keep their own mean.
        assert_eq!(out.state.data[1], 0.4);
        assert_eq!(out.state.data[2], 5.0);
    }

    #[test]
    fn displacement_is_measured_in_the_scenario_norm() {
        let params = ModelParams {
            epsilon: 10.0,
            norm: Norm::Chebyshev,
            mode: Mode::Mixed,
            agent_epsilons: None,
        };
        let state = OpinionState { t: 0, dim: 2, data: vec![0.0, 0.0] };
        let structure = GroupStructure {
            n_agents: 1,
            follower_ids: vec![],
            leader_groups: vec![LeaderGroup {
                members: vec![0],
                target: Opinion(vec![1.0, 0.25]),
            }],
        };
        let degrees = DegreeAssignment { alpha: vec![vec![0.0]], beta: vec![] };
        let out = step_with_degrees(&state, &structure, &params, &degrees);
        assert_eq!(out.state.data, vec![1.0, 0.25]);
        assert_eq!(out.max_displacement, 1.0);
    }

    fn lone_leader_scenario(
        alpha: ScheduleSpec,
        termination: Termination,
    ) -> crate::scenario::CompiledScenario {
        ScenarioConfig {
            dimension: 1,
            epsilon: 1.0,
            norm: Norm::Euclidean,
            mode: Mode::Mixed,
            seed: 5,
            followers: None,
            leaders: vec![LeaderSpec {
                size: Some(1),
                members: None,
                target: Opinion(vec![1.0]),
                init: Initializer::Explicit { opinions: vec![Opinion(vec![0.0])] },
                alpha: Some(alpha),
                weight: None,
            }],
            legacy: None,
            termination,
            output: OutputSpec::default(),
        }
        .build()
        .unwrap()
    }

    #[test]
    fn limit_tolerance_stops_a_contracting_run() {
        let scenario = lone_leader_scenario(
            ScheduleSpec::Constant { value: 0.5 },
            Termination { max_steps: 1000, tol_disp: 0.0, tol_lim: Some(1e-6) },
        );
        let traj = run(&scenario).unwrap();
        assert_eq!(traj.terminal, TerminalReason::LimitTol);
        // Distance to the target halves each step from 1.0.
        let steps = traj.steps();
        assert!(steps >= 20 && steps < 40, "steps = {steps}");
        assert!((traj.final_state().data[0] - 1.0).abs() < 1e-6);
        assert_eq!(traj.metrics.len(), steps);
        assert_eq!(traj.final_state().t, steps);
    }

    #[test]
    fn displacement_tolerance_takes_priority_over_limit_tolerance() {
        // With alpha = 1 the leader never moves: both rules would fire if
        // reachable, but displacement is checked first and fires at step 0.
        let scenario = lone_leader_scenario(
            ScheduleSpec::Constant { value: 1.0 },
            Termination { max_steps: 100, tol_disp: 1e-12, tol_lim: Some(1e30) },
        );
        let traj = run(&scenario).unwrap();
        assert_eq!(traj.terminal, TerminalReason::DisplacementTol);
        assert_eq!(traj.steps(), 1);
    }

    #[test]
    fn step_budget_is_the_fallback_reason() {
        let scenario = lone_leader_scenario(
            ScheduleSpec::Constant { value: 0.5 },
            Termination { max_steps: 7, tol_disp: 0.0, tol_lim: None },
        );
        let traj = run(&scenario).unwrap();
        assert_eq!(traj.terminal, TerminalReason::MaxSteps);
        assert_eq!(traj.steps(), 7);
        assert_eq!(traj.snapshots.len(), 8); // stride 1: every state
        assert_eq!(traj.snapshots[0].t, 0);
        assert_eq!(traj.final_state().t, 7);
    }

    #[test]
    fn snapshots_follow_the_stride_and_always_include_the_final_state() {
        let mut cfg = ScenarioConfig {
            dimension: 1,
            epsilon: 1.0,
            norm: Norm::Euclidean,
            mode: Mode::Mixed,
            seed: 5,
            followers: None,
            leaders: vec![LeaderSpec {
                size: Some(1),
                members: None,
                target: Opinion(vec![1.0]),
                init: Initializer::Explicit { opinions: vec![Opinion(vec![0.0])] },
                alpha: Some(ScheduleSpec::Constant { value: 0.5 }),
                weight: None,
            }],
            legacy: None,
            termination: Termination { max_steps: 25, tol_disp: 0.0, tol_lim: None },
            output: OutputSpec::default(),
        };
        cfg.output.snapshot_stride = Some(10);
        let traj = run(&cfg.build().unwrap()).unwrap();
        let times: Vec<usize> = traj.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(times, vec![0, 10, 20, 25]);
        assert_eq!(traj.metrics.len(), 25);
    }

    #[test]
    fn runs_are_reproducible_and_seed_sensitive() {
        let cfg = ScenarioConfig {
            dimension: 2,
            epsilon: 0.8,
            norm: Norm::Euclidean,
            mode: Mode::Mixed,
            seed: 11,
            followers: Some(FollowerSpec {
                size: Some(5),
                members: None,
                init: Initializer::UniformBox { lo: vec![-0.5, -0.5], hi: vec![0.5, 0.5] },
                beta: vec![ScheduleSpec::BernoulliMix {
                    value_a: 0.05,
                    value_b: 0.2,
                    prob_a: 0.5,
                }],
            }),
            leaders: vec![LeaderSpec {
                size: Some(2),
                members: None,
                target: Opinion(vec![0.25, 0.25]),
                init: Initializer::UniformBox { lo: vec![0.0, 0.0], hi: vec![0.5, 0.5] },
                alpha: Some(ScheduleSpec::Constant { value: 0.9 }),
                weight: None,
            }],
            legacy: None,
            termination: Termination { max_steps: 50, tol_disp: 0.0, tol_lim: None },
            output: OutputSpec::default(),
        };
        let a = run(&cfg.build().unwrap()).unwrap();
        let b = run(&cfg.build().unwrap()).unwrap();
        assert_eq!(a, b);

        let mut other = cfg.clone();
        other.seed = 12;
        let c = run(&other.build().unwrap()).unwrap();
        assert_ne!(a.final_state().data, c.final_state().data);
    }

    #[test]
    fn overflowing_opinions_surface_as_a_non_finite_error() {
        let cfg = ScenarioConfig {
            dimension: 1,
            epsilon: 1.0,
            norm: Norm::Euclidean,
            mode: Mode::Mixed,
            seed: 0,
            followers: None,
            leaders: vec![LeaderSpec {
                size: Some(2),
                members: None,
                target: Opinion(vec![0.0]),
                init: Initializer::Explicit {
                    opinions: vec![Opinion(vec![1.7e308]), Opinion(vec![1.7e308])],
                },
                alpha: Some(ScheduleSpec::Constant { value: 1.0 }),
                weight: None,
            }],
            legacy: None,
            termination: Termination::default(),
            output: OutputSpec::default(),
        };
        // The two members sit at distance zero, so they average each other and
        // the sum overflows before the division.
        let err = run(&cfg.build().unwrap()).unwrap_err();
        assert_eq!(err, RunError::NonFinite { agent: 0, step: 0 });
    }

    #[test]
    fn legacy_step_applies_class_weights_and_counts_reallocations() {
        let structure = GroupStructure {
            n_agents: 3,
            follower_ids: vec![0],
            leader_groups: vec![
                LeaderGroup { members: vec![1], target: Opinion(vec![1.0]) },
                LeaderGroup { members: vec![2], target: Opinion(vec![-1.0]) },
            ],
        };
        let params = ModelParams {
            epsilon: 0.0,
            norm: Norm::Euclidean,
            mode: Mode::Legacy,
            // Follower sees the positive leader only; leaders see themselves.
            agent_epsilons: Some(vec![0.5, 0.1, 0.1]),
        };
        let state = OpinionState { t: 0, dim: 1, data: vec![0.1, 0.5, -0.9] };
        let degrees = DegreeAssignment {
            alpha: vec![vec![0.5], vec![0.5]],
            beta: vec![vec![0.2, 0.1]],
        };
        let out = step_with_degrees(&state, &structure, &params, &degrees);
        // Negative class invisible: its weight joins the own-crowd share.
        assert_eq!(out.legacy_reallocations, 1);
        assert_eq!(out.state.data[0], (1.0 - 0.2) * 0.1 + 0.2 * 0.5);
        assert_eq!(out.state.data[1], 0.5 * 0.5 + 0.5 * 1.0);
        assert_eq!(out.state.data[2], 0.5 * -0.9 + 0.5 * -1.0);
    }

    #[test]
    fn homes_pick_the_nearest_target_with_low_index_ties() {
        let structure = GroupStructure {
            n_agents: 4,
            follower_ids: vec![0, 1],
            leader_groups: vec![
                LeaderGroup { members: vec![2], target: Opinion(vec![-1.0]) },
                LeaderGroup { members: vec![3], target: Opinion(vec![1.0]) },
            ],
        };
        // Follower 0 at the midpoint ties; follower 1 is nearer to 1.0.
        let state = OpinionState { t: 0, dim: 1, data: vec![0.0, 0.9, -1.0, 1.0] };
        assert_eq!(follower_homes(&state, &structure, Norm::Euclidean), vec![0, 1]);
    }
}
