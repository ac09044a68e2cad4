//! Hypothesis checkers, limit predictors, and decay-bound verifiers.
//!
//! Every checked claim is asymptotic, but a run is finite, so verdicts are a
//! tristate: a hypothesis observed to hold throughout the examined window is
//! `VerifiedOnWindow`, never more; a concrete failure inside the window is
//! `Violated` and always carries the step (and agent, where meaningful) that
//! broke it; anything else is `UndecidableAtFiniteHorizon`.

use serde::Serialize;

use crate::engine::{OpinionState, Trajectory};
use crate::model::{GroupStructure, Mode, Norm, Opinion};
use crate::scenario::CompiledScenario;
use crate::schedule::{alpha_history, degree_sup_history};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    VerifiedOnWindow,
    Violated,
    UndecidableAtFiniteHorizon,
}

/// Which claim a report is about, named by its public identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    Theorem1,
    Theorem2,
    Corollary2,
}

/// The concrete observation that defeated a hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Counterexample {
    pub step: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<usize>,
    pub value: f64,
    pub message: String,
}

/// Scalar summaries backing a verdict, specific to the claim checked.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    /// The group-max degree must dip to `delta` or below on at least `quota`
    /// steps of the window.
    Recurrence {
        delta: f64,
        quota: usize,
        qualifying_steps: usize,
        window_len: usize,
        density: f64,
        /// Per member: fraction of steps its own degree is at or below delta.
        per_agent_density: Vec<f64>,
        /// Every member individually meets the quota, even if the group max
        /// never does.
        per_agent_recurrent: bool,
    },
    /// Strict containment in the ball around the target at the window start,
    /// and a uniform contraction margin over the window.
    Contraction {
        start_max_dist: f64,
        epsilon: f64,
        ball_ok: bool,
        /// Largest per-step `max(own-crowd weight, self-reliance)` seen.
        sup_degree: f64,
        sup_ok: bool,
    },
    /// Pairwise-separated targets with each subsystem confined to its own
    /// ball and no interaction across subsystems.
    Separation {
        min_target_separation: f64,
        required_separation: f64,
        initial_membership_ok: bool,
        cross_interaction_steps: usize,
        /// Per group: largest member distance to its target at the end.
        final_leader_dist: Vec<f64>,
    },
}

/// Finite-window verdict on one asymptotic claim.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub theorem: TheoremId,
    /// Leader group the report is about, when it is about exactly one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    pub verdict: Verdict,
    /// Step range examined, half-open.
    pub window: (usize, usize),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    pub evidence: Evidence,
}

fn max_dist_over(state: &OpinionState, ids: &[usize], point: &[f64], norm: Norm) -> Option<f64> {
    if ids.is_empty() {
        return None;
    }
    Some(
        ids.iter()
            .map(|&i| norm.distance(state.row(i), point))
            .fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Largest distance from a member of leader group `k` to its own target;
/// absent when the group is empty.
pub fn leader_distance(
    state: &OpinionState,
    structure: &GroupStructure,
    k: usize,
    norm: Norm,
) -> Option<f64> {
    let lg = &structure.leader_groups[k];
    max_dist_over(state, &lg.members, &lg.target.0, norm)
}

/// Largest follower distance to the given target; absent when there are no
/// followers.
pub fn follower_distance(
    state: &OpinionState,
    structure: &GroupStructure,
    target: &[f64],
    norm: Norm,
) -> Option<f64> {
    max_dist_over(state, &structure.follower_ids, target, norm)
}

fn default_quota(window_len: usize) -> usize {
    // At least 1% of the window, at least one step.
    std::cmp::max(1, window_len.div_ceil(100))
}

/// Checks the recurring-dip condition on one leader group's degree history:
/// the group-wide maximum must fall to `delta` or below on at least `quota`
/// steps (default: 1% of the window, at least one). A finite window can
/// support this hypothesis but never refute it, so the verdict is either
/// `VerifiedOnWindow` or `UndecidableAtFiniteHorizon`. The evidence also
/// reports the same condition per member, which can hold even when the
/// group-wide one does not.
pub fn check_theorem1(
    alpha_history: &[Vec<f64>],
    delta: f64,
    quota: Option<usize>,
) -> HypothesisReport {
    let window_len = alpha_history.len();
    let quota = quota.unwrap_or_else(|| default_quota(window_len));
    let members = alpha_history.first().map_or(0, |row| row.len());

    let mut qualifying = 0usize;
    let mut per_agent_counts = vec![0usize; members];
    for row in alpha_history {
        let mut row_max = f64::NEG_INFINITY;
        for (j, &a) in row.iter().enumerate() {
            if a <= delta {
                per_agent_counts[j] += 1;
            }
            row_max = row_max.max(a);
        }
        if row_max <= delta {
            qualifying += 1;
        }
    }
    let density = if window_len == 0 { 0.0 } else { qualifying as f64 / window_len as f64 };
    let per_agent_density: Vec<f64> = per_agent_counts
        .iter()
        .map(|&c| if window_len == 0 { 0.0 } else { c as f64 / window_len as f64 })
        .collect();
    let per_agent_recurrent =
        members > 0 && per_agent_counts.iter().all(|&c| c >= quota);

    let verdict = if window_len > 0 && qualifying >= quota {
        Verdict::VerifiedOnWindow
    } else {
        Verdict::UndecidableAtFiniteHorizon
    };

    HypothesisReport {
        theorem: TheoremId::Theorem1,
        group: None,
        verdict,
        window: (0, window_len),
        counterexample: None,
        evidence: Evidence::Recurrence {
            delta,
            quota,
            qualifying_steps: qualifying,
            window_len,
            density,
            per_agent_density,
            per_agent_recurrent,
        },
    }
}

/// Checks the consensus-contraction hypothesis on a single-group scenario:
/// (a) every agent lies strictly inside the open ball of radius `epsilon`
/// around the group target at the window start, and (b) the per-step
/// `max(largest own-crowd weight, largest self-reliance)` stays strictly
/// below 1 throughout the window. `sup_history` rows are
/// `(max self-reliance, max own-crowd weight)` per step, starting at
/// `start.t`. Either condition failing is a concrete violation.
pub fn check_theorem2(
    start: &OpinionState,
    structure: &GroupStructure,
    epsilon: f64,
    norm: Norm,
    sup_history: &[(f64, f64)],
) -> HypothesisReport {
    assert_eq!(structure.m(), 1, "single leader group required");
    let g = &structure.leader_groups[0].target.0;
    let window = (start.t, start.t + sup_history.len());

    let mut start_max_dist = f64::NEG_INFINITY;
    let mut ball_counterexample = None;
    for i in 0..start.n() {
        let d = norm.distance(start.row(i), g);
        start_max_dist = start_max_dist.max(d);
        if d >= epsilon && ball_counterexample.is_none() {
            ball_counterexample = Some(Counterexample {
                step: start.t,
                agent: Some(i),
                value: d,
                message: format!(
                    "agent {i} at distance {d} from the target is not strictly inside the \
                     epsilon ball ({epsilon})"
                ),
            });
        }
    }
    let ball_ok = ball_counterexample.is_none();

    let mut sup_degree = f64::NEG_INFINITY;
    let mut sup_counterexample = None;
    for (idx, &(max_alpha, max_one_minus_beta)) in sup_history.iter().enumerate() {
        let v = max_alpha.max(max_one_minus_beta);
        sup_degree = sup_degree.max(v);
        if v >= 1.0 && sup_counterexample.is_none() {
            sup_counterexample = Some(Counterexample {
                step: start.t + idx,
                agent: None,
                value: v,
                message: format!(
                    "per-step degree maximum {v} reaches 1, leaving no contraction margin"
                ),
            });
        }
    }
    let sup_ok = sup_counterexample.is_none();

    let counterexample = ball_counterexample.or(sup_counterexample);
    let verdict = if counterexample.is_some() {
        Verdict::Violated
    } else if sup_history.is_empty() {
        Verdict::UndecidableAtFiniteHorizon
    } else {
        Verdict::VerifiedOnWindow
    };

    HypothesisReport {
        theorem: TheoremId::Theorem2,
        group: Some(0),
        verdict,
        window,
        counterexample,
        evidence: Evidence::Contraction {
            start_max_dist,
            epsilon,
            ball_ok,
            sup_degree,
            sup_ok,
        },
    }
}

/// The weighted convex combination of the targets a follower with constant
/// weights settles at: `sum_k beta_k * g_k / sum_k beta_k`. `None` when every
/// weight is zero (the follower never couples to any leader group).
/// Accumulation is in ascending group order with a single final division.
pub fn predicted_follower_limit(beta: &[f64], targets: &[Opinion]) -> Option<Opinion> {
    assert_eq!(beta.len(), targets.len());
    let mut total = 0.0;
    for &b in beta {
        total += b;
    }
    if total == 0.0 {
        return None;
    }
    let dim = targets.first().map_or(0, |t| t.dim());
    let mut out = vec![0.0; dim];
    for (b, t) in beta.iter().zip(targets) {
        for (o, &g) in out.iter_mut().zip(&t.0) {
            *o += b * g;
        }
    }
    for o in &mut out {
        *o /= total;
    }
    Some(Opinion(out))
}

/// Checks the isolated-subsystems hypothesis on a finished run: pairwise
/// target separation strictly greater than `3 * epsilon`, every leader group
/// starting strictly inside the ball around its own target, every follower
/// starting strictly inside some ball, and no recorded step with an
/// interaction across the follower home assignment.
pub fn check_corollary2_separation(
    structure: &GroupStructure,
    epsilon: f64,
    norm: Norm,
    trajectory: &Trajectory,
) -> HypothesisReport {
    let m = structure.m();
    assert!(m >= 2, "separation needs at least two leader groups");
    let initial = &trajectory.snapshots[0];
    let final_state = trajectory.final_state();
    let window = (initial.t, final_state.t);

    let mut min_sep = f64::INFINITY;
    let mut sep_counterexample = None;
    for a in 0..m {
        for b in (a + 1)..m {
            let d = norm.distance(
                &structure.leader_groups[a].target.0,
                &structure.leader_groups[b].target.0,
            );
            min_sep = min_sep.min(d);
            if d <= 3.0 * epsilon && sep_counterexample.is_none() {
                sep_counterexample = Some(Counterexample {
                    step: initial.t,
                    agent: None,
                    value: d,
                    message: format!(
                        "targets of groups {a} and {b} are {d} apart, not more than \
                         3 * epsilon = {}",
                        3.0 * epsilon
                    ),
                });
            }
        }
    }

    let mut membership_counterexample = None;
    for (k, lg) in structure.leader_groups.iter().enumerate() {
        for &i in &lg.members {
            let d = norm.distance(initial.row(i), &lg.target.0);
            if d >= epsilon && membership_counterexample.is_none() {
                membership_counterexample = Some(Counterexample {
                    step: initial.t,
                    agent: Some(i),
                    value: d,
                    message: format!(
                        "leader {i} of group {k} starts at distance {d}, outside the open \
                         ball of radius {epsilon}"
                    ),
                });
            }
        }
    }
    for &i in &structure.follower_ids {
        let inside_some = structure
            .leader_groups
            .iter()
            .any(|lg| norm.distance(initial.row(i), &lg.target.0) < epsilon);
        if !inside_some && membership_counterexample.is_none() {
            let nearest = structure
                .leader_groups
                .iter()
                .map(|lg| norm.distance(initial.row(i), &lg.target.0))
                .fold(f64::INFINITY, f64::min);
            membership_counterexample = Some(Counterexample {
                step: initial.t,
                agent: Some(i),
                value: nearest,
                message: format!(
                    "follower {i} starts at distance {nearest} from the nearest target, \
                     outside every open ball of radius {epsilon}"
                ),
            });
        }
    }
    let initial_membership_ok = membership_counterexample.is_none();

    let mut cross_steps = 0usize;
    let mut cross_counterexample = None;
    for rec in &trajectory.metrics {
        if rec.cross_system {
            cross_steps += 1;
            if cross_counterexample.is_none() {
                cross_counterexample = Some(Counterexample {
                    step: rec.t,
                    agent: None,
                    value: 1.0,
                    message: format!("interaction crossed subsystem boundaries at step {}", rec.t),
                });
            }
        }
    }
    if trajectory.metrics.is_empty() && trajectory.initial.cross_system {
        cross_steps = 1;
        cross_counterexample = Some(Counterexample {
            step: initial.t,
            agent: None,
            value: 1.0,
            message: "interaction crosses subsystem boundaries in the initial state".to_string(),
        });
    }

    let final_leader_dist: Vec<f64> = (0..m)
        .map(|k| leader_distance(final_state, structure, k, norm).unwrap_or(0.0))
        .collect();

    let counterexample = sep_counterexample
        .or(membership_counterexample)
        .or(cross_counterexample);
    let verdict = if counterexample.is_some() {
        Verdict::Violated
    } else {
        Verdict::VerifiedOnWindow
    };

    HypothesisReport {
        theorem: TheoremId::Corollary2,
        group: None,
        verdict,
        window,
        counterexample,
        evidence: Evidence::Separation {
            min_target_separation: min_sep,
            required_separation: 3.0 * epsilon,
            initial_membership_ok,
            cross_interaction_steps: cross_steps,
            final_leader_dist,
        },
    }
}

/// Result of checking the exponential decay envelope of one group's distance
/// to target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricBoundReport {
    pub pass: bool,
    pub delta: f64,
    /// Distance to target at the start of the run.
    pub c0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<Counterexample>,
}

/// Verifies `C_t <= delta^t * C_0 + 1e-12` for every recorded step of group
/// `k`, where `C_t` is the group's largest member distance to its target.
/// Meaningful when the group's degree stays at or below `delta` throughout
/// and nobody outside the group is visible to it.
pub fn geometric_bound_check(trajectory: &Trajectory, k: usize, delta: f64) -> GeometricBoundReport {
    let c0 = trajectory.initial.leader_dist[k];
    let mut envelope = c0;
    let mut first_violation = None;
    for rec in &trajectory.metrics {
        envelope *= delta;
        let c = rec.leader_dist[k];
        if c > envelope + 1e-12 && first_violation.is_none() {
            first_violation = Some(Counterexample {
                step: rec.t + 1,
                agent: None,
                value: c,
                message: format!(
                    "group distance {c} exceeds the decay envelope {} at step {}",
                    envelope + 1e-12,
                    rec.t + 1
                ),
            });
        }
    }
    GeometricBoundReport { pass: first_violation.is_none(), delta, c0, first_violation }
}

/// Every hypothesis report that applies to a finished run: the recurring-dip
/// check once per leader group, and — depending on the group count — either
/// the single-group contraction check or the multi-group separation check.
/// Legacy runs have no applicable reports. Degree histories are regenerated
/// from the scenario's schedules and seed, so the reports describe exactly
/// the draws the run consumed.
pub fn standard_reports(
    scenario: &CompiledScenario,
    trajectory: &Trajectory,
    delta: f64,
    quota: Option<usize>,
) -> Vec<HypothesisReport> {
    if scenario.params.mode == Mode::Legacy {
        return Vec::new();
    }
    let structure = &scenario.structure;
    let steps = trajectory.steps();
    let mut reports = Vec::new();
    for (k, group) in structure.leader_groups.iter().enumerate() {
        let history = alpha_history(&scenario.alpha_specs[k], &group.members, k, steps, scenario.seed);
        let mut report = check_theorem1(&history, delta, quota);
        report.group = Some(k);
        reports.push(report);
    }
    if structure.m() == 1 {
        let members: Vec<Vec<usize>> =
            structure.leader_groups.iter().map(|g| g.members.clone()).collect();
        let sup_history = degree_sup_history(
            &scenario.alpha_specs,
            &scenario.beta_specs,
            &members,
            &structure.follower_ids,
            steps,
            scenario.seed,
        );
        reports.push(check_theorem2(
            &trajectory.snapshots[0],
            structure,
            scenario.params.epsilon,
            scenario.params.norm,
            &sup_history,
        ));
    } else {
        reports.push(check_corollary2_separation(
            structure,
            scenario.params.epsilon,
            scenario.params.norm,
            trajectory,
        ));
    }
    reports
}

/// The shared follower limit implied by constant interaction weights, and how
/// far the followers ended from it. `predicted` is `None` when any weight is
/// time-varying or random, or when every weight is zero; `final_max_dist` is
/// `None` without both a prediction and at least one follower.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitPrediction {
    pub predicted: Option<Vec<f64>>,
    pub final_max_dist: Option<f64>,
}

pub fn follower_limit_report(
    scenario: &CompiledScenario,
    trajectory: &Trajectory,
) -> LimitPrediction {
    let betas: Option<Vec<f64>> =
        scenario.beta_specs.iter().map(|spec| spec.as_constant()).collect();
    let predicted = betas
        .and_then(|b| {
            let targets: Vec<Opinion> = scenario
                .structure
                .leader_groups
                .iter()
                .map(|g| g.target.clone())
                .collect();
            predicted_follower_limit(&b, &targets)
        })
        .map(|opinion| opinion.0);
    let final_max_dist = predicted.as_ref().and_then(|p| {
        follower_distance(
            trajectory.final_state(),
            &scenario.structure,
            p,
            scenario.params.norm,
        )
    });
    LimitPrediction { predicted, final_max_dist }
}
