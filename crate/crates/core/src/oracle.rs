//! Ground-truth stepper for equivalence testing.
//!
//! Everything here is written as a direct, unoptimized transcription of the
//! update rules: neighbor sets by plain double loops, means by summing in
//! ascending agent order and dividing once, and weighted combinations taken
//! term by term in the fixed documented order (own-crowd or self term first,
//! then group terms in ascending group order), skipping zero coefficients,
//! with the first surviving term initializing the accumulator. It shares no
//! search or summation code with the engine; matching the engine bitwise is
//! the test, not a construction.

use crate::engine::OpinionState;
use crate::model::{DegreeAssignment, GroupStructure, Mode, ModelParams, Norm};

fn oracle_distance(norm: Norm, a: &[f64], b: &[f64]) -> f64 {
    match norm {
        Norm::Euclidean => {
            let mut sum = 0.0;
            for c in 0..a.len() {
                let d = a[c] - b[c];
                sum += d * d;
            }
            sum.sqrt()
        }
        Norm::Chebyshev => {
            let mut m = 0.0f64;
            for c in 0..a.len() {
                m = m.max((a[c] - b[c]).abs());
            }
            m
        }
    }
}

/// Ids from `pool` (taken in the given order) visible to agent `from` under
/// its own threshold.
fn visible_ids(
    state: &OpinionState,
    from: usize,
    pool: &[usize],
    params: &ModelParams,
) -> Vec<usize> {
    let eps = match &params.agent_epsilons {
        Some(v) => v[from],
        None => params.epsilon,
    };
    let mut out = Vec::new();
    for &j in pool {
        if oracle_distance(params.norm, state.row(from), state.row(j)) <= eps {
            out.push(j);
        }
    }
    out
}

fn mean_rows(state: &OpinionState, ids: &[usize]) -> Vec<f64> {
    let dim = state.dim;
    let mut out = vec![0.0; dim];
    for &i in ids {
        for c in 0..dim {
            out[c] += state.row(i)[c];
        }
    }
    for v in &mut out {
        *v /= ids.len() as f64;
    }
    out
}

fn combine(terms: &[(f64, &[f64])], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let mut started = false;
    for &(w, v) in terms {
        if w == 0.0 {
            continue;
        }
        if !started {
            for c in 0..dim {
                out[c] = w * v[c];
            }
            started = true;
        } else {
            for c in 0..dim {
                out[c] += w * v[c];
            }
        }
    }
    out
}

/// One step with explicit degrees, transcribed directly from the update
/// rules. Must agree bitwise with the engine's step on identical inputs.
pub fn oracle_step(
    state: &OpinionState,
    structure: &GroupStructure,
    params: &ModelParams,
    degrees: &DegreeAssignment,
) -> OpinionState {
    let dim = state.dim;
    let mut next = OpinionState { t: state.t + 1, dim, data: vec![0.0; state.data.len()] };

    for (fpos, &i) in structure.follower_ids.iter().enumerate() {
        let own = visible_ids(state, i, &structure.follower_ids, params);
        let own_mean = mean_rows(state, &own);
        let group_sets: Vec<Vec<usize>> = structure
            .leader_groups
            .iter()
            .map(|lg| visible_ids(state, i, &lg.members, params))
            .collect();
        let group_means: Vec<Vec<f64>> = group_sets
            .iter()
            .map(|ids| if ids.is_empty() { vec![0.0; dim] } else { mean_rows(state, ids) })
            .collect();

        let new = match params.mode {
            Mode::Mixed => {
                let mut eff = vec![0.0; structure.m()];
                for k in 0..structure.m() {
                    if !group_sets[k].is_empty() {
                        eff[k] = degrees.beta[fpos][k];
                    }
                }
                let mut sum = 0.0;
                for &b in &eff {
                    sum += b;
                }
                let own_weight = 1.0 - sum;
                let mut terms: Vec<(f64, &[f64])> = vec![(own_weight, &own_mean)];
                for k in 0..structure.m() {
                    terms.push((eff[k], &group_means[k]));
                }
                combine(&terms, dim)
            }
            Mode::Legacy => {
                let pos_weight = if group_sets[0].is_empty() { 0.0 } else { degrees.beta[fpos][0] };
                let neg_weight = if group_sets[1].is_empty() { 0.0 } else { degrees.beta[fpos][1] };
                let own_weight = 1.0 - (pos_weight + neg_weight);
                let terms: Vec<(f64, &[f64])> = vec![
                    (own_weight, &own_mean),
                    (pos_weight, &group_means[0]),
                    (neg_weight, &group_means[1]),
                ];
                combine(&terms, dim)
            }
        };
        for c in 0..dim {
            next.row_mut(i)[c] = new[c];
        }
    }

    for (k, lg) in structure.leader_groups.iter().enumerate() {
        for (j, &i) in lg.members.iter().enumerate() {
            let own = visible_ids(state, i, &lg.members, params);
            let own_mean = mean_rows(state, &own);
            let new = match params.mode {
                Mode::Mixed => {
                    let a = degrees.alpha[k][j];
                    combine(&[(a, &own_mean), (1.0 - a, &lg.target.0)], dim)
                }
                Mode::Legacy => {
                    let w = degrees.alpha[k][j];
                    combine(&[(1.0 - w, &own_mean), (w, &lg.target.0)], dim)
                }
            };
            for c in 0..dim {
                next.row_mut(i)[c] = new[c];
            }
        }
    }

    next
}

/// Plain synchronous bounded-confidence step over one undifferentiated agent
/// set: everyone moves to the mean of their closed neighborhood.
pub fn hk_reference_step(state: &OpinionState, epsilon: f64, norm: Norm) -> OpinionState {
    let dim = state.dim;
    let n = state.n();
    let mut next = OpinionState { t: state.t + 1, dim, data: vec![0.0; state.data.len()] };
    for i in 0..n {
        let mut nbrs = Vec::new();
        for j in 0..n {
            if oracle_distance(norm, state.row(i), state.row(j)) <= epsilon {
                nbrs.push(j);
            }
        }
        let mut mean = vec![0.0; dim];
        for &j in &nbrs {
            for c in 0..dim {
                mean[c] += state.row(j)[c];
            }
        }
        for c in 0..dim {
            next.row_mut(i)[c] = mean[c] / nbrs.len() as f64;
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LeaderGroup, Opinion};

    fn state_1d(values: &[f64]) -> OpinionState {
        OpinionState { t: 0, dim: 1, data: values.to_vec() }
    }

    #[test]
    fn reference_step_averages_within_threshold() {
        let s = state_1d(&[0.0, 1.0]);
        let out = hk_reference_step(&s, 1.0, Norm::Euclidean);
        assert_eq!(out.data, vec![0.5, 0.5]);

        let apart = hk_reference_step(&s, 0.9, Norm::Euclidean);
        assert_eq!(apart.data, vec![0.0, 1.0]);
    }

    #[test]
    fn reference_step_three_agent_profile() {
        let s = state_1d(&[0.0, 0.4, 0.8]);
        let out = hk_reference_step(&s, 0.5, Norm::Euclidean);
        // Approximately {0.2, 0.4, 0.6}, frozen as the directly evaluated
        // expressions: the middle agent sees everyone, the ends see two.
        assert_eq!(out.data[0], (0.0 + 0.4) / 2.0);
        assert_eq!(out.data[1], (0.0 + 0.4 + 0.8) / 3.0);
        assert_eq!(out.data[2], (0.4 + 0.8) / 2.0);
        assert!((out.data[0] - 0.2).abs() < 1e-15);
        assert!((out.data[1] - 0.4).abs() < 1e-15);
        assert!((out.data[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn lone_leader_moves_halfway_to_its_target() {
        let structure = GroupStructure {
            n_agents: 1,
            follower_ids: vec![],
            leader_groups: vec![LeaderGroup { members: vec![0], target: Opinion(vec![1.0]) }],
        };
        let params = ModelParams {
            epsilon: 1.0,
            norm: Norm::Euclidean,
            mode: Mode::Mixed,
            agent_epsilons: None,
        };
        let degrees = DegreeAssignment { alpha: vec![vec![0.5]], beta: vec![] };
        let out = oracle_step(&state_1d(&[0.5]), &structure, &params, &degrees);
        assert_eq!(out.data, vec![0.75]);
    }

    #[test]
    fn population_resting_on_the_target_stays_put() {
        // Dyadic target and degrees make every product and sum exact, so the
        // fixed point is bitwise.
        let structure = GroupStructure {
            n_agents: 3,
            follower_ids: vec![0],
            leader_groups: vec![LeaderGroup {
                members: vec![1, 2],
                target: Opinion(vec![0.5]),
            }],
        };
        let params = ModelParams {
            epsilon: 1.0,
            norm: Norm::Euclidean,
            mode: Mode::Mixed,
            agent_epsilons: None,
        };
        let degrees = DegreeAssignment {
            alpha: vec![vec![0.5, 0.25]],
            beta: vec![vec![0.25]],
        };
        let s = state_1d(&[0.5, 0.5, 0.5]);
        let out = oracle_step(&s, &structure, &params, &degrees);
        assert_eq!(out.data, s.data);
    }

    #[test]
    fn oracle_and_engine_agree_on_a_small_scenario() {
        let structure = GroupStructure {
            n_agents: 5,
            follower_ids: vec![0, 1],
            leader_groups: vec![
                LeaderGroup { members: vec![2, 3], target: Opinion(vec![1.0, 0.0]) },
                LeaderGroup { members: vec![4], target: Opinion(vec![-1.0, 0.5]) },
            ],
        };
        let params = ModelParams {
            epsilon: 0.8,
            norm: Norm::Euclidean,
            mode: Mode::Mixed,
            agent_epsilons: None,
        };
        let state = OpinionState {
            t: 0,
            dim: 2,
            data: vec![0.1, 0.2, 0.3, -0.1, 0.9, 0.1, 0.7, 0.3, -0.8, 0.4],
        };
        let degrees = DegreeAssignment {
            alpha: vec![vec![0.9, 0.3], vec![0.7]],
            beta: vec![vec![0.1, 0.2], vec![0.05, 0.0]],
        };
        let engine_out =
            crate::engine::step_with_degrees(&state, &structure, &params, &degrees);
        let oracle_out = oracle_step(&state, &structure, &params, &degrees);
        assert_eq!(engine_out.state.data, oracle_out.data);
    }
}
