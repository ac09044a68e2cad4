//! Declarative schedules for the time-varying interaction degrees, and the
//! keyed generator that realizes their random draws.
//!
//! Randomness is counter-based: every draw is a pure function of
//! `(seed, purpose, agent, group, step)`, obtained by chaining a SplitMix64
//! finalizer over those words. No generator state is carried between draws,
//! so draw order is irrelevant, histories can be regenerated exactly from
//! the scenario alone, and per-agent work can be scheduled freely without
//! affecting results.

use serde::{Deserialize, Serialize};

use crate::model::Violation;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub(crate) const SALT_ALPHA: u64 = 0xA1;
pub(crate) const SALT_BETA: u64 = 0xB2;
pub(crate) const SALT_INIT: u64 = 0x17;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn chain(h: u64, word: u64) -> u64 {
    mix64(h.wrapping_add(GOLDEN_GAMMA).wrapping_add(word))
}

/// Address of a single random draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngKey {
    pub seed: u64,
    pub agent: u64,
    pub group: u64,
    pub step: u64,
}

impl RngKey {
    pub fn new(seed: u64, agent: usize, group: usize, step: usize) -> Self {
        RngKey { seed, agent: agent as u64, group: group as u64, step: step as u64 }
    }

    /// Uniform draw in [0, 1) for this key and purpose, using the top 53 bits
    /// of the mixed word.
    pub fn uniform(&self, salt: u64) -> f64 {
        let mut h = self.seed;
        h = chain(h, salt);
        h = chain(h, self.agent);
        h = chain(h, self.group);
        h = chain(h, self.step);
        (h >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

/// Named formula families for deterministic time-varying degrees. `c` must
/// lie in [0, 2] so every value stays inside [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaFamily {
    /// `1 - c / (t + 2)`, climbing toward 1.
    RampToOne,
    /// `c / (t + 2)`, decaying toward 0.
    DecayToZero,
}

/// Declarative description of one degree stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// The same value at every step, for every agent. Consumes no randomness.
    Constant { value: f64 },
    /// `value_a` with probability `prob_a`, else `value_b`, drawn
    /// independently per (agent, group, step).
    BernoulliMix { value_a: f64, value_b: f64, prob_a: f64 },
    /// Explicit per-step values; steps beyond the end hold the last entry.
    Table { values: Vec<f64> },
    /// A named deterministic formula in `t`.
    Formula { family: FormulaFamily, c: f64 },
}

impl ScheduleSpec {
    /// Value for `agent` (member of `group`) at step `t`. `salt` selects the
    /// draw purpose so alpha and beta streams never collide.
    fn eval(&self, agent: usize, group: usize, t: usize, seed: u64, salt: u64) -> f64 {
        match self {
            ScheduleSpec::Constant { value } => *value,
            ScheduleSpec::BernoulliMix { value_a, value_b, prob_a } => {
                let u = RngKey::new(seed, agent, group, t).uniform(salt);
                if u < *prob_a {
                    *value_a
                } else {
                    *value_b
                }
            }
            ScheduleSpec::Table { values } => values[t.min(values.len() - 1)],
            ScheduleSpec::Formula { family, c } => match family {
                FormulaFamily::RampToOne => 1.0 - c / (t as f64 + 2.0),
                FormulaFamily::DecayToZero => c / (t as f64 + 2.0),
            },
        }
    }

    /// Largest value any draw of this schedule can take at any step.
    pub fn max_value(&self) -> f64 {
        match self {
            ScheduleSpec::Constant { value } => *value,
            ScheduleSpec::BernoulliMix { value_a, value_b, .. } => value_a.max(*value_b),
            ScheduleSpec::Table { values } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ScheduleSpec::Formula { family, c } => match family {
                // Supremum as t grows; individual values stay below it.
                FormulaFamily::RampToOne => 1.0,
                FormulaFamily::DecayToZero => c / 2.0,
            },
        }
    }

    /// Smallest value any draw of this schedule can take at any step.
    pub fn min_value(&self) -> f64 {
        match self {
            ScheduleSpec::Constant { value } => *value,
            ScheduleSpec::BernoulliMix { value_a, value_b, .. } => value_a.min(*value_b),
            ScheduleSpec::Table { values } => values.iter().copied().fold(f64::INFINITY, f64::min),
            ScheduleSpec::Formula { family, c } => match family {
                FormulaFamily::RampToOne => 1.0 - c / 2.0,
                FormulaFamily::DecayToZero => 0.0,
            },
        }
    }

    /// The single value of a constant schedule, if it is one.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScheduleSpec::Constant { value } => Some(*value),
            _ => None,
        }
    }

    /// Range and well-formedness checks. `subject` names the config location
    /// in reported violations.
    pub fn validate(&self, subject: &str, out: &mut Vec<Violation>) {
        fn check_range(out: &mut Vec<Violation>, subject: &str, name: &str, v: f64) {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                out.push(Violation::new(
                    format!("{subject}.{name}"),
                    format!("must lie in [0, 1], got {v}"),
                ));
            }
        }
        match self {
            ScheduleSpec::Constant { value } => check_range(out, subject, "value", *value),
            ScheduleSpec::BernoulliMix { value_a, value_b, prob_a } => {
                check_range(out, subject, "value_a", *value_a);
                check_range(out, subject, "value_b", *value_b);
                check_range(out, subject, "prob_a", *prob_a);
            }
            ScheduleSpec::Table { values } => {
                if values.is_empty() {
                    out.push(Violation::new(
                        format!("{subject}.values"),
                        "table schedule must have at least one entry",
                    ));
                }
                for (i, &v) in values.iter().enumerate() {
                    check_range(out, subject, &format!("values[{i}]"), v);
                }
            }
            ScheduleSpec::Formula { c, .. } => {
                if !(c.is_finite() && (0.0..=2.0).contains(c)) {
                    out.push(Violation::new(
                        format!("{subject}.c"),
                        format!("must lie in [0, 2] so all values stay in [0, 1], got {c}"),
                    ));
                }
            }
        }
    }
}

/// Interaction degree of a leader (`agent`, member of leader group `group`)
/// at step `t`. In legacy mode the same call yields the leader's target pull
/// weight.
pub fn draw_alpha(spec: &ScheduleSpec, agent: usize, group: usize, t: usize, seed: u64) -> f64 {
    spec.eval(agent, group, t, seed, SALT_ALPHA)
}

/// Degree vector of a follower toward each leader group at step `t`.
/// `specs[k]` governs the entry for group `k`. The empty-neighborhood zeroing
/// rule is applied later by the engine, not here.
pub fn draw_beta_vector(specs: &[ScheduleSpec], agent: usize, t: usize, seed: u64) -> Vec<f64> {
    specs
        .iter()
        .enumerate()
        .map(|(k, spec)| spec.eval(agent, k, t, seed, SALT_BETA))
        .collect()
}

/// Uniform draw in [0, 1) used for initial opinions, one stream per
/// (agent, coordinate).
pub fn draw_init_uniform(seed: u64, agent: usize, coordinate: usize) -> f64 {
    RngKey::new(seed, agent, coordinate, 0).uniform(SALT_INIT)
}

/// Per-step, per-member values of one leader group's schedule over
/// `steps` steps; row `t` holds the draws of step `t` in member order.
/// Because draws are counter-based this reproduces exactly what a run saw.
pub fn alpha_history(
    spec: &ScheduleSpec,
    members: &[usize],
    group: usize,
    steps: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    (0..steps)
        .map(|t| {
            members
                .iter()
                .map(|&agent| draw_alpha(spec, agent, group, t, seed))
                .collect()
        })
        .collect()
}

/// Per-step max over all leader groups of the drawn alpha, and per-step max
/// over followers of `1 - sum(beta)`; the two window quantities the
/// hypothesis checkers consume.
pub fn degree_sup_history(
    alpha_specs: &[ScheduleSpec],
    beta_specs: &[ScheduleSpec],
    leader_members: &[Vec<usize>],
    follower_ids: &[usize],
    steps: usize,
    seed: u64,
) -> Vec<(f64, f64)> {
    (0..steps)
        .map(|t| {
            let mut max_alpha = f64::NEG_INFINITY;
            for (k, members) in leader_members.iter().enumerate() {
                for &agent in members {
                    max_alpha = max_alpha.max(draw_alpha(&alpha_specs[k], agent, k, t, seed));
                }
            }
            let mut max_one_minus_beta = f64::NEG_INFINITY;
            for &agent in follower_ids {
                let betas = draw_beta_vector(beta_specs, agent, t, seed);
                let mut sum = 0.0;
                for b in betas {
                    sum += b;
                }
                max_one_minus_beta = max_one_minus_beta.max(1.0 - sum);
            }
            (max_alpha, max_one_minus_beta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_ignores_coordinates() {
        let spec = ScheduleSpec::Constant { value: 0.25 };
        assert_eq!(draw_alpha(&spec, 0, 0, 0, 1), 0.25);
        assert_eq!(draw_alpha(&spec, 9, 2, 55, 999), 0.25);
    }

    #[test]
    fn table_holds_last_value() {
        let spec = ScheduleSpec::Table { values: vec![1.0, 0.5, 0.0] };
        assert_eq!(draw_alpha(&spec, 0, 0, 0, 7), 1.0);
        assert_eq!(draw_alpha(&spec, 0, 0, 2, 7), 0.0);
        assert_eq!(draw_alpha(&spec, 0, 0, 50, 7), 0.0);
    }

    #[test]
    fn formula_families() {
        let ramp = ScheduleSpec::Formula { family: FormulaFamily::RampToOne, c: 1.0 };
        assert_eq!(draw_alpha(&ramp, 0, 0, 0, 7), 0.5);
        assert_eq!(draw_alpha(&ramp, 0, 0, 8, 7), 0.9);
        let decay = ScheduleSpec::Formula { family: FormulaFamily::DecayToZero, c: 1.0 };
        assert_eq!(draw_alpha(&decay, 0, 0, 0, 7), 0.5);
        assert_eq!(draw_alpha(&decay, 0, 0, 8, 7), 0.1);
    }

    #[test]
    fn draws_are_pure_functions_of_their_key() {
        let spec = ScheduleSpec::BernoulliMix { value_a: 0.2, value_b: 0.8, prob_a: 0.5 };
        let a = draw_alpha(&spec, 3, 1, 10, 42);
        let b = draw_alpha(&spec, 3, 1, 10, 42);
        assert_eq!(a.to_bits(), b.to_bits());
        // Purpose separation: alpha and beta streams at identical coordinates
        // must not be correlated copies of each other.
        let mut alpha_stream = Vec::new();
        let mut beta_stream = Vec::new();
        for t in 0..64 {
            alpha_stream.push(draw_alpha(&spec, 3, 0, t, 42));
            beta_stream.push(draw_beta_vector(&[spec.clone()], 3, t, 42)[0]);
        }
        assert_ne!(alpha_stream, beta_stream);
    }

    #[test]
    fn uniform_draws_pass_chi_square_smoke_test() {
        let bins = 100;
        let draws = 100_000;
        let mut counts = vec![0u64; bins];
        for i in 0..draws {
            let u = RngKey::new(12345, i % 977, i % 7, i / 7).uniform(SALT_ALPHA);
            assert!((0.0..1.0).contains(&u));
            counts[(u * bins as f64) as usize] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 99 degrees of freedom: mean 99, std ~14. Deterministic given the
        // fixed seed; generous bounds guard against generator regressions.
        assert!(stat > 50.0 && stat < 160.0, "chi-square statistic {stat}");
    }

    #[test]
    fn bernoulli_mix_matches_requested_frequency() {
        let third = 1.0 / 3.0;
        let spec = ScheduleSpec::BernoulliMix { value_a: 0.99, value_b: 1.0, prob_a: third };
        let draws = 100_000;
        let mut hits = 0u64;
        for i in 0..draws {
            if draw_alpha(&spec, i % 100, 0, i / 100, 2024) == 0.99 {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        assert!((freq - third).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn validation_flags_out_of_range_values() {
        let mut v = Vec::new();
        ScheduleSpec::Constant { value: 1.5 }.validate("alpha", &mut v);
        ScheduleSpec::Table { values: vec![] }.validate("beta[0]", &mut v);
        ScheduleSpec::Formula { family: FormulaFamily::RampToOne, c: 3.0 }.validate("alpha", &mut v);
        assert_eq!(v.len(), 3);
        assert!(v[0].subject.contains("alpha.value"));
        assert!(v[1].message.contains("at least one entry"));
        assert!(v[2].subject.contains(".c"));
    }

    #[test]
    fn extreme_values_of_each_kind() {
        let bern = ScheduleSpec::BernoulliMix { value_a: 0.3, value_b: 0.7, prob_a: 0.5 };
        assert_eq!(bern.max_value(), 0.7);
        assert_eq!(bern.min_value(), 0.3);
        let ramp = ScheduleSpec::Formula { family: FormulaFamily::RampToOne, c: 0.5 };
        assert_eq!(ramp.max_value(), 1.0);
        assert_eq!(ramp.min_value(), 0.75);
        let table = ScheduleSpec::Table { values: vec![0.2, 0.9, 0.4] };
        assert_eq!(table.max_value(), 0.9);
        assert_eq!(table.min_value(), 0.2);
    }

    #[test]
    fn history_regeneration_is_exact() {
        let spec = ScheduleSpec::BernoulliMix { value_a: 0.1, value_b: 0.9, prob_a: 0.4 };
        let members = vec![4, 7, 9];
        let h1 = alpha_history(&spec, &members, 1, 50, 77);
        let h2 = alpha_history(&spec, &members, 1, 50, 77);
        assert_eq!(h1, h2);
        for (t, row) in h1.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, draw_alpha(&spec, members[j], 1, t, 77));
            }
        }
    }
}
