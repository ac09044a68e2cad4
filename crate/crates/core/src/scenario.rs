//! Scenario description: everything a run needs, in one declarative,
//! serialization-friendly bundle.
//!
//! Agent ids are assigned to blocks in declaration order, followers first,
//! then each leader group, unless every block lists explicit `members`.
//! Initial opinions drawn from a box are keyed by (seed, agent, coordinate),
//! so they do not depend on evaluation order.

use serde::{Deserialize, Serialize};

use crate::analysis::predicted_follower_limit;
use crate::engine::OpinionState;
use crate::model::{
    validate_structure, GroupStructure, LeaderGroup, Mode, ModelParams, Norm, Opinion, Violation,
};
use crate::schedule::{draw_init_uniform, ScheduleSpec};

/// How a block's initial opinions are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initializer {
    /// One opinion per member, in member order.
    Explicit { opinions: Vec<Opinion> },
    /// Independent uniform draws from the half-open box `[lo, hi)` per
    /// coordinate.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
}

/// Follower block of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    /// Explicit agent ids; either every block declares these or none does.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<usize>>,
    pub init: Initializer,
    /// One schedule per leader group, in leader declaration order. In legacy
    /// mode: `[positive-class weight, negative-class weight]`.
    pub beta: Vec<ScheduleSpec>,
}

/// One leader group block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<usize>>,
    pub target: Opinion,
    pub init: Initializer,
    /// Mixed mode: self-reliance degree schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ScheduleSpec>,
    /// Legacy mode: pull weight toward the group target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<ScheduleSpec>,
}

/// Per-agent thresholds for legacy mode: one shared scalar or one value per
/// agent id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Shared(f64),
    PerAgent(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegacySpec {
    pub epsilons: EpsilonSpec,
}

fn default_max_steps() -> usize {
    10_000
}

fn default_tol_disp() -> f64 {
    1e-12
}

/// Stopping rules. A run ends at the first rule that fires.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Termination {
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Stop when the largest per-agent displacement of a step falls below
    /// this. Zero disables the rule.
    #[serde(default = "default_tol_disp")]
    pub tol_disp: f64,
    /// Stop when every agent is within this distance of its predicted limit.
    /// Requires constant beta schedules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_lim: Option<f64>,
}

impl Default for Termination {
    fn default() -> Self {
        Termination { max_steps: default_max_steps(), tol_disp: default_tol_disp(), tol_lim: None }
    }
}

/// Output preferences carried by the scenario; command-line flags override.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<String>,
    /// Keep every `stride`-th state plus the final one. Unset: 1 when the
    /// population is at most 1000 agents, else 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
}

/// Complete description of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dimension: usize,
    pub epsilon: f64,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followers: Option<FollowerSpec>,
    pub leaders: Vec<LeaderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legacy: Option<LegacySpec>,
    #[serde(default)]
    pub termination: Termination,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A validated scenario, ready to step.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledScenario {
    pub structure: GroupStructure,
    pub params: ModelParams,
    /// Per leader group: alpha schedule (mixed) or target-pull weight
    /// schedule (legacy).
    pub alpha_specs: Vec<ScheduleSpec>,
    /// Per leader group, applying to every follower. Empty when the scenario
    /// has no followers.
    pub beta_specs: Vec<ScheduleSpec>,
    pub initial: OpinionState,
    /// Per-agent limit points when `tol_lim` termination is enabled.
    pub predicted_limits: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub termination: Termination,
    pub snapshot_stride: usize,
}

impl ScenarioConfig {
    fn validate_initializer(
        &self,
        init: &Initializer,
        count: usize,
        subject: &str,
        legacy_range: bool,
        out: &mut Vec<Violation>,
    ) {
        let d = self.dimension;
        match init {
            Initializer::Explicit { opinions } => {
                if opinions.len() != count {
                    out.push(Violation::new(
                        format!("{subject}.init"),
                        format!("expected {count} opinions, got {}", opinions.len()),
                    ));
                }
                for (i, op) in opinions.iter().enumerate() {
                    if op.dim() != d {
                        out.push(Violation::new(
                            format!("{subject}.init.opinions[{i}]"),
                            format!("expected dimension {d}, got {}", op.dim()),
                        ));
                    }
                    for &v in &op.0 {
                        if !v.is_finite() {
                            out.push(Violation::new(
                                format!("{subject}.init.opinions[{i}]"),
                                "coordinates must be finite",
                            ));
                            break;
                        }
                    }
                    if legacy_range && op.0.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                        out.push(Violation::new(
                            format!("{subject}.init.opinions[{i}]"),
                            "legacy opinions must lie in [-1, 1]",
                        ));
                    }
                }
            }
            Initializer::UniformBox { lo, hi } => {
                if lo.len() != d || hi.len() != d {
                    out.push(Violation::new(
                        format!("{subject}.init"),
                        format!(
                            "bounds must have dimension {d}, got lo {} / hi {}",
                            lo.len(),
                            hi.len()
                        ),
                    ));
                    return;
                }
                for c in 0..d {
                    if !(lo[c].is_finite() && hi[c].is_finite() && lo[c] <= hi[c]) {
                        out.push(Violation::new(
                            format!("{subject}.init"),
                            format!("bounds must be finite with lo <= hi, got [{}, {}]", lo[c], hi[c]),
                        ));
                    }
                    if legacy_range && !(lo[c] >= -1.0 && hi[c] <= 1.0) {
                        out.push(Violation::new(
                            format!("{subject}.init"),
                            "legacy opinions must lie in [-1, 1]",
                        ));
                    }
                }
            }
        }
    }

    /// All problems with this scenario; empty means it can be compiled.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.dimension == 0 {
            out.push(Violation::new("dimension", "must be at least 1"));
        }
        if self.leaders.is_empty() {
            out.push(Violation::new("leaders", "at least one leader group is required"));
        }

        let legacy = self.mode == Mode::Legacy;
        let explicit_blocks = self
            .leaders
            .iter()
            .map(|l| l.members.is_some())
            .chain(self.followers.iter().map(|f| f.members.is_some()))
            .collect::<Vec<_>>();
        if explicit_blocks.iter().any(|&e| e) && !explicit_blocks.iter().all(|&e| e) {
            out.push(Violation::new(
                "members",
                "either every block declares explicit members or none does",
            ));
        }

        let block_count = |size: &Option<usize>, members: &Option<Vec<usize>>, subject: &str, out: &mut Vec<Violation>| {
            match (size, members) {
                (_, Some(list)) => {
                    if size.is_some() && *size != Some(list.len()) {
                        out.push(Violation::new(
                            format!("{subject}.size"),
                            "size disagrees with the explicit member list",
                        ));
                    }
                    list.len()
                }
                (Some(s), None) => *s,
                (None, None) => {
                    out.push(Violation::new(
                        format!("{subject}.size"),
                        "block needs a size or an explicit member list",
                    ));
                    0
                }
            }
        };

        if let Some(f) = &self.followers {
            let count = block_count(&f.size, &f.members, "followers", &mut out);
            self.validate_initializer(&f.init, count, "followers", legacy, &mut out);
            if f.beta.len() != self.leaders.len() {
                out.push(Violation::new(
                    "followers.beta",
                    format!(
                        "expected one schedule per leader group ({}), got {}",
                        self.leaders.len(),
                        f.beta.len()
                    ),
                ));
            }
            for (k, spec) in f.beta.iter().enumerate() {
                spec.validate(&format!("followers.beta[{k}]"), &mut out);
            }
            // Worst-case sum over all groups must stay a convex share, summed
            // in the same ascending group order the engine uses.
            let mut worst = 0.0;
            for spec in &f.beta {
                worst += spec.max_value();
            }
            if worst > 1.0 {
                out.push(Violation::new(
                    "followers.beta",
                    format!("worst-case weight sum {worst} exceeds 1"),
                ));
            }
        }

        for (k, l) in self.leaders.iter().enumerate() {
            let subject = format!("leaders[{k}]");
            let count = block_count(&l.size, &l.members, &subject, &mut out);
            if count == 0 && l.members.is_none() && l.size.is_some() {
                out.push(Violation::new(
                    format!("{subject}.size"),
                    "leader group must be nonempty",
                ));
            }
            if l.target.dim() != self.dimension {
                out.push(Violation::new(
                    format!("{subject}.target"),
                    format!("expected dimension {}, got {}", self.dimension, l.target.dim()),
                ));
            }
            self.validate_initializer(&l.init, count, &subject, legacy, &mut out);
            match (legacy, &l.alpha, &l.weight) {
                (false, Some(spec), None) => spec.validate(&format!("{subject}.alpha"), &mut out),
                (false, _, Some(_)) => out.push(Violation::new(
                    format!("{subject}.weight"),
                    "weight schedules apply only to legacy mode; use alpha",
                )),
                (false, None, None) => out.push(Violation::new(
                    format!("{subject}.alpha"),
                    "leader group needs an alpha schedule",
                )),
                (true, None, Some(spec)) => spec.validate(&format!("{subject}.weight"), &mut out),
                (true, Some(_), _) => out.push(Violation::new(
                    format!("{subject}.alpha"),
                    "alpha schedules apply only to mixed mode; use weight",
                )),
                (true, None, None) => out.push(Violation::new(
                    format!("{subject}.weight"),
                    "legacy leader group needs a weight schedule",
                )),
            }
        }

        match (legacy, &self.legacy) {
            (false, Some(_)) => out.push(Violation::new(
                "legacy",
                "legacy section applies only to legacy mode",
            )),
            (true, None) => out.push(Violation::new(
                "legacy",
                "legacy mode requires a legacy section with per-agent thresholds",
            )),
            _ => {}
        }

        if self.termination.tol_disp < 0.0 || !self.termination.tol_disp.is_finite() {
            out.push(Violation::new(
                "termination.tol_disp",
                format!("must be finite and nonnegative, got {}", self.termination.tol_disp),
            ));
        }
        if let Some(tol) = self.termination.tol_lim {
            if !(tol.is_finite() && tol > 0.0) {
                out.push(Violation::new(
                    "termination.tol_lim",
                    format!("must be finite and positive, got {tol}"),
                ));
            }
            if let Some(f) = &self.followers {
                if !f.beta.iter().all(|s| s.as_constant().is_some()) {
                    out.push(Violation::new(
                        "termination.tol_lim",
                        "limit-based stopping requires constant beta schedules",
                    ));
                }
            }
        }
        if self.output.snapshot_stride == Some(0) {
            out.push(Violation::new("output.snapshot_stride", "must be at least 1"));
        }

        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            out.push(Violation::new(
                "epsilon",
                format!("must be finite and nonnegative, got {}", self.epsilon),
            ));
        }

        out
    }

    /// Validates and compiles the scenario. On failure every violation found
    /// is returned, not just the first.
    pub fn build(&self) -> Result<CompiledScenario, Vec<Violation>> {
        let mut violations = self.validate();
        if !violations.is_empty() {
            return Err(violations);
        }

        let follower_count = self
            .followers
            .as_ref()
            .map(|f| f.members.as_ref().map(|m| m.len()).or(f.size).unwrap_or(0))
            .unwrap_or(0);
        let leader_counts: Vec<usize> = self
            .leaders
            .iter()
            .map(|l| l.members.as_ref().map(|m| m.len()).or(l.size).unwrap_or(0))
            .collect();
        let n_agents = follower_count + leader_counts.iter().sum::<usize>();

        let explicit = self.leaders.iter().any(|l| l.members.is_some());
        let (follower_ids, leader_members): (Vec<usize>, Vec<Vec<usize>>) = if explicit {
            (
                self.followers
                    .as_ref()
                    .and_then(|f| f.members.clone())
                    .unwrap_or_default(),
                self.leaders
                    .iter()
                    .map(|l| l.members.clone().unwrap_or_default())
                    .collect(),
            )
        } else {
            let mut next = 0usize;
            let follower_ids = (0..follower_count).map(|_| { let id = next; next += 1; id }).collect();
            let leader_members = leader_counts
                .iter()
                .map(|&c| (0..c).map(|_| { let id = next; next += 1; id }).collect())
                .collect();
            (follower_ids, leader_members)
        };

        let structure = GroupStructure {
            n_agents,
            follower_ids,
            leader_groups: self
                .leaders
                .iter()
                .zip(&leader_members)
                .map(|(l, members)| LeaderGroup { members: members.clone(), target: l.target.clone() })
                .collect(),
        };

        let agent_epsilons = match (&self.mode, &self.legacy) {
            (Mode::Legacy, Some(spec)) => Some(match &spec.epsilons {
                EpsilonSpec::Shared(e) => vec![*e; n_agents],
                EpsilonSpec::PerAgent(v) => v.clone(),
            }),
            _ => None,
        };
        let params = ModelParams {
            epsilon: self.epsilon,
            norm: self.norm,
            mode: self.mode,
            agent_epsilons,
        };
        violations.extend(validate_structure(&structure, &params));
        if !violations.is_empty() {
            return Err(violations);
        }

        let mut data = vec![0.0; n_agents * self.dimension];
        let place = |init: &Initializer, members: &[usize], data: &mut Vec<f64>| {
            match init {
                Initializer::Explicit { opinions } => {
                    for (j, &id) in members.iter().enumerate() {
                        data[id * self.dimension..(id + 1) * self.dimension]
                            .copy_from_slice(&opinions[j].0);
                    }
                }
                Initializer::UniformBox { lo, hi } => {
                    for &id in members {
                        for c in 0..self.dimension {
                            let u = draw_init_uniform(self.seed, id, c);
                            data[id * self.dimension + c] = lo[c] + u * (hi[c] - lo[c]);
                        }
                    }
                }
            }
        };
        if let Some(f) = &self.followers {
            place(&f.init, &structure.follower_ids, &mut data);
        }
        for (l, lg) in self.leaders.iter().zip(&structure.leader_groups) {
            place(&l.init, &lg.members, &mut data);
        }
        let initial = OpinionState { t: 0, dim: self.dimension, data };

        let alpha_specs: Vec<ScheduleSpec> = self
            .leaders
            .iter()
            .map(|l| match self.mode {
                Mode::Mixed => l.alpha.clone().unwrap(),
                Mode::Legacy => l.weight.clone().unwrap(),
            })
            .collect();
        let beta_specs: Vec<ScheduleSpec> = self
            .followers
            .as_ref()
            .map(|f| f.beta.clone())
            .unwrap_or_default();

        let predicted_limits = match self.termination.tol_lim {
            None => None,
            Some(_) => {
                let betas: Vec<f64> = beta_specs.iter().map(|s| s.as_constant().unwrap()).collect();
                let targets: Vec<Opinion> = structure
                    .leader_groups
                    .iter()
                    .map(|lg| lg.target.clone())
                    .collect();
                let follower_limit = if structure.follower_ids.is_empty() {
                    None
                } else {
                    match predicted_follower_limit(&betas, &targets) {
                        Some(limit) => Some(limit.0),
                        None => {
                            return Err(vec![Violation::new(
                                "termination.tol_lim",
                                "followers have no predicted limit when all beta weights are zero",
                            )])
                        }
                    }
                };
                let roles = structure.roles();
                let mut limits = vec![Vec::new(); n_agents];
                for (id, role) in roles.iter().enumerate() {
                    limits[id] = match role {
                        crate::model::Role::Follower { .. } => follower_limit.clone().unwrap(),
                        crate::model::Role::Leader { group, .. } => {
                            structure.leader_groups[*group].target.0.clone()
                        }
                    };
                }
                Some(limits)
            }
        };

        let snapshot_stride = self
            .output
            .snapshot_stride
            .unwrap_or(if n_agents <= 1000 { 1 } else { 10 });

        Ok(CompiledScenario {
            structure,
            params,
            alpha_specs,
            beta_specs,
            initial,
            predicted_limits,
            seed: self.seed,
            termination: self.termination.clone(),
            snapshot_stride,
        })
    }
}
