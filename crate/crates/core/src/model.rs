//! Core model types and the per-agent update rules.
//!
//! All averages are accumulated in ascending agent-index order and divided
//! once by the neighbor count, and weighted combinations evaluate their terms
//! in a fixed documented order. Every consumer that promises bit-identical
//! results (the optimized engine, the reference oracle, the public update
//! functions here) follows that same arithmetic contract.

use serde::{Deserialize, Serialize};

/// A point in opinion space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Opinion(pub Vec<f64>);

impl Opinion {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Opinion {
    fn from(coords: Vec<f64>) -> Self {
        Opinion(coords)
    }
}

/// Distance used for the confidence test and all reported gaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Euclidean,
    Chebyshev,
}

impl Norm {
    /// Distance between two equal-length coordinate slices.
    ///
    /// Euclidean sums squared differences in ascending coordinate order and
    /// takes one square root; Chebyshev folds the coordinate-wise absolute
    /// differences through `max` in the same order.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Norm::Euclidean => {
                let mut acc = 0.0;
                for c in 0..a.len() {
                    let d = a[c] - b[c];
                    acc += d * d;
                }
                acc.sqrt()
            }
            Norm::Chebyshev => {
                let mut acc = 0.0f64;
                for c in 0..a.len() {
                    acc = acc.max((a[c] - b[c]).abs());
                }
                acc
            }
        }
    }
}

impl Default for Norm {
    fn default() -> Self {
        Norm::Euclidean
    }
}

/// Which family of update rules a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// d-dimensional dynamics with one shared threshold and any number of
    /// leader groups.
    Mixed,
    /// The original scalar three-class dynamics with per-agent thresholds,
    /// one positive and one negative leader group.
    Legacy,
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Mixed
    }
}

/// One leader group: its member agent ids (sorted ascending) and the fixed
/// target it is steered toward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderGroup {
    pub members: Vec<usize>,
    pub target: Opinion,
}

/// Partition of the agent ids `0..n_agents` into one follower set and at
/// least one leader group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    pub n_agents: usize,
    /// Follower agent ids, sorted ascending. May be empty.
    pub follower_ids: Vec<usize>,
    pub leader_groups: Vec<LeaderGroup>,
}

/// Role of a single agent inside a [`GroupStructure`], with its position in
/// the owning list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Follower { position: usize },
    Leader { group: usize, position: usize },
}

impl GroupStructure {
    pub fn m(&self) -> usize {
        self.leader_groups.len()
    }

    /// Opinion dimension, taken from the first target.
    pub fn dimension(&self) -> usize {
        self.leader_groups
            .first()
            .map(|g| g.target.dim())
            .unwrap_or(0)
    }

    /// Per-agent role table. Call only on a validated structure; unassigned
    /// ids panic here rather than silently misbehaving later.
    pub fn roles(&self) -> Vec<Role> {
        let mut roles: Vec<Option<Role>> = vec![None; self.n_agents];
        for (position, &id) in self.follower_ids.iter().enumerate() {
            roles[id] = Some(Role::Follower { position });
        }
        for (group, lg) in self.leader_groups.iter().enumerate() {
            for (position, &id) in lg.members.iter().enumerate() {
                roles[id] = Some(Role::Leader { group, position });
            }
        }
        roles
            .into_iter()
            .enumerate()
            .map(|(id, r)| r.unwrap_or_else(|| panic!("agent {id} has no group assignment")))
            .collect()
    }
}

/// Run-level parameter bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Confidence threshold shared by all agents in mixed mode.
    pub epsilon: f64,
    pub norm: Norm,
    pub mode: Mode,
    /// Per-agent thresholds; required by legacy mode, rejected otherwise.
    pub agent_epsilons: Option<Vec<f64>>,
}

/// Per-step interaction degrees, positionally indexed: `alpha[k][j]` belongs
/// to member `j` of leader group `k` (in legacy mode this slot holds the
/// leader's pull weight toward its target), `beta[fi][k]` belongs to the
/// `fi`-th follower and leader group `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeAssignment {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl DegreeAssignment {
    /// Structural and range checks; returns every problem found.
    pub fn validate(&self, structure: &GroupStructure) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.alpha.len() != structure.m() {
            out.push(Violation::new(
                "degrees.alpha",
                format!(
                    "expected one alpha list per leader group ({}), got {}",
                    structure.m(),
                    self.alpha.len()
                ),
            ));
        }
        for (k, (list, lg)) in self.alpha.iter().zip(&structure.leader_groups).enumerate() {
            if list.len() != lg.members.len() {
                out.push(Violation::new(
                    format!("degrees.alpha[{k}]"),
                    format!("expected {} entries, got {}", lg.members.len(), list.len()),
                ));
            }
            for (j, &a) in list.iter().enumerate() {
                if !(0.0..=1.0).contains(&a) {
                    out.push(Violation::new(
                        format!("degrees.alpha[{k}][{j}]"),
                        format!("value {a} outside [0, 1]"),
                    ));
                }
            }
        }
        if self.beta.len() != structure.follower_ids.len() {
            out.push(Violation::new(
                "degrees.beta",
                format!(
                    "expected one beta vector per follower ({}), got {}",
                    structure.follower_ids.len(),
                    self.beta.len()
                ),
            ));
        }
        for (fi, vec) in self.beta.iter().enumerate() {
            if vec.len() != structure.m() {
                out.push(Violation::new(
                    format!("degrees.beta[{fi}]"),
                    format!("expected {} entries, got {}", structure.m(), vec.len()),
                ));
            }
            let mut sum = 0.0;
            for (k, &b) in vec.iter().enumerate() {
                if !(0.0..=1.0).contains(&b) {
                    out.push(Violation::new(
                        format!("degrees.beta[{fi}][{k}]"),
                        format!("value {b} outside [0, 1]"),
                    ));
                }
                sum += b;
            }
            if sum > 1.0 {
                out.push(Violation::new(
                    format!("degrees.beta[{fi}]"),
                    format!("entries sum to {sum} > 1"),
                ));
            }
        }
        out
    }
}

/// One named validation problem. Collected into lists so callers can report
/// everything at once instead of failing on the first issue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// What the problem is about, e.g. `leaders[0].members` or `epsilon`.
    pub subject: String,
    pub message: String,
}

impl Violation {
    pub fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn check_sorted_unique(ids: &[usize], subject: &str, out: &mut Vec<Violation>) {
    for w in ids.windows(2) {
        if w[1] <= w[0] {
            out.push(Violation::new(
                subject.to_string(),
                format!("ids must be strictly ascending, found {} before {}", w[0], w[1]),
            ));
            return;
        }
    }
}

/// Checks that the structure is a proper partition and that the parameters
/// are coherent with it. Returns all violations found; an empty list means
/// the pair is runnable.
pub fn validate_structure(structure: &GroupStructure, params: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = structure.n_agents;

    if structure.leader_groups.is_empty() {
        out.push(Violation::new("leaders", "at least one leader group is required"));
    }
    for (k, lg) in structure.leader_groups.iter().enumerate() {
        if lg.members.is_empty() {
            out.push(Violation::new(
                format!("leaders[{k}].members"),
                "leader group must be nonempty",
            ));
        }
        check_sorted_unique(&lg.members, &format!("leaders[{k}].members"), &mut out);
    }
    check_sorted_unique(&structure.follower_ids, "followers.members", &mut out);

    let dim = structure.dimension();
    for (k, lg) in structure.leader_groups.iter().enumerate() {
        if lg.target.dim() != dim {
            out.push(Violation::new(
                format!("leaders[{k}].target"),
                format!("dimension {} does not match dimension {dim}", lg.target.dim()),
            ));
        }
        if lg.target.0.iter().any(|v| !v.is_finite()) {
            out.push(Violation::new(
                format!("leaders[{k}].target"),
                "target coordinates must be finite",
            ));
        }
    }

    // Partition check: every id in 0..n exactly once across all groups.
    let mut seen = vec![0usize; n];
    let mut note = |id: usize, subject: String, out: &mut Vec<Violation>| {
        if id >= n {
            out.push(Violation::new(subject, format!("agent id {id} out of range (n = {n})")));
        } else {
            seen[id] += 1;
            if seen[id] == 2 {
                out.push(Violation::new(subject, format!("agent {id} assigned to more than one group")));
            }
        }
    };
    for &id in &structure.follower_ids {
        note(id, "followers.members".into(), &mut out);
    }
    for (k, lg) in structure.leader_groups.iter().enumerate() {
        for &id in &lg.members {
            note(id, format!("leaders[{k}].members"), &mut out);
        }
    }
    for (id, &count) in seen.iter().enumerate() {
        if count == 0 {
            out.push(Violation::new(
                "structure",
                format!("agent {id} belongs to no group"),
            ));
        }
    }

    if !(params.epsilon.is_finite() && params.epsilon >= 0.0) {
        out.push(Violation::new(
            "epsilon",
            format!("must be finite and nonnegative, got {}", params.epsilon),
        ));
    }

    match params.mode {
        Mode::Mixed => {
            if params.agent_epsilons.is_some() {
                out.push(Violation::new(
                    "agent_epsilons",
                    "per-agent thresholds apply only to legacy mode",
                ));
            }
        }
        Mode::Legacy => {
            if dim != 1 {
                out.push(Violation::new(
                    "mode",
                    format!("legacy mode requires dimension 1, got {dim}"),
                ));
            }
            if structure.m() != 2 {
                out.push(Violation::new(
                    "mode",
                    format!("legacy mode requires exactly 2 leader groups, got {}", structure.m()),
                ));
            }
            match &params.agent_epsilons {
                None => out.push(Violation::new(
                    "agent_epsilons",
                    "legacy mode requires per-agent thresholds",
                )),
                Some(eps) => {
                    if eps.len() != n {
                        out.push(Violation::new(
                            "agent_epsilons",
                            format!("expected {n} entries, got {}", eps.len()),
                        ));
                    }
                    for (i, &e) in eps.iter().enumerate() {
                        if !(e.is_finite() && e >= 0.0) {
                            out.push(Violation::new(
                                format!("agent_epsilons[{i}]"),
                                format!("must be finite and nonnegative, got {e}"),
                            ));
                        }
                    }
                }
            }
            if structure.m() == 2 && dim == 1 {
                let pos = structure.leader_groups[0].target.0[0];
                let neg = structure.leader_groups[1].target.0[0];
                if !(0.0..=1.0).contains(&pos) {
                    out.push(Violation::new(
                        "leaders[0].target",
                        format!("legacy positive target must lie in [0, 1], got {pos}"),
                    ));
                }
                if !(-1.0..=0.0).contains(&neg) {
                    out.push(Violation::new(
                        "leaders[1].target",
                        format!("legacy negative target must lie in [-1, 0], got {neg}"),
                    ));
                }
            }
        }
    }

    out
}

/// Mean of the selected rows of a flat row-major matrix, written into `out`.
/// Rows are added in the order given by `members` (callers keep these
/// ascending), then divided once by the count. Kept as the indexed twin of
/// [`mean_of_rows`] so tests can assert the two orderings agree.
#[cfg(test)]
pub(crate) fn mean_of(data: &[f64], dim: usize, members: &[usize], out: &mut [f64]) {
    debug_assert!(!members.is_empty());
    out.fill(0.0);
    for &j in members {
        let row = &data[j * dim..(j + 1) * dim];
        for c in 0..dim {
            out[c] += row[c];
        }
    }
    let n = members.len() as f64;
    for c in 0..dim {
        out[c] /= n;
    }
}

/// Mean of a set of equal-length rows, added in the given order and divided
/// once by the count.
pub(crate) fn mean_of_rows(rows: &[&[f64]], out: &mut [f64]) {
    debug_assert!(!rows.is_empty());
    out.fill(0.0);
    for row in rows {
        for c in 0..out.len() {
            out[c] += row[c];
        }
    }
    let n = rows.len() as f64;
    for c in 0..out.len() {
        out[c] /= n;
    }
}

/// Weighted combination of vectors, evaluated left to right.
///
/// Terms with coefficient exactly zero are skipped entirely, and the first
/// surviving term initializes the accumulator, so a term of weight 1 standing
/// alone reproduces its vector bit-for-bit.
pub(crate) fn combine_into(terms: &[(f64, &[f64])], out: &mut [f64]) {
    let mut started = false;
    for &(w, v) in terms {
        if w == 0.0 {
            continue;
        }
        debug_assert_eq!(v.len(), out.len());
        if started {
            for c in 0..out.len() {
                out[c] += w * v[c];
            }
        } else {
            for c in 0..out.len() {
                out[c] = w * v[c];
            }
            started = true;
        }
    }
    debug_assert!(started, "all combination weights were zero");
}

/// Next opinion of a leader: `alpha` times the mean of the visible members of
/// its own group plus `1 - alpha` times the group target.
///
/// `neighbor_opinions` is the leader's view of its own group and always
/// contains the leader itself, so it must be nonempty.
pub fn leader_update(neighbor_opinions: &[&[f64]], alpha: f64, target: &[f64]) -> Opinion {
    assert!(
        !neighbor_opinions.is_empty(),
        "a leader always sees at least itself"
    );
    debug_assert!((0.0..=1.0).contains(&alpha));
    let dim = target.len();
    let mut mean = vec![0.0; dim];
    mean_of_rows(neighbor_opinions, &mut mean);
    let mut out = vec![0.0; dim];
    combine_into(&[(alpha, mean.as_slice()), (1.0 - alpha, target)], &mut out);
    Opinion(out)
}

/// Next opinion of a follower in mixed mode.
///
/// `leader_neighbor_opinions[k]` holds the opinions of the visible members of
/// leader group `k`. A group with no visible members contributes nothing and
/// its `beta[k]` weight moves to the follower-average coefficient for this
/// step (no renormalization of the other weights). The follower coefficient
/// is `1 - sum(effective beta)`, with the sum taken in ascending group order.
pub fn follower_update(
    follower_neighbor_opinions: &[&[f64]],
    leader_neighbor_opinions: &[Vec<&[f64]>],
    beta: &[f64],
) -> Opinion {
    assert!(
        !follower_neighbor_opinions.is_empty(),
        "a follower always sees at least itself"
    );
    assert_eq!(leader_neighbor_opinions.len(), beta.len());
    let dim = follower_neighbor_opinions[0].len();

    let mut beta_eff = beta.to_vec();
    for (k, nbrs) in leader_neighbor_opinions.iter().enumerate() {
        if nbrs.is_empty() {
            beta_eff[k] = 0.0;
        }
    }
    let mut sum = 0.0;
    for &b in &beta_eff {
        debug_assert!((0.0..=1.0).contains(&b));
        sum += b;
    }
    debug_assert!(sum <= 1.0, "beta weights sum to {sum} > 1");
    let follower_weight = 1.0 - sum;

    let mut fmean = vec![0.0; dim];
    mean_of_rows(follower_neighbor_opinions, &mut fmean);
    let mut lmeans: Vec<Vec<f64>> = vec![Vec::new(); beta_eff.len()];
    for (k, nbrs) in leader_neighbor_opinions.iter().enumerate() {
        if beta_eff[k] != 0.0 {
            lmeans[k] = vec![0.0; dim];
            mean_of_rows(nbrs, &mut lmeans[k]);
        }
    }

    let mut terms: Vec<(f64, &[f64])> = Vec::with_capacity(1 + beta_eff.len());
    terms.push((follower_weight, fmean.as_slice()));
    for (k, b) in beta_eff.iter().enumerate() {
        if *b != 0.0 {
            terms.push((*b, lmeans[k].as_slice()));
        }
    }
    let mut out = vec![0.0; dim];
    combine_into(&terms, &mut out);
    Opinion(out)
}

/// Next opinion of a legacy leader: pulled toward its target with weight
/// `weight` and toward the mean of the visible members of its own class with
/// the remaining weight.
pub fn legacy_leader_update(neighbor_opinions: &[&[f64]], weight: f64, target: &[f64]) -> Opinion {
    assert!(
        !neighbor_opinions.is_empty(),
        "a leader always sees at least itself"
    );
    debug_assert!((0.0..=1.0).contains(&weight));
    let dim = target.len();
    let mut mean = vec![0.0; dim];
    mean_of_rows(neighbor_opinions, &mut mean);
    let mut out = vec![0.0; dim];
    combine_into(&[(1.0 - weight, mean.as_slice()), (weight, target)], &mut out);
    Opinion(out)
}

/// Next opinion of a legacy follower: weight `alpha` on the mean of visible
/// positive leaders, `beta` on the mean of visible negative leaders, and the
/// remainder on the mean of visible followers.
///
/// An empty positive or negative class hands its weight to the follower term
/// for this step, mirroring the empty-group rule of [`follower_update`].
pub fn legacy_follower_update(
    follower_neighbor_opinions: &[&[f64]],
    positive_neighbor_opinions: &[&[f64]],
    negative_neighbor_opinions: &[&[f64]],
    alpha: f64,
    beta: f64,
) -> Opinion {
    assert!(
        !follower_neighbor_opinions.is_empty(),
        "a follower always sees at least itself"
    );
    debug_assert!((0.0..=1.0).contains(&alpha));
    debug_assert!((0.0..=1.0).contains(&beta));
    let dim = follower_neighbor_opinions[0].len();

    let alpha_eff = if positive_neighbor_opinions.is_empty() { 0.0 } else { alpha };
    let beta_eff = if negative_neighbor_opinions.is_empty() { 0.0 } else { beta };
    let sum = alpha_eff + beta_eff;
    debug_assert!(sum <= 1.0);
    let follower_weight = 1.0 - sum;

    let mut fmean = vec![0.0; dim];
    mean_of_rows(follower_neighbor_opinions, &mut fmean);
    let mut pmean = vec![0.0; dim];
    if alpha_eff != 0.0 {
        mean_of_rows(positive_neighbor_opinions, &mut pmean);
    }
    let mut nmean = vec![0.0; dim];
    if beta_eff != 0.0 {
        mean_of_rows(negative_neighbor_opinions, &mut nmean);
    }

    let mut terms: Vec<(f64, &[f64])> = Vec::with_capacity(3);
    terms.push((follower_weight, fmean.as_slice()));
    if alpha_eff != 0.0 {
        terms.push((alpha_eff, pmean.as_slice()));
    }
    if beta_eff != 0.0 {
        terms.push((beta_eff, nmean.as_slice()));
    }
    let mut out = vec![0.0; dim];
    combine_into(&terms, &mut out);
    Opinion(out)
}
