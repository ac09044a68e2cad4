//! Neighbor-set construction.
//!
//! Membership is the closed condition `distance <= epsilon`, compared exactly
//! with no tolerance, so agents at distance exactly epsilon are neighbors.
//! The grid path is an accelerator only: it gathers candidates from adjacent
//! cells and verifies each with the same distance comparison as the naive
//! path, so both paths return identical sets on every input.

use std::collections::HashMap;

use crate::engine::OpinionState;
use crate::model::{GroupStructure, Norm};

/// Visibility lists for one time step, positionally indexed like
/// [`crate::model::DegreeAssignment`]. All id lists are sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSets {
    /// Per follower position: visible followers (always includes self).
    pub follower_sets: Vec<Vec<usize>>,
    /// Per follower position, per leader group: visible members of that group.
    pub follower_leader_sets: Vec<Vec<Vec<usize>>>,
    /// Per leader group, per member position: visible members of the same
    /// group (always includes self).
    pub leader_own_sets: Vec<Vec<Vec<usize>>>,
}

fn scan(
    state: &OpinionState,
    from: usize,
    pool: &[usize],
    epsilon: f64,
    norm: Norm,
) -> Vec<usize> {
    let row = state.row(from);
    pool.iter()
        .copied()
        .filter(|&j| norm.distance(row, state.row(j)) <= epsilon)
        .collect()
}

/// Direct pairwise scan. The reference implementation the grid path is held
/// to.
pub fn neighbors_naive(
    state: &OpinionState,
    structure: &GroupStructure,
    epsilon: f64,
    norm: Norm,
) -> NeighborSets {
    let follower_sets = structure
        .follower_ids
        .iter()
        .map(|&i| scan(state, i, &structure.follower_ids, epsilon, norm))
        .collect();
    let follower_leader_sets = structure
        .follower_ids
        .iter()
        .map(|&i| {
            structure
                .leader_groups
                .iter()
                .map(|lg| scan(state, i, &lg.members, epsilon, norm))
                .collect()
        })
        .collect();
    let leader_own_sets = structure
        .leader_groups
        .iter()
        .map(|lg| {
            lg.members
                .iter()
                .map(|&i| scan(state, i, &lg.members, epsilon, norm))
                .collect()
        })
        .collect();
    NeighborSets { follower_sets, follower_leader_sets, leader_own_sets }
}

/// Legacy variant: the querying agent's own threshold decides visibility, so
/// the relation is not symmetric.
pub fn neighbors_naive_per_agent(
    state: &OpinionState,
    structure: &GroupStructure,
    epsilons: &[f64],
    norm: Norm,
) -> NeighborSets {
    let follower_sets = structure
        .follower_ids
        .iter()
        .map(|&i| scan(state, i, &structure.follower_ids, epsilons[i], norm))
        .collect();
    let follower_leader_sets = structure
        .follower_ids
        .iter()
        .map(|&i| {
            structure
                .leader_groups
                .iter()
                .map(|lg| scan(state, i, &lg.members, epsilons[i], norm))
                .collect()
        })
        .collect();
    let leader_own_sets = structure
        .leader_groups
        .iter()
        .map(|lg| {
            lg.members
                .iter()
                .map(|&i| scan(state, i, &lg.members, epsilons[i], norm))
                .collect()
        })
        .collect();
    NeighborSets { follower_sets, follower_leader_sets, leader_own_sets }
}

const MAX_GRID_DIM: usize = 6;
// Beyond this magnitude the i64 cell arithmetic could lose exactness.
const MAX_CELL_INDEX: f64 = 4.0e15;

struct CellGrid {
    dim: usize,
    cells: HashMap<[i64; MAX_GRID_DIM], Vec<usize>>,
}

fn cell_key(row: &[f64], width: f64, dim: usize) -> Option<[i64; MAX_GRID_DIM]> {
    let mut key = [0i64; MAX_GRID_DIM];
    for c in 0..dim {
        let q = (row[c] / width).floor();
        if !(q.abs() <= MAX_CELL_INDEX) {
            return None;
        }
        key[c] = q as i64;
    }
    Some(key)
}

impl CellGrid {
    /// Buckets `members` by cell of width `width`. `None` means a coordinate
    /// was too extreme for exact cell arithmetic and the caller must fall
    /// back to the naive scan.
    fn build(state: &OpinionState, members: &[usize], width: f64) -> Option<CellGrid> {
        let dim = state.dim;
        let mut cells: HashMap<[i64; MAX_GRID_DIM], Vec<usize>> = HashMap::new();
        for &i in members {
            let key = cell_key(state.row(i), width, dim)?;
            cells.entry(key).or_default().push(i);
        }
        Some(CellGrid { dim, cells })
    }

    /// Candidates within the 3^d cells adjacent to `row`'s cell, verified by
    /// the exact distance test and returned sorted.
    fn query(&self, state: &OpinionState, row: &[f64], width: f64, epsilon: f64, norm: Norm) -> Option<Vec<usize>> {
        let center = cell_key(row, width, self.dim)?;
        let mut found = Vec::new();
        let mut digits = [0u8; MAX_GRID_DIM];
        'offsets: loop {
            let mut key = center;
            for c in 0..self.dim {
                key[c] = center[c] + digits[c] as i64 - 1;
            }
            if let Some(bucket) = self.cells.get(&key) {
                for &j in bucket {
                    if norm.distance(row, state.row(j)) <= epsilon {
                        found.push(j);
                    }
                }
            }
            let mut c = 0;
            loop {
                if c == self.dim {
                    break 'offsets;
                }
                digits[c] += 1;
                if digits[c] < 3 {
                    break;
                }
                digits[c] = 0;
                c += 1;
            }
        }
        found.sort_unstable();
        Some(found)
    }
}

/// Cell-list accelerated neighbor search. Falls back to [`neighbors_naive`]
/// when the grid does not apply (zero threshold, dimension above
/// `MAX_GRID_DIM`, or coordinates too extreme for exact cell indexing); in
/// all cases the result equals the naive scan.
pub fn neighbors_grid(
    state: &OpinionState,
    structure: &GroupStructure,
    epsilon: f64,
    norm: Norm,
) -> NeighborSets {
    if !(epsilon > 0.0) || state.dim == 0 || state.dim > MAX_GRID_DIM {
        return neighbors_naive(state, structure, epsilon, norm);
    }
    let width = epsilon;

    let follower_grid = match CellGrid::build(state, &structure.follower_ids, width) {
        Some(g) => g,
        None => return neighbors_naive(state, structure, epsilon, norm),
    };
    let mut leader_grids = Vec::with_capacity(structure.m());
    for lg in &structure.leader_groups {
        match CellGrid::build(state, &lg.members, width) {
            Some(g) => leader_grids.push(g),
            None => return neighbors_naive(state, structure, epsilon, norm),
        }
    }

    let mut follower_sets = Vec::with_capacity(structure.follower_ids.len());
    let mut follower_leader_sets = Vec::with_capacity(structure.follower_ids.len());
    for &i in &structure.follower_ids {
        let row = state.row(i);
        let fs = match follower_grid.query(state, row, width, epsilon, norm) {
            Some(v) => v,
            None => return neighbors_naive(state, structure, epsilon, norm),
        };
        let mut per_group = Vec::with_capacity(structure.m());
        for grid in &leader_grids {
            match grid.query(state, row, width, epsilon, norm) {
                Some(v) => per_group.push(v),
                None => return neighbors_naive(state, structure, epsilon, norm),
            }
        }
        follower_sets.push(fs);
        follower_leader_sets.push(per_group);
    }

    let mut leader_own_sets = Vec::with_capacity(structure.m());
    for (k, lg) in structure.leader_groups.iter().enumerate() {
        let mut sets = Vec::with_capacity(lg.members.len());
        for &i in &lg.members {
            match leader_grids[k].query(state, state.row(i), width, epsilon, norm) {
                Some(v) => sets.push(v),
                None => return neighbors_naive(state, structure, epsilon, norm),
            }
        }
        leader_own_sets.push(sets);
    }

    NeighborSets { follower_sets, follower_leader_sets, leader_own_sets }
}

/// Per-step interaction summary derived from one [`NeighborSets`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectivityReport {
    /// Per leader group: some follower sees at least one of its members.
    pub group_seen: Vec<bool>,
    /// Per leader group: every follower sees the entire group.
    pub full_group_seen: Vec<bool>,
    /// Some follower sees members of two or more different leader groups.
    pub multi_group_follower: bool,
}

pub fn connectivity_report(sets: &NeighborSets, structure: &GroupStructure) -> ConnectivityReport {
    let m = structure.m();
    let n_followers = structure.follower_ids.len();
    let mut group_seen = vec![false; m];
    let mut full_group_seen: Vec<bool> = structure
        .leader_groups
        .iter()
        .map(|_| n_followers > 0)
        .collect();
    let mut multi = false;
    for per_group in &sets.follower_leader_sets {
        let mut groups_visible = 0usize;
        for (k, list) in per_group.iter().enumerate() {
            if !list.is_empty() {
                group_seen[k] = true;
                groups_visible += 1;
            }
            if list.len() != structure.leader_groups[k].members.len() {
                full_group_seen[k] = false;
            }
        }
        if groups_visible >= 2 {
            multi = true;
        }
    }
    ConnectivityReport { group_seen, full_group_seen, multi_group_follower: multi }
}

/// Whether any interaction crosses the given follower-to-group assignment:
/// a follower seeing a leader group other than its own, or two followers
/// assigned to different groups seeing each other. `homes` is indexed by
/// follower position.
pub fn cross_system_interaction(
    sets: &NeighborSets,
    structure: &GroupStructure,
    homes: &[usize],
) -> bool {
    for (fi, per_group) in sets.follower_leader_sets.iter().enumerate() {
        let home = homes[fi];
        for (k, list) in per_group.iter().enumerate() {
            if k != home && !list.is_empty() {
                return true;
            }
        }
        for &j in &sets.follower_sets[fi] {
            let pos = structure
                .follower_ids
                .binary_search(&j)
                .expect("follower neighbor id not in follower set");
            if homes[pos] != home {
                return true;
            }
        }
    }
    false
}
