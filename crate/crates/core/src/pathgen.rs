//! Conflict-aware shortest-path search and the candidate-pool growth
//! procedure.
//!
//! The pool must keep one guarantee per robot: for every subset of its
//! recorded conflicts that still admits a path within the current horizon,
//! the pool holds such a path. Feasibility is downward closed (a path
//! feasible for a conflict set is feasible for every subset), so
//! [`new_paths`] descends the subset lattice from the full set, pruning
//! whole sublattices as soon as some pooled or newly found path covers
//! them.

use std::collections::HashSet;

use thiserror::Error;

use crate::instance::{Conflict, ConflictKind, Graph, Path, Robot, Vertex};
use crate::mdd::{bfs_distances, UNREACHABLE};

/// Per-robot conflict records, deduplicated and kept in insertion order so
/// subset masks are stable within a run.
#[derive(Debug, Clone, Default)]
pub struct ConflictSet {
    by_robot: Vec<Vec<Conflict>>,
}

impl ConflictSet {
    pub fn new(robots: usize) -> Self {
        ConflictSet {
            by_robot: vec![Vec::new(); robots],
        }
    }

    /// Records a conflict; returns false if it was already present.
    pub fn add(&mut self, c: Conflict) -> bool {
        let list = &mut self.by_robot[c.robot];
        if list.contains(&c) {
            false
        } else {
            list.push(c);
            true
        }
    }

    pub fn robot(&self, r: Robot) -> &[Conflict] {
        &self.by_robot[r]
    }

    pub fn count(&self, r: Robot) -> usize {
        self.by_robot[r].len()
    }
}

/// Per-robot candidate path pools. Pools only grow.
#[derive(Debug, Clone, Default)]
pub struct PathPool {
    by_robot: Vec<Vec<Path>>,
}

impl PathPool {
    pub fn new(robots: usize) -> Self {
        PathPool {
            by_robot: vec![Vec::new(); robots],
        }
    }

    /// Adds a path; returns false if an identical path is already pooled.
    pub fn insert(&mut self, r: Robot, path: Path) -> bool {
        let list = &mut self.by_robot[r];
        if list.contains(&path) {
            false
        } else {
            list.push(path);
            true
        }
    }

    pub fn paths(&self, r: Robot) -> &[Path] {
        &self.by_robot[r]
    }

    pub fn total_paths(&self) -> usize {
        self.by_robot.iter().map(Vec::len).sum()
    }
}

/// True iff the path violates none of the given conflicts, with positions
/// goal-padded up to `horizon` (a robot parked at its goal still occupies
/// it).
pub fn feasible<'a, I>(path: &[Vertex], conflicts: I, horizon: usize) -> bool
where
    I: IntoIterator<Item = &'a Conflict>,
{
    let position = |t: usize| -> Vertex {
        if t < path.len() {
            path[t]
        } else {
            *path.last().expect("non-empty path")
        }
    };
    for c in conflicts {
        match c.kind {
            ConflictKind::Vertex(v) => {
                if c.timestep <= horizon && position(c.timestep) == v {
                    return false;
                }
            }
            ConflictKind::Edge(u, v) => {
                let t = c.timestep;
                if t + 1 <= horizon && position(t) == u && position(t + 1) == v && u != v {
                    return false;
                }
            }
        }
    }
    true
}

/// Minimum-cost timed path from `start` to `goal` avoiding every conflict
/// in `avoid`, searching states (vertex, t) for t <= `horizon`.
///
/// The cost of a path is its final arrival time, so a returned path ends
/// at its first arrival after which the goal stays conflict-free through
/// the horizon. Exhaustive within the bound: `None` means no feasible path
/// of cost <= `cost_cap` exists.
pub fn conflict_aware_astar(
    graph: &Graph,
    start: Vertex,
    goal: Vertex,
    avoid: &[Conflict],
    horizon: usize,
    cost_cap: usize,
) -> Option<Path> {
    debug_assert!(cost_cap <= horizon);
    let blocked_vertex: HashSet<(Vertex, usize)> = avoid
        .iter()
        .filter_map(|c| match c.kind {
            ConflictKind::Vertex(v) => Some((v, c.timestep)),
            _ => None,
        })
        .collect();
    let blocked_edge: HashSet<(Vertex, Vertex, usize)> = avoid
        .iter()
        .filter_map(|c| match c.kind {
            ConflictKind::Edge(u, v) => Some((u, v, c.timestep)),
            _ => None,
        })
        .collect();
    // earliest arrival whose goal tail [t, horizon] is conflict-free
    let min_rest = avoid
        .iter()
        .filter(|c| matches!(c.kind, ConflictKind::Vertex(v) if v == goal))
        .filter(|c| c.timestep <= horizon)
        .map(|c| c.timestep + 1)
        .max()
        .unwrap_or(0);

    let h = bfs_distances(graph, goal);
    if h[start] == UNREACHABLE {
        return None;
    }
    if blocked_vertex.contains(&(start, 0)) {
        return None;
    }

    // layered reachability with parent tracking; the heuristic prunes
    // states that cannot reach the goal within the cost cap
    let n = graph.vertex_count();
    let mut reached = vec![vec![false; n]];
    let mut parents: Vec<Vec<Option<Vertex>>> = vec![vec![None; n]];
    reached[0][start] = true;
    if start == goal && min_rest == 0 {
        return Some(vec![start]);
    }
    for t in 0..cost_cap {
        let mut next_reached = vec![false; n];
        let mut next_parents: Vec<Option<Vertex>> = vec![None; n];
        for u in 0..n {
            if !reached[t][u] {
                continue;
            }
            let mut targets: Vec<Vertex> = graph.neighbors(u).to_vec();
            targets.push(u);
            targets.sort_unstable();
            for v in targets {
                if next_reached[v] {
                    continue;
                }
                if h[v] == UNREACHABLE || t + 1 + h[v] as usize > cost_cap {
                    continue;
                }
                if blocked_vertex.contains(&(v, t + 1)) {
                    continue;
                }
                if u != v && blocked_edge.contains(&(u, v, t)) {
                    continue;
                }
                next_reached[v] = true;
                next_parents[v] = Some(u);
            }
        }
        reached.push(next_reached);
        parents.push(next_parents);
        let arrival = t + 1;
        if reached[arrival][goal] && arrival >= min_rest {
            // reconstruct
            let mut path = vec![goal];
            let mut cur = goal;
            for back in (1..=arrival).rev() {
                cur = parents[back][cur].expect("reached node has a parent");
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
    }
    None
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PathGenError {
    #[error(
        "robot {robot}: conflict subset exploration exceeded cap of {cap} \
         (|conflicts| = {conflicts})"
    )]
    SubsetCapExceeded {
        robot: Robot,
        cap: usize,
        conflicts: usize,
    },
}

/// Extends the pool so that for every subset of `conflicts` admitting a
/// path of cost <= `horizon`, the pool holds a subset-feasible path of
/// minimum cost among such paths. Returns the newly found paths (the
/// caller unions them into the pool).
///
/// Cost-minimal witnesses are what make a later "unsatisfiable at these
/// bounds" conclusion sound: any solution within the bounds uses, per
/// robot, a path feasible for the subset of recorded conflicts it
/// respects, and swapping in a pooled witness of at most that cost yields
/// a selection inside the encoded formula that also respects every
/// collision-elimination clause. A witness that is merely feasible but
/// more expensive can be pruned by the cost budget, wrongly declaring the
/// bound infeasible.
///
/// Only subsets intersecting `new_mask` (bit i = conflict i of `conflicts`
/// counts as newly added) need attention; older subsets are covered by the
/// precondition that the pool satisfied the guarantee before. Passing the
/// full mask re-certifies everything, which the solvers do after raising
/// the horizon.
///
/// The guarantee is established one cost layer at a time. Within a layer,
/// subsets are explored through seed enumeration over selector variables:
/// a small SAT instance hands out one candidate subset not yet covered by
/// a cheap-enough pooled path. A feasible seed is grown to a maximal
/// layer-feasible subset and its path covers the seed's whole sublattice
/// (downward closure); an infeasible seed is shrunk to a minimal
/// infeasible core, ruling out every superset within the layer. The work
/// is proportional to the number of such extreme subsets instead of the
/// lattice size. `subset_cap` bounds the total number of seed rounds;
/// exceeding it is an error so the caller aborts instead of silently
/// weakening the guarantee.
pub fn new_paths(
    pool: &PathPool,
    robot: Robot,
    conflicts: &[Conflict],
    new_mask: u64,
    graph: &Graph,
    start: Vertex,
    goal: Vertex,
    horizon: usize,
    subset_cap: usize,
) -> Result<Vec<Path>, PathGenError> {
    let n = conflicts.len();
    assert!(n <= 64, "conflict sets beyond 64 entries are not supported");
    if n == 0 || new_mask == 0 {
        return Ok(Vec::new());
    }

    let viol = |path: &[Vertex]| -> u64 {
        let mut mask = 0;
        for (i, c) in conflicts.iter().enumerate() {
            if !feasible(path, std::iter::once(c), horizon) {
                mask |= 1 << i;
            }
        }
        mask
    };
    let subset_of = |mask: u64| -> Vec<Conflict> {
        conflicts
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, c)| *c)
            .collect()
    };
    let search = |mask: u64, cost_cap: usize| {
        conflict_aware_astar(graph, start, goal, &subset_of(mask), horizon, cost_cap)
    };

    use crate::sat::{SatBackend, SatOutcome};
    let selector = |i: usize| (i + 1) as i32;
    let new_clause: Vec<i32> = (0..n).filter(|&i| new_mask >> i & 1 == 1).map(selector).collect();

    let base_cost = match search(0, horizon) {
        Some(p) => p.len() - 1,
        None => return Ok(Vec::new()), // goal out of reach at this horizon
    };
    let mut found: Vec<Path> = Vec::new();
    let mut rounds = 0usize;

    for cost_cap in base_cost..=horizon {
        let mut seeds = crate::sat::CdclSolver::new();
        seeds.ensure_vars(n);
        // candidate subsets must contain a newly added conflict ...
        seeds.add_clause(&new_clause);
        // ... and must not be covered within this cost layer: a subset
        // disjoint from the violation set of a pooled path that is cheap
        // enough already has its witness
        for p in pool.paths(robot).iter().chain(found.iter()) {
            if p.len() - 1 <= cost_cap {
                let v = viol(p);
                let block: Vec<i32> =
                    (0..n).filter(|&i| v >> i & 1 == 1).map(selector).collect();
                seeds.add_clause(&block); // empty when the path violates nothing
            }
        }

        loop {
            rounds += 1;
            if rounds > subset_cap {
                return Err(PathGenError::SubsetCapExceeded {
                    robot,
                    cap: subset_cap,
                    conflicts: n,
                });
            }
            let model = match seeds.solve().expect("embedded solver is infallible") {
                SatOutcome::Unsat => break,
                SatOutcome::Sat(m) => m,
            };
            let mut mask: u64 =
                (0..n).filter(|&i| model.value(selector(i))).fold(0, |m, i| m | 1 << i);
            match search(mask, cost_cap) {
                Some(mut path) => {
                    // grow to a subset maximal within this cost layer so
                    // the path covers as much of the lattice as possible
                    for i in 0..n {
                        if mask >> i & 1 == 0 {
                            if let Some(p) = search(mask | 1 << i, cost_cap) {
                                mask |= 1 << i;
                                path = p;
                            }
                        }
                    }
                    let v = viol(&path);
                    debug_assert_eq!(v & mask, 0);
                    let block: Vec<i32> =
                        (0..n).filter(|&i| v >> i & 1 == 1).map(selector).collect();
                    seeds.add_clause(&block);
                    found.push(path);
                }
                None => {
                    // shrink to a minimal core infeasible at this layer;
                    // every superset is infeasible here and needs no
                    // witness until the cost cap rises
                    for i in 0..n {
                        if mask >> i & 1 == 1
                            && mask.count_ones() > 1
                            && search(mask & !(1 << i), cost_cap).is_none()
                        {
                            mask &= !(1 << i);
                        }
                    }
                    let block: Vec<i32> = (0..n)
                        .filter(|&i| mask >> i & 1 == 1)
                        .map(|i| -selector(i))
                        .collect();
                    seeds.add_clause(&block);
                }
            }
        }
    }
    Ok(found)
}
