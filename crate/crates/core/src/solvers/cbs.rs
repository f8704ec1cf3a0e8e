//! Search-based conflict-based search: best-first over constraint-tree
//! nodes ordered by sum-of-costs. Each node holds per-robot constraint
//! sets and cost-minimal paths respecting them; expanding a node picks its
//! first collision and branches into two children, each forbidding the
//! collision for one of the robots and re-planning only that robot.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::instance::{validate_solution, Collision, Conflict, Instance, Path, Solution};
use crate::pathgen::conflict_aware_astar;

use super::{Bounds, Run, SolveLimits, SolveOutcome, SolveStatus};

struct Node {
    constraints: Vec<Vec<Conflict>>,
    paths: Vec<Path>,
    soc: usize,
    collisions: Vec<Collision>,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Node {}

impl Node {
    fn key(&self) -> (usize, usize, usize) {
        (self.soc, self.collisions.len(), self.seq)
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for cheapest-first
        other.key().cmp(&self.key())
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn solve_cbs(instance: &Instance, limits: &SolveLimits) -> SolveOutcome {
    let mut run = Run::start(limits);
    let bounds = match Bounds::compute(instance) {
        Ok(b) => b,
        Err(diag) => return run.capped(diag),
    };
    let k = instance.robot_count();
    let soc_cap = bounds.soc_lb + limits.soc_extra_cap;

    let mut seq = 0usize;
    let root_paths: Vec<Path> = (0..k)
        .map(|r| plan(instance, r, &[], bounds.sps[r]).expect("unconstrained plan exists"))
        .collect();
    run.stats.paths_generated += k;
    let root = make_node(instance, vec![Vec::new(); k], root_paths, &mut seq);

    let mut open: BinaryHeap<Node> = BinaryHeap::new();
    open.push(root);

    while let Some(node) = open.pop() {
        if run.deadline.expired() {
            return run.timeout();
        }
        if run.stats.iterations >= limits.max_cbs_nodes {
            let diag = format!(
                "expanded {} constraint-tree nodes (cap {})",
                run.stats.iterations, limits.max_cbs_nodes
            );
            return run.capped(diag);
        }
        run.stats.iterations += 1;

        if node.collisions.is_empty() {
            let solution = Solution { paths: node.paths };
            let mut outcome = run.solved(instance, solution);
            debug_assert_eq!(outcome.status, SolveStatus::Solved);
            outcome.stats.soc = Some(node.soc);
            return outcome;
        }

        let first = node.collisions[0];
        run.stats.collisions_refined += 1;
        for constraint in first.to_conflicts() {
            let r = constraint.robot;
            let mut constraints = node.constraints.clone();
            constraints[r].push(constraint);
            let horizon = replan_horizon(instance, &constraints[r]);
            let Some(path) = plan(instance, r, &constraints[r], horizon) else {
                continue; // no path under these constraints: prune branch
            };
            run.stats.paths_generated += 1;
            let mut paths = node.paths.clone();
            paths[r] = path;
            let child = make_node(instance, constraints, paths, &mut seq);
            if child.soc <= soc_cap {
                open.push(child);
            }
        }
    }
    run.capped(format!(
        "constraint tree exhausted below SoC cap {soc_cap} (instance unsolvable within cap)"
    ))
}

fn plan(instance: &Instance, robot: usize, constraints: &[Conflict], horizon: usize) -> Option<Path> {
    conflict_aware_astar(
        &instance.graph,
        instance.start(robot),
        instance.goal(robot),
        constraints,
        horizon,
        horizon,
    )
}

/// A horizon large enough that a constrained path exists within it iff one
/// exists at all: past the last constraint the search is unconstrained and
/// any reachable vertex is at most |V| - 1 steps from the goal.
fn replan_horizon(instance: &Instance, constraints: &[Conflict]) -> usize {
    let last_t = constraints.iter().map(|c| c.timestep).max().unwrap_or(0);
    last_t + instance.graph.vertex_count() + 1
}

fn make_node(
    instance: &Instance,
    constraints: Vec<Vec<Conflict>>,
    paths: Vec<Path>,
    seq: &mut usize,
) -> Node {
    let solution = Solution { paths };
    let collisions =
        validate_solution(instance, &solution).expect("planned paths are structurally valid");
    let soc = crate::instance::sum_of_costs(&solution, instance).expect("paths end at goals");
    *seq += 1;
    Node {
        constraints,
        paths: solution.paths,
        soc,
        collisions,
        seq: *seq,
    }
}
