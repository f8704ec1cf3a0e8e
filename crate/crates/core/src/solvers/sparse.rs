//! Sparse-SMT-CBS: lazy compilation over sparse candidate path sets.
//!
//! The pool starts with one shortest path per robot. Each inner iteration
//! rebuilds SMDDs from the pool, encodes the incomplete model (including
//! every recorded collision elimination), and consults the SAT backend.
//! Colliding candidates extend both the conflict records and, through the
//! new-paths procedure, the pool. Only an unsatisfiable formula ends the
//! inner loop and raises the bounds: an empty new-paths round is not a
//! termination signal, because the pool may already cover the new
//! conflicts while the refined formula still has collision-free models.
//!
//! Pool growth widens node out-degrees, and the "leave through one edge"
//! clauses of an older encoding would over-constrain the widened nodes in
//! a monotone session; sessions are therefore fresh per inner iteration
//! and the formula is re-encoded from the current SMDDs.

use crate::cnf::{encode_incomplete, extract_solution, VarMap};
use crate::instance::{validate_solution, Collision, Conflict, Instance, Path};
use crate::mdd::{shortest_path, Mdd, Smdd};
use crate::pathgen::{new_paths, ConflictSet, PathGenError, PathPool};
use crate::sat::{BackendKind, SatError, SatOutcome};

use super::{Bounds, Run, SolveLimits, SolveOutcome};

/// Observation hook invoked after every new-paths call with the robot's
/// updated pool, its full conflict set, and the current horizon. Used by
/// tests to certify the pool guarantee exhaustively.
pub trait SparseInspector {
    fn after_new_paths(&mut self, robot: usize, pool: &[Path], conflicts: &[Conflict], horizon: usize);
}

struct NoInspector;

impl SparseInspector for NoInspector {
    fn after_new_paths(&mut self, _: usize, _: &[Path], _: &[Conflict], _: usize) {}
}

pub fn solve_sparse_smt_cbs(
    instance: &Instance,
    limits: &SolveLimits,
    backend: &BackendKind,
) -> SolveOutcome {
    solve_sparse_smt_cbs_with_inspector(instance, limits, backend, &mut NoInspector)
}

pub fn solve_sparse_smt_cbs_with_inspector(
    instance: &Instance,
    limits: &SolveLimits,
    backend: &BackendKind,
    inspector: &mut dyn SparseInspector,
) -> SolveOutcome {
    let mut run = Run::start(limits);
    let bounds = match Bounds::compute(instance) {
        Ok(b) => b,
        Err(diag) => return run.capped(diag),
    };
    let k = instance.robot_count();
    let (mut mu, mut delta) = (bounds.mu_lb, 0usize);

    let mut pool = PathPool::new(k);
    for r in 0..k {
        let path = shortest_path(&instance.graph, instance.start(r), instance.goal(r))
            .expect("reachability checked");
        pool.insert(r, path);
    }
    let mut conflicts = ConflictSet::new(k);
    let mut collisions_seen: Vec<Collision> = Vec::new();
    let mut first_bound = true;

    loop {
        if run.deadline.expired() {
            return run.timeout();
        }
        if delta > limits.soc_extra_cap {
            return run.capped(format!(
                "cost budget exhausted at SoC {} (cap {})",
                bounds.soc_lb + delta,
                limits.soc_extra_cap
            ));
        }
        run.stats.iterations += 1;

        if !first_bound {
            // the raised horizon may make previously infeasible conflict
            // subsets feasible; re-certify the pool guarantee before any
            // unsatisfiability at these bounds is trusted
            for r in 0..k {
                let full_mask = full_mask(conflicts.count(r));
                match grow_pool(
                    instance, limits, &mut pool, &conflicts, r, full_mask, mu, inspector,
                ) {
                    Ok(n) => run.stats.paths_generated += n,
                    Err(e) => return run.capped(e.to_string()),
                }
            }
        }
        first_bound = false;

        'inner: loop {
            if run.deadline.expired() {
                return run.timeout();
            }
            let smdds: Vec<Smdd> = (0..k)
                .map(|r| Smdd::build(r, pool.paths(r), mu).expect("pooled paths fit the horizon"))
                .collect();
            let drefs: Vec<&Mdd> = smdds.iter().map(Smdd::diagram).collect();
            let mut vm = VarMap::build(&drefs);
            let formula = encode_incomplete(&drefs, &collisions_seen, &mut vm, delta);
            run.stats.variables = formula.num_vars();
            run.stats.clauses = formula.clause_count();
            if formula.clause_count() > limits.max_clauses {
                return run.capped(format!(
                    "formula of {} clauses exceeds cap {}",
                    formula.clause_count(),
                    limits.max_clauses
                ));
            }

            let mut session = backend.new_session();
            session.set_deadline(run.deadline);
            session.ensure_vars(formula.num_vars());
            for clause in formula.clauses() {
                session.add_clause(clause);
            }
            run.stats.sat_calls += 1;
            match session.solve() {
                Ok(SatOutcome::Sat(model)) => {
                    let candidate = extract_solution(&model, &vm, &drefs)
                        .expect("path constraints force one node per level");
                    let collisions = validate_solution(instance, &candidate)
                        .expect("SMDD walks are structurally valid");
                    if collisions.is_empty() {
                        return run.solved(instance, candidate);
                    }
                    let mut new_masks = vec![0u64; k];
                    for c in collisions {
                        if !collisions_seen.contains(&c) {
                            collisions_seen.push(c);
                            run.stats.collisions_refined += 1;
                        }
                        for conflict in c.to_conflicts() {
                            if conflicts.add(conflict) {
                                new_masks[conflict.robot] |=
                                    1 << (conflicts.count(conflict.robot) - 1);
                            }
                        }
                    }
                    for r in 0..k {
                        match grow_pool(
                            instance,
                            limits,
                            &mut pool,
                            &conflicts,
                            r,
                            new_masks[r],
                            mu,
                            inspector,
                        ) {
                            Ok(n) => run.stats.paths_generated += n,
                            Err(e) => return run.capped(e.to_string()),
                        }
                    }
                    // loop: the fresh encoding includes the new
                    // elimination clauses, so every round retires at
                    // least one candidate assignment
                }
                Ok(SatOutcome::Unsat) => break 'inner,
                Err(SatError::Timeout) => return run.timeout(),
                Err(e) => return run.capped(format!("SAT backend failed: {e}")),
            }
        }
        mu += 1;
        delta += 1;
    }
}

fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[allow(clippy::too_many_arguments)]
fn grow_pool(
    instance: &Instance,
    limits: &SolveLimits,
    pool: &mut PathPool,
    conflicts: &ConflictSet,
    robot: usize,
    new_mask: u64,
    mu: usize,
    inspector: &mut dyn SparseInspector,
) -> Result<usize, PathGenError> {
    let found = new_paths(
        pool,
        robot,
        conflicts.robot(robot),
        new_mask,
        &instance.graph,
        instance.start(robot),
        instance.goal(robot),
        mu,
        limits.max_subsets,
    )?;
    let count = found.len();
    for p in found {
        pool.insert(robot, p);
    }
    inspector.after_new_paths(robot, pool.paths(robot), conflicts.robot(robot), mu);
    Ok(count)
}
