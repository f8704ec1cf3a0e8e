//! SMT-CBS: lazy compilation over full MDDs. Per bound, the incomplete
//! model is encoded once into a fresh SAT session; candidate assignments
//! are validated and every discovered collision adds one elimination
//! clause to the same session before re-solving. Collision records persist
//! across bound iterations and are re-encoded upfront at the new bounds.

use crate::cnf::{elimination_clause, encode_incomplete, extract_solution, VarMap};
use crate::instance::{validate_solution, Collision, Instance};
use crate::mdd::Mdd;
use crate::sat::{BackendKind, SatError, SatOutcome};

use super::{Bounds, Run, SolveLimits, SolveOutcome};

pub fn solve_smt_cbs(
    instance: &Instance,
    limits: &SolveLimits,
    backend: &BackendKind,
) -> SolveOutcome {
    let mut run = Run::start(limits);
    let bounds = match Bounds::compute(instance) {
        Ok(b) => b,
        Err(diag) => return run.capped(diag),
    };
    let k = instance.robot_count();
    let (mut mu, mut delta) = (bounds.mu_lb, 0usize);
    let mut collisions_seen: Vec<Collision> = Vec::new();

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

        let mdds: Vec<Mdd> = (0..k)
            .map(|r| {
                Mdd::build(&instance.graph, r, instance.start(r), instance.goal(r), mu)
                    .expect("horizon covers every shortest path")
            })
            .collect();
        let drefs: Vec<&Mdd> = mdds.iter().collect();
        let mut vm = VarMap::build(&drefs);
        let formula = encode_incomplete(&drefs, &collisions_seen, &mut vm, delta);
        if formula.clause_count() > limits.max_clauses {
            return run.capped(format!(
                "formula of {} clauses exceeds cap {}",
                formula.clause_count(),
                limits.max_clauses
            ));
        }

        // one session per bound; refinement clauses extend it in place
        let mut session = backend.new_session();
        session.set_deadline(run.deadline);
        session.ensure_vars(formula.num_vars());
        for clause in formula.clauses() {
            session.add_clause(clause);
        }

        loop {
            if run.deadline.expired() {
                return run.timeout();
            }
            run.stats.variables = session.var_count();
            run.stats.clauses = session.clause_count();
            run.stats.sat_calls += 1;
            match session.solve() {
                Ok(SatOutcome::Sat(model)) => {
                    let candidate = extract_solution(&model, &vm, &drefs)
                        .expect("path constraints force one node per level");
                    let collisions = validate_solution(instance, &candidate)
                        .expect("decoded paths are structurally valid");
                    if collisions.is_empty() {
                        return run.solved(instance, candidate);
                    }
                    for c in collisions {
                        if collisions_seen.contains(&c) {
                            continue;
                        }
                        collisions_seen.push(c);
                        run.stats.collisions_refined += 1;
                        let clause = elimination_clause(&c, &vm)
                            .expect("colliding nodes exist in full MDDs");
                        session.add_clause(&clause);
                    }
                }
                Ok(SatOutcome::Unsat) => break,
                Err(SatError::Timeout) => return run.timeout(),
                Err(e) => return run.capped(format!("SAT backend failed: {e}")),
            }
        }
        mu += 1;
        delta += 1;
    }
}
