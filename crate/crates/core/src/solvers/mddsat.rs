//! MDD-SAT: one complete Boolean model per cost bound. A satisfiable
//! formula decodes directly to a valid solution (no validation loop); an
//! unsatisfiable one raises the bounds.

use crate::cnf::{encode_complete, extract_solution, VarMap};
use crate::instance::Instance;
use crate::mdd::Mdd;
use crate::sat::{BackendKind, SatError, SatOutcome};

use super::{Bounds, Run, SolveLimits, SolveOutcome};

pub fn solve_mdd_sat(
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
        let formula = encode_complete(&drefs, &mut vm, delta);
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
                debug_assert!(model.satisfies(formula.clauses()));
                let solution = extract_solution(&model, &vm, &drefs)
                    .expect("path constraints force one node per level");
                return run.solved(instance, solution);
            }
            Ok(SatOutcome::Unsat) => {
                mu += 1;
                delta += 1;
            }
            Err(SatError::Timeout) => return run.timeout(),
            Err(e) => return run.capped(format!("SAT backend failed: {e}")),
        }
    }
}
