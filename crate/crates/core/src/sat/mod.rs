//! Abstract incremental SAT-solving contract with two conforming backends:
//! an embedded CDCL solver and an external-process DIMACS adapter.
//!
//! A session holds a monotonically growing clause set: clauses are never
//! retracted. Learned clauses may persist between solve calls within a
//! session; results must not depend on whether they do.

use thiserror::Error;

use crate::timex::Deadline;

pub mod cdcl;
#[cfg(not(target_arch = "wasm32"))]
pub mod external;

pub use cdcl::CdclSolver;
#[cfg(not(target_arch = "wasm32"))]
pub use external::ExternalSolver;

/// A total truth assignment over variables 1..=n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    values: Vec<bool>,
}

impl Model {
    pub fn new(values: Vec<bool>) -> Self {
        Model { values }
    }

    /// Truth value of a positive variable id.
    pub fn value(&self, var: i32) -> bool {
        debug_assert!(var > 0);
        self.values.get(var as usize - 1).copied().unwrap_or(false)
    }

    /// Truth value of a literal (negative ids are negated variables).
    pub fn literal(&self, lit: i32) -> bool {
        if lit > 0 {
            self.value(lit)
        } else {
            !self.value(-lit)
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True iff every clause has at least one true literal.
    pub fn satisfies(&self, clauses: &[Vec<i32>]) -> bool {
        clauses
            .iter()
            .all(|c| c.iter().any(|&l| self.literal(l)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(Model),
    Unsat,
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatOutcome::Sat(_))
    }
}

/// Backend failures, reported distinctly from UNSAT.
#[derive(Debug, Error)]
pub enum SatError {
    #[error("solve deadline exceeded")]
    Timeout,
    #[error("external solver process failed: {0}")]
    Process(String),
    #[error("could not parse external solver output: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SatStats {
    pub decisions: u64,
    pub conflicts: u64,
    pub propagations: u64,
    pub solve_calls: u64,
}

/// An incremental SAT session over a growing clause set.
pub trait SatBackend {
    /// Registers variables 1..=n. Must be called before clauses use them.
    fn ensure_vars(&mut self, n: usize);

    /// Permanently adds a clause. An empty clause is permitted and makes
    /// the formula trivially unsatisfiable from the next solve on.
    fn add_clause(&mut self, literals: &[i32]);

    /// Decides the current clause set. Sound and complete; on SAT the
    /// model is total over registered variables.
    fn solve(&mut self) -> Result<SatOutcome, SatError>;

    fn stats(&self) -> SatStats;

    /// Cooperative deadline checked during search.
    fn set_deadline(&mut self, deadline: Deadline);

    fn var_count(&self) -> usize;

    /// Number of problem clauses added so far (learned clauses excluded).
    fn clause_count(&self) -> usize;
}

/// Which backend new sessions are created from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    /// The embedded CDCL solver.
    Embedded,
    /// An external DIMACS solver invoked as a subprocess; the CNF path is
    /// appended as the final argument.
    External(Vec<String>),
}

impl BackendKind {
    pub fn new_session(&self) -> Box<dyn SatBackend> {
        match self {
            BackendKind::Embedded => Box::new(CdclSolver::new()),
            #[cfg(not(target_arch = "wasm32"))]
            BackendKind::External(cmd) => Box::new(ExternalSolver::new(cmd.clone())),
            #[cfg(target_arch = "wasm32")]
            BackendKind::External(_) => panic!("external SAT backend unavailable on wasm32"),
        }
    }
}
