//! Sum-of-costs optimal multi-robot path planning (MRPP).
//!
//! Robots move on an undirected graph in discrete timesteps, either stepping
//! to an adjacent vertex or waiting. A solution routes every robot from its
//! start to its goal such that no two robots share a vertex at the same time
//! and no two robots traverse the same edge in opposite directions. The
//! optimized objective is the sum of individual path costs.
//!
//! Four optimal solvers share the bound-increment scheme:
//!
//! - [`solvers::solve_cbs`] — search-based conflict-based search,
//! - [`solvers::solve_mdd_sat`] — a complete Boolean model per cost bound,
//! - [`solvers::solve_smt_cbs`] — lazy collision refinement over full MDDs,
//! - [`solvers::solve_sparse_smt_cbs`] — lazy refinement over sparse
//!   candidate path sets (SMDDs), growing the path pool only as conflicts
//!   are discovered.
//!
//! Supporting layers: movingai benchmark parsing ([`instance`]), time
//! expansion and decision diagrams ([`mdd`]), CNF encoding ([`cnf`]), an
//! incremental SAT backend with an embedded CDCL solver and an external
//! DIMACS adapter ([`sat`]), conflict-aware path generation ([`pathgen`]),
//! and a benchmark harness ([`bench`]).

pub mod bench;
pub mod cnf;
pub mod gen;
pub mod instance;
pub mod mdd;
pub mod pathgen;
pub mod sat;
pub mod solvers;
pub mod timex;

pub use instance::{
    Collision, CollisionKind, Conflict, ConflictKind, Graph, GridGraph, GridMap, Instance, Path,
    Robot, Solution, Vertex,
};
pub use solvers::{SolveLimits, SolveOutcome, SolveStatus, SolverKind};
