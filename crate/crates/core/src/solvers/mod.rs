//! The four sum-of-costs optimal solvers sharing the bound-increment
//! scheme: search-based CBS, MDD-SAT (complete model per bound), SMT-CBS
//! (lazy refinement over full MDDs), and Sparse-SMT-CBS (lazy refinement
//! over sparse candidate path sets).
//!
//! Every solver starts at the sum of shortest-path lengths and raises both
//! the cost bound and the horizon by one per high-level iteration, so the
//! first solution found is optimal.

use std::time::Duration;

use crate::instance::{makespan, sum_of_costs, Instance, Solution};
use crate::mdd::{bfs_distances, UNREACHABLE};
use crate::sat::BackendKind;
use crate::timex::{deadline_from, Deadline, Stopwatch};

mod cbs;
mod mddsat;
mod smtcbs;
mod sparse;

pub use cbs::solve_cbs;
pub use mddsat::solve_mdd_sat;
pub use smtcbs::solve_smt_cbs;
pub use sparse::{solve_sparse_smt_cbs, solve_sparse_smt_cbs_with_inspector, SparseInspector};

/// Solver selection, matching the CLI tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Cbs,
    MddSat,
    SmtCbs,
    Sparse,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Cbs,
        SolverKind::MddSat,
        SolverKind::SmtCbs,
        SolverKind::Sparse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Cbs => "cbs",
            SolverKind::MddSat => "mddsat",
            SolverKind::SmtCbs => "smtcbs",
            SolverKind::Sparse => "sparse",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "cbs" => Ok(SolverKind::Cbs),
            "mddsat" => Ok(SolverKind::MddSat),
            "smtcbs" => Ok(SolverKind::SmtCbs),
            "sparse" => Ok(SolverKind::Sparse),
            other => Err(format!(
                "unknown solver {other:?} (expected cbs|mddsat|smtcbs|sparse)"
            )),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Wall-clock and memory-oriented caps for a single solve call.
#[derive(Debug, Clone)]
pub struct SolveLimits {
    pub timeout: Option<Duration>,
    /// Bound on SoC minus the sum of shortest-path lengths; exceeding it
    /// ends the solve with a resource-cap status (unsolvable instances
    /// otherwise loop forever).
    pub soc_extra_cap: usize,
    pub max_clauses: usize,
    pub max_cbs_nodes: usize,
    /// Cap on conflict-subset exploration per new-paths call.
    pub max_subsets: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            timeout: None,
            soc_extra_cap: 64,
            max_clauses: 2_000_000,
            max_cbs_nodes: 200_000,
            max_subsets: 100_000,
        }
    }
}

impl SolveLimits {
    pub fn with_timeout(timeout: Duration) -> Self {
        SolveLimits {
            timeout: Some(timeout),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    Timeout,
    ResourceCap,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Timeout => "timeout",
            SolveStatus::ResourceCap => "resource-cap",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub soc: Option<usize>,
    pub makespan: Option<usize>,
    /// High-level bound iterations for the compilation solvers; expanded
    /// constraint-tree nodes for CBS.
    pub iterations: usize,
    pub sat_calls: usize,
    /// Variable/clause counts of the final formula consulted.
    pub variables: usize,
    pub clauses: usize,
    pub collisions_refined: usize,
    pub paths_generated: usize,
    pub wall_time_s: f64,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    pub stats: SolveStats,
}

impl SolveOutcome {
    pub fn solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }
}

/// Dispatches to the selected solver.
pub fn run_solver(
    kind: SolverKind,
    instance: &Instance,
    limits: &SolveLimits,
    backend: &BackendKind,
) -> SolveOutcome {
    match kind {
        SolverKind::Cbs => solve_cbs(instance, limits),
        SolverKind::MddSat => solve_mdd_sat(instance, limits, backend),
        SolverKind::SmtCbs => solve_smt_cbs(instance, limits, backend),
        SolverKind::Sparse => solve_sparse_smt_cbs(instance, limits, backend),
    }
}

/// Per-robot shortest-path lengths and the derived lower bounds.
pub(crate) struct Bounds {
    pub sps: Vec<usize>,
    pub soc_lb: usize,
    pub mu_lb: usize,
}

impl Bounds {
    /// `Err` carries a diagnostic when some goal is unreachable, in which
    /// case no solution exists at any bound.
    pub fn compute(instance: &Instance) -> Result<Bounds, String> {
        let mut sps = Vec::with_capacity(instance.robot_count());
        for r in 0..instance.robot_count() {
            let dist = bfs_distances(&instance.graph, instance.start(r));
            let d = dist[instance.goal(r)];
            if d == UNREACHABLE {
                return Err(format!(
                    "robot {r}: goal {} unreachable from start {}",
                    instance.goal(r),
                    instance.start(r)
                ));
            }
            sps.push(d as usize);
        }
        Ok(Bounds {
            soc_lb: sps.iter().sum(),
            mu_lb: sps.iter().copied().max().unwrap_or(0),
            sps,
        })
    }
}

/// Shared helpers for building outcomes.
pub(crate) struct Run {
    pub sw: Stopwatch,
    pub deadline: Deadline,
    pub stats: SolveStats,
}

impl Run {
    pub fn start(limits: &SolveLimits) -> Run {
        Run {
            sw: Stopwatch::start(),
            deadline: deadline_from(limits.timeout),
            stats: SolveStats::default(),
        }
    }

    pub fn solved(mut self, instance: &Instance, solution: Solution) -> SolveOutcome {
        let soc = sum_of_costs(&solution, instance).expect("solved paths end at goals");
        let mk = makespan(&solution, instance).expect("solved paths end at goals");
        self.stats.soc = Some(soc);
        self.stats.makespan = Some(mk);
        self.stats.wall_time_s = self.sw.elapsed().as_secs_f64();
        SolveOutcome {
            status: SolveStatus::Solved,
            solution: Some(solution),
            stats: self.stats,
        }
    }

    pub fn timeout(mut self) -> SolveOutcome {
        self.stats.wall_time_s = self.sw.elapsed().as_secs_f64();
        SolveOutcome {
            status: SolveStatus::Timeout,
            solution: None,
            stats: self.stats,
        }
    }

    pub fn capped(mut self, diagnostic: impl Into<String>) -> SolveOutcome {
        self.stats.diagnostic = Some(diagnostic.into());
        self.stats.wall_time_s = self.sw.elapsed().as_secs_f64();
        SolveOutcome {
            status: SolveStatus::ResourceCap,
            solution: None,
            stats: self.stats,
        }
    }
}
