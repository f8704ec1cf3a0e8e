//! Boolean models over per-robot time-expanded diagrams.
//!
//! Node variables X(r, v, t) say robot r sits at v at timestep t; edge
//! variables E(r, u, v, t) say it traverses u -> v between t and t + 1.
//! [`encode_paths`] pins start/goal, forces each occupied node to leave
//! through exactly one edge, and ties edges to their endpoints.
//! [`encode_cost_bound`] charges one late indicator per timestep a robot
//! spends anywhere before its final arrival (beyond its shortest-path
//! distance) and bounds the total with a sequential counter, making the
//! bound exact even for schedules that revisit the goal.
//! [`encode_complete`] adds all pairwise collision-elimination clauses;
//! [`encode_incomplete`] adds only those for recorded collisions, yielding
//! the lazy model whose candidate assignments must be validated.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::instance::{Collision, CollisionKind, Path, Robot, Solution, Vertex};
use crate::mdd::Mdd;
use crate::sat::Model;

/// CNF clauses over integer literals (DIMACS convention: positive and
/// negative 1-based variable ids).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize) -> Self {
        CnfFormula {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn push(&mut self, clause: Vec<i32>) {
        debug_assert!(!clause.is_empty(), "no empty clause at construction");
        debug_assert!(clause
            .iter()
            .all(|&l| l != 0 && l.unsigned_abs() as usize <= self.num_vars));
        self.clauses.push(clause);
    }

    /// Absorbs another fragment built over the same variable space.
    pub fn absorb(&mut self, other: CnfFormula) {
        self.num_vars = self.num_vars.max(other.num_vars);
        self.clauses.extend(other.clauses);
    }

    pub fn set_num_vars(&mut self, n: usize) {
        debug_assert!(n >= self.num_vars);
        self.num_vars = n;
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clause_count(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// DIMACS CNF: `p cnf <vars> <clauses>` then one terminated clause per
    /// line.
    pub fn write_dimacs<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for clause in &self.clauses {
            for lit in clause {
                write!(w, "{lit} ")?;
            }
            writeln!(w, "0")?;
        }
        Ok(())
    }
}

/// Bijection between diagram nodes/edges/cost indicators and variable ids.
/// Ids are dense starting at 1, allocated robot by robot in level order, so
/// identical diagrams always produce identical maps.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    x: BTreeMap<(Robot, usize, Vertex), i32>,
    e: BTreeMap<(Robot, usize, Vertex, Vertex), i32>,
    late: BTreeMap<(Robot, usize), i32>,
    aux: usize,
    next: i32,
}

impl VarMap {
    /// Allocates X and E variables for every node and edge of the given
    /// diagrams (one per robot, indexed by position).
    pub fn build(diagrams: &[&Mdd]) -> VarMap {
        let mut vm = VarMap {
            next: 1,
            ..Default::default()
        };
        for (r, d) in diagrams.iter().enumerate() {
            for t in 0..=d.horizon() {
                for &v in d.level(t) {
                    vm.x.insert((r, t, v), vm.next);
                    vm.next += 1;
                }
            }
            for t in 0..d.horizon() {
                for &(u, v) in d.edges_at(t) {
                    vm.e.insert((r, t, u, v), vm.next);
                    vm.next += 1;
                }
            }
        }
        vm
    }

    pub fn x_var(&self, r: Robot, v: Vertex, t: usize) -> Option<i32> {
        self.x.get(&(r, t, v)).copied()
    }

    pub fn e_var(&self, r: Robot, u: Vertex, v: Vertex, t: usize) -> Option<i32> {
        self.e.get(&(r, t, u, v)).copied()
    }

    pub fn late_var(&self, r: Robot, t: usize) -> Option<i32> {
        self.late.get(&(r, t)).copied()
    }

    fn alloc_late(&mut self, r: Robot, t: usize) -> i32 {
        let id = self.next;
        self.next += 1;
        self.late.insert((r, t), id);
        id
    }

    fn alloc_aux(&mut self) -> i32 {
        let id = self.next;
        self.next += 1;
        self.aux += 1;
        id
    }

    pub fn num_vars(&self) -> usize {
        (self.next - 1) as usize
    }

    pub fn aux_count(&self) -> usize {
        self.aux
    }

    /// Text sidecar mapping ids back to their meaning:
    /// `X <robot> <vertex> <t> <id>`, `E <robot> <u> <v> <t> <id>`,
    /// `L <robot> <t> <id>`.
    pub fn write_sidecar<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (&(r, t, v), id) in &self.x {
            writeln!(w, "X {r} {v} {t} {id}")?;
        }
        for (&(r, t, u, v), id) in &self.e {
            writeln!(w, "E {r} {u} {v} {t} {id}")?;
        }
        for (&(r, t), id) in &self.late {
            writeln!(w, "L {r} {t} {id}")?;
        }
        Ok(())
    }
}

/// Per-robot path-shape constraints: start/goal units, "leave through
/// exactly one edge", edge-endpoint consistency, and the (redundant but
/// propagation-friendly) at-most-one over each level's node variables.
pub fn encode_paths(diagrams: &[&Mdd], vm: &VarMap) -> CnfFormula {
    let mut f = CnfFormula::new(vm.num_vars());
    for (r, d) in diagrams.iter().enumerate() {
        let mu = d.horizon();
        f.push(vec![vm.x_var(r, d.start(), 0).unwrap()]);
        f.push(vec![vm.x_var(r, d.goal(), mu).unwrap()]);

        for t in 0..mu {
            // group sorted edges by source vertex
            let edges = d.edges_at(t);
            let mut i = 0;
            while i < edges.len() {
                let u = edges[i].0;
                let mut out_vars = Vec::new();
                while i < edges.len() && edges[i].0 == u {
                    out_vars.push(vm.e_var(r, u, edges[i].1, t).unwrap());
                    i += 1;
                }
                // occupied node leaves through at least one edge
                let mut clause = vec![-vm.x_var(r, u, t).unwrap()];
                clause.extend_from_slice(&out_vars);
                f.push(clause);
                // and through at most one
                pairwise_at_most_one(&mut f, &out_vars);
            }
            debug_assert_eq!(
                {
                    let mut srcs: Vec<Vertex> = edges.iter().map(|&(u, _)| u).collect();
                    srcs.dedup();
                    srcs
                },
                d.level(t),
                "every non-sink node must have an outgoing edge"
            );
            // edge endpoints
            for &(u, v) in edges {
                let e = vm.e_var(r, u, v, t).unwrap();
                f.push(vec![-e, vm.x_var(r, u, t).unwrap()]);
                f.push(vec![-e, vm.x_var(r, v, t + 1).unwrap()]);
            }
        }
        for t in 0..=mu {
            let xs: Vec<i32> = d
                .level(t)
                .iter()
                .map(|&v| vm.x_var(r, v, t).unwrap())
                .collect();
            pairwise_at_most_one(&mut f, &xs);
        }
    }
    f
}

fn pairwise_at_most_one(f: &mut CnfFormula, vars: &[i32]) {
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            f.push(vec![-vars[i], -vars[j]]);
        }
    }
}

/// Sum-of-costs budget: late indicators L(r, t) for each timestep in
/// [sp_r, mu) charge every step a robot spends before its final arrival.
///
/// Node triggers X(r, v, t) -> L(r, t) fire on non-goal presence; chain
/// clauses L(r, t + 1) -> L(r, t) extend the charge backwards over
/// at-the-goal waits that precede a later departure, so a decoded path of
/// individual cost sp_r + c forces at least c indicators true. A
/// sequential counter bounds the total number of true indicators by
/// `delta`.
///
/// Diagrams must contain a cost-minimal path (both diagram builders used
/// by the solvers guarantee this), so the earliest goal level equals the
/// robot's shortest-path distance.
pub fn encode_cost_bound(diagrams: &[&Mdd], vm: &mut VarMap, delta: usize) -> CnfFormula {
    let mut f = CnfFormula::new(vm.num_vars());
    let mut lates = Vec::new();
    for (r, d) in diagrams.iter().enumerate() {
        let mu = d.horizon();
        let sp = d.earliest_goal_level();
        let goal = d.goal();
        for t in sp..mu {
            let late = vm.alloc_late(r, t);
            f.set_num_vars(vm.num_vars());
            lates.push(late);
            for &v in d.level(t) {
                if v != goal {
                    f.push(vec![-vm.x_var(r, v, t).unwrap(), late]);
                }
            }
        }
        for t in sp..mu.saturating_sub(1) {
            let here = vm.late_var(r, t).unwrap();
            let next = vm.late_var(r, t + 1).unwrap();
            f.push(vec![-next, here]);
        }
    }
    sequential_at_most_k(&mut f, vm, &lates, delta);
    f
}

/// Sinz sequential-counter encoding of sum(inputs) <= k.
fn sequential_at_most_k(f: &mut CnfFormula, vm: &mut VarMap, inputs: &[i32], k: usize) {
    let n = inputs.len();
    if n <= k {
        return;
    }
    if k == 0 {
        for &x in inputs {
            f.push(vec![-x]);
        }
        return;
    }
    // registers s[i][j]: among inputs[0..=i], at least j + 1 are true
    let mut regs = vec![vec![0i32; k]; n - 1];
    for row in regs.iter_mut() {
        for slot in row.iter_mut() {
            *slot = vm.alloc_aux();
        }
    }
    f.set_num_vars(vm.num_vars());

    f.push(vec![-inputs[0], regs[0][0]]);
    for j in 1..k {
        f.push(vec![-regs[0][j]]);
    }
    for i in 1..n - 1 {
        f.push(vec![-inputs[i], regs[i][0]]);
        f.push(vec![-regs[i - 1][0], regs[i][0]]);
        for j in 1..k {
            f.push(vec![-inputs[i], -regs[i - 1][j - 1], regs[i][j]]);
            f.push(vec![-regs[i - 1][j], regs[i][j]]);
        }
        f.push(vec![-inputs[i], -regs[i - 1][k - 1]]);
    }
    f.push(vec![-inputs[n - 1], -regs[n - 2][k - 1]]);
}

/// The complete Boolean model: satisfiable iff a collision-free solution
/// within the cost budget exists over these diagrams. Vertex exclusivity
/// is pairwise over every shared node; opposed edge pairs are excluded
/// analogously.
pub fn encode_complete(diagrams: &[&Mdd], vm: &mut VarMap, delta: usize) -> CnfFormula {
    let mut f = encode_paths(diagrams, vm);
    f.absorb(encode_cost_bound(diagrams, vm, delta));

    let k = diagrams.len();
    let mu = common_horizon(diagrams);
    for t in 0..=mu {
        // vertex -> robots whose diagram contains v^t
        let mut present: BTreeMap<Vertex, Vec<Robot>> = BTreeMap::new();
        for (r, d) in diagrams.iter().enumerate() {
            for &v in d.level(t) {
                present.entry(v).or_default().push(r);
            }
        }
        for (v, robots) in present {
            for a in 0..robots.len() {
                for b in a + 1..robots.len() {
                    f.push(vec![
                        -vm.x_var(robots[a], v, t).unwrap(),
                        -vm.x_var(robots[b], v, t).unwrap(),
                    ]);
                }
            }
        }
    }
    for t in 0..mu {
        for i in 0..k {
            for j in i + 1..k {
                for &(u, v) in diagrams[i].edges_at(t) {
                    if u != v && diagrams[j].contains_edge(v, u, t) {
                        f.push(vec![
                            -vm.e_var(i, u, v, t).unwrap(),
                            -vm.e_var(j, v, u, t).unwrap(),
                        ]);
                    }
                }
            }
        }
    }
    f
}

/// The incomplete (lazy) model: path shape and cost budget, plus one
/// elimination clause per recorded collision. Satisfying assignments may
/// still collide elsewhere; the validator catches them.
pub fn encode_incomplete(
    diagrams: &[&Mdd],
    collisions: &[Collision],
    vm: &mut VarMap,
    delta: usize,
) -> CnfFormula {
    let mut f = encode_paths(diagrams, vm);
    f.absorb(encode_cost_bound(diagrams, vm, delta));
    for c in collisions {
        if let Some(clause) = elimination_clause(c, vm) {
            f.push(clause);
        }
    }
    f
}

/// The binary clause forbidding a recorded collision, or `None` when one
/// of the robots cannot even occupy the location (its diagram lacks the
/// node or edge), which makes the constraint vacuous.
pub fn elimination_clause(c: &Collision, vm: &VarMap) -> Option<Vec<i32>> {
    let (ri, rj) = c.robots;
    match c.kind {
        CollisionKind::Vertex { v } => {
            let a = vm.x_var(ri, v, c.timestep)?;
            let b = vm.x_var(rj, v, c.timestep)?;
            Some(vec![-a, -b])
        }
        CollisionKind::Edge { u, v } => {
            let a = vm.e_var(ri, u, v, c.timestep)?;
            let b = vm.e_var(rj, v, u, c.timestep)?;
            Some(vec![-a, -b])
        }
    }
}

fn common_horizon(diagrams: &[&Mdd]) -> usize {
    let mu = diagrams.first().map_or(0, |d| d.horizon());
    debug_assert!(diagrams.iter().all(|d| d.horizon() == mu));
    mu
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("robot {robot}: model selects {count} nodes at level {t} (encoder bug)")]
    LevelSelection { robot: Robot, t: usize, count: usize },
}

/// Decodes a satisfying assignment back to per-robot paths. The path
/// constraints guarantee exactly one true node variable per level; any
/// deviation signals an encoder bug. Terminal goal-stays are trimmed.
pub fn extract_solution(
    model: &Model,
    vm: &VarMap,
    diagrams: &[&Mdd],
) -> Result<Solution, ExtractError> {
    let mut paths = Vec::with_capacity(diagrams.len());
    for (r, d) in diagrams.iter().enumerate() {
        let mut path: Path = Vec::with_capacity(d.horizon() + 1);
        for t in 0..=d.horizon() {
            let chosen: Vec<Vertex> = d
                .level(t)
                .iter()
                .copied()
                .filter(|&v| model.value(vm.x_var(r, v, t).unwrap()))
                .collect();
            if chosen.len() != 1 {
                return Err(ExtractError::LevelSelection {
                    robot: r,
                    t,
                    count: chosen.len(),
                });
            }
            path.push(chosen[0]);
        }
        let goal = d.goal();
        while path.len() > 1 && path[path.len() - 1] == goal && path[path.len() - 2] == goal {
            path.pop();
        }
        paths.push(path);
    }
    Ok(Solution { paths })
}
