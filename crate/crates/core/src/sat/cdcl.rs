//! Embedded CDCL solver: two-watched-literal unit propagation, first-UIP
//! conflict learning, activity-based branching with decay, geometric
//! restarts, and phase saving. No preprocessing, no clause deletion:
//! learned clauses persist for the lifetime of the session, which is
//! adequate at the formula sizes this workspace targets.
//!
//! The solver is fully deterministic: branching breaks activity ties by
//! variable index and uses no randomness.

use crate::timex::Deadline;

use super::{Model, SatBackend, SatError, SatOutcome, SatStats};

const VAR_DECAY: f64 = 0.95;
const ACTIVITY_RESCALE: f64 = 1e100;
const FIRST_RESTART: u64 = 100;
const RESTART_GROWTH: f64 = 1.5;
const DEADLINE_CHECK_MASK: u64 = 0xFF; // check every 256 conflicts

/// Literal packed as 2 * var + sign (sign 1 = negated); vars are 0-based
/// internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Lit(u32);

impl Lit {
    fn new(var: usize, negated: bool) -> Lit {
        Lit((var as u32) << 1 | negated as u32)
    }

    fn from_dimacs(l: i32) -> Lit {
        debug_assert!(l != 0);
        Lit::new(l.unsigned_abs() as usize - 1, l < 0)
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn negated(self) -> bool {
        self.0 & 1 == 1
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

fn lit_value(assigns: &[Value], l: Lit) -> Value {
    match assigns[l.var()] {
        Value::Undef => Value::Undef,
        Value::True => {
            if l.negated() {
                Value::False
            } else {
                Value::True
            }
        }
        Value::False => {
            if l.negated() {
                Value::True
            } else {
                Value::False
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Value {
    Undef,
    True,
    False,
}

struct Clause {
    lits: Vec<Lit>,
}

/// Max-heap over variable activities with position tracking, so branching
/// picks the highest-activity unassigned variable; ties go to the lower
/// variable index.
#[derive(Default)]
struct VarOrder {
    heap: Vec<u32>,
    pos: Vec<i32>,
}

impl VarOrder {
    fn grow(&mut self, n: usize) {
        self.pos.resize(n, -1);
    }

    fn before(a: u32, b: u32, act: &[f64]) -> bool {
        let (aa, ab) = (act[a as usize], act[b as usize]);
        aa > ab || (aa == ab && a < b)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if Self::before(self.heap[i], self.heap[parent], act) {
                self.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < self.heap.len() && Self::before(self.heap[l], self.heap[best], act) {
                best = l;
            }
            if r < self.heap.len() && Self::before(self.heap[r], self.heap[best], act) {
                best = r;
            }
            if best == i {
                break;
            }
            self.swap(i, best);
            i = best;
        }
    }

    fn swap(&mut self, i: usize, j: usize) {
        self.heap.swap(i, j);
        self.pos[self.heap[i] as usize] = i as i32;
        self.pos[self.heap[j] as usize] = j as i32;
    }

    fn insert(&mut self, var: usize, act: &[f64]) {
        if self.pos[var] >= 0 {
            return;
        }
        self.pos[var] = self.heap.len() as i32;
        self.heap.push(var as u32);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn update(&mut self, var: usize, act: &[f64]) {
        if self.pos[var] >= 0 {
            self.sift_up(self.pos[var] as usize, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        if self.heap.is_empty() {
            return None;
        }
        let top = self.heap[0] as usize;
        self.pos[top] = -1;
        let last = self.heap.pop().unwrap();
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.sift_down(0, act);
        }
        Some(top)
    }
}

pub struct CdclSolver {
    clauses: Vec<Clause>,
    problem_clauses: usize,
    watches: Vec<Vec<u32>>,
    assigns: Vec<Value>,
    level: Vec<u32>,
    reason: Vec<Option<u32>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    order: VarOrder,
    phase: Vec<bool>,
    seen: Vec<bool>,
    ok: bool,
    deadline: Deadline,
    stats: SatStats,
}

impl Default for CdclSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl CdclSolver {
    pub fn new() -> Self {
        CdclSolver {
            clauses: Vec::new(),
            problem_clauses: 0,
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            order: VarOrder::default(),
            phase: Vec::new(),
            seen: Vec::new(),
            ok: true,
            deadline: Deadline::none(),
            stats: SatStats::default(),
        }
    }

    fn value_lit(&self, l: Lit) -> Value {
        lit_value(&self.assigns, l)
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, reason: Option<u32>) {
        debug_assert_eq!(self.value_lit(l), Value::Undef);
        let v = l.var();
        self.assigns[v] = if l.negated() { Value::False } else { Value::True };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn cancel_until(&mut self, target: u32) {
        if self.decision_level() <= target {
            return;
        }
        let keep = self.trail_lim[target as usize];
        for i in (keep..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var();
            self.phase[v] = !l.negated();
            self.assigns[v] = Value::Undef;
            self.reason[v] = None;
            self.order.insert(v, &self.activity);
        }
        self.trail.truncate(keep);
        self.trail_lim.truncate(target as usize);
        self.qhead = keep;
    }

    /// Propagates all pending assignments; returns a conflicting clause
    /// index if one arises.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while conflict.is_none() && self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut keep = 0;
            let mut i = 0;
            while i < ws.len() {
                if conflict.is_some() {
                    // conflict found: retain all remaining watchers untouched
                    ws[keep] = ws[i];
                    keep += 1;
                    i += 1;
                    continue;
                }
                let ci = ws[i];
                i += 1;
                let clause = &mut self.clauses[ci as usize];
                if clause.lits[0] == false_lit {
                    clause.lits.swap(0, 1);
                }
                debug_assert_eq!(clause.lits[1], false_lit);
                let first = clause.lits[0];
                if lit_value(&self.assigns, first) == Value::True {
                    ws[keep] = ci;
                    keep += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.lits.len() {
                    if lit_value(&self.assigns, clause.lits[k]) != Value::False {
                        clause.lits.swap(1, k);
                        let new_watch = clause.lits[1].code();
                        self.watches[new_watch].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                // clause is unit or conflicting under the first literal
                ws[keep] = ci;
                keep += 1;
                if self.value_lit(first) == Value::False {
                    conflict = Some(ci);
                } else {
                    self.enqueue(first, Some(ci));
                }
            }
            ws.truncate(keep);
            self.watches[false_lit.code()] = ws;
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > ACTIVITY_RESCALE {
            for a in &mut self.activity {
                *a *= 1.0 / ACTIVITY_RESCALE;
            }
            self.var_inc *= 1.0 / ACTIVITY_RESCALE;
        }
        self.order.update(v, &self.activity);
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backjump level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit(0)]; // slot for the asserting literal
        let mut to_clear: Vec<usize> = Vec::new();
        let mut path_count = 0u32;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();

        loop {
            let clause = &self.clauses[confl as usize];
            let skip = usize::from(p.is_some());
            let lits: Vec<Lit> = clause.lits[skip..].to_vec();
            for q in lits {
                let v = q.var();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    to_clear.push(v);
                    self.bump_var(v);
                    if self.level[v] >= self.decision_level() {
                        path_count += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            // walk the trail back to the next marked literal
            loop {
                index -= 1;
                if self.seen[self.trail[index].var()] {
                    break;
                }
            }
            let pl = self.trail[index];
            self.seen[pl.var()] = false;
            path_count -= 1;
            if path_count == 0 {
                learnt[0] = !pl;
                break;
            }
            p = Some(pl);
            confl = self.reason[pl.var()].expect("non-UIP literal has a reason");
        }

        for v in to_clear {
            self.seen[v] = false;
        }

        let backjump = if learnt.len() == 1 {
            0
        } else {
            // move the highest-level non-asserting literal to position 1
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var()] > self.level[learnt[max_i].var()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            self.level[learnt[1].var()]
        };
        (learnt, backjump)
    }

    fn attach_clause(&mut self, lits: Vec<Lit>) -> u32 {
        debug_assert!(lits.len() >= 2);
        let ci = self.clauses.len() as u32;
        self.watches[lits[0].code()].push(ci);
        self.watches[lits[1].code()].push(ci);
        self.clauses.push(Clause { lits });
        ci
    }

    fn model(&self) -> Model {
        Model::new(self.assigns.iter().map(|&v| v == Value::True).collect())
    }
}

impl SatBackend for CdclSolver {
    fn ensure_vars(&mut self, n: usize) {
        while self.assigns.len() < n {
            self.assigns.push(Value::Undef);
            self.level.push(0);
            self.reason.push(None);
            self.activity.push(0.0);
            self.phase.push(false);
            self.seen.push(false);
            self.watches.push(Vec::new());
            self.watches.push(Vec::new());
            let v = self.assigns.len() - 1;
            self.order.grow(self.assigns.len());
            self.order.insert(v, &self.activity);
        }
    }

    fn add_clause(&mut self, literals: &[i32]) {
        if !self.ok {
            return;
        }
        self.cancel_until(0);
        let max_var = literals.iter().map(|l| l.unsigned_abs() as usize).max();
        if let Some(m) = max_var {
            self.ensure_vars(m);
        }
        self.problem_clauses += 1;

        let mut lits: Vec<Lit> = literals.iter().map(|&l| Lit::from_dimacs(l)).collect();
        lits.sort_unstable_by_key(|l| l.0);
        lits.dedup();
        // tautology: p and !p are adjacent after sorting by code
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return;
        }
        // drop literals already false at the top level; a true one
        // satisfies the clause forever
        let mut filtered = Vec::with_capacity(lits.len());
        for l in lits {
            match self.value_lit(l) {
                Value::True => return,
                Value::False => {}
                Value::Undef => filtered.push(l),
            }
        }
        match filtered.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(filtered[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                self.attach_clause(filtered);
            }
        }
    }

    fn solve(&mut self) -> Result<SatOutcome, SatError> {
        self.stats.solve_calls += 1;
        if !self.ok {
            return Ok(SatOutcome::Unsat);
        }
        self.cancel_until(0);

        let mut restart_limit = FIRST_RESTART;
        let mut conflicts_since_restart = 0u64;

        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                conflicts_since_restart += 1;
                if self.stats.conflicts & DEADLINE_CHECK_MASK == 0 && self.deadline.expired() {
                    self.cancel_until(0);
                    return Err(SatError::Timeout);
                }
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Ok(SatOutcome::Unsat);
                }
                let (learnt, backjump) = self.analyze(confl);
                self.cancel_until(backjump);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let asserting = learnt[0];
                    let ci = self.attach_clause(learnt);
                    self.enqueue(asserting, Some(ci));
                }
                self.var_inc /= VAR_DECAY;
            } else if conflicts_since_restart >= restart_limit {
                conflicts_since_restart = 0;
                restart_limit = (restart_limit as f64 * RESTART_GROWTH) as u64;
                self.cancel_until(0);
            } else if self.trail.len() == self.assigns.len() {
                let model = self.model();
                return Ok(SatOutcome::Sat(model));
            } else {
                // pick the next unassigned variable by activity
                let var = loop {
                    let v = self
                        .order
                        .pop(&self.activity)
                        .expect("unassigned variable exists");
                    if self.assigns[v] == Value::Undef {
                        break v;
                    }
                };
                self.stats.decisions += 1;
                if self.stats.decisions & 0x3FF == 0 && self.deadline.expired() {
                    self.cancel_until(0);
                    return Err(SatError::Timeout);
                }
                self.trail_lim.push(self.trail.len());
                self.enqueue(Lit::new(var, !self.phase[var]), None);
            }
        }
    }

    fn stats(&self) -> SatStats {
        self.stats
    }

    fn set_deadline(&mut self, deadline: Deadline) {
        self.deadline = deadline;
    }

    fn var_count(&self) -> usize {
        self.assigns.len()
    }

    fn clause_count(&self) -> usize {
        self.problem_clauses
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_clauses(clauses: &[Vec<i32>], nvars: usize) -> SatOutcome {
        let mut s = CdclSolver::new();
        s.ensure_vars(nvars);
        for c in clauses {
            s.add_clause(c);
        }
        s.solve().unwrap()
    }

    #[test]
    fn empty_formula_is_sat() {
        let mut s = CdclSolver::new();
        let out = s.solve().unwrap();
        assert_eq!(out, SatOutcome::Sat(Model::new(vec![])));
    }

    #[test]
    fn unit_clause_forces_value() {
        let out = solve_clauses(&[vec![1]], 1);
        match out {
            SatOutcome::Sat(m) => assert!(m.value(1)),
            _ => panic!("expected SAT"),
        }
    }

    #[test]
    fn contradiction_is_unsat() {
        assert_eq!(solve_clauses(&[vec![1], vec![-1]], 1), SatOutcome::Unsat);
    }

    #[test]
    fn empty_clause_is_unsat() {
        let mut s = CdclSolver::new();
        s.ensure_vars(2);
        s.add_clause(&[1, 2]);
        s.add_clause(&[]);
        assert_eq!(s.solve().unwrap(), SatOutcome::Unsat);
    }

    /// Pigeonhole formula PHP(pigeons, holes): each pigeon in some hole,
    /// no two pigeons share a hole. UNSAT whenever pigeons > holes.
    pub fn pigeonhole(pigeons: usize, holes: usize) -> (Vec<Vec<i32>>, usize) {
        let var = |p: usize, h: usize| (p * holes + h + 1) as i32;
        let mut clauses = Vec::new();
        for p in 0..pigeons {
            clauses.push((0..holes).map(|h| var(p, h)).collect());
        }
        for h in 0..holes {
            for p1 in 0..pigeons {
                for p2 in p1 + 1..pigeons {
                    clauses.push(vec![-var(p1, h), -var(p2, h)]);
                }
            }
        }
        (clauses, pigeons * holes)
    }

    #[test]
    fn pigeonhole_unsat() {
        for n in 2..=5 {
            let (clauses, nvars) = pigeonhole(n + 1, n);
            assert_eq!(solve_clauses(&clauses, nvars), SatOutcome::Unsat, "PHP({},{})", n + 1, n);
        }
    }

    #[test]
    fn sat_model_satisfies_clauses() {
        // a small satisfiable formula with some propagation depth
        let clauses = vec![
            vec![1, 2, 3],
            vec![-1, 4],
            vec![-4, 5],
            vec![-2, -5],
            vec![-3, 2, 5],
            vec![2, -5, 6],
        ];
        match solve_clauses(&clauses, 6) {
            SatOutcome::Sat(m) => assert!(m.satisfies(&clauses)),
            _ => panic!("expected SAT"),
        }
    }

    #[test]
    fn incremental_clause_addition() {
        let mut s = CdclSolver::new();
        s.ensure_vars(2);
        s.add_clause(&[1, 2]);
        let first = s.solve().unwrap();
        assert!(first.is_sat());
        // force both variables negative: still satisfiable? no — {1,2}
        s.add_clause(&[-1]);
        s.add_clause(&[-2]);
        assert_eq!(s.solve().unwrap(), SatOutcome::Unsat);
    }

    #[test]
    fn solve_add_solve_reflects_new_clause() {
        let mut s = CdclSolver::new();
        s.ensure_vars(3);
        s.add_clause(&[1, 2]);
        match s.solve().unwrap() {
            SatOutcome::Sat(m) => {
                // forbid the returned assignment on vars 1..=2
                let block: Vec<i32> = (1..=2)
                    .map(|v| if m.value(v) { -v } else { v })
                    .collect();
                s.add_clause(&block);
            }
            _ => panic!("expected SAT"),
        }
        // still satisfiable: {1,2} has three satisfying assignments
        assert!(s.solve().unwrap().is_sat());
    }

    #[test]
    fn deterministic_stats_across_runs() {
        let (clauses, nvars) = pigeonhole(6, 5);
        let run = || {
            let mut s = CdclSolver::new();
            s.ensure_vars(nvars);
            for c in &clauses {
                s.add_clause(c);
            }
            s.solve().unwrap();
            s.stats()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn fresh_session_has_zeroed_stats() {
        let s = CdclSolver::new();
        assert_eq!(s.stats(), SatStats::default());
    }
}
