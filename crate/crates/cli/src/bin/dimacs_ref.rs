//! Reference DIMACS solver: plain iterative DPLL with unit propagation and
//! chronological backtracking. Deliberately independent of the main
//! library so differential tests against the embedded CDCL solver compare
//! two separate implementations.
//!
//! Usage: `dimacs-ref <file.cnf>`. Prints `s SATISFIABLE` plus `v` value
//! lines, or `s UNSATISFIABLE`; exit code 10 / 20 accordingly, 1 on error.

use std::process::ExitCode;

struct Formula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
}

fn parse_dimacs(text: &str) -> Result<Formula, String> {
    let mut num_vars = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p ") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 3 || fields[0] != "cnf" {
                return Err(format!("bad problem line: {line}"));
            }
            num_vars = Some(
                fields[1]
                    .parse::<usize>()
                    .map_err(|e| format!("bad var count: {e}"))?,
            );
            continue;
        }
        for tok in line.split_whitespace() {
            let lit: i32 = tok.parse().map_err(|e| format!("bad literal {tok:?}: {e}"))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let declared = num_vars.ok_or("missing `p cnf` line")?;
    let seen = clauses
        .iter()
        .flatten()
        .map(|l| l.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    Ok(Formula {
        num_vars: declared.max(seen),
        clauses,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Assign {
    Unset,
    True,
    False,
}

/// DPLL with unit propagation; branch on the lowest-index unset variable,
/// true first. Returns a satisfying assignment or `None`.
fn dpll(f: &Formula) -> Option<Vec<bool>> {
    let n = f.num_vars;
    // occurrence lists per literal
    let idx = |lit: i32| -> usize {
        let v = lit.unsigned_abs() as usize - 1;
        v * 2 + usize::from(lit < 0)
    };
    let mut occurs: Vec<Vec<usize>> = vec![Vec::new(); n * 2];
    for (ci, clause) in f.clauses.iter().enumerate() {
        if clause.is_empty() {
            return None;
        }
        for &lit in clause {
            occurs[idx(lit)].push(ci);
        }
    }

    let mut assign = vec![Assign::Unset; n];
    let mut trail: Vec<usize> = Vec::new(); // assigned vars in order
    // decisions[i]: (trail length before, variable, tried_false_already)
    let mut decisions: Vec<(usize, usize, bool)> = Vec::new();

    let value = |assign: &[Assign], lit: i32| -> Assign {
        match assign[lit.unsigned_abs() as usize - 1] {
            Assign::Unset => Assign::Unset,
            Assign::True => {
                if lit > 0 {
                    Assign::True
                } else {
                    Assign::False
                }
            }
            Assign::False => {
                if lit > 0 {
                    Assign::False
                } else {
                    Assign::True
                }
            }
        }
    };

    // returns false on conflict
    let propagate = |assign: &mut Vec<Assign>, trail: &mut Vec<usize>, from: usize| -> bool {
        let mut head = from;
        while head < trail.len() {
            let var = trail[head];
            head += 1;
            let falsified: i32 = if assign[var] == Assign::True {
                -((var + 1) as i32)
            } else {
                (var + 1) as i32
            };
            for &ci in &occurs[idx(falsified)] {
                let clause = &f.clauses[ci];
                let mut unassigned: Option<i32> = None;
                let mut satisfied = false;
                let mut open = 0;
                for &lit in clause {
                    match value(assign, lit) {
                        Assign::True => {
                            satisfied = true;
                            break;
                        }
                        Assign::Unset => {
                            open += 1;
                            unassigned = Some(lit);
                        }
                        Assign::False => {}
                    }
                }
                if satisfied {
                    continue;
                }
                match open {
                    0 => return false,
                    1 => {
                        let lit = unassigned.unwrap();
                        let v = lit.unsigned_abs() as usize - 1;
                        assign[v] = if lit > 0 { Assign::True } else { Assign::False };
                        trail.push(v);
                    }
                    _ => {}
                }
            }
        }
        true
    };

    // top-level units
    let mut ok = true;
    for clause in &f.clauses {
        let mut open = 0;
        let mut only = 0;
        for &lit in clause {
            if value(&assign, lit) != Assign::False {
                open += 1;
                only = lit;
            }
        }
        if open == 1 && value(&assign, only) == Assign::Unset {
            let v = only.unsigned_abs() as usize - 1;
            assign[v] = if only > 0 { Assign::True } else { Assign::False };
            trail.push(v);
        }
    }
    if !propagate(&mut assign, &mut trail, 0) {
        ok = false;
    }

    while ok {
        // everything propagated; pick a branch variable
        match (0..n).find(|&v| assign[v] == Assign::Unset) {
            None => {
                return Some(assign.iter().map(|&a| a == Assign::True).collect());
            }
            Some(var) => {
                decisions.push((trail.len(), var, false));
                assign[var] = Assign::True;
                trail.push(var);
            }
        }
        loop {
            let from = decisions.last().map(|d| d.0).unwrap_or(0);
            if propagate(&mut assign, &mut trail, from) {
                break;
            }
            // backtrack to the deepest decision with an untried polarity
            loop {
                match decisions.pop() {
                    None => return None,
                    Some((mark, var, tried_false)) => {
                        for &v in &trail[mark..] {
                            assign[v] = Assign::Unset;
                        }
                        trail.truncate(mark);
                        if !tried_false {
                            decisions.push((mark, var, true));
                            assign[var] = Assign::False;
                            trail.push(var);
                            break;
                        }
                    }
                }
            }
        }
    }
    None
}

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: dimacs-ref <file.cnf>");
        return ExitCode::from(1);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error reading {path}: {e}");
            return ExitCode::from(1);
        }
    };
    let formula = match parse_dimacs(&text) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error parsing {path}: {e}");
            return ExitCode::from(1);
        }
    };
    match dpll(&formula) {
        Some(assignment) => {
            println!("s SATISFIABLE");
            let mut line = String::from("v");
            for (i, &val) in assignment.iter().enumerate() {
                let lit = if val { (i + 1) as i64 } else { -((i + 1) as i64) };
                line.push(' ');
                line.push_str(&lit.to_string());
                if line.len() > 72 {
                    println!("{line}");
                    line = String::from("v");
                }
            }
            line.push_str(" 0");
            println!("{line}");
            ExitCode::from(10)
        }
        None => {
            println!("s UNSATISFIABLE");
            ExitCode::from(20)
        }
    }
}
