//! External-process DIMACS adapter.
//!
//! Re-solves from scratch on every call: writes the current clause set as
//! DIMACS CNF, runs the configured command with the CNF path appended as
//! the final argument, and parses the `s SATISFIABLE` / `s UNSATISFIABLE`
//! status line plus `v` value lines. Exit codes 10 (SAT) and 20 (UNSAT)
//! are accepted in place of a status line. Slower than the embedded
//! backend but useful for differential testing.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::Duration;

use crate::timex::Deadline;

use super::{Model, SatBackend, SatError, SatOutcome, SatStats};

pub struct ExternalSolver {
    cmd: Vec<String>,
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    deadline: Deadline,
    stats: SatStats,
}

impl ExternalSolver {
    /// `cmd` is the program followed by its fixed arguments.
    pub fn new(cmd: Vec<String>) -> Self {
        assert!(!cmd.is_empty(), "external solver command must be non-empty");
        ExternalSolver {
            cmd,
            num_vars: 0,
            clauses: Vec::new(),
            deadline: Deadline::none(),
            stats: SatStats::default(),
        }
    }

    fn write_dimacs(&self) -> std::io::Result<tempfile::NamedTempFile> {
        let mut file = tempfile::Builder::new()
            .prefix("mrpp-cnf-")
            .suffix(".cnf")
            .tempfile()?;
        let mut text = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                text.push_str(&lit.to_string());
                text.push(' ');
            }
            text.push_str("0\n");
        }
        file.write_all(text.as_bytes())?;
        file.flush()?;
        Ok(file)
    }

    fn run(&self) -> Result<(Option<i32>, String), SatError> {
        let file = self
            .write_dimacs()
            .map_err(|e| SatError::Process(format!("writing DIMACS: {e}")))?;
        let mut child = Command::new(&self.cmd[0])
            .args(&self.cmd[1..])
            .arg(file.path())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .stdin(Stdio::null())
            .spawn()
            .map_err(|e| SatError::Process(format!("spawning {:?}: {e}", self.cmd[0])))?;

        // enforce the deadline on the subprocess
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) => {
                    if self.deadline.expired() {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(SatError::Timeout);
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(SatError::Process(format!("waiting: {e}"))),
            }
        }
        let output = child
            .wait_with_output()
            .map_err(|e| SatError::Process(format!("collecting output: {e}")))?;
        let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
        Ok((output.status.code(), stdout))
    }

    fn parse(&self, exit_code: Option<i32>, stdout: &str) -> Result<SatOutcome, SatError> {
        let mut status: Option<bool> = None;
        let mut values: Vec<i32> = Vec::new();
        for line in stdout.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("s ") {
                match rest.trim() {
                    "SATISFIABLE" => status = Some(true),
                    "UNSATISFIABLE" => status = Some(false),
                    other => {
                        return Err(SatError::Parse(format!("unknown status line: s {other}")))
                    }
                }
            } else if let Some(rest) = line.strip_prefix("v ").or_else(|| {
                (line == "v").then_some("")
            }) {
                for tok in rest.split_whitespace() {
                    let lit: i32 = tok
                        .parse()
                        .map_err(|_| SatError::Parse(format!("bad value token: {tok}")))?;
                    if lit != 0 {
                        values.push(lit);
                    }
                }
            }
        }
        let status = status.or(match exit_code {
            Some(10) => Some(true),
            Some(20) => Some(false),
            _ => None,
        });
        match status {
            Some(true) => {
                let mut assigned = vec![false; self.num_vars];
                for lit in values {
                    let v = lit.unsigned_abs() as usize;
                    if v >= 1 && v <= self.num_vars {
                        assigned[v - 1] = lit > 0;
                    }
                }
                Ok(SatOutcome::Sat(Model::new(assigned)))
            }
            Some(false) => Ok(SatOutcome::Unsat),
            None => Err(SatError::Parse(format!(
                "no status line and exit code {exit_code:?} is not 10/20"
            ))),
        }
    }
}

impl SatBackend for ExternalSolver {
    fn ensure_vars(&mut self, n: usize) {
        self.num_vars = self.num_vars.max(n);
    }

    fn add_clause(&mut self, literals: &[i32]) {
        for l in literals {
            self.ensure_vars(l.unsigned_abs() as usize);
        }
        self.clauses.push(literals.to_vec());
    }

    fn solve(&mut self) -> Result<SatOutcome, SatError> {
        self.stats.solve_calls += 1;
        let (code, stdout) = self.run()?;
        self.parse(code, &stdout)
    }

    fn stats(&self) -> SatStats {
        self.stats
    }

    fn set_deadline(&mut self, deadline: Deadline) {
        self.deadline = deadline;
    }

    fn var_count(&self) -> usize {
        self.num_vars
    }

    fn clause_count(&self) -> usize {
        self.clauses.len()
    }
}
