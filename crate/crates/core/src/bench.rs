//! Benchmark harness: batch solving across robot counts with per-call
//! timeouts, CSV records, and success-rate / sorted-runtime (cactus)
//! summaries.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path as FsPath, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{grid_to_graph, instance_from_rows, parse_scenario_rows, GridMap};
use crate::sat::BackendKind;
use crate::solvers::{run_solver, SolveLimits, SolveOutcome, SolveStatus, SolverKind};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Batch configuration, parsed from `key = value` lines.
///
/// ```text
/// map = fixtures/empty-8-8.map fixtures/empty-8-8.scen
/// map = fixtures/random-8-8-20.map fixtures/random-8-8-20.scen
/// agents = 2,4,6
/// instances = 3
/// timeout = 5
/// solvers = cbs,mddsat,smtcbs,sparse
/// seed = 7
/// out = out/bench.csv
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub maps: Vec<(PathBuf, PathBuf)>,
    pub agent_counts: Vec<usize>,
    pub instances_per_count: usize,
    pub timeout: Duration,
    pub solvers: Vec<SolverKind>,
    pub seed: u64,
    pub out: PathBuf,
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<BenchConfig, BenchError> {
        let mut maps = Vec::new();
        let mut agent_counts = vec![2, 4];
        let mut instances_per_count = 1;
        let mut timeout = Duration::from_secs(10);
        let mut solvers = SolverKind::ALL.to_vec();
        let mut seed = 0;
        let mut out = PathBuf::from("bench.csv");

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| BenchError::Config {
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "map" => {
                    let mut parts = value.split_whitespace();
                    let (m, s) = (parts.next(), parts.next());
                    match (m, s) {
                        (Some(m), Some(s)) if parts.next().is_none() => {
                            maps.push((PathBuf::from(m), PathBuf::from(s)));
                        }
                        _ => return Err(err("map takes `<map-path> <scen-path>`".into())),
                    }
                }
                "agents" => {
                    agent_counts = value
                        .split(',')
                        .map(|t| t.trim().parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| err(format!("agents: {e}")))?;
                    if agent_counts.iter().any(|&k| k == 0) {
                        return Err(err("agent counts must be positive".into()));
                    }
                }
                "instances" => {
                    instances_per_count =
                        value.parse().map_err(|e| err(format!("instances: {e}")))?;
                }
                "timeout" => {
                    let secs: f64 = value.parse().map_err(|e| err(format!("timeout: {e}")))?;
                    if secs <= 0.0 {
                        return Err(err("timeout must be positive".into()));
                    }
                    timeout = Duration::from_secs_f64(secs);
                }
                "solvers" => {
                    solvers = value
                        .split(',')
                        .map(|t| t.trim().parse::<SolverKind>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| err(e))?;
                }
                "seed" => {
                    seed = value.parse().map_err(|e| err(format!("seed: {e}")))?;
                }
                "out" => {
                    out = PathBuf::from(value);
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        if maps.is_empty() {
            return Err(BenchError::Config {
                line: 0,
                reason: "at least one map line is required".into(),
            });
        }
        Ok(BenchConfig {
            maps,
            agent_counts,
            instances_per_count,
            timeout,
            solvers,
            seed,
            out,
        })
    }
}

/// One benchmark cell result. `soc` is empty unless solved; `error` rows
/// mark harness-level failures (for example scenario exhaustion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub map: String,
    pub k: usize,
    pub instance: usize,
    pub solver: String,
    pub status: String,
    pub soc: Option<usize>,
    pub time_s: f64,
    pub vars: usize,
    pub clauses: usize,
    pub sat_calls: usize,
    pub iterations: usize,
}

impl BenchRecord {
    fn from_outcome(
        map: &str,
        k: usize,
        instance: usize,
        solver: SolverKind,
        outcome: &SolveOutcome,
    ) -> BenchRecord {
        BenchRecord {
            map: map.to_string(),
            k,
            instance,
            solver: solver.name().to_string(),
            status: outcome.status.to_string(),
            soc: outcome.stats.soc,
            time_s: outcome.stats.wall_time_s,
            vars: outcome.stats.variables,
            clauses: outcome.stats.clauses,
            sat_calls: outcome.stats.sat_calls,
            iterations: outcome.stats.iterations,
        }
    }

    fn error_row(map: &str, k: usize, instance: usize, solver: SolverKind) -> BenchRecord {
        BenchRecord {
            map: map.to_string(),
            k,
            instance,
            solver: solver.name().to_string(),
            status: "error".to_string(),
            soc: None,
            time_s: 0.0,
            vars: 0,
            clauses: 0,
            sat_calls: 0,
            iterations: 0,
        }
    }
}

/// Runs every (map, robot count, instance, solver) cell in deterministic
/// order. Instance `i` at count `k` uses scenario rows `[i * k, (i+1) * k)`
/// in file order; cells whose scenario slice cannot be built are recorded
/// as `error` rows and the run continues.
pub fn run_benchmark(
    config: &BenchConfig,
    backend: &BackendKind,
    mut progress: Option<&mut dyn Write>,
) -> Result<Vec<BenchRecord>, BenchError> {
    let mut records = Vec::new();
    for (map_path, scen_path) in &config.maps {
        let map_name = map_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| map_path.display().to_string());
        let map = GridMap::parse(&read_file(map_path)?)
            .map_err(|e| BenchError::Config {
                line: 0,
                reason: format!("{}: {e}", map_path.display()),
            })?;
        let rows = parse_scenario_rows(&read_file(scen_path)?).map_err(|e| BenchError::Config {
            line: 0,
            reason: format!("{}: {e}", scen_path.display()),
        })?;
        let grid = grid_to_graph(&map);

        for &k in &config.agent_counts {
            for i in 0..config.instances_per_count {
                let instance = instance_from_rows(&grid, &map, &rows, i * k, k);
                for &solver in &config.solvers {
                    let record = match &instance {
                        Ok(inst) => {
                            let limits = SolveLimits::with_timeout(config.timeout);
                            let outcome = run_solver(solver, inst, &limits, backend);
                            BenchRecord::from_outcome(&map_name, k, i, solver, &outcome)
                        }
                        Err(_) => BenchRecord::error_row(&map_name, k, i, solver),
                    };
                    if let Some(w) = progress.as_deref_mut() {
                        let _ = writeln!(
                            w,
                            "{} k={} i={} {}: {} soc={:?} {:.3}s",
                            record.map,
                            record.k,
                            record.instance,
                            record.solver,
                            record.status,
                            record.soc,
                            record.time_s
                        );
                    }
                    records.push(record);
                }
            }
        }
    }
    Ok(records)
}

fn read_file(path: &FsPath) -> Result<String, BenchError> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    Ok(text)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], w: W) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(w);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<BenchRecord>, BenchError> {
    let mut reader = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Success-rate table and per-solver sorted runtimes.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// (solver, k) -> (solved, total), sorted by key.
    pub success: Vec<(String, usize, usize, usize)>,
    /// solver -> runtimes of solved instances, ascending.
    pub cactus: BTreeMap<String, Vec<f64>>,
}

pub fn summarize(records: &[BenchRecord]) -> Summary {
    let solved_status = SolveStatus::Solved.to_string();
    let mut cells: BTreeMap<(String, usize), (usize, usize)> = BTreeMap::new();
    let mut cactus: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        let cell = cells.entry((r.solver.clone(), r.k)).or_insert((0, 0));
        cell.1 += 1;
        if r.status == solved_status {
            cell.0 += 1;
            cactus.entry(r.solver.clone()).or_default().push(r.time_s);
        }
    }
    for times in cactus.values_mut() {
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite runtimes"));
    }
    Summary {
        success: cells
            .into_iter()
            .map(|((solver, k), (solved, total))| (solver, k, solved, total))
            .collect(),
        cactus,
    }
}

impl Summary {
    /// `success_rates.csv`: solver,k,solved,total,rate.
    pub fn write_success_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "solver,k,solved,total,rate")?;
        for (solver, k, solved, total) in &self.success {
            let rate = if *total == 0 {
                0.0
            } else {
                *solved as f64 / *total as f64
            };
            writeln!(w, "{solver},{k},{solved},{total},{rate}")?;
        }
        Ok(())
    }

    /// gnuplot-ready two-column cactus data: rank runtime.
    pub fn write_cactus<W: Write>(&self, solver: &str, mut w: W) -> std::io::Result<()> {
        if let Some(times) = self.cactus.get(solver) {
            for (rank, t) in times.iter().enumerate() {
                writeln!(w, "{} {}", rank + 1, t)?;
            }
        }
        Ok(())
    }

    /// Writes `success_rates.csv` plus one `cactus_<solver>.dat` per
    /// solver into `dir`.
    pub fn write_to_dir(&self, dir: &FsPath) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::fs::File::create(dir.join("success_rates.csv"))?;
        self.write_success_csv(&mut f)?;
        for solver in self.cactus.keys() {
            let mut f = std::fs::File::create(dir.join(format!("cactus_{solver}.dat")))?;
            self.write_cactus(solver, &mut f)?;
        }
        Ok(())
    }
}
