//! `mrpp`: solve single instances, run benchmark batches, and summarize
//! results into success-rate tables and cactus data.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use mrpp_core::bench::{read_csv, run_benchmark, summarize, write_csv, BenchConfig};
use mrpp_core::instance::{parse_scenario, GridMap};
use mrpp_core::sat::BackendKind;
use mrpp_core::solvers::{run_solver, SolveLimits, SolveStatus, SolverKind};

#[derive(Parser)]
#[command(name = "mrpp", about = "Optimal multi-robot path planning solver suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the outcome record.
    Solve {
        /// movingai .map file
        #[arg(long)]
        map: PathBuf,
        /// movingai .scen file
        #[arg(long)]
        scen: PathBuf,
        /// number of robots (first K scenario rows)
        #[arg(long)]
        agents: usize,
        /// cbs | mddsat | smtcbs | sparse
        #[arg(long, default_value = "sparse")]
        solver: SolverKind,
        /// wall-clock timeout in seconds
        #[arg(long, default_value_t = 128.0)]
        timeout: f64,
        /// external SAT solver command (overrides MRPP_SAT_CMD); the CNF
        /// path is appended as the final argument
        #[arg(long)]
        sat_cmd: Option<String>,
        /// write the solution as `robot <i>: v0 v1 ...` lines
        #[arg(long)]
        solution_out: Option<PathBuf>,
    },
    /// Run a benchmark batch from a key=value config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// external SAT solver command (overrides MRPP_SAT_CMD)
        #[arg(long)]
        sat_cmd: Option<String>,
    },
    /// Summarize a benchmark CSV into success rates and cactus data.
    Summarize {
        /// input CSV produced by `bench`
        #[arg(long = "in")]
        input: PathBuf,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn backend_from(sat_cmd: Option<String>) -> Result<BackendKind> {
    let cmd = sat_cmd.or_else(|| std::env::var("MRPP_SAT_CMD").ok());
    match cmd {
        None => Ok(BackendKind::Embedded),
        Some(text) => {
            let tokens: Vec<String> = text.split_whitespace().map(String::from).collect();
            anyhow::ensure!(!tokens.is_empty(), "empty SAT command");
            Ok(BackendKind::External(tokens))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            map,
            scen,
            agents,
            solver,
            timeout,
            sat_cmd,
            solution_out,
        } => {
            let map_text = std::fs::read_to_string(&map)
                .with_context(|| format!("reading {}", map.display()))?;
            let scen_text = std::fs::read_to_string(&scen)
                .with_context(|| format!("reading {}", scen.display()))?;
            let grid = GridMap::parse(&map_text).context("parsing map")?;
            let instance = parse_scenario(&scen_text, &grid, agents).context("building instance")?;
            let backend = backend_from(sat_cmd)?;
            anyhow::ensure!(timeout > 0.0, "timeout must be positive");
            let limits = SolveLimits::with_timeout(Duration::from_secs_f64(timeout));

            let outcome = run_solver(solver, &instance, &limits, &backend);
            let s = &outcome.stats;
            println!(
                "solver={solver} status={} soc={} makespan={} time_s={:.3} vars={} clauses={} \
                 sat_calls={} iterations={} collisions={} paths={}",
                outcome.status,
                s.soc.map_or("-".into(), |v| v.to_string()),
                s.makespan.map_or("-".into(), |v| v.to_string()),
                s.wall_time_s,
                s.variables,
                s.clauses,
                s.sat_calls,
                s.iterations,
                s.collisions_refined,
                s.paths_generated,
            );
            if let Some(diag) = &s.diagnostic {
                println!("diagnostic: {diag}");
            }
            if let (Some(path), Some(solution)) = (&solution_out, &outcome.solution) {
                let mut f = std::fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))?;
                for (r, p) in solution.paths.iter().enumerate() {
                    let verts: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                    writeln!(f, "robot {r}: {}", verts.join(" "))?;
                }
            }
            Ok(match outcome.status {
                SolveStatus::Solved => ExitCode::SUCCESS,
                SolveStatus::Timeout => ExitCode::from(2),
                SolveStatus::ResourceCap => ExitCode::from(1),
            })
        }
        Command::Bench { config, sat_cmd } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = BenchConfig::parse(&text).context("parsing config")?;
            let backend = backend_from(sat_cmd)?;
            let mut stderr = std::io::stderr();
            let records = run_benchmark(&cfg, &backend, Some(&mut stderr))?;
            if let Some(dir) = cfg.out.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            let file = std::fs::File::create(&cfg.out)
                .with_context(|| format!("creating {}", cfg.out.display()))?;
            write_csv(&records, file)?;
            println!("wrote {} records to {}", records.len(), cfg.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { input, out } => {
            let file = std::fs::File::open(&input)
                .with_context(|| format!("opening {}", input.display()))?;
            let records = read_csv(file)?;
            let summary = summarize(&records);
            summary.write_to_dir(&out)?;
            println!(
                "wrote success_rates.csv and {} cactus file(s) to {}",
                summary.cactus.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
