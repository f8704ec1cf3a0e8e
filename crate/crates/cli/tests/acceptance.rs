//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! 1. Optimality agreement of all four solvers on 200 seeded 8x8
//!    instances, with oracle-exact SoC on a 4x4 subset.
//! 2. Validator-clean solutions everywhere in criterion 1.
//! 3. Complete-model equivalence against the joint-state oracle on an
//!    exhaustive small-graph suite, for every cost bound.
//! 4. Candidate-pool certification: after every new-paths call, the
//!    exhaustive subset biconditional holds.
//! 5. Sparsity: sparse final formulas never have more variables than
//!    SMT-CBS at the same final bounds, strictly fewer on at least half
//!    of the k >= 4 instances.
//! 6. Embedded CDCL vs external DIMACS adapter agreement on 1000 random
//!    3-CNFs plus pigeonhole formulas; models evaluate clause-true.
//! 7. Encoder clause counts match closed-form structural formulas.
//! 8. Benchmark harness end-to-end: schema-exact CSV, success table,
//!    monotone cactus data, byte-identical re-run modulo time columns.

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use mrpp_core::cnf::{encode_complete, encode_paths, VarMap};
use mrpp_core::gen::random_grid_instance;
use mrpp_core::instance::{
    individual_cost, joint_bfs_oracle, sum_of_costs, validate_solution, Conflict, Graph, Instance,
    Solution,
};
use mrpp_core::mdd::Mdd;
use mrpp_core::pathgen::{conflict_aware_astar, feasible};
use mrpp_core::sat::{BackendKind, SatBackend, SatOutcome};
use mrpp_core::solvers::{
    run_solver, solve_sparse_smt_cbs_with_inspector, SolveLimits, SolveOutcome, SolverKind,
    SparseInspector,
};

const AGREEMENT_TIMEOUT: Duration = Duration::from_secs(30);

/// One criterion-1 cell: the four outcomes for one instance.
struct Cell {
    key: (usize, u64), // (k, seed)
    instance: Instance,
    outcomes: HashMap<SolverKind, SolveOutcome>,
}

struct Suite {
    eight: Vec<Cell>,
    four: Vec<Cell>,
}

fn suite() -> &'static Suite {
    static SUITE: OnceLock<Suite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let limits = SolveLimits::with_timeout(AGREEMENT_TIMEOUT);
        let run_cell = |w: usize, h: usize, k: usize, seed: u64| -> Option<Cell> {
            let gen = random_grid_instance(seed, w, h, 0.1, k)?;
            let mut outcomes = HashMap::new();
            for kind in SolverKind::ALL {
                outcomes.insert(
                    kind,
                    run_solver(kind, &gen.instance, &limits, &BackendKind::Embedded),
                );
            }
            Some(Cell {
                key: (k, seed),
                instance: gen.instance,
                outcomes,
            })
        };
        // 200 instances: 8x8, k in {2..6}, 40 seeds each
        let mut eight = Vec::new();
        for (ki, k) in [2usize, 3, 4, 5, 6].into_iter().enumerate() {
            let mut produced = 0;
            let mut seed = 1000 * ki as u64;
            while produced < 40 {
                if let Some(cell) = run_cell(8, 8, k, seed) {
                    eight.push(cell);
                    produced += 1;
                }
                seed += 1;
            }
        }
        // 4x4 oracle subset: k in {2, 3}, 20 seeds each
        let mut four = Vec::new();
        for (ki, k) in [2usize, 3].into_iter().enumerate() {
            let mut produced = 0;
            let mut seed = 7000 * (ki as u64 + 1);
            while produced < 20 {
                if let Some(cell) = run_cell(4, 4, k, seed) {
                    four.push(cell);
                    produced += 1;
                }
                seed += 1;
            }
        }
        Suite { eight, four }
    })
}

#[test]
fn criterion_1_optimality_agreement() {
    let suite = suite();
    assert_eq!(suite.eight.len(), 200);
    let mut compared = 0;
    for cell in &suite.eight {
        let socs: Vec<Option<usize>> = SolverKind::ALL
            .iter()
            .map(|kind| cell.outcomes[kind].stats.soc)
            .collect();
        if socs.iter().all(Option::is_some) {
            compared += 1;
            assert!(
                socs.windows(2).all(|w| w[0] == w[1]),
                "SoC disagreement on k={} seed={}: {socs:?}",
                cell.key.0,
                cell.key.1
            );
        }
    }
    // the instances are desk-scale; every solver should finish
    assert_eq!(compared, 200, "not all instances were solved by all four");

    for cell in &suite.four {
        let optimal = joint_bfs_oracle(&cell.instance, 64)
            .expect("oracle within state cap")
            .map(|s| sum_of_costs(&s, &cell.instance).unwrap());
        for kind in SolverKind::ALL {
            assert_eq!(
                cell.outcomes[&kind].stats.soc, optimal,
                "{kind} differs from oracle on k={} seed={}",
                cell.key.0, cell.key.1
            );
        }
    }
    println!(
        "criterion 1 (optimality agreement, {} + {} instances): PASS",
        suite.eight.len(),
        suite.four.len()
    );
}

#[test]
fn criterion_2_solution_validity() {
    let suite = suite();
    let mut checked = 0;
    for cell in suite.eight.iter().chain(&suite.four) {
        for kind in SolverKind::ALL {
            if let Some(sol) = &cell.outcomes[&kind].solution {
                assert_eq!(
                    validate_solution(&cell.instance, sol),
                    Ok(vec![]),
                    "{kind} returned a colliding solution on k={} seed={}",
                    cell.key.0,
                    cell.key.1
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
    println!("criterion 2 (solution validity, {checked} solutions): PASS");
}

/// All connected labeled graphs on exactly `n` vertices (n <= 4 here), by
/// edge-mask enumeration.
fn connected_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let mut g = Graph::new(n);
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                g.add_edge(a, b);
            }
        }
        let dist = mrpp_core::mdd::bfs_distances(&g, 0);
        if dist.iter().all(|&d| d != mrpp_core::mdd::UNREACHABLE) {
            out.push(g);
        }
    }
    out
}

/// Structured graphs on 5 and 6 vertices for the equivalence sweep.
fn structured_graphs() -> Vec<Graph> {
    let mut graphs = vec![
        Graph::path(5),
        Graph::path(6),
        Graph::cycle(5),
        Graph::cycle(6),
    ];
    // stars
    for n in [5usize, 6] {
        let mut g = Graph::new(n);
        for v in 1..n {
            g.add_edge(0, v);
        }
        graphs.push(g);
    }
    // 2x3 grid
    let mut g = Graph::new(6);
    for row in 0..2 {
        for col in 0..3 {
            let v = row * 3 + col;
            if col + 1 < 3 {
                g.add_edge(v, v + 1);
            }
            if row == 0 {
                g.add_edge(v, v + 3);
            }
        }
    }
    graphs.push(g);
    // cycle with a chord
    let mut g = Graph::cycle(6);
    g.add_edge(0, 3);
    graphs.push(g);
    graphs
}

#[test]
fn criterion_3_complete_model_equivalence() {
    let mut graphs = connected_graphs(4);
    graphs.extend(structured_graphs());
    let mut checks = 0usize;
    for graph in &graphs {
        let n = graph.vertex_count();
        let mut placements: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for s in 0..n {
            for g in 0..n {
                placements.push((vec![s], vec![g]));
            }
        }
        for s1 in 0..n {
            for s2 in 0..n {
                if s1 == s2 {
                    continue;
                }
                for g1 in 0..n {
                    for g2 in 0..n {
                        if g1 != g2 {
                            placements.push((vec![s1, s2], vec![g1, g2]));
                        }
                    }
                }
            }
        }
        for (starts, goals) in placements {
            let instance = Instance::new(graph.clone(), starts, goals).unwrap();
            let k = instance.robot_count();
            let sps: Option<Vec<usize>> = (0..k)
                .map(|r| {
                    let d =
                        mrpp_core::mdd::bfs_distances(&instance.graph, instance.start(r))
                            [instance.goal(r)];
                    (d != mrpp_core::mdd::UNREACHABLE).then_some(d as usize)
                })
                .collect();
            let Some(sps) = sps else {
                // unreachable goal: no solution at any bound
                assert_eq!(joint_bfs_oracle(&instance, 6).unwrap(), None);
                continue;
            };
            let soc_lb: usize = sps.iter().sum();
            let mu_lb = sps.iter().copied().max().unwrap_or(0);
            for soc in soc_lb..=6 {
                let delta = soc - soc_lb;
                let mu = mu_lb + delta;
                let mdds: Vec<Mdd> = (0..k)
                    .map(|r| {
                        Mdd::build(&instance.graph, r, instance.start(r), instance.goal(r), mu)
                            .unwrap()
                    })
                    .collect();
                let drefs: Vec<&Mdd> = mdds.iter().collect();
                let mut vm = VarMap::build(&drefs);
                let formula = encode_complete(&drefs, &mut vm, delta);
                let mut solver = mrpp_core::sat::CdclSolver::new();
                solver.ensure_vars(formula.num_vars());
                for c in formula.clauses() {
                    solver.add_clause(c);
                }
                let sat = matches!(solver.solve().unwrap(), SatOutcome::Sat(_));
                let oracle = joint_bfs_oracle(&instance, soc).unwrap().is_some();
                assert_eq!(
                    sat, oracle,
                    "equivalence failed: |V|={n} k={k} starts={:?} goals={:?} soc={soc}",
                    instance.starts(),
                    instance.goals()
                );
                checks += 1;
            }
        }
    }
    println!("criterion 3 (complete-model equivalence, {checks} bound checks): PASS");
}

/// Certifying inspector: after every new-paths call, for robots with at
/// most 8 conflicts, a path of cost <= horizon feasible w.r.t. a subset
/// exists iff the pool contains a feasible path for that subset.
struct Certifier<'a> {
    instance: &'a Instance,
    checks: usize,
}

impl SparseInspector for Certifier<'_> {
    fn after_new_paths(
        &mut self,
        robot: usize,
        pool: &[Vec<usize>],
        conflicts: &[Conflict],
        horizon: usize,
    ) {
        if conflicts.len() > 8 {
            return;
        }
        let n = conflicts.len();
        for mask in 0u32..(1 << n) {
            let subset: Vec<Conflict> = conflicts
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, c)| *c)
                .collect();
            let searched = conflict_aware_astar(
                &self.instance.graph,
                self.instance.start(robot),
                self.instance.goal(robot),
                &subset,
                horizon,
                horizon,
            );
            let pooled = pool.iter().any(|p| feasible(p, subset.iter(), horizon));
            assert_eq!(
                searched.is_some(),
                pooled,
                "pool certification failed: robot {robot} mask {mask:b} horizon {horizon}"
            );
            self.checks += 1;
        }
    }
}

#[test]
fn criterion_4_pool_certification() {
    let suite = suite();
    let limits = SolveLimits::with_timeout(AGREEMENT_TIMEOUT);
    let mut total_checks = 0usize;
    for cell in suite.eight.iter().chain(&suite.four) {
        let mut certifier = Certifier {
            instance: &cell.instance,
            checks: 0,
        };
        let out = solve_sparse_smt_cbs_with_inspector(
            &cell.instance,
            &limits,
            &BackendKind::Embedded,
            &mut certifier,
        );
        assert!(out.solved(), "instrumented run failed on {:?}", cell.key);
        total_checks += certifier.checks;
    }
    assert!(total_checks > 0);
    println!("criterion 4 (pool certification, {total_checks} subset checks): PASS");
}

#[test]
fn criterion_5_sparsity() {
    let suite = suite();
    let mut le = 0usize;
    let mut strict = 0usize;
    let mut total = 0usize;
    for cell in &suite.eight {
        if cell.key.0 < 4 {
            continue;
        }
        let sparse = &cell.outcomes[&SolverKind::Sparse];
        let smtcbs = &cell.outcomes[&SolverKind::SmtCbs];
        if !(sparse.solved() && smtcbs.solved()) {
            continue;
        }
        total += 1;
        let (sv, mv) = (sparse.stats.variables, smtcbs.stats.variables);
        assert!(
            sv <= mv,
            "sparse formula larger than SMT-CBS on k={} seed={}: {sv} vs {mv}",
            cell.key.0,
            cell.key.1
        );
        le += 1;
        if sv < mv {
            strict += 1;
        }
    }
    assert_eq!(le, total);
    assert!(
        strict * 2 >= total,
        "strict variable reduction on only {strict} of {total} instances"
    );
    println!(
        "criterion 5 (sparsity, {strict}/{total} strictly smaller): PASS"
    );
}

fn random_3cnf(rng: &mut ChaCha8Rng, vars: usize, clauses: usize) -> Vec<Vec<i32>> {
    let mut out = Vec::with_capacity(clauses);
    for _ in 0..clauses {
        let mut clause = Vec::with_capacity(3);
        while clause.len() < 3 {
            let v = (rng.next_u32() as usize % vars + 1) as i32;
            if clause.iter().any(|&l: &i32| l.abs() == v) {
                continue;
            }
            let sign = if rng.next_u32() & 1 == 0 { 1 } else { -1 };
            clause.push(sign * v);
        }
        out.push(clause);
    }
    out
}

fn pigeonhole(pigeons: usize, holes: usize) -> (Vec<Vec<i32>>, usize) {
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
fn criterion_6_backend_agreement() {
    let external_cmd = vec![env!("CARGO_BIN_EXE_dimacs-ref").to_string()];
    let solve_both = |clauses: &[Vec<i32>], nvars: usize, label: &str| -> (bool, bool) {
        let mut embedded = BackendKind::Embedded.new_session();
        embedded.ensure_vars(nvars);
        let mut external = BackendKind::External(external_cmd.clone()).new_session();
        external.ensure_vars(nvars);
        for c in clauses {
            embedded.add_clause(c);
            external.add_clause(c);
        }
        let e = embedded.solve().expect("embedded solve");
        let x = external.solve().expect("external solve");
        if let SatOutcome::Sat(m) = &e {
            assert!(m.satisfies(clauses), "embedded model violates {label}");
        }
        if let SatOutcome::Sat(m) = &x {
            assert!(m.satisfies(clauses), "external model violates {label}");
        }
        (e.is_sat(), x.is_sat())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut agreements = 0usize;
    let ratios = [(3.0f64, 334usize), (4.26, 333), (5.0, 333)];
    for (ratio, count) in ratios {
        let clauses_per = (50.0 * ratio).round() as usize;
        for i in 0..count {
            let clauses = random_3cnf(&mut rng, 50, clauses_per);
            let label = format!("3cnf ratio {ratio} #{i}");
            let (e, x) = solve_both(&clauses, 50, &label);
            assert_eq!(e, x, "backend verdict mismatch on {label}");
            agreements += 1;
        }
    }
    for n in 1..=6 {
        let (clauses, nvars) = pigeonhole(n + 1, n);
        let label = format!("PHP({},{n})", n + 1);
        let (e, x) = solve_both(&clauses, nvars, &label);
        assert!(!e, "PHP({},{n}) must be UNSAT", n + 1);
        assert_eq!(e, x, "backend verdict mismatch on {label}");
        agreements += 1;
    }
    println!("criterion 6 (backend agreement, {agreements} formulas): PASS");
}

/// Closed-form clause count for encode_paths, derived from diagram
/// structure alone.
fn expected_paths_clauses(diagrams: &[&Mdd]) -> usize {
    let choose2 = |n: usize| n * (n - 1) / 2;
    let mut total = 0;
    for d in diagrams {
        total += 2;
        for t in 0..d.horizon() {
            total += d.level(t).len();
            for &v in d.level(t) {
                total += choose2(d.out_degree(v, t));
            }
            total += 2 * d.edges_at(t).len();
        }
        for t in 0..=d.horizon() {
            total += choose2(d.level(t).len());
        }
    }
    total
}

/// Closed-form clause count for the complete model on top of
/// encode_paths: cost-bound triggers, chains and counter, vertex
/// exclusivity over shared nodes, and opposed-edge exclusions.
fn expected_complete_clauses(diagrams: &[&Mdd], delta: usize) -> usize {
    let choose2 = |n: usize| n * (n - 1) / 2;
    let mut total = expected_paths_clauses(diagrams);
    // cost bound
    let mut late_inputs = 0usize;
    for d in diagrams {
        let sp = d.earliest_goal_level();
        let goal = d.goal();
        for t in sp..d.horizon() {
            late_inputs += 1;
            total += d.level(t).iter().filter(|&&v| v != goal).count();
        }
        let span = d.horizon() - sp;
        total += span.saturating_sub(1); // chain clauses
    }
    // sequential counter
    total += if late_inputs <= delta {
        0
    } else if delta == 0 {
        late_inputs
    } else {
        // first block: k clauses; middle blocks: 2k + 1 each; final: 1
        delta + (late_inputs - 2) * (2 * delta + 1) + 1
    };
    // vertex exclusivity
    let mu = diagrams[0].horizon();
    for t in 0..=mu {
        let mut present: HashMap<usize, usize> = HashMap::new();
        for d in diagrams {
            for &v in d.level(t) {
                *present.entry(v).or_default() += 1;
            }
        }
        for (_, robots) in present {
            total += choose2(robots);
        }
    }
    // opposed edges
    for t in 0..mu {
        for i in 0..diagrams.len() {
            for j in i + 1..diagrams.len() {
                for &(u, v) in diagrams[i].edges_at(t) {
                    if u != v && diagrams[j].contains_edge(v, u, t) {
                        total += 1;
                    }
                }
            }
        }
    }
    total
}

#[test]
fn criterion_7_structural_clause_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut checked = 0usize;
    while checked < 50 {
        let k = 1 + (rng.next_u32() % 3) as usize;
        let seed = rng.next_u64();
        let Some(gen) = random_grid_instance(seed, 5, 5, 0.15, k) else {
            continue;
        };
        let inst = &gen.instance;
        let sps: Vec<usize> = (0..k)
            .map(|r| {
                mrpp_core::mdd::bfs_distances(&inst.graph, inst.start(r))[inst.goal(r)] as usize
            })
            .collect();
        let delta = (rng.next_u32() % 4) as usize;
        let mu = sps.iter().copied().max().unwrap_or(0) + delta;
        let mdds: Vec<Mdd> = (0..k)
            .map(|r| Mdd::build(&inst.graph, r, inst.start(r), inst.goal(r), mu).unwrap())
            .collect();
        let drefs: Vec<&Mdd> = mdds.iter().collect();

        let vm = VarMap::build(&drefs);
        let paths_formula = encode_paths(&drefs, &vm);
        assert_eq!(
            paths_formula.clause_count(),
            expected_paths_clauses(&drefs),
            "encode_paths count, seed {seed} k {k} mu {mu}"
        );

        let mut vm = VarMap::build(&drefs);
        let complete = encode_complete(&drefs, &mut vm, delta);
        assert_eq!(
            complete.clause_count(),
            expected_complete_clauses(&drefs, delta),
            "encode_complete count, seed {seed} k {k} mu {mu} delta {delta}"
        );
        checked += 1;
    }
    println!("criterion 7 (structural clause counts, {checked} diagram sets): PASS");
}

#[test]
fn criterion_8_benchmark_harness() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let raw = std::fs::read_to_string(root.join("fixtures/bench.cfg")).unwrap();
    let absolute = raw.replace("fixtures/", &format!("{}/fixtures/", root.display()));
    let config = mrpp_core::bench::BenchConfig::parse(&absolute).unwrap();
    assert_eq!(config.maps.len(), 3, "bundled config covers three maps");

    let run = || {
        let records =
            mrpp_core::bench::run_benchmark(&config, &BackendKind::Embedded, None).unwrap();
        let mut csv = Vec::new();
        mrpp_core::bench::write_csv(&records, &mut csv).unwrap();
        (records, String::from_utf8(csv).unwrap())
    };
    let (records, csv_a) = run();
    let (_, csv_b) = run();

    // schema-exact header
    assert!(csv_a.starts_with(
        "map,k,instance,solver,status,soc,time_s,vars,clauses,sat_calls,iterations\n"
    ));
    // full cartesian product of cells
    assert_eq!(
        records.len(),
        config.maps.len()
            * config.agent_counts.len()
            * config.instances_per_count
            * config.solvers.len()
    );
    // timeout enforcement with measurement slack
    for r in &records {
        assert!(
            r.time_s <= config.timeout.as_secs_f64() + 1.0,
            "cell exceeded timeout: {r:?}"
        );
    }
    // byte-identical modulo the time column
    let strip_time = |csv: &str| -> String {
        csv.lines()
            .map(|line| {
                let fields: Vec<&str> = line.split(',').collect();
                let mut fields = fields;
                if fields.len() > 6 && fields[6] != "time_s" {
                    fields[6] = "_";
                }
                fields.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_time(&csv_a), strip_time(&csv_b));

    // summary: success table and monotone cactus data
    let summary = mrpp_core::bench::summarize(&records);
    assert!(!summary.success.is_empty());
    for times in summary.cactus.values() {
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "cactus not monotone");
    }
    let dir = tempfile::tempdir().unwrap();
    summary.write_to_dir(dir.path()).unwrap();
    assert!(dir.path().join("success_rates.csv").exists());
    for solver in summary.cactus.keys() {
        assert!(dir.path().join(format!("cactus_{solver}.dat")).exists());
    }
    println!(
        "criterion 8 (benchmark harness, {} records): PASS",
        records.len()
    );
}

/// Sanity checks tying the suite together: recorded SoC equals the
/// recomputed sum of costs and never undercuts the shortest-path bound.
#[test]
fn outcome_invariants_hold_across_suite() {
    let suite = suite();
    for cell in suite.eight.iter().chain(&suite.four) {
        let lb: usize = (0..cell.instance.robot_count())
            .map(|r| {
                mrpp_core::mdd::bfs_distances(&cell.instance.graph, cell.instance.start(r))
                    [cell.instance.goal(r)] as usize
            })
            .sum();
        for kind in SolverKind::ALL {
            let out = &cell.outcomes[&kind];
            if let (Some(soc), Some(sol)) = (out.stats.soc, &out.solution) {
                assert_eq!(soc, sum_of_costs(sol, &cell.instance).unwrap());
                assert!(soc >= lb);
                for (r, p) in sol.paths.iter().enumerate() {
                    assert!(individual_cost(p, cell.instance.goal(r)).is_ok());
                }
            }
        }
    }
    println!("suite invariants (SoC bookkeeping): PASS");
}

#[test]
fn solutions_decode_from_extractable_models() {
    // spot check: a solved sparse outcome round-trips through the
    // validator as a Solution value
    let suite = suite();
    let cell = &suite.eight[0];
    let out = &cell.outcomes[&SolverKind::Sparse];
    let sol: &Solution = out.solution.as_ref().unwrap();
    assert_eq!(sol.paths.len(), cell.instance.robot_count());
    println!("suite invariants (solution shape): PASS");
}
