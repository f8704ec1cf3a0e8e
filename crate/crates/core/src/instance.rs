//! Problem representation: graphs, grid maps, movingai parsing, solution
//! validation, cost accounting, and a brute-force optimality oracle.
//!
//! An instance is a tuple of an undirected graph, a robot count, and
//! injective start/goal configurations. Solutions are per-robot timed vertex
//! sequences; when robots finish early their paths are conceptually padded
//! with goal-stays, so a parked robot still blocks its goal vertex.

use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

pub type Vertex = usize;
pub type Robot = usize;

/// A timed vertex sequence, one entry per timestep starting at t = 0.
/// Consecutive entries are either equal (wait) or adjacent in the graph.
pub type Path = Vec<Vertex>;

/// Cell characters accepted as passable in movingai maps.
const PASSABLE_CHARS: &[char] = &['.', 'G', 'S'];
/// Cell characters accepted as blocked in movingai maps.
const BLOCKED_CHARS: &[char] = &['@', 'O', 'T', 'W'];

/// Undirected graph with dense vertex ids and symmetric adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<Vertex>>,
}

impl Graph {
    pub fn new(vertex_count: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); vertex_count],
        }
    }

    /// Adds the undirected edge {u, v}. Self-loops are rejected; duplicate
    /// insertions are ignored.
    pub fn add_edge(&mut self, u: Vertex, v: Vertex) {
        assert!(u != v, "self-loop {u}");
        assert!(u < self.vertex_count() && v < self.vertex_count());
        if !self.has_edge(u, v) {
            let pos_u = self.adjacency[u].partition_point(|&w| w < v);
            self.adjacency[u].insert(pos_u, v);
            let pos_v = self.adjacency[v].partition_point(|&w| w < u);
            self.adjacency[v].insert(pos_v, u);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Neighbors of `v` in ascending order.
    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Builds a path graph v0 - v1 - ... - v(n-1). Test and demo helper.
    pub fn path(n: usize) -> Self {
        let mut g = Graph::new(n);
        for v in 1..n {
            g.add_edge(v - 1, v);
        }
        g
    }

    /// Builds a cycle graph on n >= 3 vertices. Test and demo helper.
    pub fn cycle(n: usize) -> Self {
        let mut g = Graph::path(n);
        g.add_edge(n - 1, 0);
        g
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapParseError {
    #[error("malformed header: expected `{expected}` on line {line}")]
    Header { line: usize, expected: &'static str },
    #[error("row {row} has length {got}, expected width {want}")]
    RowLength { row: usize, got: usize, want: usize },
    #[error("expected {want} rows, got {got}")]
    RowCount { got: usize, want: usize },
    #[error("unknown cell character {ch:?} at row {row}, column {col}")]
    UnknownCell { ch: char, row: usize, col: usize },
}

/// A rectangular grid of passable/blocked cells, the benchmark
/// instantiation of the planning graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    passable: Vec<bool>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, passable: Vec<bool>) -> Self {
        assert_eq!(width * height, passable.len());
        GridMap {
            width,
            height,
            passable,
        }
    }

    /// Parses the movingai `.map` format: four header lines
    /// (`type ...`, `height H`, `width W`, `map`) followed by H rows of W
    /// cell characters.
    pub fn parse(text: &str) -> Result<Self, MapParseError> {
        let mut lines = text.lines();
        let mut header = |line: usize, key: &'static str| -> Result<String, MapParseError> {
            let raw = lines
                .next()
                .ok_or(MapParseError::Header { line, expected: key })?;
            let raw = raw.trim();
            if key == "map" {
                if raw != "map" {
                    return Err(MapParseError::Header { line, expected: key });
                }
                return Ok(String::new());
            }
            match raw.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.trim().to_string()),
                _ => Err(MapParseError::Header { line, expected: key }),
            }
        };
        header(1, "type")?;
        let height: usize = header(2, "height")?
            .parse()
            .map_err(|_| MapParseError::Header {
                line: 2,
                expected: "height",
            })?;
        let width: usize = header(3, "width")?
            .parse()
            .map_err(|_| MapParseError::Header {
                line: 3,
                expected: "width",
            })?;
        header(4, "map")?;

        let mut passable = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (row, line) in lines.enumerate() {
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() && row >= height {
                continue; // trailing blank lines
            }
            let cells: Vec<char> = line.chars().collect();
            if cells.len() != width {
                return Err(MapParseError::RowLength {
                    row,
                    got: cells.len(),
                    want: width,
                });
            }
            for (col, &ch) in cells.iter().enumerate() {
                if PASSABLE_CHARS.contains(&ch) {
                    passable.push(true);
                } else if BLOCKED_CHARS.contains(&ch) {
                    passable.push(false);
                } else {
                    return Err(MapParseError::UnknownCell { ch, row, col });
                }
            }
            rows += 1;
        }
        if rows != height {
            return Err(MapParseError::RowCount {
                got: rows,
                want: height,
            });
        }
        Ok(GridMap::new(width, height, passable))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn in_bounds(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height
    }

    pub fn is_passable(&self, x: usize, y: usize) -> bool {
        self.in_bounds(x, y) && self.passable[y * self.width + x]
    }

    pub fn passable_count(&self) -> usize {
        self.passable.iter().filter(|&&p| p).count()
    }
}

/// A grid map lowered to a [`Graph`], with the cell <-> vertex mapping.
/// One vertex per passable cell; edges between orthogonally adjacent
/// passable cells only.
#[derive(Debug, Clone)]
pub struct GridGraph {
    pub graph: Graph,
    vertex_of_cell: Vec<Option<Vertex>>,
    cell_of_vertex: Vec<(usize, usize)>,
    width: usize,
}

impl GridGraph {
    pub fn vertex_at(&self, x: usize, y: usize) -> Option<Vertex> {
        self.vertex_of_cell.get(y * self.width + x).copied().flatten()
    }

    /// Cell coordinates (x, y) of a vertex.
    pub fn cell_of(&self, v: Vertex) -> (usize, usize) {
        self.cell_of_vertex[v]
    }
}

/// Lowers a grid map to its 4-connected graph. Vertices are numbered in
/// row-major cell order, so ids are stable across calls.
pub fn grid_to_graph(map: &GridMap) -> GridGraph {
    let (w, h) = (map.width(), map.height());
    let mut vertex_of_cell = vec![None; w * h];
    let mut cell_of_vertex = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if map.is_passable(x, y) {
                vertex_of_cell[y * w + x] = Some(cell_of_vertex.len());
                cell_of_vertex.push((x, y));
            }
        }
    }
    let mut graph = Graph::new(cell_of_vertex.len());
    for y in 0..h {
        for x in 0..w {
            let Some(v) = vertex_of_cell[y * w + x] else {
                continue;
            };
            if x + 1 < w {
                if let Some(u) = vertex_of_cell[y * w + x + 1] {
                    graph.add_edge(v, u);
                }
            }
            if y + 1 < h {
                if let Some(u) = vertex_of_cell[(y + 1) * w + x] {
                    graph.add_edge(v, u);
                }
            }
        }
    }
    GridGraph {
        graph,
        vertex_of_cell,
        cell_of_vertex,
        width: w,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("scenario row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error("scenario has {got} rows, need {want}")]
    TooFewRows { got: usize, want: usize },
    #[error("scenario row {row}: coordinate ({x}, {y}) out of bounds")]
    OutOfBounds { row: usize, x: usize, y: usize },
    #[error("scenario row {row}: cell ({x}, {y}) is blocked")]
    BlockedCell { row: usize, x: usize, y: usize },
    #[error("instance invalid: {0}")]
    Instance(#[from] InstanceError),
}

/// One row of a movingai `.scen` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub bucket: u32,
    pub map_name: String,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub optimal_len: f64,
}

/// Parses movingai `.scen` rows: an optional `version` line, then
/// tab-separated `bucket map width height sx sy gx gy optlen` rows.
pub fn parse_scenario_rows(text: &str) -> Result<Vec<ScenarioRow>, ScenarioError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.starts_with("version") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 9 {
            return Err(ScenarioError::Malformed {
                row: idx,
                reason: format!("expected 9 tab-separated fields, got {}", fields.len()),
            });
        }
        let num = |i: usize| -> Result<usize, ScenarioError> {
            fields[i].trim().parse().map_err(|_| ScenarioError::Malformed {
                row: idx,
                reason: format!("field {} is not an integer: {:?}", i, fields[i]),
            })
        };
        rows.push(ScenarioRow {
            bucket: num(0)? as u32,
            map_name: fields[1].to_string(),
            start: (num(4)?, num(5)?),
            goal: (num(6)?, num(7)?),
            optimal_len: fields[8].trim().parse().unwrap_or(0.0),
        });
    }
    Ok(rows)
}

/// Builds an instance from the first `k` scenario rows on `map`.
pub fn parse_scenario(text: &str, map: &GridMap, k: usize) -> Result<Instance, ScenarioError> {
    let rows = parse_scenario_rows(text)?;
    let gg = grid_to_graph(map);
    instance_from_rows(&gg, map, &rows, 0, k)
}

/// Builds an instance from scenario rows `[offset, offset + k)`.
pub fn instance_from_rows(
    gg: &GridGraph,
    map: &GridMap,
    rows: &[ScenarioRow],
    offset: usize,
    k: usize,
) -> Result<Instance, ScenarioError> {
    if rows.len() < offset + k {
        return Err(ScenarioError::TooFewRows {
            got: rows.len(),
            want: offset + k,
        });
    }
    let mut starts = Vec::with_capacity(k);
    let mut goals = Vec::with_capacity(k);
    for (i, row) in rows[offset..offset + k].iter().enumerate() {
        let row_idx = offset + i;
        for &(x, y) in [&row.start, &row.goal] {
            if !map.in_bounds(x, y) {
                return Err(ScenarioError::OutOfBounds { row: row_idx, x, y });
            }
            if !map.is_passable(x, y) {
                return Err(ScenarioError::BlockedCell { row: row_idx, x, y });
            }
        }
        starts.push(gg.vertex_at(row.start.0, row.start.1).unwrap());
        goals.push(gg.vertex_at(row.goal.0, row.goal.1).unwrap());
    }
    Ok(Instance::new(gg.graph.clone(), starts, goals)?)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("robot {0} start vertex {1} out of range")]
    StartOutOfRange(Robot, Vertex),
    #[error("robot {0} goal vertex {1} out of range")]
    GoalOutOfRange(Robot, Vertex),
    #[error("robots {0} and {1} share start vertex {2}")]
    DuplicateStart(Robot, Robot, Vertex),
    #[error("robots {0} and {1} share goal vertex {2}")]
    DuplicateGoal(Robot, Robot, Vertex),
    #[error("start/goal counts differ: {0} vs {1}")]
    CountMismatch(usize, usize),
}

/// An MRPP instance: graph plus injective start and goal configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub graph: Graph,
    starts: Vec<Vertex>,
    goals: Vec<Vertex>,
}

impl Instance {
    pub fn new(graph: Graph, starts: Vec<Vertex>, goals: Vec<Vertex>) -> Result<Self, InstanceError> {
        if starts.len() != goals.len() {
            return Err(InstanceError::CountMismatch(starts.len(), goals.len()));
        }
        let mut seen: HashMap<Vertex, Robot> = HashMap::new();
        for (r, &s) in starts.iter().enumerate() {
            if s >= graph.vertex_count() {
                return Err(InstanceError::StartOutOfRange(r, s));
            }
            if let Some(&prev) = seen.get(&s) {
                return Err(InstanceError::DuplicateStart(prev, r, s));
            }
            seen.insert(s, r);
        }
        seen.clear();
        for (r, &g) in goals.iter().enumerate() {
            if g >= graph.vertex_count() {
                return Err(InstanceError::GoalOutOfRange(r, g));
            }
            if let Some(&prev) = seen.get(&g) {
                return Err(InstanceError::DuplicateGoal(prev, r, g));
            }
            seen.insert(g, r);
        }
        Ok(Instance { graph, starts, goals })
    }

    pub fn robot_count(&self) -> usize {
        self.starts.len()
    }

    pub fn start(&self, r: Robot) -> Vertex {
        self.starts[r]
    }

    pub fn goal(&self, r: Robot) -> Vertex {
        self.goals[r]
    }

    pub fn starts(&self) -> &[Vertex] {
        &self.starts
    }

    pub fn goals(&self) -> &[Vertex] {
        &self.goals
    }
}

/// A solution: one timed path per robot. Paths may have different lengths;
/// comparisons pad shorter paths with goal-stays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub paths: Vec<Path>,
}

impl Solution {
    /// Position of robot `r` at time `t`, goal-padded past the path end.
    pub fn position(&self, r: Robot, t: usize) -> Vertex {
        let p = &self.paths[r];
        if t < p.len() {
            p[t]
        } else {
            *p.last().expect("paths are non-empty")
        }
    }

    /// Longest raw path horizon (number of timesteps, not cost).
    pub fn horizon(&self) -> usize {
        self.paths.iter().map(|p| p.len() - 1).max().unwrap_or(0)
    }
}

/// A discovered pairwise rule violation between two robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Collision {
    pub robots: (Robot, Robot),
    pub timestep: usize,
    pub kind: CollisionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CollisionKind {
    /// Both robots occupy `v` at the same timestep.
    Vertex { v: Vertex },
    /// The first robot traverses u -> v while the second traverses v -> u
    /// between `timestep` and `timestep + 1`.
    Edge { u: Vertex, v: Vertex },
}

/// A per-robot avoidance record accumulated for refinement and path
/// generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Conflict {
    pub robot: Robot,
    pub timestep: usize,
    pub kind: ConflictKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConflictKind {
    /// The robot must not occupy `v` at the timestep.
    Vertex(Vertex),
    /// The robot must not traverse u -> v between `timestep` and
    /// `timestep + 1`.
    Edge(Vertex, Vertex),
}

impl Collision {
    /// Splits a collision into its two per-robot avoidance records.
    pub fn to_conflicts(&self) -> [Conflict; 2] {
        let (ri, rj) = self.robots;
        match self.kind {
            CollisionKind::Vertex { v } => [
                Conflict {
                    robot: ri,
                    timestep: self.timestep,
                    kind: ConflictKind::Vertex(v),
                },
                Conflict {
                    robot: rj,
                    timestep: self.timestep,
                    kind: ConflictKind::Vertex(v),
                },
            ],
            CollisionKind::Edge { u, v } => [
                Conflict {
                    robot: ri,
                    timestep: self.timestep,
                    kind: ConflictKind::Edge(u, v),
                },
                Conflict {
                    robot: rj,
                    timestep: self.timestep,
                    kind: ConflictKind::Edge(v, u),
                },
            ],
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("robot {robot}: path ends at {got}, goal is {goal}")]
    WrongEndpoint { robot: Robot, got: Vertex, goal: Vertex },
    #[error("robot {robot}: empty path")]
    EmptyPath { robot: Robot },
}

/// Individual path cost: the smallest t* such that the robot sits at the
/// goal from t* on. Moves and waits before final arrival cost 1 each;
/// terminal goal-stays cost 0.
pub fn individual_cost(path: &[Vertex], goal: Vertex) -> Result<usize, CostError> {
    individual_cost_for(path, goal, 0)
}

fn individual_cost_for(path: &[Vertex], goal: Vertex, robot: Robot) -> Result<usize, CostError> {
    if path.is_empty() {
        return Err(CostError::EmptyPath { robot });
    }
    let last = *path.last().unwrap();
    if last != goal {
        return Err(CostError::WrongEndpoint {
            robot,
            got: last,
            goal,
        });
    }
    let mut t_star = path.len() - 1;
    while t_star > 0 && path[t_star - 1] == goal {
        t_star -= 1;
    }
    Ok(t_star)
}

/// Sum over robots of [`individual_cost`].
pub fn sum_of_costs(solution: &Solution, instance: &Instance) -> Result<usize, CostError> {
    let mut total = 0;
    for (r, path) in solution.paths.iter().enumerate() {
        total += individual_cost_for(path, instance.goal(r), r)?;
    }
    Ok(total)
}

/// Max over robots of the trimmed path horizon.
pub fn makespan(solution: &Solution, instance: &Instance) -> Result<usize, CostError> {
    let mut best = 0;
    for (r, path) in solution.paths.iter().enumerate() {
        best = best.max(individual_cost_for(path, instance.goal(r), r)?);
    }
    Ok(best)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructuralError {
    #[error("solution has {got} paths for {want} robots")]
    PathCount { got: usize, want: usize },
    #[error("robot {robot}: empty path")]
    EmptyPath { robot: Robot },
    #[error("robot {robot}: path starts at {got}, start is {want}")]
    WrongStart { robot: Robot, got: Vertex, want: Vertex },
    #[error("robot {robot}: path ends at {got}, goal is {want}")]
    WrongGoal { robot: Robot, got: Vertex, want: Vertex },
    #[error("robot {robot}: step {t}: {from} -> {to} is not a wait or graph edge")]
    BadStep {
        robot: Robot,
        t: usize,
        from: Vertex,
        to: Vertex,
    },
}

/// Checks MRPP rules and returns every vertex and edge collision, after
/// padding shorter paths with goal-stays. An empty list means the solution
/// is valid. Structural violations (broken adjacency, wrong endpoints) are
/// errors, not collisions.
pub fn validate_solution(
    instance: &Instance,
    solution: &Solution,
) -> Result<Vec<Collision>, StructuralError> {
    let k = instance.robot_count();
    if solution.paths.len() != k {
        return Err(StructuralError::PathCount {
            got: solution.paths.len(),
            want: k,
        });
    }
    for (r, path) in solution.paths.iter().enumerate() {
        if path.is_empty() {
            return Err(StructuralError::EmptyPath { robot: r });
        }
        if path[0] != instance.start(r) {
            return Err(StructuralError::WrongStart {
                robot: r,
                got: path[0],
                want: instance.start(r),
            });
        }
        if *path.last().unwrap() != instance.goal(r) {
            return Err(StructuralError::WrongGoal {
                robot: r,
                got: *path.last().unwrap(),
                want: instance.goal(r),
            });
        }
        for t in 0..path.len() - 1 {
            let (from, to) = (path[t], path[t + 1]);
            if from != to && !instance.graph.has_edge(from, to) {
                return Err(StructuralError::BadStep {
                    robot: r,
                    t,
                    from,
                    to,
                });
            }
        }
    }

    let horizon = solution.horizon();
    let mut collisions = Vec::new();
    for t in 0..=horizon {
        for i in 0..k {
            for j in i + 1..k {
                let (pi, pj) = (solution.position(i, t), solution.position(j, t));
                if pi == pj {
                    collisions.push(Collision {
                        robots: (i, j),
                        timestep: t,
                        kind: CollisionKind::Vertex { v: pi },
                    });
                }
                if t < horizon {
                    let (ni, nj) = (solution.position(i, t + 1), solution.position(j, t + 1));
                    if pi != ni && pi == nj && pj == ni {
                        collisions.push(Collision {
                            robots: (i, j),
                            timestep: t,
                            kind: CollisionKind::Edge { u: pi, v: ni },
                        });
                    }
                }
            }
        }
    }
    Ok(collisions)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("joint state space exceeded cap of {0} states")]
    StateCapExceeded(usize),
}

const ORACLE_DEFAULT_STATE_CAP: usize = 4_000_000;

/// Brute-force sum-of-costs-optimal solver over joint configurations.
///
/// Dijkstra over states (positions, parked mask) where a step costs one per
/// robot that has not yet finally parked at its goal. A robot standing on
/// its goal may commit to parking, after which it never moves and incurs no
/// further cost; this makes the path cost of every robot exactly its final
/// arrival time. Returns `None` when no solution exists within `soc_limit`.
///
/// Intended for small instances (k <= 3, |V| <= ~20); the state cap guards
/// against misuse.
pub fn joint_bfs_oracle(
    instance: &Instance,
    soc_limit: usize,
) -> Result<Option<Solution>, OracleError> {
    joint_bfs_oracle_capped(instance, soc_limit, ORACLE_DEFAULT_STATE_CAP)
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct JointState {
    positions: Vec<Vertex>,
    parked: u32,
}

pub fn joint_bfs_oracle_capped(
    instance: &Instance,
    soc_limit: usize,
    state_cap: usize,
) -> Result<Option<Solution>, OracleError> {
    let k = instance.robot_count();
    assert!(k <= 16, "oracle supports at most 16 robots");
    let full: u32 = if k == 0 { 0 } else { (1 << k) - 1 };

    // Interned states: id -> (state, parent id, parent positions implicit).
    let mut ids: HashMap<JointState, usize> = HashMap::new();
    let mut states: Vec<JointState> = Vec::new();
    let mut dist: Vec<usize> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut heap: BinaryHeap<std::cmp::Reverse<(usize, usize)>> = BinaryHeap::new();

    let intern = |s: JointState,
                      d: usize,
                      p: Option<usize>,
                      ids: &mut HashMap<JointState, usize>,
                      states: &mut Vec<JointState>,
                      dist: &mut Vec<usize>,
                      parent: &mut Vec<Option<usize>>|
     -> Option<usize> {
        match ids.get(&s) {
            Some(&id) => {
                if d < dist[id] {
                    dist[id] = d;
                    parent[id] = p;
                    Some(id)
                } else {
                    None
                }
            }
            None => {
                let id = states.len();
                ids.insert(s.clone(), id);
                states.push(s);
                dist.push(d);
                parent.push(p);
                Some(id)
            }
        }
    };

    // Seed with every park-commitment subset available at t = 0.
    let start_positions: Vec<Vertex> = instance.starts().to_vec();
    let eligible0: Vec<Robot> = (0..k)
        .filter(|&r| start_positions[r] == instance.goal(r))
        .collect();
    for flip in park_subsets(&eligible0) {
        let s = JointState {
            positions: start_positions.clone(),
            parked: flip,
        };
        if let Some(id) = intern(s, 0, None, &mut ids, &mut states, &mut dist, &mut parent) {
            heap.push(std::cmp::Reverse((0, id)));
        }
    }

    while let Some(std::cmp::Reverse((d, id))) = heap.pop() {
        if d > dist[id] {
            continue;
        }
        let state = states[id].clone();
        if state.parked == full {
            return Ok(Some(reconstruct(instance, &states, &parent, id)));
        }
        if d >= soc_limit {
            continue; // any outgoing step would exceed the limit
        }
        let unparked: Vec<Robot> = (0..k).filter(|&r| state.parked & (1 << r) == 0).collect();
        let step_cost = unparked.len();
        if d + step_cost > soc_limit {
            continue;
        }

        // Candidate moves per unparked robot: wait or step to a neighbor.
        let choices: Vec<Vec<Vertex>> = unparked
            .iter()
            .map(|&r| {
                let v = state.positions[r];
                let mut c = vec![v];
                c.extend_from_slice(instance.graph.neighbors(v));
                c
            })
            .collect();

        let mut pick = vec![0usize; unparked.len()];
        'joint: loop {
            let mut next_positions = state.positions.clone();
            for (slot, &r) in unparked.iter().enumerate() {
                next_positions[r] = choices[slot][pick[slot]];
            }
            if joint_move_ok(&state.positions, &next_positions) {
                let eligible: Vec<Robot> = unparked
                    .iter()
                    .copied()
                    .filter(|&r| next_positions[r] == instance.goal(r))
                    .collect();
                for flip in park_subsets(&eligible) {
                    let s = JointState {
                        positions: next_positions.clone(),
                        parked: state.parked | flip,
                    };
                    if states.len() >= state_cap {
                        return Err(OracleError::StateCapExceeded(state_cap));
                    }
                    if let Some(nid) = intern(
                        s,
                        d + step_cost,
                        Some(id),
                        &mut ids,
                        &mut states,
                        &mut dist,
                        &mut parent,
                    ) {
                        heap.push(std::cmp::Reverse((d + step_cost, nid)));
                    }
                }
            }
            // advance the mixed-radix counter
            for slot in 0..unparked.len() {
                pick[slot] += 1;
                if pick[slot] < choices[slot].len() {
                    continue 'joint;
                }
                pick[slot] = 0;
            }
            break;
        }
    }
    Ok(None)
}

/// All bitmasks over the given robot ids (the choice of who commits to
/// parking this step).
fn park_subsets(eligible: &[Robot]) -> Vec<u32> {
    let mut out = Vec::with_capacity(1 << eligible.len());
    for bits in 0..(1u32 << eligible.len()) {
        let mut mask = 0;
        for (i, &r) in eligible.iter().enumerate() {
            if bits & (1 << i) != 0 {
                mask |= 1 << r;
            }
        }
        out.push(mask);
    }
    out
}

fn joint_move_ok(from: &[Vertex], to: &[Vertex]) -> bool {
    let k = from.len();
    for i in 0..k {
        for j in i + 1..k {
            if to[i] == to[j] {
                return false;
            }
            if from[i] != to[i] && to[i] == from[j] && to[j] == from[i] {
                return false;
            }
        }
    }
    true
}

fn reconstruct(
    instance: &Instance,
    states: &[JointState],
    parent: &[Option<usize>],
    mut id: usize,
) -> Solution {
    let mut chain = vec![id];
    while let Some(p) = parent[id] {
        chain.push(p);
        id = p;
    }
    chain.reverse();
    let k = instance.robot_count();
    let mut paths: Vec<Path> = vec![Vec::with_capacity(chain.len()); k];
    for &sid in &chain {
        for r in 0..k {
            paths[r].push(states[sid].positions[r]);
        }
    }
    // trim terminal goal-stays
    for (r, path) in paths.iter_mut().enumerate() {
        let goal = instance.goal(r);
        while path.len() > 1 && path[path.len() - 1] == goal && path[path.len() - 2] == goal {
            path.pop();
        }
    }
    Solution { paths }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_map(text: &str) -> GridMap {
        GridMap::parse(text).unwrap()
    }

    #[test]
    fn parse_map_uniform() {
        let m = tiny_map("type octile\nheight 2\nwidth 2\nmap\n..\n..\n");
        assert_eq!(m.passable_count(), 4);
    }

    #[test]
    fn parse_map_one_blocked() {
        let m = tiny_map("type octile\nheight 2\nwidth 2\nmap\n.@\n..\n");
        assert_eq!(m.passable_count(), 3);
        assert!(!m.is_passable(1, 0));
    }

    #[test]
    fn parse_map_row_count_mismatch() {
        let r = GridMap::parse("type octile\nheight 2\nwidth 2\nmap\n..\n..\n..\n");
        assert!(matches!(r, Err(MapParseError::RowLength { .. }) | Err(MapParseError::RowCount { .. })));
        let r = GridMap::parse("type octile\nheight 3\nwidth 2\nmap\n..\n..\n");
        assert_eq!(r, Err(MapParseError::RowCount { got: 2, want: 3 }));
    }

    #[test]
    fn parse_map_bad_header_and_cells() {
        assert!(matches!(
            GridMap::parse("height 2\nwidth 2\nmap\n..\n..\n"),
            Err(MapParseError::Header { .. })
        ));
        assert!(matches!(
            GridMap::parse("type octile\nheight 1\nwidth 2\nmap\n.x\n"),
            Err(MapParseError::UnknownCell { ch: 'x', .. })
        ));
        // all documented passable/blocked characters are accepted
        let m = tiny_map("type octile\nheight 2\nwidth 4\nmap\n.GS.\n@OTW\n");
        assert_eq!(m.passable_count(), 4);
    }

    #[test]
    fn grid_to_graph_path_row() {
        let m = tiny_map("type octile\nheight 1\nwidth 3\nmap\n...\n");
        let gg = grid_to_graph(&m);
        assert_eq!(gg.graph.vertex_count(), 3);
        assert_eq!(gg.graph.edge_count(), 2);
        assert!(gg.graph.has_edge(0, 1));
        assert!(gg.graph.has_edge(1, 2));
        assert!(!gg.graph.has_edge(0, 2));
    }

    #[test]
    fn grid_to_graph_3x3_counts() {
        // 2 * 3 * 2 = 12 orthogonal edges on a full 3x3 grid
        let m = tiny_map("type octile\nheight 3\nwidth 3\nmap\n...\n...\n...\n");
        let gg = grid_to_graph(&m);
        assert_eq!(gg.graph.vertex_count(), 9);
        assert_eq!(gg.graph.edge_count(), 12);
    }

    #[test]
    fn grid_to_graph_blocked_corner() {
        let m = tiny_map("type octile\nheight 2\nwidth 2\nmap\n.@\n..\n");
        let gg = grid_to_graph(&m);
        assert_eq!(gg.graph.vertex_count(), 3);
        assert_eq!(gg.graph.edge_count(), 2);
    }

    const SCEN_2: &str = "version 1\n\
        0\ttiny.map\t2\t2\t0\t0\t1\t1\t2\n\
        0\ttiny.map\t2\t2\t1\t0\t0\t1\t2\n";

    #[test]
    fn parse_scenario_two_rows() {
        let m = tiny_map("type octile\nheight 2\nwidth 2\nmap\n..\n..\n");
        let inst = parse_scenario(SCEN_2, &m, 2).unwrap();
        assert_eq!(inst.robot_count(), 2);
        assert_eq!(inst.start(0), 0);
        assert_eq!(inst.goal(0), 3);
    }

    #[test]
    fn parse_scenario_too_few_rows() {
        let m = tiny_map("type octile\nheight 2\nwidth 2\nmap\n..\n..\n");
        assert_eq!(
            parse_scenario(SCEN_2, &m, 5),
            Err(ScenarioError::TooFewRows { got: 2, want: 5 })
        );
    }

    #[test]
    fn parse_scenario_blocked_goal() {
        let m = tiny_map("type octile\nheight 2\nwidth 2\nmap\n..\n.@\n");
        assert_eq!(
            parse_scenario(SCEN_2, &m, 2),
            Err(ScenarioError::BlockedCell { row: 0, x: 1, y: 1 })
        );
    }

    #[test]
    fn individual_cost_moves_and_waits() {
        // two moves
        assert_eq!(individual_cost(&[1, 2, 3], 3), Ok(2));
        // a wait before arrival costs 1
        assert_eq!(individual_cost(&[1, 1, 2], 2), Ok(2));
        // terminal goal-stays are free
        assert_eq!(individual_cost(&[1, 2, 2, 2], 2), Ok(1));
        // leaving and re-entering the goal charges everything up to final arrival
        assert_eq!(individual_cost(&[1, 2, 1, 2], 2), Ok(3));
        assert!(matches!(
            individual_cost(&[1, 2], 3),
            Err(CostError::WrongEndpoint { .. })
        ));
    }

    fn p3_instance() -> Instance {
        Instance::new(Graph::path(3), vec![0], vec![2]).unwrap()
    }

    #[test]
    fn sum_of_costs_and_makespan() {
        let g = Graph::path(4);
        let inst = Instance::new(g, vec![0, 3], vec![2, 1]).unwrap();
        let sol = Solution {
            paths: vec![vec![0, 1, 2], vec![3, 3, 2, 1]],
        };
        assert_eq!(sum_of_costs(&sol, &inst), Ok(5));
        assert_eq!(makespan(&sol, &inst), Ok(3));
    }

    #[test]
    fn sum_of_costs_identity() {
        let g = Graph::path(2);
        let inst = Instance::new(g, vec![0, 1], vec![0, 1]).unwrap();
        let sol = Solution {
            paths: vec![vec![0], vec![1]],
        };
        assert_eq!(sum_of_costs(&sol, &inst), Ok(0));
        assert_eq!(makespan(&sol, &inst), Ok(0));
    }

    /// Two crossing robots on a 3x3 grid, each with cost-4 candidate paths.
    fn crossing_instance() -> Instance {
        let m = tiny_map("type octile\nheight 3\nwidth 3\nmap\n...\n...\n...\n");
        let gg = grid_to_graph(&m);
        Instance::new(gg.graph, vec![0, 2], vec![8, 6]).unwrap()
    }

    #[test]
    fn sum_of_costs_crossing_paths() {
        let inst = crossing_instance();
        let sol = Solution {
            paths: vec![vec![0, 1, 4, 7, 8], vec![2, 5, 8, 7, 6]],
        };
        // both candidate paths cost 4, but they collide; cost accounting
        // does not care
        assert_eq!(sum_of_costs(&sol, &inst), Ok(8));
    }

    #[test]
    fn validate_single_robot_clean() {
        let inst = p3_instance();
        let sol = Solution {
            paths: vec![vec![0, 1, 2]],
        };
        assert_eq!(validate_solution(&inst, &sol), Ok(vec![]));
    }

    #[test]
    fn validate_vertex_collision() {
        let inst = crossing_instance();
        let sol = Solution {
            paths: vec![vec![0, 1, 4, 7, 8], vec![2, 5, 4, 3, 6]],
        };
        let collisions = validate_solution(&inst, &sol).unwrap();
        assert_eq!(
            collisions,
            vec![Collision {
                robots: (0, 1),
                timestep: 2,
                kind: CollisionKind::Vertex { v: 4 },
            }]
        );
    }

    #[test]
    fn validate_edge_swap() {
        let g = Graph::path(2);
        let inst = Instance::new(g, vec![0, 1], vec![1, 0]).unwrap();
        let sol = Solution {
            paths: vec![vec![0, 1], vec![1, 0]],
        };
        let collisions = validate_solution(&inst, &sol).unwrap();
        assert_eq!(
            collisions,
            vec![Collision {
                robots: (0, 1),
                timestep: 0,
                kind: CollisionKind::Edge { u: 0, v: 1 },
            }]
        );
    }

    #[test]
    fn validate_structural_errors() {
        let inst = p3_instance();
        // non-adjacent jump
        let sol = Solution {
            paths: vec![vec![0, 2]],
        };
        assert!(matches!(
            validate_solution(&inst, &sol),
            Err(StructuralError::BadStep { .. })
        ));
        // wrong endpoint
        let sol = Solution {
            paths: vec![vec![0, 1]],
        };
        assert!(matches!(
            validate_solution(&inst, &sol),
            Err(StructuralError::WrongGoal { .. })
        ));
    }

    #[test]
    fn validate_padding_blocks_goal() {
        // robot 0 parks at vertex 1; robot 1 walks into it two steps later
        let g = Graph::path(3);
        let inst = Instance::new(g, vec![0, 2], vec![1, 0]).unwrap();
        let sol = Solution {
            paths: vec![vec![0, 1], vec![2, 2, 1, 0]],
        };
        let collisions = validate_solution(&inst, &sol).unwrap();
        assert_eq!(collisions.len(), 1);
        assert_eq!(
            collisions[0].kind,
            CollisionKind::Vertex { v: 1 }
        );
        assert_eq!(collisions[0].timestep, 2);
    }

    #[test]
    fn oracle_single_robot_p3() {
        let inst = p3_instance();
        let sol = joint_bfs_oracle(&inst, 10).unwrap().unwrap();
        assert_eq!(sum_of_costs(&sol, &inst), Ok(2));
    }

    #[test]
    fn oracle_swap_on_edge_unsolvable() {
        let g = Graph::path(2);
        let inst = Instance::new(g, vec![0, 1], vec![1, 0]).unwrap();
        assert_eq!(joint_bfs_oracle(&inst, 50).unwrap(), None);
    }

    #[test]
    fn oracle_cycle_swap_costs_four() {
        // two robots at opposite corners of a 4-cycle swap by rotating
        let inst = Instance::new(Graph::cycle(4), vec![0, 2], vec![2, 0]).unwrap();
        let sol = joint_bfs_oracle(&inst, 50).unwrap().unwrap();
        assert_eq!(validate_solution(&inst, &sol), Ok(vec![]));
        assert_eq!(sum_of_costs(&sol, &inst), Ok(4));
        // and it is genuinely impossible at 3
        assert_eq!(joint_bfs_oracle(&inst, 3).unwrap(), None);
    }

    #[test]
    fn oracle_respects_state_cap() {
        let inst = crossing_instance();
        assert_eq!(
            joint_bfs_oracle_capped(&inst, 64, 10),
            Err(OracleError::StateCapExceeded(10))
        );
    }

    #[test]
    fn oracle_solution_is_valid() {
        let inst = crossing_instance();
        let sol = joint_bfs_oracle(&inst, 64).unwrap().unwrap();
        assert_eq!(validate_solution(&inst, &sol), Ok(vec![]));
        assert_eq!(sum_of_costs(&sol, &inst), Ok(8));
    }

    #[test]
    fn instance_rejects_duplicate_starts() {
        let g = Graph::path(3);
        assert!(matches!(
            Instance::new(g, vec![0, 0], vec![1, 2]),
            Err(InstanceError::DuplicateStart(0, 1, 0))
        ));
    }
}
