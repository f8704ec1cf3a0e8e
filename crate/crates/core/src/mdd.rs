//! Time expansion of the planning graph: per-robot MDDs (all candidate
//! paths within a cost bound) and sparse MDDs (the union of an explicit
//! candidate path set), plus incremental path insertion.
//!
//! Both diagrams are leveled DAGs over time-expanded nodes `v^t`. Level 0
//! holds only the start, level mu only the goal, and every node lies on
//! some root-to-sink walk. Edges connect consecutive levels and are either
//! graph edges or waits (u^t -> u^{t+1}).

use thiserror::Error;

use crate::instance::{individual_cost, Graph, Path, Robot, Vertex};

/// Distance sentinel for unreachable vertices.
pub const UNREACHABLE: u32 = u32::MAX;

/// Exact unweighted shortest-path distances from `source`.
pub fn bfs_distances(graph: &Graph, source: Vertex) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; graph.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        for &w in graph.neighbors(v) {
            if dist[w] == UNREACHABLE {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// One shortest path from `start` to `goal`, deterministic (lowest-id
/// predecessor wins). `None` if unreachable.
pub fn shortest_path(graph: &Graph, start: Vertex, goal: Vertex) -> Option<Path> {
    let dist = bfs_distances(graph, start);
    if dist[goal] == UNREACHABLE {
        return None;
    }
    let mut path = vec![goal];
    let mut cur = goal;
    while cur != start {
        let d = dist[cur];
        let prev = *graph
            .neighbors(cur)
            .iter()
            .find(|&&u| dist[u] + 1 == d)
            .expect("bfs predecessor exists");
        path.push(prev);
        cur = prev;
    }
    path.reverse();
    Some(path)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MddError {
    #[error("robot {robot}: goal {goal} unreachable from {start} within horizon {horizon}")]
    GoalUnreachable {
        robot: Robot,
        start: Vertex,
        goal: Vertex,
        horizon: usize,
    },
    #[error("robot {robot}: path of cost {cost} exceeds horizon {horizon}")]
    PathTooLong {
        robot: Robot,
        cost: usize,
        horizon: usize,
    },
    #[error("robot {robot}: path endpoints {got:?} do not match ({start}, {goal})")]
    MismatchedEndpoints {
        robot: Robot,
        got: (Vertex, Vertex),
        start: Vertex,
        goal: Vertex,
    },
    #[error("robot {robot}: no paths given")]
    EmptyPathSet { robot: Robot },
}

/// A leveled time-expanded DAG for one robot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mdd {
    robot: Robot,
    horizon: usize,
    /// levels[t]: sorted vertex ids present at timestep t, for t in [0, mu].
    levels: Vec<Vec<Vertex>>,
    /// edges[t]: sorted (u, v) pairs from level t to t + 1; u == v is a wait.
    edges: Vec<Vec<(Vertex, Vertex)>>,
}

impl Mdd {
    /// Builds the full MDD: node `v^t` is included iff
    /// dist(start, v) <= t and dist(v, goal) <= mu - t.
    pub fn build(
        graph: &Graph,
        robot: Robot,
        start: Vertex,
        goal: Vertex,
        horizon: usize,
    ) -> Result<Mdd, MddError> {
        let from_start = bfs_distances(graph, start);
        let to_goal = bfs_distances(graph, goal);
        if from_start[goal] == UNREACHABLE || from_start[goal] as usize > horizon {
            return Err(MddError::GoalUnreachable {
                robot,
                start,
                goal,
                horizon,
            });
        }
        let included = |v: Vertex, t: usize| -> bool {
            from_start[v] != UNREACHABLE
                && to_goal[v] != UNREACHABLE
                && from_start[v] as usize <= t
                && to_goal[v] as usize <= horizon - t
        };
        let mut levels = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            let level: Vec<Vertex> = (0..graph.vertex_count()).filter(|&v| included(v, t)).collect();
            levels.push(level);
        }
        let mut edges = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mut at = Vec::new();
            for &u in &levels[t] {
                let mut targets: Vec<Vertex> = graph.neighbors(u).to_vec();
                targets.push(u);
                targets.sort_unstable();
                for v in targets {
                    if included(v, t + 1) {
                        at.push((u, v));
                    }
                }
            }
            edges.push(at);
        }
        Ok(Mdd {
            robot,
            horizon,
            levels,
            edges,
        })
    }

    /// Builds a diagram that is exactly the union of the goal-padded paths'
    /// time-expanded nodes and edges.
    fn from_paths(robot: Robot, paths: &[Path], horizon: usize) -> Result<Mdd, MddError> {
        let Some(first) = paths.first() else {
            return Err(MddError::EmptyPathSet { robot });
        };
        let (start, goal) = (first[0], *first.last().unwrap());
        let mut levels: Vec<std::collections::BTreeSet<Vertex>> =
            vec![Default::default(); horizon + 1];
        let mut edges: Vec<std::collections::BTreeSet<(Vertex, Vertex)>> =
            vec![Default::default(); horizon];
        for path in paths {
            check_path(robot, path, start, goal, horizon)?;
            for t in 0..=horizon {
                levels[t].insert(position(path, t));
            }
            for t in 0..horizon {
                edges[t].insert((position(path, t), position(path, t + 1)));
            }
        }
        Ok(Mdd {
            robot,
            horizon,
            levels: levels.into_iter().map(|s| s.into_iter().collect()).collect(),
            edges: edges.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn robot(&self) -> Robot {
        self.robot
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn level(&self, t: usize) -> &[Vertex] {
        &self.levels[t]
    }

    pub fn edges_at(&self, t: usize) -> &[(Vertex, Vertex)] {
        &self.edges[t]
    }

    pub fn start(&self) -> Vertex {
        self.levels[0][0]
    }

    pub fn goal(&self) -> Vertex {
        self.levels[self.horizon][0]
    }

    /// Earliest level containing the goal; equals the robot's shortest-path
    /// distance for diagrams that contain a shortest path.
    pub fn earliest_goal_level(&self) -> usize {
        let goal = self.goal();
        (0..=self.horizon)
            .find(|&t| self.contains_node(goal, t))
            .expect("goal present at the sink level")
    }

    pub fn contains_node(&self, v: Vertex, t: usize) -> bool {
        t <= self.horizon && self.levels[t].binary_search(&v).is_ok()
    }

    pub fn contains_edge(&self, u: Vertex, v: Vertex, t: usize) -> bool {
        t < self.horizon && self.edges[t].binary_search(&(u, v)).is_ok()
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Out-degree of node `u^t`.
    pub fn out_degree(&self, u: Vertex, t: usize) -> usize {
        self.edges[t]
            .iter()
            .filter(|&&(a, _)| a == u)
            .count()
    }

    /// Debug dump: header `robot <i> horizon <mu>`, then one `t u v` line
    /// per edge (wait edges have u == v).
    pub fn dump(&self) -> String {
        let mut out = format!("robot {} horizon {}\n", self.robot, self.horizon);
        for (t, level_edges) in self.edges.iter().enumerate() {
            for &(u, v) in level_edges {
                out.push_str(&format!("{t} {u} {v}\n"));
            }
        }
        out
    }

    /// All root-to-sink walks, decoded as vertex sequences of length
    /// horizon + 1. Exponential; intended for small test diagrams.
    pub fn enumerate_walks(&self) -> Vec<Path> {
        let mut walks = Vec::new();
        let mut stack = vec![self.start()];
        self.walk_rec(0, &mut stack, &mut walks);
        walks
    }

    fn walk_rec(&self, t: usize, stack: &mut Vec<Vertex>, out: &mut Vec<Path>) {
        if t == self.horizon {
            out.push(stack.clone());
            return;
        }
        let u = *stack.last().unwrap();
        for &(a, b) in &self.edges[t] {
            if a == u {
                stack.push(b);
                self.walk_rec(t + 1, stack, out);
                stack.pop();
            }
        }
    }
}

fn position(path: &Path, t: usize) -> Vertex {
    if t < path.len() {
        path[t]
    } else {
        *path.last().unwrap()
    }
}

fn check_path(
    robot: Robot,
    path: &Path,
    start: Vertex,
    goal: Vertex,
    horizon: usize,
) -> Result<(), MddError> {
    if path.is_empty() || path[0] != start || *path.last().unwrap() != goal {
        return Err(MddError::MismatchedEndpoints {
            robot,
            got: (
                path.first().copied().unwrap_or(usize::MAX),
                path.last().copied().unwrap_or(usize::MAX),
            ),
            start,
            goal,
        });
    }
    let cost = individual_cost(path, goal).expect("endpoint checked");
    if cost > horizon {
        return Err(MddError::PathTooLong {
            robot,
            cost,
            horizon,
        });
    }
    Ok(())
}

/// A sparse MDD: the diagram shape of an explicit candidate path set.
///
/// Every represented path (goal-padded to the horizon) is a root-to-sink
/// walk of the diagram. The converse does not hold: the union of two paths
/// can create cross-walks that were never inserted. Such walks are still
/// valid paths within the cost bound, so soundness of the solvers is
/// unaffected; the validator-and-refine loop handles whichever walk the SAT
/// solver picks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Smdd {
    diagram: Mdd,
    paths: Vec<Path>,
}

impl Smdd {
    /// Builds the union diagram of `paths`, all sharing endpoints and each
    /// of cost at most `horizon`.
    pub fn build(robot: Robot, paths: &[Path], horizon: usize) -> Result<Smdd, MddError> {
        let diagram = Mdd::from_paths(robot, paths, horizon)?;
        Ok(Smdd {
            diagram,
            paths: dedup_paths(paths),
        })
    }

    /// Returns a diagram extended by `path`. Nodes and edges grow by
    /// exactly the path's previously-absent time-expanded nodes and edges;
    /// inserting an already-represented path is a no-op.
    pub fn insert(&self, path: &Path) -> Result<Smdd, MddError> {
        let d = &self.diagram;
        check_path(d.robot, path, d.start(), d.goal(), d.horizon)?;
        let mut next = self.clone();
        for t in 0..=d.horizon {
            let v = position(path, t);
            if let Err(pos) = next.diagram.levels[t].binary_search(&v) {
                next.diagram.levels[t].insert(pos, v);
            }
        }
        for t in 0..d.horizon {
            let e = (position(path, t), position(path, t + 1));
            if let Err(pos) = next.diagram.edges[t].binary_search(&e) {
                next.diagram.edges[t].insert(pos, e);
            }
        }
        if !next.paths.contains(path) {
            next.paths.push(path.clone());
        }
        Ok(next)
    }

    pub fn diagram(&self) -> &Mdd {
        &self.diagram
    }

    /// The represented path set, in insertion order.
    pub fn paths(&self) -> &[Path] {
        &self.paths
    }
}

fn dedup_paths(paths: &[Path]) -> Vec<Path> {
    let mut out: Vec<Path> = Vec::with_capacity(paths.len());
    for p in paths {
        if !out.contains(p) {
            out.push(p.clone());
        }
    }
    out
}
