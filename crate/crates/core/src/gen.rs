//! Seeded random grid instances for tests, benchmarks, and the demo.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::instance::{grid_to_graph, GridGraph, GridMap, Instance};
use crate::mdd::{bfs_distances, UNREACHABLE};

/// A generated instance together with its map and cell mapping.
pub struct GeneratedInstance {
    pub map: GridMap,
    pub grid: GridGraph,
    pub instance: Instance,
}

/// Uniform integer in [0, n) by rejection sampling.
fn gen_range(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as u64;
    let zone = u64::MAX - u64::MAX % n;
    loop {
        let x = rng.next_u64();
        if x < zone {
            return (x % n) as usize;
        }
    }
}

/// Deterministically generates a `width` x `height` grid with
/// `round(obstacle_fraction * cells)` blocked cells and `k` robots whose
/// starts are pairwise distinct, goals pairwise distinct, and every goal
/// reachable from its start. Returns `None` when the seed fails to admit
/// such a placement within a bounded number of retries (dense obstacles or
/// too many robots).
pub fn random_grid_instance(
    seed: u64,
    width: usize,
    height: usize,
    obstacle_fraction: f64,
    k: usize,
) -> Option<GeneratedInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = width * height;
    let blocked = ((cells as f64) * obstacle_fraction).round() as usize;

    for _attempt in 0..200 {
        // choose blocked cells by partial shuffle
        let mut order: Vec<usize> = (0..cells).collect();
        for i in 0..blocked.min(cells) {
            let j = i + gen_range(&mut rng, cells - i);
            order.swap(i, j);
        }
        let mut passable = vec![true; cells];
        for &c in &order[..blocked.min(cells)] {
            passable[c] = false;
        }
        let map = GridMap::new(width, height, passable);
        let grid = grid_to_graph(&map);
        let n = grid.graph.vertex_count();
        if n < k || k == 0 && n == 0 {
            continue;
        }

        // distinct starts, distinct goals (a goal may equal another
        // robot's start), each goal reachable
        let mut starts = Vec::with_capacity(k);
        let mut goals = Vec::with_capacity(k);
        let mut ok = true;
        for _ in 0..k {
            let mut placed = false;
            for _ in 0..50 {
                let s = gen_range(&mut rng, n);
                if starts.contains(&s) {
                    continue;
                }
                let dist = bfs_distances(&grid.graph, s);
                let mut g = gen_range(&mut rng, n);
                let mut tries = 0;
                while (goals.contains(&g) || dist[g] == UNREACHABLE) && tries < 50 {
                    g = gen_range(&mut rng, n);
                    tries += 1;
                }
                if goals.contains(&g) || dist[g] == UNREACHABLE {
                    continue;
                }
                starts.push(s);
                goals.push(g);
                placed = true;
                break;
            }
            if !placed {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let instance = Instance::new(grid.graph.clone(), starts, goals)
            .expect("distinct placements are injective");
        return Some(GeneratedInstance {
            map,
            grid,
            instance,
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = random_grid_instance(42, 8, 8, 0.1, 4).unwrap();
        let b = random_grid_instance(42, 8, 8, 0.1, 4).unwrap();
        assert_eq!(a.map, b.map);
        assert_eq!(a.instance.starts(), b.instance.starts());
        assert_eq!(a.instance.goals(), b.instance.goals());
    }

    #[test]
    fn generation_respects_obstacle_count() {
        let g = random_grid_instance(7, 8, 8, 0.1, 2).unwrap();
        assert_eq!(g.map.passable_count(), 64 - 6); // round(64 * 0.1) = 6
    }

    #[test]
    fn generated_goals_are_reachable() {
        for seed in 0..20 {
            let Some(g) = random_grid_instance(seed, 8, 8, 0.2, 5) else {
                continue;
            };
            for r in 0..5 {
                let dist = bfs_distances(&g.instance.graph, g.instance.start(r));
                assert_ne!(dist[g.instance.goal(r)], UNREACHABLE, "seed {seed} robot {r}");
            }
        }
    }
}
