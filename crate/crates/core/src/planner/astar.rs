use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::terrain::{GridMap2D, TerrainClass, TerrainMaps};

pub type CellPath = Vec<(usize, usize)>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AstarConfig {
    /// Multiplier λ on the mean endpoint cost of an edge.
    pub cost_weight: f64,
    /// Cells whose cost reaches this value are impassable.
    pub blocked_threshold: f64,
    /// Rows and columns this close to the map edge are impassable, so the
    /// tracked path keeps the footprint on the map.
    pub border_cells: usize,
}

impl Default for AstarConfig {
    fn default() -> Self {
        Self { cost_weight: 4.0, blocked_threshold: 0.6, border_cells: 2 }
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    cell: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(self.g.total_cmp(&other.g)).then(other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// 8-connected A* over `cost`. An edge costs its length times
/// `1 + λ·(c_a + c_b)/2`; the Euclidean heuristic is admissible because that
/// factor is at least one. The start cell is always expandable.
pub fn astar_plan(
    cost: &GridMap2D,
    start: (usize, usize),
    goal: (usize, usize),
    cfg: &AstarConfig,
) -> Result<CellPath> {
    let g = cost.geometry();
    let (w, h) = (g.width, g.height);
    let k = cfg.border_cells;
    let blocked = |c: usize, r: usize| {
        let v = cost.get(c, r);
        c < k || r < k || c + k >= w || r + k >= h || !v.is_finite() || v >= cfg.blocked_threshold
    };
    if start.0 >= w || start.1 >= h || goal.0 >= w || goal.1 >= h || blocked(goal.0, goal.1) {
        return Err(NavError::Unreachable);
    }
    let res = g.resolution;
    let heuristic = |c: usize, r: usize| {
        let dx = c as f64 - goal.0 as f64;
        let dy = r as f64 - goal.1 as f64;
        dx.hypot(dy) * res
    };
    let n = w * h;
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let s = g.index(start.0, start.1);
    best[s] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Open { f: heuristic(start.0, start.1), g: 0.0, cell: s });
    let target = g.index(goal.0, goal.1);
    while let Some(Open { g: gc, cell, .. }) = open.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        if cell == target {
            let mut path = vec![(cell % w, cell / w)];
            let mut cur = cell;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push((cur % w, cur / w));
            }
            path.reverse();
            return Ok(path);
        }
        let (c, r) = (cell % w, cell / w);
        let here = cost.get(c, r);
        for (dc, dr) in NEIGHBORS {
            let (nc, nr) = (c as isize + dc, r as isize + dr);
            if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                continue;
            }
            let (nc, nr) = (nc as usize, nr as usize);
            let ni = nr * w + nc;
            if closed[ni] || blocked(nc, nr) {
                continue;
            }
            let len = if dc != 0 && dr != 0 { std::f64::consts::SQRT_2 * res } else { res };
            let step = len * (1.0 + cfg.cost_weight * 0.5 * (here.min(1e300) + cost.get(nc, nr)));
            let ng = gc + step;
            if ng < best[ni] {
                best[ni] = ng;
                parent[ni] = cell;
                open.push(Open { f: ng + heuristic(nc, nr), g: ng, cell: ni });
            }
        }
    }
    Err(NavError::Unreachable)
}

/// Geometric cost plus a fixed penalty per terrain class; cells that are
/// geometrically impassable become infinite.
pub fn hybrid_cost_map(maps: &TerrainMaps, blocked_threshold: f64, mud_penalty: f64) -> GridMap2D {
    let g = *maps.geometry();
    GridMap2D::from_fn(g, |c, r| {
        let t = maps.cost.get(c, r);
        if t >= blocked_threshold {
            return f64::INFINITY;
        }
        match maps.classes.get(c, r) {
            TerrainClass::Mud => t + mud_penalty,
            TerrainClass::Grass => t,
        }
    })
}

/// Total edge cost of a cell path under the A* weighting.
pub fn path_cost(cost: &GridMap2D, path: &[(usize, usize)], cfg: &AstarConfig) -> f64 {
    let res = cost.geometry().resolution;
    path.windows(2)
        .map(|e| {
            let (a, b) = (e[0], e[1]);
            let diag = a.0 != b.0 && a.1 != b.1;
            let len = if diag { std::f64::consts::SQRT_2 * res } else { res };
            len * (1.0 + cfg.cost_weight * 0.5 * (cost.get(a.0, a.1) + cost.get(b.0, b.1)))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::GridGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(0.5, [0.0, 0.0], w, h)
    }

    /// Plain Dijkstra over the same graph.
    fn dijkstra(cost: &GridMap2D, start: (usize, usize), goal: (usize, usize), cfg: &AstarConfig) -> Option<f64> {
        let g = cost.geometry();
        let (w, h) = (g.width, g.height);
        let mut dist = vec![f64::INFINITY; w * h];
        let mut done = vec![false; w * h];
        dist[start.1 * w + start.0] = 0.0;
        loop {
            let mut u = None;
            for i in 0..w * h {
                if !done[i] && dist[i].is_finite() && u.is_none_or(|j: usize| dist[i] < dist[j]) {
                    u = Some(i);
                }
            }
            let u = u?;
            if u == goal.1 * w + goal.0 {
                return Some(dist[u]);
            }
            done[u] = true;
            let (c, r) = ((u % w) as isize, (u / w) as isize);
            for dc in -1..=1isize {
                for dr in -1..=1isize {
                    let (nc, nr) = (c + dc, r + dr);
                    if (dc == 0 && dr == 0) || nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                        continue;
                    }
                    let v = cost.get(nc as usize, nr as usize);
                    if v >= cfg.blocked_threshold {
                        continue;
                    }
                    let len = if dc != 0 && dr != 0 { 2f64.sqrt() } else { 1.0 } * g.resolution;
                    let e = len * (1.0 + cfg.cost_weight * (cost.get(c as usize, r as usize) + v) / 2.0);
                    let ni = nr as usize * w + nc as usize;
                    dist[ni] = dist[ni].min(dist[u] + e);
                }
            }
        }
    }

    const NO_BORDER: AstarConfig = AstarConfig { cost_weight: 4.0, blocked_threshold: 0.6, border_cells: 0 };

    #[test]
    fn border_rows_are_avoided() {
        let cost = GridMap2D::filled(grid(12, 12), 0.0);
        let path = astar_plan(&cost, (2, 3), (9, 9), &AstarConfig::default()).unwrap();
        assert!(path.iter().all(|&(c, r)| (2..10).contains(&c) && (2..10).contains(&r)));
        assert!(matches!(astar_plan(&cost, (5, 5), (11, 5), &AstarConfig::default()), Err(NavError::Unreachable)));
    }

    #[test]
    fn free_space_corner_to_corner_is_diagonal() {
        let cost = GridMap2D::filled(grid(10, 10), 0.0);
        let cfg = NO_BORDER;
        let path = astar_plan(&cost, (0, 0), (9, 9), &cfg).unwrap();
        assert_eq!(path.len(), 10);
        assert!((path_cost(&cost, &path, &cfg) - 9.0 * 2f64.sqrt() * 0.5).abs() < 1e-12);
    }

    #[test]
    fn wall_with_gap_forces_the_gap() {
        let cost = GridMap2D::from_fn(grid(11, 11), |c, r| if c == 5 && r != 8 { 1.0 } else { 0.0 });
        let path = astar_plan(&cost, (0, 2), (10, 2), &NO_BORDER).unwrap();
        assert!(path.contains(&(5, 8)));
        assert!(path.iter().all(|&(c, r)| c != 5 || r == 8));
    }

    #[test]
    fn fully_blocked_goal_is_unreachable() {
        let cost = GridMap2D::from_fn(grid(8, 8), |c, _| if c == 4 { 1.0 } else { 0.0 });
        assert!(matches!(astar_plan(&cost, (0, 0), (7, 7), &NO_BORDER), Err(NavError::Unreachable)));
    }

    #[test]
    fn random_grids_match_dijkstra() {
        let cfg = NO_BORDER;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cost =
                GridMap2D::from_fn(
                    grid(20, 20),
                    |_, _| {
                        if rng.random_bool(0.15) {
                            1.0
                        } else {
                            rng.random_range(0.0..0.5)
                        }
                    },
                );
            let mut cost = cost;
            cost.set(0, 0, 0.0);
            cost.set(19, 19, 0.0);
            let oracle = dijkstra(&cost, (0, 0), (19, 19), &cfg);
            match astar_plan(&cost, (0, 0), (19, 19), &cfg) {
                Ok(p) => {
                    let c = path_cost(&cost, &p, &cfg);
                    let o = oracle.expect("dijkstra found no path");
                    assert!((c - o).abs() < 1e-9 * o.max(1.0), "seed {seed}: {c} vs {o}");
                }
                Err(_) => assert!(oracle.is_none()),
            }
        }
    }
}
