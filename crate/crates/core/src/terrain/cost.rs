use serde::{Deserialize, Serialize};

use super::{GridGeometry, GridMap2D};
use crate::error::{NavError, Result};

/// Blend of the slope, roughness and step-height features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraversabilityWeights {
    pub w_slope: f64,
    pub w_roughness: f64,
    pub w_step: f64,
    /// Ceiling on the blended cost; also the value of unknown cells.
    pub t_max: f64,
}

impl Default for TraversabilityWeights {
    fn default() -> Self {
        Self { w_slope: 0.5, w_roughness: 0.25, w_step: 0.25, t_max: 1.0 }
    }
}

impl TraversabilityWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_slope, self.w_roughness, self.w_step];
        if w.iter().any(|&v| !(v >= 0.0)) {
            return Err(NavError::Config("traversability weights must be non-negative".into()));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(NavError::Config("traversability weights must sum to 1".into()));
        }
        if !(self.t_max > 0.0) {
            return Err(NavError::Config("t_max must be positive".into()));
        }
        Ok(())
    }
}

/// Feature normalisers and neighbourhood used by [`geometric_traversability`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraversabilityConfig {
    pub weights: TraversabilityWeights,
    /// Slope angle (rad) at which the slope feature saturates.
    pub max_slope: f64,
    /// Elevation standard deviation (m) at which roughness saturates.
    pub max_roughness: f64,
    /// Height difference (m) at which the step feature saturates.
    pub max_step: f64,
    /// Half-width of the square neighbourhood in cells.
    pub radius: usize,
}

impl Default for TraversabilityConfig {
    fn default() -> Self {
        Self {
            weights: TraversabilityWeights::default(),
            max_slope: 30f64.to_radians(),
            max_roughness: 0.1,
            max_step: 0.3,
            radius: 1,
        }
    }
}

fn slope_angle(z: &GridMap2D, col: usize, row: usize) -> f64 {
    let g = z.geometry();
    let diff = |lo: usize, hi: usize, at: &dyn Fn(usize) -> f64| -> f64 {
        if hi == lo {
            0.0
        } else {
            (at(hi) - at(lo)) / ((hi - lo) as f64 * g.resolution)
        }
    };
    let gx = diff(col.saturating_sub(1), (col + 1).min(g.width - 1), &|c| z.get(c, row));
    let gy = diff(row.saturating_sub(1), (row + 1).min(g.height - 1), &|r| z.get(col, r));
    gx.hypot(gy).atan()
}

/// Per-cell geometric traversability cost in `[0, t_max]`.
pub fn geometric_traversability(elevation: &GridMap2D, cfg: &TraversabilityConfig) -> GridMap2D {
    let g = *elevation.geometry();
    let w = &cfg.weights;
    let r = cfg.radius as isize;
    GridMap2D::from_fn(g, |col, row| {
        let center = elevation.get(col, row);
        let (mut sum, mut sum_sq, mut count, mut step) = (0.0, 0.0, 0usize, 0.0f64);
        for dr in -r..=r {
            for dc in -r..=r {
                if let Some((c, rr)) = g.checked_cell(col as isize + dc, row as isize + dr) {
                    let z = elevation.get(c, rr);
                    let d = z - center;
                    sum += d;
                    sum_sq += d * d;
                    count += 1;
                    step = step.max(d.abs());
                }
            }
        }
        let mean = sum / count as f64;
        let roughness = (sum_sq / count as f64 - mean * mean).max(0.0).sqrt();
        let t_s = (slope_angle(elevation, col, row) / cfg.max_slope).min(1.0);
        let t_r = (roughness / cfg.max_roughness).min(1.0);
        let t_h = (step / cfg.max_step).min(1.0);
        (w.w_slope * t_s + w.w_roughness * t_r + w.w_step * t_h).min(w.t_max)
    })
}

/// Square window of cells cut from a layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub size: usize,
    /// Row-major values, row 0 at the lowest y.
    pub values: Vec<f64>,
    /// World positions of the cell centers, same layout as `values`.
    pub centers: Vec<[f64; 2]>,
}

impl Patch {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[b * self.size + a]
    }
}

/// `size × size` window centred on the cell containing `center`; cells
/// outside the map take `fill`.
pub fn submap(layer: &GridMap2D, center: [f64; 2], size: usize, fill: f64) -> Patch {
    assert!(size % 2 == 1, "submap size must be odd");
    let g: &GridGeometry = layer.geometry();
    let (cc, cr) = g.cell_unbounded(center[0], center[1]);
    let half = (size / 2) as isize;
    let mut values = Vec::with_capacity(size * size);
    let mut centers = Vec::with_capacity(size * size);
    for b in -half..=half {
        for a in -half..=half {
            let (c, r) = (cc + a, cr + b);
            centers.push(g.cell_center(c, r));
            values.push(g.checked_cell(c, r).map_or(fill, |(c, r)| layer.get(c, r)));
        }
    }
    Patch { size, values, centers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(0.5, [0.0, 0.0], w, h)
    }

    #[test]
    fn flat_map_costs_nothing() {
        let z = GridMap2D::filled(geom(10, 7), 3.2);
        let t = geometric_traversability(&z, &TraversabilityConfig::default());
        assert!(t.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn raised_cell_saturates_step_term() {
        let cfg = TraversabilityConfig::default();
        let mut z = GridMap2D::filled(geom(9, 9), 0.0);
        z.set(4, 4, cfg.max_step);
        let t = geometric_traversability(&z, &cfg);
        // neighbours see a step of exactly max_step
        let w = cfg.weights;
        let nb = t.get(5, 4);
        let roughness_part = {
            // neighbourhood of (5,4) holds one raised cell among nine
            let mean = cfg.max_step / 9.0;
            let var = cfg.max_step * cfg.max_step / 9.0 - mean * mean;
            w.w_roughness * (var.sqrt() / cfg.max_roughness).min(1.0)
        };
        let slope_part = {
            let grad = cfg.max_step / (2.0 * 0.5);
            w.w_slope * (grad.atan() / cfg.max_slope).min(1.0)
        };
        assert!((nb - (w.w_step + roughness_part + slope_part).min(w.t_max)).abs() < 1e-12);
        // far away cells are untouched
        assert_eq!(t.get(0, 0), 0.0);
    }

    /// Plain re-statement of the cost definition used as an oracle.
    fn reference_cost(z: &GridMap2D, cfg: &TraversabilityConfig, col: usize, row: usize) -> f64 {
        let g = z.geometry();
        let res = g.resolution;
        let (w, h) = (g.width as i64, g.height as i64);
        let at = |c: i64, r: i64| z.get(c as usize, r as usize);
        let (c, r) = (col as i64, row as i64);
        let (xl, xh) = ((c - 1).max(0), (c + 1).min(w - 1));
        let (yl, yh) = ((r - 1).max(0), (r + 1).min(h - 1));
        let gx = if xh > xl { (at(xh, r) - at(xl, r)) / ((xh - xl) as f64 * res) } else { 0.0 };
        let gy = if yh > yl { (at(c, yh) - at(c, yl)) / ((yh - yl) as f64 * res) } else { 0.0 };
        let slope = (gx * gx + gy * gy).sqrt().atan();
        let rad = cfg.radius as i64;
        let mut vals = Vec::new();
        for rr in (r - rad).max(0)..=(r + rad).min(h - 1) {
            for cc in (c - rad).max(0)..=(c + rad).min(w - 1) {
                vals.push(at(cc, rr));
            }
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let step = vals.iter().map(|v| (v - at(c, r)).abs()).fold(0.0, f64::max);
        let wts = cfg.weights;
        let raw = wts.w_slope * (slope / cfg.max_slope).min(1.0)
            + wts.w_roughness * (std / cfg.max_roughness).min(1.0)
            + wts.w_step * (step / cfg.max_step).min(1.0);
        raw.min(wts.t_max)
    }

    #[test]
    fn hill_matches_reference_definition() {
        let g = geom(24, 20);
        let z = GridMap2D::from_fn(g, |c, r| {
            let p = g.cell_center(c as isize, r as isize);
            let d2 = (p[0] - 6.0).powi(2) + (p[1] - 5.0).powi(2);
            1.5 * (-d2 / 8.0).exp() + 0.02 * (3.0 * p[0]).sin()
        });
        for radius in [1usize, 2] {
            let cfg = TraversabilityConfig { radius, ..Default::default() };
            let t = geometric_traversability(&z, &cfg);
            for row in 0..g.height {
                for col in 0..g.width {
                    let expect = reference_cost(&z, &cfg, col, row);
                    assert!((t.get(col, row) - expect).abs() < 1e-9, "cell ({col},{row})");
                }
            }
        }
    }

    #[test]
    fn submap_indexing_and_fill() {
        let g = geom(10, 10);
        let layer = GridMap2D::from_fn(g, |c, r| (r * 10 + c) as f64);
        let single = submap(&layer, [2.1, 1.4], 1, 9.0);
        assert_eq!(single.values, vec![layer.value_at(2.1, 1.4).unwrap()]);

        let p = submap(&layer, [2.0, 2.5], 5, -1.0);
        let (cc, cr) = g.cell_of(2.0, 2.5).unwrap();
        for b in 0..5 {
            for a in 0..5 {
                assert_eq!(p.get(a, b), layer.get(cc + a - 2, cr + b - 2));
            }
        }

        let edge = submap(&layer, [0.5, 2.5], 5, 7.5);
        // column offset −2 from col 1 is off the map
        for b in 0..5 {
            assert_eq!(edge.get(0, b), 7.5);
            assert_ne!(edge.get(1, b), 7.5);
        }
    }

    proptest! {
        #[test]
        fn cost_is_shift_invariant_and_bounded(seed in 0u64..1000, shift in -50.0f64..50.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = geom(8, 6);
            let z = GridMap2D::from_fn(g, |_, _| rng.random_range(-0.5..0.5));
            let zs = GridMap2D::from_fn(g, |c, r| z.get(c, r) + shift);
            let cfg = TraversabilityConfig::default();
            let a = geometric_traversability(&z, &cfg);
            let b = geometric_traversability(&zs, &cfg);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!(*x >= 0.0 && *x <= cfg.weights.t_max);
            }
        }
    }
}
