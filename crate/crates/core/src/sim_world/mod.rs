//! Ground-truth simulator: terrain-dependent slip on top of the nominal
//! model, scenario generation, training-data collection and missions.

mod collect;
mod mission;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use collect::{collect_training_data, CollectConfig, TrainingData};
pub use mission::{
    run_mission, MissionConfig, MissionSpec, MissionTimings, Outcome, PlanRecord, Stack, TrialLog, TrialSample,
};

use crate::dynamics::{self, ControlInput, VehicleParams, VehicleState};
use crate::error::{NavError, Result};
use crate::terrain::{GridGeometry, GridMap2D, TerrainClass, TerrainMaps, TerrainTypeMap, TraversabilityConfig};

/// Per-class slip model of the ground truth. The defaults are calibration
/// targets, not measured values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceParams {
    /// Fraction of the lateral-force acceleration added as extra `vy`.
    pub k_vy: f64,
    /// Fraction of the commanded acceleration that is realised.
    pub k_vx: f64,
    /// Fraction of the yaw acceleration added as extra yaw rate.
    pub k_omega: f64,
    /// Noise standard deviations on `(vx, vy, yaw_rate)` per √s.
    pub noise: [f64; 3],
}

impl DisturbanceParams {
    pub const NONE: Self = Self { k_vy: 0.0, k_vx: 1.0, k_omega: 0.0, noise: [0.0; 3] };

    pub fn grass() -> Self {
        Self { k_vy: 0.0, k_vx: 1.0, k_omega: 0.0, noise: [0.01, 0.015, 0.01] }
    }

    pub fn mud() -> Self {
        Self { k_vy: 0.3, k_vx: 0.7, k_omega: 0.2, noise: [0.05, 0.08, 0.05] }
    }

    pub fn validate(&self) -> Result<()> {
        let gains = [self.k_vy, self.k_vx, self.k_omega];
        if gains.iter().any(|g| !g.is_finite()) || self.noise.iter().any(|n| !(*n >= 0.0)) {
            return Err(NavError::Config("disturbance gains must be finite and noise non-negative".into()));
        }
        Ok(())
    }
}

/// Cylindrical obstacle raised into the elevation layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerrainWorld {
    pub maps: TerrainMaps,
    pub disturbances: BTreeMap<TerrainClass, DisturbanceParams>,
    pub obstacles: Vec<Obstacle>,
}

impl TerrainWorld {
    pub fn new(
        maps: TerrainMaps,
        disturbances: BTreeMap<TerrainClass, DisturbanceParams>,
        obstacles: Vec<Obstacle>,
    ) -> Result<Self> {
        for class in maps.classes.classes() {
            disturbances
                .get(&class)
                .ok_or_else(|| NavError::Config(format!("no disturbance parameters for terrain `{class}`")))?
                .validate()?;
        }
        Ok(Self { maps, disturbances, obstacles })
    }

    pub fn disturbance(&self, class: TerrainClass) -> Result<&DisturbanceParams> {
        self.disturbances.get(&class).ok_or_else(|| NavError::UnknownTerrain(class.name().to_string()))
    }

    /// True if a disc of `radius` at `(x, y)` touches any obstacle.
    pub fn collides(&self, x: f64, y: f64, radius: f64) -> bool {
        self.obstacles.iter().any(|o| (x - o.center[0]).hypot(y - o.center[1]) < o.radius + radius)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldPreset {
    /// Zero elevation, mud patch, no obstacles.
    Flat,
    /// Hill and mud patch, no obstacles.
    Hill,
    /// Hill, mud patch and seeded obstacles.
    #[default]
    Default,
}

/// Raised-cosine bump `h·(1 + cos(π r / R))/2` for `r < R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hill {
    pub center: [f64; 2],
    pub radius: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub preset: WorldPreset,
    pub resolution: f64,
    /// Map extent in metres; the map covers `[0, size[0]] × [0, size[1]]`.
    pub size: [f64; 2],
    pub hill: Hill,
    /// Mud polygon vertices.
    pub mud: Vec<[f64; 2]>,
    pub obstacle_count: usize,
    pub obstacle_radius: f64,
    pub obstacle_height: f64,
    /// Obstacles keep at least this distance from the start and goal.
    pub clearance: f64,
    /// Obstacles keep at least this distance from the map edge.
    pub edge_margin: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub layout_seed: u64,
    pub grass: DisturbanceParams,
    pub mud_disturbance: DisturbanceParams,
    pub traversability: TraversabilityConfig,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            preset: WorldPreset::Default,
            resolution: 0.5,
            size: [44.0, 20.0],
            hill: Hill { center: [20.25, 2.25], radius: 4.5, height: 1.0 },
            mud: vec![[14.0, 5.0], [26.0, 4.5], [27.0, 15.5], [13.5, 15.0]],
            obstacle_count: 12,
            obstacle_radius: 0.5,
            obstacle_height: 0.6,
            clearance: 3.0,
            edge_margin: 1.5,
            start: [3.0, 8.0],
            goal: [37.0, 12.0],
            layout_seed: 0,
            grass: DisturbanceParams::grass(),
            mud_disturbance: DisturbanceParams::mud(),
            traversability: TraversabilityConfig::default(),
        }
    }
}

/// Even-odd ray casting.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0] {
            inside = !inside;
        }
    }
    inside
}

impl ScenarioParams {
    pub fn geometry(&self) -> Result<GridGeometry> {
        if !(self.resolution > 0.0) || !(self.size[0] >= self.resolution) || !(self.size[1] >= self.resolution) {
            return Err(NavError::Config("scenario resolution and size must be positive".into()));
        }
        let w = (self.size[0] / self.resolution).round() as usize;
        let h = (self.size[1] / self.resolution).round() as usize;
        let half = 0.5 * self.resolution;
        Ok(GridGeometry::new(self.resolution, [half, half], w, h))
    }

    /// Obstacle layout drawn from `layout_seed`.
    pub fn obstacles(&self) -> Vec<Obstacle> {
        if self.preset != WorldPreset::Default {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.layout_seed);
        let (lo, r) = (self.edge_margin, self.obstacle_radius);
        let mut out = Vec::with_capacity(self.obstacle_count);
        let mut attempts = 0;
        while out.len() < self.obstacle_count && attempts < 10_000 {
            attempts += 1;
            let c = [rng.random_range(lo..self.size[0] - lo), rng.random_range(lo..self.size[1] - lo)];
            let far = |q: [f64; 2]| (c[0] - q[0]).hypot(c[1] - q[1]) >= self.clearance + r;
            if far(self.start) && far(self.goal) {
                out.push(Obstacle { center: c, radius: r, height: self.obstacle_height });
            }
        }
        out
    }

    pub fn build(&self) -> Result<TerrainWorld> {
        let g = self.geometry()?;
        let obstacles = self.obstacles();
        let hill = match self.preset {
            WorldPreset::Flat => None,
            _ => {
                // snap the peak to a cell centre so the configured height is attained
                let (c, r) = g.cell_unbounded(self.hill.center[0], self.hill.center[1]);
                Some(Hill { center: g.cell_center(c, r), ..self.hill })
            }
        };
        let elevation = GridMap2D::from_fn(g, |c, r| {
            let p = g.cell_center(c as isize, r as isize);
            let mut z = 0.0;
            if let Some(h) = &hill {
                let d = (p[0] - h.center[0]).hypot(p[1] - h.center[1]);
                if d < h.radius {
                    z = h.height * 0.5 * (1.0 + (std::f64::consts::PI * d / h.radius).cos());
                }
            }
            if obstacles.iter().any(|o| (p[0] - o.center[0]).hypot(p[1] - o.center[1]) <= o.radius) {
                z += self.obstacle_height;
            }
            z
        });
        let classes = TerrainTypeMap::from_fn(g, |c, r| {
            if point_in_polygon(g.cell_center(c as isize, r as isize), &self.mud) {
                TerrainClass::Mud
            } else {
                TerrainClass::Grass
            }
        });
        let maps = TerrainMaps::new(elevation, classes, self.traversability)?;
        let disturbances =
            BTreeMap::from([(TerrainClass::Grass, self.grass), (TerrainClass::Mud, self.mud_disturbance)]);
        TerrainWorld::new(maps, disturbances, obstacles)
    }
}

/// Advances the true vehicle: the nominal step plus the slip of the terrain
/// class under the vehicle and Gaussian velocity noise.
pub fn true_step<R: Rng + ?Sized>(
    state: &VehicleState,
    input: &ControlInput,
    world: &TerrainWorld,
    p: &VehicleParams,
    dt: f64,
    rng: &mut R,
) -> Result<VehicleState> {
    let att = world.maps.attitude_at(state.x, state.y, state.yaw)?;
    let class = world.maps.class_at(state.x, state.y).ok_or(NavError::OutOfBounds { x: state.x, y: state.y })?;
    let d = world.disturbance(class)?;
    let mut next = dynamics::step(state, input, &att, p, dt)?;
    let f = dynamics::terrain_forces(state, input, &att, p);
    let lateral = (f.lateral_front + f.lateral_rear - f.gravity_lateral) / p.mass;
    let yaw_acc = (f.lateral_front * p.lf * input.steer.cos() - p.lr * f.lateral_rear) / p.yaw_inertia;
    let sq = dt.sqrt();
    let z: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
    next.vx = (next.vx + (d.k_vx - 1.0) * input.accel * dt + d.noise[0] * sq * z[0]).max(0.0);
    next.vy += d.k_vy * lateral * dt + d.noise[1] * sq * z[1];
    next.yaw_rate += d.k_omega * yaw_acc * dt + d.noise[2] * sq * z[2];
    Ok(next)
}

#[cfg(test)]
mod tests;
