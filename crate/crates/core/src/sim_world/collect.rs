use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{true_step, TerrainWorld};
use crate::dynamics::{ControlInput, VehicleParams, VehicleState};
use crate::error::Result;
use crate::gp::{residual_labels, GpDataset, LogEntry};
use crate::terrain::TerrainClass;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    /// Number of labelled pairs to gather over all classes.
    pub samples: usize,
    pub sim_dt: f64,
    /// Logging period; must match the planner step.
    pub log_dt: f64,
    /// Low-pass factor applied to the random input targets per log step.
    pub smoothing: f64,
    pub max_accel: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    /// Share of spawns placed inside mud cells.
    pub mud_spawn_fraction: f64,
    /// Respawn when the vehicle comes this close to the map edge (m).
    pub edge_margin: f64,
    /// Respawn after this many logged steps.
    pub segment_steps: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            samples: 3000,
            sim_dt: 0.02,
            log_dt: 0.1,
            smoothing: 0.3,
            max_accel: 1.5,
            min_speed: 0.3,
            max_speed: 3.5,
            mud_spawn_fraction: 0.5,
            edge_margin: 2.0,
            segment_steps: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingData {
    pub per_class: BTreeMap<TerrainClass, GpDataset>,
}

impl TrainingData {
    pub fn total(&self) -> usize {
        self.per_class.values().map(GpDataset::len).sum()
    }
}

fn spawn(world: &TerrainWorld, cfg: &CollectConfig, rng: &mut ChaCha8Rng) -> VehicleState {
    let [x0, y0, x1, y1] = world.maps.geometry().bounds();
    let m = cfg.edge_margin + 0.5;
    let want_mud = rng.random_bool(cfg.mud_spawn_fraction.clamp(0.0, 1.0));
    let mut pos = [0.0; 2];
    for _ in 0..1000 {
        pos = [rng.random_range(x0 + m..x1 - m), rng.random_range(y0 + m..y1 - m)];
        if !want_mud || world.maps.class_at(pos[0], pos[1]) == Some(TerrainClass::Mud) {
            break;
        }
    }
    VehicleState {
        x: pos[0],
        y: pos[1],
        yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        vx: rng.random_range(0.5..2.5),
        vy: 0.0,
        yaw_rate: 0.0,
    }
}

fn near_edge(world: &TerrainWorld, s: &VehicleState, margin: f64) -> bool {
    let [x0, y0, x1, y1] = world.maps.geometry().bounds();
    s.x < x0 + margin || s.x > x1 - margin || s.y < y0 + margin || s.y > y1 - margin
}

/// Drives the true simulator with smoothed random inputs, labels one-step
/// residuals segment by segment and files each pair under the terrain class
/// at its starting position.
pub fn collect_training_data(
    world: &TerrainWorld,
    p: &VehicleParams,
    cfg: &CollectConfig,
    seed: u64,
) -> Result<TrainingData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let substeps = (cfg.log_dt / cfg.sim_dt).round().max(1.0) as usize;
    let mut out = TrainingData::default();
    let mut total = 0;
    while total < cfg.samples {
        let mut s = spawn(world, cfg, &mut rng);
        let mut u = ControlInput::default();
        let mut log: Vec<LogEntry> = Vec::new();
        for k in 0..=cfg.segment_steps {
            let Ok(att) = world.maps.attitude_at(s.x, s.y, s.yaw) else { break };
            let target = ControlInput {
                steer: rng.random_range(-p.max_steer..=p.max_steer),
                accel: rng.random_range(-cfg.max_accel..=cfg.max_accel),
            };
            u.steer += cfg.smoothing * (target.steer - u.steer);
            u.accel += cfg.smoothing * (target.accel - u.accel);
            if s.vx > cfg.max_speed {
                u.accel = u.accel.min(-0.5);
            } else if s.vx < cfg.min_speed {
                u.accel = u.accel.max(0.5);
            }
            let u = u.clamped(p);
            log.push(LogEntry { t: k as f64 * cfg.log_dt, state: s, input: u, attitude: att });
            if k == cfg.segment_steps || total + log.len() > cfg.samples {
                break;
            }
            let mut next = s;
            let mut ok = true;
            for _ in 0..substeps {
                match true_step(&next, &u, world, p, cfg.sim_dt, &mut rng) {
                    Ok(n) => next = n,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok || near_edge(world, &next, cfg.edge_margin) {
                break;
            }
            s = next;
        }
        let labels = residual_labels(&log, p)?;
        for (k, (x, y)) in labels.inputs.into_iter().zip(labels.outputs).enumerate() {
            let pos = log[k].state;
            if let Some(class) = world.maps.class_at(pos.x, pos.y) {
                out.per_class.entry(class).or_default().push(x, y);
                total += 1;
            }
        }
    }
    Ok(out)
}
