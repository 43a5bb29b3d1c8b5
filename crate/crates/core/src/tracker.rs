//! Path following: MPPI around the nominal model, and pure pursuit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, ControlInput, VehicleParams, VehicleState};
use crate::error::{NavError, Result};
use crate::terrain::TerrainMaps;

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Time-indexed reference states, `states[k]` at time `k·dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePath {
    pub dt: f64,
    pub states: Vec<VehicleState>,
}

impl ReferencePath {
    pub fn new(dt: f64, states: Vec<VehicleState>) -> Result<Self> {
        if states.is_empty() || !(dt > 0.0) {
            return Err(NavError::Config("reference path needs a positive dt and at least one state".into()));
        }
        Ok(Self { dt, states })
    }

    /// Constant-speed reference along a polyline, one state every `speed·dt`
    /// of arc length, heading along the segment.
    pub fn from_polyline(points: &[[f64; 2]], speed: f64, dt: f64) -> Result<Self> {
        if points.is_empty() || !(speed > 0.0) {
            return Err(NavError::Config("polyline reference needs points and a positive speed".into()));
        }
        let mut cum = vec![0.0];
        for w in points.windows(2) {
            let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();
        let heading = |seg: usize| {
            let (a, b) = (points[seg], points[(seg + 1).min(points.len() - 1)]);
            if a == b {
                0.0
            } else {
                (b[1] - a[1]).atan2(b[0] - a[0])
            }
        };
        let n = (total / (speed * dt)).ceil() as usize;
        let mut states = Vec::with_capacity(n + 1);
        let mut seg = 0;
        for k in 0..=n {
            let s = (k as f64 * speed * dt).min(total);
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let (x, y) = if points.len() == 1 {
                (points[0][0], points[0][1])
            } else {
                let len = cum[seg + 1] - cum[seg];
                let f = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
                let (a, b) = (points[seg], points[seg + 1]);
                (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]))
            };
            states.push(VehicleState { x, y, yaw: heading(seg), vx: speed, vy: 0.0, yaw_rate: 0.0 });
        }
        Self::new(dt, states)
    }

    pub fn duration(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.dt
    }

    /// Linear interpolation in time (yaw along the shorter arc); held at the
    /// end points outside the covered interval.
    pub fn sample(&self, t: f64) -> VehicleState {
        let last = self.states.len() - 1;
        let f = (t / self.dt).clamp(0.0, last as f64);
        let k = (f.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return self.states[0];
        }
        let u = f - k as f64;
        let (a, b) = (&self.states[k], &self.states[k + 1]);
        let lerp = |p: f64, q: f64| p + u * (q - p);
        VehicleState {
            x: lerp(a.x, b.x),
            y: lerp(a.y, b.y),
            yaw: wrap_angle(a.yaw + u * wrap_angle(b.yaw - a.yaw)),
            vx: lerp(a.vx, b.vx),
            vy: lerp(a.vy, b.vy),
            yaw_rate: lerp(a.yaw_rate, b.yaw_rate),
        }
    }

    /// `count` states starting at `t0`, spaced `dt` apart.
    pub fn resample(&self, t0: f64, dt: f64, count: usize) -> Vec<VehicleState> {
        (0..count).map(|k| self.sample(t0 + k as f64 * dt)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiConfig {
    pub samples: usize,
    pub horizon: usize,
    pub dt: f64,
    pub temperature: f64,
    /// Standard deviations of the steering and acceleration perturbations.
    pub noise_std: [f64; 2],
    /// Diagonal of the state weight `(x, y, yaw, vx, vy, yaw_rate)`.
    pub q: [f64; 6],
    /// Diagonal of the input weight `(steer, accel)`.
    pub r: [f64; 2],
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            horizon: 20,
            dt: 0.1,
            temperature: 1.0,
            noise_std: [0.15, 0.8],
            q: [10.0, 10.0, 2.0, 1.0, 0.5, 0.5],
            r: [1.0, 0.1],
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.horizon == 0 || !(self.dt > 0.0) || !(self.temperature > 0.0) {
            return Err(NavError::Config("MPPI needs samples, horizon, dt and temperature above zero".into()));
        }
        if self.noise_std.iter().chain(&self.q).chain(&self.r).any(|v| !(*v >= 0.0)) {
            return Err(NavError::Config("MPPI noise and weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Quadratic tracking cost of a trajectory (`N̄+1` states) and its inputs
/// against a reference sampled on the same grid.
pub fn mppi_cost(traj: &[VehicleState], inputs: &[ControlInput], reference: &[VehicleState], cfg: &MppiConfig) -> f64 {
    let mut cost = 0.0;
    for (s, r) in traj.iter().zip(reference) {
        let e = [s.x - r.x, s.y - r.y, wrap_angle(s.yaw - r.yaw), s.vx - r.vx, s.vy - r.vy, s.yaw_rate - r.yaw_rate];
        cost += e.iter().zip(&cfg.q).map(|(e, q)| q * e * e).sum::<f64>();
    }
    for u in inputs {
        cost += cfg.r[0] * u.steer * u.steer + cfg.r[1] * u.accel * u.accel;
    }
    cost
}

/// Normalised `exp(-(S - min S)/λ)`. Infinite costs get zero weight; if
/// every cost is infinite the weights are uniform.
pub fn mppi_weights(costs: &[f64], temperature: f64) -> Vec<f64> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return vec![1.0 / costs.len() as f64; costs.len()];
    }
    let mut w: Vec<f64> = costs.iter().map(|c| (-(c - min) / temperature).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct MppiOutput {
    pub command: ControlInput,
    /// Optimised sequence shifted by one step, for the next warm start.
    pub warm_start: Vec<ControlInput>,
    pub min_cost: f64,
}

fn simulate(
    start: &VehicleState,
    inputs: &[ControlInput],
    maps: &TerrainMaps,
    p: &VehicleParams,
    dt: f64,
    out: &mut Vec<VehicleState>,
) -> bool {
    out.clear();
    out.push(*start);
    let mut s = *start;
    for u in inputs {
        let Ok(att) = maps.attitude_at(s.x, s.y, s.yaw) else { return false };
        let Ok(next) = dynamics::step(&s, u, &att, p, dt) else { return false };
        s = next;
        out.push(s);
    }
    true
}

/// One MPPI iteration. `reference` is sampled from `t_ref` onwards on the
/// controller grid; `warm` must hold `cfg.horizon` inputs.
#[allow(clippy::too_many_arguments)]
pub fn mppi_step(
    state: &VehicleState,
    reference: &ReferencePath,
    t_ref: f64,
    maps: &TerrainMaps,
    p: &VehicleParams,
    cfg: &MppiConfig,
    warm: &[ControlInput],
    seed: u64,
) -> Result<MppiOutput> {
    cfg.validate()?;
    if warm.len() != cfg.horizon {
        return Err(NavError::Config(format!("warm start has {} inputs, horizon is {}", warm.len(), cfg.horizon)));
    }
    let reference = reference.resample(t_ref, cfg.dt, cfg.horizon + 1);
    let n = cfg.horizon;
    let rollouts: Vec<(Vec<ControlInput>, f64)> = (0..cfg.samples)
        .into_par_iter()
        .map_init(Vec::new, |traj, j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let inputs: Vec<ControlInput> = warm
                .iter()
                .map(|u| {
                    let ds: f64 = rng.sample(StandardNormal);
                    let da: f64 = rng.sample(StandardNormal);
                    ControlInput { steer: u.steer + cfg.noise_std[0] * ds, accel: u.accel + cfg.noise_std[1] * da }
                        .clamped(p)
                })
                .collect();
            let cost = if simulate(state, &inputs, maps, p, cfg.dt, traj) {
                mppi_cost(traj, &inputs, &reference, cfg)
            } else {
                f64::INFINITY
            };
            (inputs, cost)
        })
        .collect();
    let costs: Vec<f64> = rollouts.iter().map(|r| r.1).collect();
    let weights = mppi_weights(&costs, cfg.temperature);
    let mut seq = vec![ControlInput::default(); n];
    for ((inputs, _), w) in rollouts.iter().zip(&weights) {
        for (acc, u) in seq.iter_mut().zip(inputs) {
            acc.steer += w * u.steer;
            acc.accel += w * u.accel;
        }
    }
    let seq: Vec<ControlInput> = seq.into_iter().map(|u| u.clamped(p)).collect();
    let command = seq[0];
    let mut warm_start: Vec<ControlInput> = seq[1..].to_vec();
    warm_start.push(*seq.last().unwrap());
    Ok(MppiOutput { command, warm_start, min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PurePursuitConfig {
    pub lookahead: f64,
    pub speed: f64,
    /// Proportional gain from speed error to acceleration (1/s).
    pub speed_gain: f64,
}

impl Default for PurePursuitConfig {
    fn default() -> Self {
        Self { lookahead: 1.5, speed: 2.0, speed_gain: 1.0 }
    }
}

/// First path point at least `lookahead` from the vehicle, searching forward
/// from the closest point; the last point if none is that far.
pub fn lookahead_point(state: &VehicleState, path: &[VehicleState], lookahead: f64) -> [f64; 2] {
    let d = |s: &VehicleState| (s.x - state.x).hypot(s.y - state.y);
    let nearest = (0..path.len()).min_by(|&a, &b| d(&path[a]).total_cmp(&d(&path[b]))).unwrap_or(0);
    path[nearest..].iter().find(|s| d(s) >= lookahead).unwrap_or(&path[path.len() - 1]).position()
}

/// Steering `atan(2 L sin α / ℓ_d)` toward the lookahead point and
/// proportional speed control.
pub fn pure_pursuit(
    state: &VehicleState,
    path: &ReferencePath,
    cfg: &PurePursuitConfig,
    p: &VehicleParams,
) -> ControlInput {
    let target = lookahead_point(state, &path.states, cfg.lookahead);
    let alpha = wrap_angle((target[1] - state.y).atan2(target[0] - state.x) - state.yaw);
    let steer = (2.0 * p.wheelbase() * alpha.sin() / cfg.lookahead).atan();
    ControlInput { steer, accel: cfg.speed_gain * (cfg.speed - state.vx) }.clamped(p)
}
