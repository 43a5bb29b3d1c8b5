//! Predictive-path-distribution planner and the grid A* baseline.

mod astar;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use astar::{astar_plan, hybrid_cost_map, path_cost, AstarConfig, CellPath};

use crate::dynamics::{self, ControlInput, VehicleParams, VehicleState};
use crate::error::{NavError, Result};
use crate::gp::{gp_features, GpRegistry};
use crate::terrain::{submap, Attitude, GridMap2D, TerrainMaps};

pub type Point = [f64; 2];
pub type Cov2 = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub steer_count: usize,
    pub accel_count: usize,
    /// Accelerations are spaced uniformly over `[-accel_span, accel_span]`.
    pub accel_span: f64,
    pub samples: usize,
    pub horizon: usize,
    pub dt: f64,
    /// Side length of the smoothing window in cells (odd).
    pub kernel_size: usize,
    pub rollover_threshold: f64,
    pub w_gp: f64,
    pub w_e: f64,
    pub w_dist: f64,
    /// Added to every predictive covariance (m²).
    pub cov_reg: f64,
    /// Candidate accelerations are reduced so the horizon-end speed stays at
    /// or below this value (m/s).
    pub speed_limit: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            steer_count: 21,
            accel_count: 3,
            accel_span: 1.0,
            samples: 20,
            horizon: 30,
            dt: 0.1,
            kernel_size: 5,
            rollover_threshold: 0.3,
            w_gp: 1.0,
            w_e: 0.05,
            w_dist: 1.5,
            cov_reg: 1e-6,
            speed_limit: 3.0,
        }
    }
}

impl PlannerConfig {
    pub fn candidate_count(&self) -> usize {
        self.steer_count * self.accel_count
    }

    pub fn validate(&self) -> Result<()> {
        if self.steer_count == 0 || self.accel_count == 0 || self.samples == 0 || self.horizon == 0 {
            return Err(NavError::Config("planner grid sizes, samples and horizon must be at least 1".into()));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(NavError::Config("planner kernel_size must be odd".into()));
        }
        if !(self.cov_reg > 0.0) || !(self.dt > 0.0) || !(self.accel_span >= 0.0) {
            return Err(NavError::Config("planner cov_reg and dt must be positive".into()));
        }
        Ok(())
    }
}

/// States and the terrain attitude under each of them. A truncated rollout
/// stopped early because it left the map or hit the slope cap.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub states: Vec<VehicleState>,
    pub attitudes: Vec<Attitude>,
    pub truncated: bool,
}

impl Rollout {
    pub fn positions(&self) -> Vec<Point> {
        self.states[1..].iter().map(VehicleState::position).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathCandidate {
    pub index: usize,
    pub input: ControlInput,
    pub nominal: Rollout,
    pub samples: Vec<Rollout>,
    /// Predictive mean and covariance for steps `1..=N`.
    pub means: Vec<Point>,
    pub covariances: Vec<Cov2>,
    pub t_gp: Vec<f64>,
    pub deviation: Vec<f64>,
    pub cost: f64,
    pub t_dist: f64,
    pub safe: bool,
}

impl PathCandidate {
    pub fn truncated(&self) -> bool {
        self.nominal.truncated || self.samples.iter().any(|s| s.truncated)
    }

    pub fn score(&self, cfg: &PlannerConfig) -> f64 {
        self.cost + cfg.w_dist * self.t_dist
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub selected: Option<usize>,
    pub command: ControlInput,
    /// Nominal rollout of the selected candidate; empty on fallback.
    pub path: Vec<VehicleState>,
    pub fallback: bool,
    pub candidates: Vec<PathCandidate>,
}

/// Cartesian grid of constant inputs, steering outermost.
pub fn sample_inputs(cfg: &PlannerConfig, p: &VehicleParams) -> Vec<ControlInput> {
    let spaced = |count: usize, half: f64| -> Vec<f64> {
        if count == 1 {
            vec![0.0]
        } else {
            let span = (count - 1) as f64;
            (0..count).map(|j| half * (2.0 * j as f64 - span) / span).collect()
        }
    };
    let steers = spaced(cfg.steer_count, p.max_steer);
    let accels = spaced(cfg.accel_count, cfg.accel_span);
    steers.iter().flat_map(|&steer| accels.iter().map(move |&accel| ControlInput { steer, accel })).collect()
}

fn limit_speed(input: ControlInput, start: &VehicleState, cfg: &PlannerConfig) -> ControlInput {
    let t = cfg.horizon as f64 * cfg.dt;
    let cap = (cfg.speed_limit - start.vx) / t;
    ControlInput { steer: input.steer, accel: input.accel.min(cap) }
}

fn start_rollout(start: &VehicleState, maps: &TerrainMaps) -> (Rollout, Option<Attitude>) {
    match maps.attitude_at(start.x, start.y, start.yaw) {
        Ok(att) => (Rollout { states: vec![*start], attitudes: vec![att], truncated: false }, Some(att)),
        Err(_) => (Rollout { states: vec![*start], attitudes: vec![Attitude::flat(start.yaw)], truncated: true }, None),
    }
}

/// Propagates the nominal model for `cfg.horizon` steps, re-deriving the
/// attitude from the terrain after every step.
pub fn rollout_nominal(
    start: &VehicleState,
    input: &ControlInput,
    maps: &TerrainMaps,
    cfg: &PlannerConfig,
    p: &VehicleParams,
) -> Rollout {
    let (mut out, att) = start_rollout(start, maps);
    let Some(mut att) = att else { return out };
    let mut s = *start;
    for _ in 0..cfg.horizon {
        let next = match dynamics::step(&s, input, &att, p, cfg.dt) {
            Ok(n) => n,
            Err(_) => {
                out.truncated = true;
                break;
            }
        };
        match maps.attitude_at(next.x, next.y, next.yaw) {
            Ok(a) => {
                s = next;
                att = a;
                out.states.push(s);
                out.attitudes.push(att);
            }
            Err(_) => {
                out.truncated = true;
                break;
            }
        }
    }
    out
}

/// `cfg.samples` GP-perturbed rollouts of one candidate. Sample `m` of
/// candidate `candidate` draws from its own stream of the master `seed`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_predictive(
    start: &VehicleState,
    input: &ControlInput,
    maps: &TerrainMaps,
    registry: &GpRegistry,
    cfg: &PlannerConfig,
    p: &VehicleParams,
    seed: u64,
    candidate: usize,
) -> Result<Vec<Rollout>> {
    let mut scratch = Vec::new();
    (0..cfg.samples)
        .map(|m| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((candidate * cfg.samples + m) as u64);
            let (mut out, att) = start_rollout(start, maps);
            let Some(mut att) = att else { return Ok(out) };
            let mut s = *start;
            for _ in 0..cfg.horizon {
                let class = maps.class_at(s.x, s.y).ok_or(NavError::OutOfBounds { x: s.x, y: s.y })?;
                let model = registry.get(class)?;
                let Ok(mut next) = dynamics::step(&s, input, &att, p, cfg.dt) else {
                    out.truncated = true;
                    break;
                };
                let g = model.sample_with(&gp_features(&s, input, &att), &mut rng, &mut scratch);
                next.vx = (next.vx + g[0]).max(0.0);
                next.vy += g[1];
                next.yaw_rate += g[2];
                match maps.attitude_at(next.x, next.y, next.yaw) {
                    Ok(a) => {
                        s = next;
                        att = a;
                        out.states.push(s);
                        out.attitudes.push(att);
                    }
                    Err(_) => {
                        out.truncated = true;
                        break;
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// Per-step sample mean and unbiased covariance (plus `eps·I`) of the
/// sampled positions. `samples[m][k]` is sample `m` at step `k`.
pub fn distribution_moments(samples: &[Vec<Point>], eps: f64) -> Result<(Vec<Point>, Vec<Cov2>)> {
    let m = samples.len();
    if m < 2 {
        return Err(NavError::InsufficientSamples { needed: 2, got: m });
    }
    let steps = samples.iter().map(Vec::len).min().unwrap_or(0);
    let mut means = Vec::with_capacity(steps);
    let mut covs = Vec::with_capacity(steps);
    for k in 0..steps {
        let mx = samples.iter().map(|s| s[k][0]).sum::<f64>() / m as f64;
        let my = samples.iter().map(|s| s[k][1]).sum::<f64>() / m as f64;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for s in samples {
            let (dx, dy) = (s[k][0] - mx, s[k][1] - my);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        let d = (m - 1) as f64;
        means.push([mx, my]);
        covs.push([[sxx / d + eps, sxy / d], [sxy / d, syy / d + eps]]);
    }
    Ok((means, covs))
}

fn inverse2(c: &Cov2) -> Cov2 {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]]
}

/// Cost of the `size`×`size` window around `mean`, weighted by the normal
/// density `N(mean, cov)` at the cell centres and normalised to sum one.
pub fn smoothed_traversability(mean: Point, cov: &Cov2, cost: &GridMap2D, size: usize, fill: f64) -> f64 {
    let patch = submap(cost, mean, size, fill);
    let inv = inverse2(cov);
    let mut logw = Vec::with_capacity(size * size);
    let mut max = f64::NEG_INFINITY;
    for c in &patch.centers {
        let (dx, dy) = (c[0] - mean[0], c[1] - mean[1]);
        let q = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy);
        let l = -0.5 * q;
        max = max.max(l);
        logw.push(l);
    }
    // weighted mean written as an offset from the patch minimum, so a
    // constant patch is reproduced exactly
    let lo = patch.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = patch.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (l, v) in logw.iter().zip(&patch.values) {
        let w = (l - max).exp();
        num += w * (v - lo);
        den += w;
    }
    (lo + num / den).min(hi)
}

/// `sqrt(dᵀ Σ⁻¹ d)` between the nominal position and the predictive mean.
pub fn mahalanobis_deviation(nominal: &VehicleState, mean: Point, cov: &Cov2) -> f64 {
    let inv = inverse2(cov);
    let (dx, dy) = (nominal.x - mean[0], nominal.y - mean[1]);
    let q = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy);
    q.max(0.0).sqrt()
}

pub fn candidate_cost(t_gp: &[f64], deviation: &[f64], cfg: &PlannerConfig) -> f64 {
    t_gp.iter().zip(deviation).map(|(t, e)| cfg.w_gp * t + cfg.w_e * e).sum()
}

fn rollout_within(r: &Rollout, input: &ControlInput, threshold: f64, p: &VehicleParams) -> bool {
    r.states
        .iter()
        .zip(&r.attitudes)
        .skip(1)
        .all(|(s, a)| dynamics::rollover_index(s, input, a, p).is_ok_and(|v| v <= threshold))
}

/// Indices of candidates whose nominal rollout and every predictive sample
/// stay at or below `threshold` over steps `1..=N` and were not truncated.
pub fn safe_set(candidates: &[PathCandidate], threshold: f64, p: &VehicleParams) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            !c.truncated()
                && rollout_within(&c.nominal, &c.input, threshold, p)
                && c.samples.iter().all(|s| rollout_within(s, &c.input, threshold, p))
        })
        .map(|(i, _)| i)
        .collect()
}

/// Closest approach of the nominal path (steps `1..=N`) to `goal`.
pub fn distance_to_goal(nominal: &Rollout, goal: Point) -> f64 {
    nominal.states[1..].iter().map(|s| (s.x - goal[0]).hypot(s.y - goal[1])).fold(f64::INFINITY, f64::min)
}

/// Lowest `T_i + w_dist·T_dist` over `safe`; ties go to the smaller steering
/// magnitude, then the smaller index. An empty safe set yields a full-brake,
/// zero-steer fallback.
pub fn select_best(
    candidates: Vec<PathCandidate>,
    safe: &[usize],
    cfg: &PlannerConfig,
    p: &VehicleParams,
) -> PlanResult {
    let best = safe.iter().copied().min_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        ca.score(cfg)
            .total_cmp(&cb.score(cfg))
            .then(ca.input.steer.abs().total_cmp(&cb.input.steer.abs()))
            .then(a.cmp(&b))
    });
    match best {
        Some(i) => PlanResult {
            selected: Some(i),
            command: candidates[i].input,
            path: candidates[i].nominal.states.clone(),
            fallback: false,
            candidates,
        },
        None => PlanResult {
            selected: None,
            command: ControlInput { steer: 0.0, accel: p.min_accel },
            path: Vec::new(),
            fallback: true,
            candidates,
        },
    }
}

/// Rollouts, moments and cost terms for one candidate.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_candidate(
    index: usize,
    input: ControlInput,
    start: &VehicleState,
    goal: Point,
    maps: &TerrainMaps,
    registry: &GpRegistry,
    cfg: &PlannerConfig,
    p: &VehicleParams,
    seed: u64,
) -> Result<PathCandidate> {
    let nominal = rollout_nominal(start, &input, maps, cfg, p);
    let samples = rollout_predictive(start, &input, maps, registry, cfg, p, seed, index)?;
    let mut cand = PathCandidate {
        index,
        input,
        t_dist: f64::INFINITY,
        nominal,
        samples,
        means: Vec::new(),
        covariances: Vec::new(),
        t_gp: Vec::new(),
        deviation: Vec::new(),
        cost: f64::INFINITY,
        safe: false,
    };
    if cand.nominal.states.len() > 1 {
        cand.t_dist = distance_to_goal(&cand.nominal, goal);
    }
    if cand.truncated() {
        return Ok(cand);
    }
    let positions: Vec<Vec<Point>> = cand.samples.iter().map(Rollout::positions).collect();
    let (means, covs) = distribution_moments(&positions, cfg.cov_reg)?;
    let fill = maps.t_max();
    cand.t_gp = means
        .iter()
        .zip(&covs)
        .map(|(m, c)| smoothed_traversability(*m, c, &maps.cost, cfg.kernel_size, fill))
        .collect();
    cand.deviation = cand.nominal.states[1..]
        .iter()
        .zip(means.iter().zip(&covs))
        .map(|(s, (m, c))| mahalanobis_deviation(s, *m, c))
        .collect();
    cand.cost = candidate_cost(&cand.t_gp, &cand.deviation, cfg);
    cand.means = means;
    cand.covariances = covs;
    Ok(cand)
}

/// One full planning call: sample inputs, evaluate every candidate in
/// parallel, filter by rollover and select.
pub fn plan(
    start: &VehicleState,
    goal: Point,
    maps: &TerrainMaps,
    registry: &GpRegistry,
    cfg: &PlannerConfig,
    p: &VehicleParams,
    seed: u64,
) -> Result<PlanResult> {
    cfg.validate()?;
    let inputs: Vec<ControlInput> = sample_inputs(cfg, p).into_iter().map(|u| limit_speed(u, start, cfg)).collect();
    let mut candidates = inputs
        .into_par_iter()
        .enumerate()
        .map(|(i, u)| evaluate_candidate(i, u, start, goal, maps, registry, cfg, p, seed))
        .collect::<Result<Vec<_>>>()?;
    let safe = safe_set(&candidates, cfg.rollover_threshold, p);
    for &i in &safe {
        candidates[i].safe = true;
    }
    Ok(select_best(candidates, &safe, cfg, p))
}
