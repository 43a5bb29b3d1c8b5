use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{true_step, TerrainWorld};
use crate::dynamics::{rollover_index, ControlInput, VehicleParams, VehicleState};
use crate::error::{NavError, Result};
use crate::gp::GpRegistry;
use crate::planner::{astar_plan, hybrid_cost_map, plan, AstarConfig, PlannerConfig};
use crate::terrain::{GridMap2D, TerrainClass};
use crate::tracker::{mppi_step, pure_pursuit, MppiConfig, PurePursuitConfig, ReferencePath};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stack {
    /// Predictive planner at 3 Hz with MPPI tracking.
    Proposed,
    /// A* once on geometric cost, pure pursuit.
    Baseline1,
    /// Receding A* on the hybrid geometric + semantic cost, pure pursuit.
    Baseline2,
}

impl Stack {
    pub const ALL: [Stack; 3] = [Stack::Proposed, Stack::Baseline1, Stack::Baseline2];

    pub fn name(self) -> &'static str {
        match self {
            Stack::Proposed => "proposed",
            Stack::Baseline1 => "baseline1",
            Stack::Baseline2 => "baseline2",
        }
    }
}

impl fmt::Display for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stack {
    type Err = NavError;

    fn from_str(s: &str) -> Result<Self> {
        Stack::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| NavError::Config(format!("unknown stack `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionSpec {
    /// `(x, y, yaw)`; the vehicle starts at rest.
    pub start: [f64; 3],
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub time_limit: f64,
    /// The run counts as a rollover once the true rollover index exceeds this.
    pub rollover_limit: f64,
}

impl Default for MissionSpec {
    fn default() -> Self {
        Self { start: [3.0, 8.0, 0.0], goal: [37.0, 12.0], goal_radius: 1.0, time_limit: 40.0, rollover_limit: 1.0 }
    }
}

impl MissionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.goal_radius > 0.0) || !(self.time_limit > 0.0) {
            return Err(NavError::Config("goal radius and time limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub sim_dt: f64,
    pub control_period: f64,
    pub plan_period: f64,
    pub planner: PlannerConfig,
    pub mppi: MppiConfig,
    pub pure_pursuit: PurePursuitConfig,
    pub astar: AstarConfig,
    /// Semantic penalty added to mud cells in the hybrid cost map.
    pub mud_penalty: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            sim_dt: 0.02,
            control_period: 0.1,
            plan_period: 1.0 / 3.0,
            planner: PlannerConfig::default(),
            mppi: MppiConfig::default(),
            pure_pursuit: PurePursuitConfig::default(),
            astar: AstarConfig::default(),
            mud_penalty: 0.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Collision,
    Rollover,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSample {
    pub t: f64,
    pub state: VehicleState,
    pub command: ControlInput,
    pub terrain: Option<TerrainClass>,
}

/// One planning event. `path` holds the planned positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub t: f64,
    pub fallback: bool,
    pub selected: Option<usize>,
    pub safe_count: usize,
    pub path: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub stack: Stack,
    pub seed: u64,
    pub outcome: Outcome,
    pub failure_detail: Option<String>,
    /// Terrain under the vehicle when the run ended.
    pub final_terrain: Option<TerrainClass>,
    pub duration: f64,
    pub path_length: f64,
    pub samples: Vec<TrialSample>,
    pub plans: Vec<PlanRecord>,
}

impl TrialLog {
    pub fn success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn final_state(&self) -> Option<&VehicleState> {
        self.samples.last().map(|s| &s.state)
    }

    /// `t,x,y,yaw,vx,vy,yaw_rate,steer,accel,terrain` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,yaw,vx,vy,yaw_rate,steer,accel,terrain\n");
        for s in &self.samples {
            let st = &s.state;
            let terrain = s.terrain.map_or("none", |c| c.name());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                s.t, st.x, st.y, st.yaw, st.vx, st.vy, st.yaw_rate, s.command.steer, s.command.accel, terrain
            ));
        }
        out
    }
}

/// Wall-clock latencies in milliseconds, kept out of the log so logs stay
/// reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionTimings {
    pub plan_ms: Vec<f64>,
    pub track_ms: Vec<f64>,
}

fn cell_path_to_polyline(cost: &GridMap2D, cells: &[(usize, usize)], start: [f64; 2]) -> Vec<[f64; 2]> {
    let g = cost.geometry();
    let mut pts = vec![start];
    pts.extend(cells.iter().skip(1).map(|&(c, r)| g.cell_center(c as isize, r as isize)));
    pts
}

fn grid_plan(
    cost: &GridMap2D,
    state: &VehicleState,
    goal: [f64; 2],
    astar: &AstarConfig,
    pp: &PurePursuitConfig,
    dt: f64,
) -> Result<ReferencePath> {
    let g = cost.geometry();
    let start = g.cell_of(state.x, state.y).ok_or(NavError::OutOfBounds { x: state.x, y: state.y })?;
    let target = g.cell_of(goal[0], goal[1]).ok_or(NavError::OutOfBounds { x: goal[0], y: goal[1] })?;
    let cells = astar_plan(cost, start, target, astar)?;
    ReferencePath::from_polyline(&cell_path_to_polyline(cost, &cells, state.position()), pp.speed, dt)
}

struct Tracking {
    reference: ReferencePath,
    t_plan: f64,
    warm: Vec<ControlInput>,
}

/// Runs one closed-loop mission. Every failure mode becomes an outcome.
pub fn run_mission(
    world: &TerrainWorld,
    mission: &MissionSpec,
    stack: Stack,
    registry: &GpRegistry,
    cfg: &MissionConfig,
    p: &VehicleParams,
    seed: u64,
) -> (TrialLog, MissionTimings) {
    let mut sim_rng = ChaCha8Rng::seed_from_u64(seed);
    sim_rng.set_stream(1);
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    seeds.set_stream(2);
    let mut timings = MissionTimings::default();
    let mut log = TrialLog {
        stack,
        seed,
        outcome: Outcome::Timeout,
        failure_detail: None,
        final_terrain: None,
        duration: 0.0,
        path_length: 0.0,
        samples: Vec::new(),
        plans: Vec::new(),
    };
    let mut state =
        VehicleState { x: mission.start[0], y: mission.start[1], yaw: mission.start[2], ..Default::default() };
    let steps = (mission.time_limit / cfg.sim_dt).round() as usize;
    let control_every = (cfg.control_period / cfg.sim_dt).round().max(1.0) as usize;
    let hybrid =
        (stack == Stack::Baseline2).then(|| hybrid_cost_map(&world.maps, cfg.astar.blocked_threshold, cfg.mud_penalty));
    let hybrid_astar = AstarConfig { blocked_threshold: f64::INFINITY, ..cfg.astar };
    let mut command = ControlInput::default();
    let mut tracking: Option<Tracking> = None;
    let mut grid_path: Option<ReferencePath> = None;
    let mut next_plan = 0.0;
    let mut detail = None;
    let radius = p.footprint_radius();

    'run: for k in 0..steps {
        let t = k as f64 * cfg.sim_dt;
        let due = t + 1e-9 >= next_plan;
        match stack {
            Stack::Proposed if due => {
                next_plan += cfg.plan_period;
                let started = Instant::now();
                let result = plan(&state, mission.goal, &world.maps, registry, &cfg.planner, p, seeds.next_u64());
                timings.plan_ms.push(started.elapsed().as_secs_f64() * 1e3);
                match result {
                    Ok(r) => {
                        log.plans.push(PlanRecord {
                            t,
                            fallback: r.fallback,
                            selected: r.selected,
                            safe_count: r.candidates.iter().filter(|c| c.safe).count(),
                            path: r.path.iter().map(VehicleState::position).collect(),
                        });
                        tracking = match r.selected {
                            Some(_) => Some(Tracking {
                                reference: ReferencePath { dt: cfg.planner.dt, states: r.path },
                                t_plan: t,
                                warm: vec![r.command; cfg.mppi.horizon],
                            }),
                            None => {
                                command = r.command;
                                None
                            }
                        };
                    }
                    Err(e) => {
                        detail = Some(format!("planner: {e}"));
                        break 'run;
                    }
                }
            }
            Stack::Baseline1 if k == 0 => match grid_plan(
                &world.maps.cost,
                &state,
                mission.goal,
                &cfg.astar,
                &cfg.pure_pursuit,
                cfg.control_period,
            ) {
                Ok(r) => {
                    log.plans.push(PlanRecord {
                        t,
                        fallback: false,
                        selected: None,
                        safe_count: 0,
                        path: r.states.iter().map(VehicleState::position).collect(),
                    });
                    grid_path = Some(r);
                }
                Err(e) => {
                    detail = Some(format!("planner: {e}"));
                    break 'run;
                }
            },
            Stack::Baseline2 if due => {
                next_plan += cfg.plan_period;
                let started = Instant::now();
                let r = grid_plan(
                    hybrid.as_ref().unwrap(),
                    &state,
                    mission.goal,
                    &hybrid_astar,
                    &cfg.pure_pursuit,
                    cfg.control_period,
                );
                timings.plan_ms.push(started.elapsed().as_secs_f64() * 1e3);
                match r {
                    Ok(r) => {
                        log.plans.push(PlanRecord {
                            t,
                            fallback: false,
                            selected: None,
                            safe_count: 0,
                            path: r.states.iter().map(VehicleState::position).collect(),
                        });
                        grid_path = Some(r);
                    }
                    Err(_) => log.plans.push(PlanRecord {
                        t,
                        fallback: true,
                        selected: None,
                        safe_count: 0,
                        path: Vec::new(),
                    }),
                }
            }
            _ => {}
        }
        if k % control_every == 0 {
            let started = Instant::now();
            match stack {
                Stack::Proposed => {
                    if let Some(tr) = tracking.as_mut() {
                        match mppi_step(
                            &state,
                            &tr.reference,
                            t - tr.t_plan,
                            &world.maps,
                            p,
                            &cfg.mppi,
                            &tr.warm,
                            seeds.next_u64(),
                        ) {
                            Ok(out) => {
                                command = out.command;
                                tr.warm = out.warm_start;
                            }
                            Err(e) => {
                                detail = Some(format!("tracker: {e}"));
                                break 'run;
                            }
                        }
                    }
                }
                Stack::Baseline1 | Stack::Baseline2 => {
                    command = match &grid_path {
                        Some(path) => pure_pursuit(&state, path, &cfg.pure_pursuit, p),
                        None => ControlInput { steer: 0.0, accel: p.min_accel },
                    };
                }
            }
            timings.track_ms.push(started.elapsed().as_secs_f64() * 1e3);
        }
        let next = match true_step(&state, &command, world, p, cfg.sim_dt, &mut sim_rng) {
            Ok(n) => n,
            Err(e) => {
                detail = Some(format!("simulation: {e}"));
                break 'run;
            }
        };
        log.path_length += (next.x - state.x).hypot(next.y - state.y);
        state = next;
        let t_next = (k + 1) as f64 * cfg.sim_dt;
        log.samples.push(TrialSample { t: t_next, state, command, terrain: world.maps.class_at(state.x, state.y) });
        log.duration = t_next;
        if world.collides(state.x, state.y, radius) {
            log.outcome = Outcome::Collision;
            break;
        }
        let rollover = world
            .maps
            .attitude_at(state.x, state.y, state.yaw)
            .and_then(|att| rollover_index(&state, &command, &att, p));
        match rollover {
            Ok(r) if r > mission.rollover_limit => {
                log.outcome = Outcome::Rollover;
                break;
            }
            Ok(_) => {}
            Err(e) => {
                detail = Some(format!("simulation: {e}"));
                break;
            }
        }
        if (state.x - mission.goal[0]).hypot(state.y - mission.goal[1]) <= mission.goal_radius {
            log.outcome = Outcome::Success;
            break;
        }
    }
    if log.outcome == Outcome::Timeout {
        log.failure_detail = detail.or_else(|| Some("time limit".into()));
    }
    log.final_terrain = world.maps.class_at(state.x, state.y);
    (log, timings)
}
