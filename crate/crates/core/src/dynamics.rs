//! Extended dynamic bicycle model on 3-D terrain.
//!
//! The state is `(x, y, yaw, vx, vy, yaw_rate)` with velocities in the body
//! frame. Roll and pitch are not states: callers derive them from the terrain
//! under the vehicle and hold them fixed over one [`step`].

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::terrain::Attitude;

/// Bound on `h * rho` for one RK4 substep, `rho` being a bound on the
/// spectral radius of the lateral/yaw subsystem.
const SUBSTEP_STIFFNESS: f64 = 0.4;
const MAX_SUBSTEPS: usize = 256;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Body longitudinal velocity, never negative.
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
}

impl VehicleState {
    pub const fn new(x: f64, y: f64, yaw: f64, vx: f64, vy: f64, yaw_rate: f64) -> Self {
        Self { x, y, yaw, vx, vy, yaw_rate }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.yaw, self.vx, self.vy, self.yaw_rate]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Front steering angle (rad).
    pub steer: f64,
    /// Body longitudinal acceleration (m/s²).
    pub accel: f64,
}

impl ControlInput {
    pub const fn new(steer: f64, accel: f64) -> Self {
        Self { steer, accel }
    }

    pub fn clamped(self, p: &VehicleParams) -> Self {
        Self { steer: self.steer.clamp(-p.max_steer, p.max_steer), accel: self.accel.clamp(p.min_accel, p.max_accel) }
    }
}

/// Which angle enters the gravity term of the rollover index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloverGravityAngle {
    #[default]
    Yaw,
    Roll,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub mass: f64,
    pub yaw_inertia: f64,
    /// c.g. to front axle (m).
    pub lf: f64,
    /// c.g. to rear axle (m).
    pub lr: f64,
    pub track_width: f64,
    pub cg_height: f64,
    /// c.g. height above the roll center (m).
    pub roll_center_height: f64,
    /// Cornering stiffness per unit vertical load (1/rad).
    pub cornering_front: f64,
    pub cornering_rear: f64,
    pub gravity: f64,
    pub max_steer: f64,
    pub min_accel: f64,
    pub max_accel: f64,
    /// Floor on the speed used in slip-angle denominators (m/s).
    pub min_slip_speed: f64,
    pub rollover_gravity_angle: RolloverGravityAngle,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 22.0,
            yaw_inertia: 1.2,
            lf: 0.3,
            lr: 0.3,
            track_width: 0.44,
            cg_height: 0.2,
            roll_center_height: 0.12,
            cornering_front: 4.5,
            cornering_rear: 4.5,
            gravity: 9.81,
            max_steer: 0.35,
            min_accel: -3.0,
            max_accel: 3.0,
            min_slip_speed: 0.5,
            rollover_gravity_angle: RolloverGravityAngle::Yaw,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Radius of the disc that conservatively covers the vehicle footprint.
    pub fn footprint_radius(&self) -> f64 {
        self.wheelbase().hypot(self.track_width) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("lf", self.lf),
            ("lr", self.lr),
            ("track_width", self.track_width),
            ("cg_height", self.cg_height),
            ("roll_center_height", self.roll_center_height),
            ("gravity", self.gravity),
            ("max_steer", self.max_steer),
            ("min_slip_speed", self.min_slip_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(NavError::Config(format!("vehicle parameter `{name}` must be positive")));
            }
        }
        if !(self.min_accel <= 0.0 && self.max_accel >= 0.0) {
            return Err(NavError::Config("acceleration bounds must bracket zero".into()));
        }
        Ok(())
    }
}

/// Gravity and tire forces acting on the vehicle (N).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerrainForces {
    /// Lateral component of gravity.
    pub gravity_lateral: f64,
    pub load_front: f64,
    pub load_rear: f64,
    pub lateral_front: f64,
    pub lateral_rear: f64,
}

/// Quantities that stay constant while attitude and input are frozen.
struct FrozenFrame {
    sin_roll: f64,
    cos_roll: f64,
    sin_pitch: f64,
    cos_pitch: f64,
    cos_steer: f64,
    load_front: f64,
    load_rear: f64,
    gravity_lateral: f64,
}

impl FrozenFrame {
    fn new(input: &ControlInput, att: &Attitude, p: &VehicleParams) -> Self {
        let (sin_roll, cos_roll) = att.roll.sin_cos();
        let (sin_pitch, cos_pitch) = att.pitch.sin_cos();
        let mg = p.mass * p.gravity;
        let l = p.wheelbase();
        let transfer = p.cg_height * p.mass * input.accel + p.cg_height * mg * sin_pitch;
        Self {
            sin_roll,
            cos_roll,
            sin_pitch,
            cos_pitch,
            cos_steer: input.steer.cos(),
            load_front: (p.lr * mg * cos_pitch * cos_roll + transfer) / l,
            load_rear: (p.lf * mg * cos_pitch * cos_roll - transfer) / l,
            gravity_lateral: -mg * cos_pitch * sin_roll,
        }
    }

    #[inline]
    fn lateral_forces(&self, vx: f64, vy: f64, wz: f64, steer: f64, p: &VehicleParams) -> (f64, f64) {
        let v = vx.max(p.min_slip_speed);
        let alpha_f = steer - (vy + p.lf * wz) / v;
        let alpha_r = (p.lr * wz - vy) / v;
        (p.cornering_front * self.load_front * alpha_f, p.cornering_rear * self.load_rear * alpha_r)
    }

    #[inline]
    fn derivative(&self, s: &[f64; 6], input: &ControlInput, p: &VehicleParams) -> [f64; 6] {
        let [_, _, yaw, vx, vy, wz] = *s;
        let (sin_yaw, cos_yaw) = yaw.sin_cos();
        let (fyf, fyr) = self.lateral_forces(vx, vy, wz, input.steer, p);
        // body velocity (vx, vy, 0) rotated into the world frame
        let vwx =
            cos_yaw * self.cos_pitch * vx + (cos_yaw * self.sin_pitch * self.sin_roll - sin_yaw * self.cos_roll) * vy;
        let vwy =
            sin_yaw * self.cos_pitch * vx + (sin_yaw * self.sin_pitch * self.sin_roll + cos_yaw * self.cos_roll) * vy;
        [
            vwx,
            vwy,
            self.cos_roll / self.cos_pitch * wz,
            input.accel,
            (fyf + fyr - self.gravity_lateral) / p.mass - vx * wz,
            (fyf * p.lf * self.cos_steer - p.lr * fyr) / p.yaw_inertia,
        ]
    }

    /// Spectral radius of the (vy, yaw_rate) Jacobian.
    fn stiffness(&self, vx: f64, steer_cos: f64, p: &VehicleParams) -> f64 {
        let v = vx.max(p.min_slip_speed);
        let cf = p.cornering_front * self.load_front.max(0.0);
        let cr = p.cornering_rear * self.load_rear.max(0.0);
        let a11 = -(cf + cr) / (p.mass * v);
        let a12 = -(cf * p.lf - cr * p.lr) / (p.mass * v) - vx;
        let a21 = -(cf * p.lf * steer_cos - cr * p.lr) / (p.yaw_inertia * v);
        let a22 = -(cf * p.lf * p.lf * steer_cos + cr * p.lr * p.lr) / (p.yaw_inertia * v);
        let half_tr = 0.5 * (a11 + a22);
        let det = a11 * a22 - a12 * a21;
        let disc = half_tr * half_tr - det;
        if disc >= 0.0 {
            let r = disc.sqrt();
            (half_tr + r).abs().max((half_tr - r).abs())
        } else {
            det.abs().sqrt()
        }
    }
}

fn check_attitude(att: &Attitude) -> Result<()> {
    let cos_pitch = att.pitch.cos();
    if cos_pitch <= 0.0 {
        Err(NavError::AttitudeSingularity { cos_pitch })
    } else {
        Ok(())
    }
}

/// Vertical loads, lateral gravity and linear-tire lateral forces.
pub fn terrain_forces(state: &VehicleState, input: &ControlInput, att: &Attitude, p: &VehicleParams) -> TerrainForces {
    let frame = FrozenFrame::new(input, att, p);
    let (lateral_front, lateral_rear) = frame.lateral_forces(state.vx, state.vy, state.yaw_rate, input.steer, p);
    TerrainForces {
        gravity_lateral: frame.gravity_lateral,
        load_front: frame.load_front,
        load_rear: frame.load_rear,
        lateral_front,
        lateral_rear,
    }
}

/// Time derivative of the state. Roll and pitch come from `att`; the yaw
/// used for the world-frame projection is the state's own.
pub fn state_derivative(
    state: &VehicleState,
    input: &ControlInput,
    att: &Attitude,
    p: &VehicleParams,
) -> Result<[f64; 6]> {
    check_attitude(att)?;
    Ok(FrozenFrame::new(input, att, p).derivative(&state.to_array(), input, p))
}

#[inline]
fn rk4(frame: &FrozenFrame, s: &[f64; 6], input: &ControlInput, p: &VehicleParams, h: f64) -> [f64; 6] {
    let add = |a: &[f64; 6], k: &[f64; 6], c: f64| -> [f64; 6] { std::array::from_fn(|i| a[i] + c * k[i]) };
    let k1 = frame.derivative(s, input, p);
    let k2 = frame.derivative(&add(s, &k1, 0.5 * h), input, p);
    let k3 = frame.derivative(&add(s, &k2, 0.5 * h), input, p);
    let k4 = frame.derivative(&add(s, &k3, h), input, p);
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// One classical RK4 stage of length `h`, no substepping and no clamping.
pub fn rk4_step(
    state: &VehicleState,
    input: &ControlInput,
    att: &Attitude,
    p: &VehicleParams,
    h: f64,
) -> Result<VehicleState> {
    check_attitude(att)?;
    let frame = FrozenFrame::new(input, att, p);
    Ok(VehicleState::from_array(rk4(&frame, &state.to_array(), input, p, h)))
}

/// Number of equal RK4 substeps [`step`] uses for an interval of `dt`.
pub fn substep_count(state: &VehicleState, input: &ControlInput, att: &Attitude, p: &VehicleParams, dt: f64) -> usize {
    let frame = FrozenFrame::new(input, att, p);
    let rho = frame.stiffness(state.vx, frame.cos_steer, p);
    if rho <= 0.0 {
        return 1;
    }
    ((dt * rho / SUBSTEP_STIFFNESS).ceil() as usize).clamp(1, MAX_SUBSTEPS)
}

/// Advances the state by `dt` with attitude and input held fixed.
///
/// The interval is split into equal RK4 substeps sized from the stiffness of
/// the tire dynamics at the current speed; the lateral and yaw modes scale
/// like `1 / vx` and become stiff at low speed. `vx` is floored at zero after
/// every substep.
pub fn step(
    state: &VehicleState,
    input: &ControlInput,
    att: &Attitude,
    p: &VehicleParams,
    dt: f64,
) -> Result<VehicleState> {
    check_attitude(att)?;
    debug_assert!(dt > 0.0);
    let frame = FrozenFrame::new(input, att, p);
    let rho = frame.stiffness(state.vx, frame.cos_steer, p);
    let n = if rho > 0.0 { ((dt * rho / SUBSTEP_STIFFNESS).ceil() as usize).clamp(1, MAX_SUBSTEPS) } else { 1 };
    let h = dt / n as f64;
    let mut s = state.to_array();
    for _ in 0..n {
        s = rk4(&frame, &s, input, p, h);
        if s[3] < 0.0 {
            s[3] = 0.0;
        }
    }
    Ok(VehicleState::from_array(s))
}

/// Lateral acceleration implied by the linear tire forces (m/s²).
pub fn lateral_acceleration(state: &VehicleState, input: &ControlInput, att: &Attitude, p: &VehicleParams) -> f64 {
    let f = terrain_forces(state, input, att, p);
    (f.lateral_front + f.lateral_rear) / p.mass
}

/// Normalised lateral load transfer; magnitude 1 means wheel lift-off.
pub fn rollover_index(state: &VehicleState, input: &ControlInput, att: &Attitude, p: &VehicleParams) -> Result<f64> {
    let f = terrain_forces(state, input, att, p);
    let load = f.load_front + f.load_rear;
    if !(load > 0.0) {
        return Err(NavError::DegenerateLoad { load });
    }
    let a_y = (f.lateral_front + f.lateral_rear) / p.mass;
    let angle = match p.rollover_gravity_angle {
        RolloverGravityAngle::Yaw => state.yaw,
        RolloverGravityAngle::Roll => att.roll,
    };
    let h_r = p.roll_center_height;
    let moment = (p.mass * a_y + f.gravity_lateral) * h_r - p.mass * p.gravity * h_r * angle.sin();
    Ok(2.0 * moment / (p.track_width * load))
}
