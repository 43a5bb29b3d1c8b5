use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::GridMap2D;
use crate::error::{NavError, Result};

/// Steepest admissible surface: normals closer than this to horizontal are rejected.
pub const MAX_SURFACE_SLOPE: f64 = 85.0 * std::f64::consts::PI / 180.0;

/// ZYX Euler attitude of the body frame with respect to the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Attitude {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub const fn flat(yaw: f64) -> Self {
        Self { roll: 0.0, pitch: 0.0, yaw }
    }

    /// Body-to-world rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sphi, cphi) = self.roll.sin_cos();
        let (sth, cth) = self.pitch.sin_cos();
        let (spsi, cpsi) = self.yaw.sin_cos();
        Matrix3::new(
            cpsi * cth,
            cpsi * sth * sphi - spsi * cphi,
            cpsi * sth * cphi + spsi * sphi,
            spsi * cth,
            spsi * sth * sphi + cpsi * cphi,
            spsi * sth * cphi - cpsi * sphi,
            -sth,
            cth * sphi,
            cth * cphi,
        )
    }

    /// Maps body angular rates to Euler-angle rates. Singular at |pitch| = π/2.
    pub fn euler_rate_matrix(&self) -> Matrix3<f64> {
        let (sphi, cphi) = self.roll.sin_cos();
        let (sth, cth) = self.pitch.sin_cos();
        Matrix3::new(1.0, sphi * sth / cth, cphi * sth / cth, 0.0, cphi, -sphi, 0.0, sphi / cth, cphi / cth)
    }
}

#[inline]
fn central_gradient(z: &GridMap2D, col: usize, row: usize) -> (f64, f64) {
    let res = z.geometry().resolution;
    let gx = (z.get(col + 1, row) - z.get(col - 1, row)) / (2.0 * res);
    let gy = (z.get(col, row + 1) - z.get(col, row - 1)) / (2.0 * res);
    (gx, gy)
}

/// Height gradient at `(x, y)`: central differences at cell centers,
/// bilinearly blended. Requires a one-cell margin to the map border.
pub fn surface_gradient(elevation: &GridMap2D, x: f64, y: f64) -> Result<(f64, f64)> {
    let g = elevation.geometry();
    let (fx, fy) = g.continuous(x, y);
    let hi_x = g.width as f64 - 2.0;
    let hi_y = g.height as f64 - 2.0;
    if !(fx >= 1.0 && fx <= hi_x && fy >= 1.0 && fy <= hi_y) {
        return Err(NavError::OutOfBounds { x, y });
    }
    let c0 = (fx.floor() as usize).min(g.width - 3);
    let r0 = (fy.floor() as usize).min(g.height - 3);
    let tx = fx - c0 as f64;
    let ty = fy - r0 as f64;
    let (g00x, g00y) = central_gradient(elevation, c0, r0);
    let (g10x, g10y) = central_gradient(elevation, c0 + 1, r0);
    let (g01x, g01y) = central_gradient(elevation, c0, r0 + 1);
    let (g11x, g11y) = central_gradient(elevation, c0 + 1, r0 + 1);
    let blend =
        |a: f64, b: f64, c: f64, d: f64| (a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty;
    Ok((blend(g00x, g10x, g01x, g11x), blend(g00y, g10y, g01y, g11y)))
}

/// Unit upward normal of the elevation surface at `(x, y)`.
pub fn surface_normal(elevation: &GridMap2D, x: f64, y: f64) -> Result<Vector3<f64>> {
    let (gx, gy) = surface_gradient(elevation, x, y)?;
    Ok(Vector3::new(-gx, -gy, 1.0).normalize())
}

/// Roll and pitch that align the body z-axis with `normal` at the given yaw.
pub fn attitude_from_normal(normal: &Vector3<f64>, yaw: f64) -> Result<Attitude> {
    if !(normal.z > MAX_SURFACE_SLOPE.cos()) {
        return Err(NavError::SlopeCap { nz: normal.z });
    }
    let (s, c) = yaw.sin_cos();
    // normal expressed in the yaw-only frame is (sθcφ, −sφ, cθcφ)
    let nx = c * normal.x + s * normal.y;
    let ny = -s * normal.x + c * normal.y;
    let roll = (-ny).clamp(-1.0, 1.0).asin();
    let pitch = nx.atan2(normal.z);
    Ok(Attitude { roll, pitch, yaw })
}
