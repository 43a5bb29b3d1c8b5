//! MPPI following a straight 20 m reference on flat grass, starting half a
//! metre off the line.
//!
//! cargo run --example mppi_tracking

use offroad_nav::dynamics::{step, ControlInput, VehicleParams, VehicleState};
use offroad_nav::sim_world::{ScenarioParams, WorldPreset};
use offroad_nav::tracker::{mppi_step, MppiConfig, ReferencePath};

fn main() -> offroad_nav::Result<()> {
    let p = VehicleParams::default();
    let world = ScenarioParams { preset: WorldPreset::Flat, ..Default::default() }.build()?;
    let cfg = MppiConfig::default();
    let reference = ReferencePath::from_polyline(&[[5.0, 10.0], [25.0, 10.0]], 2.0, cfg.dt)?;

    let mut s = VehicleState { x: 5.0, y: 10.5, vx: 2.0, ..Default::default() };
    let mut warm = vec![ControlInput { steer: 0.0, accel: 0.0 }; cfg.horizon];
    let mut sq = 0.0;
    let steps = (reference.duration() / cfg.dt) as usize;
    let t = std::time::Instant::now();
    for k in 0..steps {
        let out = mppi_step(&s, &reference, k as f64 * cfg.dt, &world.maps, &p, &cfg, &warm, k as u64)?;
        warm = out.warm_start;
        let att = world.maps.attitude_at(s.x, s.y, s.yaw)?;
        s = step(&s, &out.command, &att, &p, cfg.dt)?;
        sq += (s.y - 10.0).powi(2);
        if k % 10 == 0 {
            println!(
                "t={:4.1} x {:6.2} lateral {:+.3} steer {:+.3} accel {:+.2}",
                k as f64 * cfg.dt,
                s.x,
                s.y - 10.0,
                out.command.steer,
                out.command.accel
            );
        }
    }
    let per_step = t.elapsed().as_secs_f64() * 1e3 / steps as f64;
    println!("lateral RMS {:.3} m over {steps} steps, {per_step:.0} ms per MPPI step", (sq / steps as f64).sqrt());
    Ok(())
}
