//! Steady left turn on flat ground and across a side slope, with the vertical
//! loads and rollover index along the way.
//!
//! cargo run --example vehicle_dynamics

use offroad_nav::dynamics::{rollover_index, step, terrain_forces, ControlInput, VehicleParams, VehicleState};
use offroad_nav::sim_world::{ScenarioParams, WorldPreset};

fn main() -> offroad_nav::Result<()> {
    let p = VehicleParams::default();
    let input = ControlInput { steer: 0.25, accel: 0.0 };
    let world = ScenarioParams { preset: WorldPreset::Hill, ..Default::default() }.build()?;

    for (label, start) in [("flat", [5.0, 5.0]), ("hill", [16.5, 5.0])] {
        println!("{label}:");
        let mut s = VehicleState { x: start[0], y: start[1], vx: 2.5, ..Default::default() };
        for k in 0..=30 {
            let att = world.maps.attitude_at(s.x, s.y, s.yaw)?;
            if k % 5 == 0 {
                let f = terrain_forces(&s, &input, &att, &p);
                let r = rollover_index(&s, &input, &att, &p)?;
                println!(
                    "  t={:.1} pos ({:6.2},{:6.2}) yaw {:+.2} vy {:+.3} Fz ({:5.1},{:5.1}) N  R {:+.3}",
                    k as f64 * 0.1,
                    s.x,
                    s.y,
                    s.yaw,
                    s.vy,
                    f.load_front,
                    f.load_rear,
                    r
                );
            }
            s = step(&s, &input, &att, &p, 0.1)?;
        }
    }
    Ok(())
}
