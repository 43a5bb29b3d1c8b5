//! The baseline pair: A* over the geometric cost of the default scenario,
//! followed by pure pursuit on the nominal model.
//!
//! cargo run --example astar_pure_pursuit

use offroad_nav::dynamics::{step, VehicleParams, VehicleState};
use offroad_nav::planner::{astar_plan, path_cost, AstarConfig};
use offroad_nav::sim_world::ScenarioParams;
use offroad_nav::tracker::{pure_pursuit, PurePursuitConfig, ReferencePath};

fn main() -> offroad_nav::Result<()> {
    let p = VehicleParams::default();
    let world = ScenarioParams::default().build()?;
    let cost = &world.maps.cost;
    let g = *cost.geometry();
    let (start, goal) = ([3.0, 8.0], [37.0, 12.0]);
    let cfg = AstarConfig::default();
    let cells = astar_plan(cost, g.cell_of(start[0], start[1]).unwrap(), g.cell_of(goal[0], goal[1]).unwrap(), &cfg)?;
    let points: Vec<[f64; 2]> = cells.iter().map(|&(c, r)| g.cell_center(c as isize, r as isize)).collect();
    println!("A*: {} cells, weighted cost {:.2}", cells.len(), path_cost(cost, &cells, &cfg));

    let pp = PurePursuitConfig::default();
    let path = ReferencePath::from_polyline(&points, pp.speed, 0.1)?;
    let mut s = VehicleState { x: start[0], y: start[1], ..Default::default() };
    let mut length = 0.0;
    for k in 0..400 {
        let u = pure_pursuit(&s, &path, &pp, &p);
        let att = world.maps.attitude_at(s.x, s.y, s.yaw)?;
        let next = step(&s, &u, &att, &p, 0.1)?;
        length += (next.x - s.x).hypot(next.y - s.y);
        s = next;
        if k % 20 == 0 {
            println!("t={:4.1} ({:6.2},{:6.2}) v {:.2} steer {:+.3}", k as f64 * 0.1, s.x, s.y, s.vx, u.steer);
        }
        if (s.x - goal[0]).hypot(s.y - goal[1]) < 1.0 {
            println!("goal reached after {:.1} s, driven {length:.1} m", (k + 1) as f64 * 0.1);
            return Ok(());
        }
    }
    println!("goal not reached; stopped at ({:.2},{:.2})", s.x, s.y);
    Ok(())
}
