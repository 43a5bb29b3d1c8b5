//! One planning call from the edge of the mud patch with trained terrain
//! models: predictive spread, cost terms and the rollover-safe set.
//!
//! cargo run --example predictive_planning

use offroad_nav::dynamics::{VehicleParams, VehicleState};
use offroad_nav::gp::{fit, GpFitConfig, GpRegistry};
use offroad_nav::planner::{plan, PlannerConfig};
use offroad_nav::sim_world::{collect_training_data, CollectConfig, ScenarioParams};

fn main() -> offroad_nav::Result<()> {
    let p = VehicleParams::default();
    let world = ScenarioParams::default().build()?;
    let data = collect_training_data(&world, &p, &CollectConfig::default(), 0)?;
    let mut registry = GpRegistry::new();
    for (class, d) in &data.per_class {
        registry.insert(*class, fit(d, class.name(), &GpFitConfig::default())?.0);
    }

    let cfg = PlannerConfig::default();
    let start = VehicleState { x: 12.0, y: 9.5, vx: 2.0, ..Default::default() };
    let t = std::time::Instant::now();
    let result = plan(&start, [37.0, 12.0], &world.maps, &registry, &cfg, &p, 7)?;
    println!(
        "{} candidates in {:.0} ms, {} safe",
        result.candidates.len(),
        t.elapsed().as_secs_f64() * 1e3,
        result.candidates.iter().filter(|c| c.safe).count()
    );

    let mut ranked: Vec<_> = result.candidates.iter().filter(|c| c.safe).collect();
    ranked.sort_by(|a, b| a.score(&cfg).total_cmp(&b.score(&cfg)));
    println!(" idx  steer  accel   T_gp+e  T_dist  final spread (m^2)");
    for c in ranked.iter().take(8) {
        let sigma = c.covariances.last().unwrap();
        println!(
            "{:4} {:+.3} {:+.2} {:8.3} {:7.2} {:.4}",
            c.index,
            c.input.steer,
            c.input.accel,
            c.cost,
            c.t_dist,
            sigma[0][0] + sigma[1][1]
        );
    }
    match result.selected {
        Some(i) => println!("selected {i}: steer {:+.3} accel {:+.2}", result.command.steer, result.command.accel),
        None => println!("no safe candidate, braking"),
    }
    Ok(())
}
