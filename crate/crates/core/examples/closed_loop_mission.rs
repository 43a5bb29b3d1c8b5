//! One obstacle layout driven by all three stacks: the predictive planner
//! with MPPI, and the two A* + pure pursuit baselines.
//!
//! cargo run --example closed_loop_mission -- [layout_seed]

use offroad_nav::cli::{train_registry, ScenarioConfig};
use offroad_nav::sim_world::{run_mission, Stack};

fn main() -> offroad_nav::Result<()> {
    let layout = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = ScenarioConfig::default();
    let (registry, _) = train_registry(&cfg)?;
    let world = cfg.world(layout)?;

    for stack in Stack::ALL {
        let (log, timing) = run_mission(&world, &cfg.mission, stack, &registry, &cfg.stacks, &cfg.vehicle, layout);
        let end = log.final_state().unwrap();
        let plan_ms = timing.plan_ms.iter().sum::<f64>() / timing.plan_ms.len().max(1) as f64;
        println!(
            "{stack:<9} {:?} after {:.1} s, {:.1} m driven, ended at ({:.1},{:.1}) on {}, mean plan {plan_ms:.1} ms",
            log.outcome,
            log.duration,
            log.path_length,
            end.x,
            end.y,
            log.final_terrain.map_or("-", |c| c.name())
        );
        if let Some(detail) = &log.failure_detail {
            println!("          {detail}");
        }
    }
    Ok(())
}
