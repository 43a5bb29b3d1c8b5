//! The comparative experiment: every stack on a batch of seeded obstacle
//! layouts, summarised as successes and mean path length.
//!
//! cargo run --release --example experiment_table -- [trials]

use offroad_nav::cli::{run_trials, train_registry, ScenarioConfig};
use offroad_nav::sim_world::Stack;

fn main() -> offroad_nav::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = ScenarioConfig { trials, ..Default::default() };
    let (registry, classes) = train_registry(&cfg)?;
    for c in &classes {
        println!("{}: {} samples", c.class, c.samples);
    }
    let t = std::time::Instant::now();
    let (report, _) = run_trials(&cfg, &Stack::ALL, &registry)?;
    for row in &report.rows {
        println!("{:<9} layout {:2} {:?} {:.1} m", row.stack.name(), row.layout_seed, row.outcome, row.path_length);
    }
    print!("{}", report.table());
    println!("{trials} layouts in {:.0} s", t.elapsed().as_secs_f64());
    Ok(())
}
