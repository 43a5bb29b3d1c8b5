//! Builds the default hill + mud scenario and prints its traversability map.
//!
//! cargo run --example terrain_costmap -- [layout_seed]

use offroad_nav::sim_world::ScenarioParams;
use offroad_nav::terrain::TerrainClass;

fn main() -> offroad_nav::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let world = ScenarioParams { layout_seed: seed, ..Default::default() }.build()?;
    let maps = &world.maps;
    let g = maps.geometry();
    let (lo, hi) = maps.elevation.min_max();
    println!(
        "{}x{} cells at {} m, elevation {lo:.2}..{hi:.2} m, {} obstacles",
        g.width,
        g.height,
        g.resolution,
        world.obstacles.len()
    );

    // two cells per character keeps the map on one screen
    for row in (0..g.height).rev().step_by(2) {
        let line: String = (0..g.width)
            .step_by(2)
            .map(|col| {
                let c = maps.cost.get(col, row);
                match (c, maps.classes.get(col, row)) {
                    (c, _) if c > 0.6 => '#',
                    (c, _) if c > 0.2 => '+',
                    (_, TerrainClass::Mud) => '~',
                    _ => '.',
                }
            })
            .collect();
        println!("{line}");
    }

    let mud = maps.classes.labels().iter().filter(|&&c| c == TerrainClass::Mud).count();
    println!("mud cells: {mud} of {}", g.len());
    for (x, y) in [(3.0, 10.0), (20.25, 5.5), (20.25, 2.25)] {
        let a = maps.attitude_at(x, y, 0.0)?;
        println!("({x:5.2},{y:5.2}) cost {:.3} roll {:+.3} pitch {:+.3}", maps.cost.interpolate(x, y), a.roll, a.pitch);
    }
    Ok(())
}
