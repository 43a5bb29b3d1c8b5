use super::*;
use crate::gp::GpRegistry;
use crate::terrain::Attitude;

fn uniform_world(class: TerrainClass, d: DisturbanceParams, w: usize, h: usize) -> TerrainWorld {
    let g = GridGeometry::new(0.5, [0.25, 0.25], w, h);
    let maps =
        TerrainMaps::new(GridMap2D::filled(g, 0.0), TerrainTypeMap::filled(g, class), TraversabilityConfig::default())
            .unwrap();
    TerrainWorld::new(maps, BTreeMap::from([(class, d)]), Vec::new()).unwrap()
}

#[test]
fn zero_disturbance_is_the_nominal_step() {
    let world = uniform_world(TerrainClass::Grass, DisturbanceParams::NONE, 40, 40);
    let p = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = VehicleState { x: 5.0, y: 5.0, yaw: 0.3, vx: 2.0, vy: 0.1, yaw_rate: 0.2 };
    let u = ControlInput { steer: 0.2, accel: 0.7 };
    let a = true_step(&s, &u, &world, &p, 0.02, &mut rng).unwrap();
    let b = dynamics::step(&s, &u, &Attitude::flat(0.3), &p, 0.02).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mud_turn_drifts_away_from_the_nominal() {
    let p = VehicleParams::default();
    let mud = DisturbanceParams { noise: [0.0; 3], ..DisturbanceParams::mud() };
    let world = uniform_world(TerrainClass::Mud, mud, 80, 80);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let u = ControlInput { steer: 0.2, accel: 0.0 };
    let mut s_true = VehicleState { x: 20.0, y: 20.0, vx: 2.0, ..Default::default() };
    let mut s_nom = s_true;
    let mut devs = Vec::new();
    for k in 1..=100 {
        s_true = true_step(&s_true, &u, &world, &p, 0.02, &mut rng).unwrap();
        s_nom = dynamics::step(&s_nom, &u, &Attitude::flat(s_nom.yaw), &p, 0.02).unwrap();
        if k % 25 == 0 {
            devs.push((s_true.x - s_nom.x).hypot(s_true.y - s_nom.y));
        }
    }
    assert!(devs[0] > 0.0);
    assert!(devs.windows(2).all(|w| w[1] > w[0]), "{devs:?}");
}

#[test]
fn true_step_is_reproducible() {
    let world = ScenarioParams::default().build().unwrap();
    let p = VehicleParams::default();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = VehicleState { x: 15.0, y: 8.0, vx: 1.5, ..Default::default() };
        for _ in 0..50 {
            s = true_step(&s, &ControlInput { steer: 0.1, accel: 0.2 }, &world, &p, 0.02, &mut rng).unwrap();
        }
        s
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn leaving_the_map_is_an_error() {
    let world = uniform_world(TerrainClass::Grass, DisturbanceParams::NONE, 10, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = VehicleState { x: 30.0, y: 1.0, ..Default::default() };
    assert!(true_step(&s, &ControlInput::default(), &world, &VehicleParams::default(), 0.02, &mut rng).is_err());
}

#[test]
fn flat_preset_has_zero_elevation() {
    let w = ScenarioParams { preset: WorldPreset::Flat, ..Default::default() }.build().unwrap();
    assert!(w.maps.elevation.values().iter().all(|&z| z == 0.0));
    assert!(w.obstacles.is_empty());
}

#[test]
fn hill_preset_peaks_at_the_configured_height() {
    for height in [0.7, 1.5, 2.25] {
        let mut sp = ScenarioParams { preset: WorldPreset::Hill, ..Default::default() };
        sp.hill.height = height;
        sp.hill.center = [18.1, 12.3];
        let w = sp.build().unwrap();
        assert_eq!(w.maps.elevation.min_max().1, height);
    }
}

#[test]
fn obstacles_respect_clearance_and_seed() {
    let sp = ScenarioParams::default();
    let a = sp.obstacles();
    assert_eq!(a.len(), sp.obstacle_count);
    for o in &a {
        for q in [sp.start, sp.goal] {
            assert!((o.center[0] - q[0]).hypot(o.center[1] - q[1]) >= sp.clearance + o.radius);
        }
    }
    assert_eq!(a, sp.obstacles());
    assert_ne!(a, ScenarioParams { layout_seed: 1, ..sp.clone() }.obstacles());
}

#[test]
fn polygon_membership() {
    let sq = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
    assert!(point_in_polygon([1.0, 1.0], &sq));
    assert!(!point_in_polygon([3.0, 1.0], &sq));
    assert!(!point_in_polygon([1.0, -0.1], &sq));
}

#[test]
fn zero_disturbance_world_gives_near_zero_residuals() {
    let mut sp = ScenarioParams { preset: WorldPreset::Flat, ..Default::default() };
    sp.grass = DisturbanceParams::NONE;
    sp.mud_disturbance = DisturbanceParams::NONE;
    let world = sp.build().unwrap();
    let p = VehicleParams::default();
    let cfg = CollectConfig { samples: 500, ..Default::default() };
    let data = collect_training_data(&world, &p, &cfg, 1).unwrap();
    // what is left is the gap between five simulator steps and the one long
    // step of the label, which the nominal model reproduces on flat ground
    for d in data.per_class.values() {
        for (x, y) in d.inputs.iter().zip(&d.outputs) {
            let s = VehicleState { vx: x[0], vy: x[1], yaw_rate: x[2], ..Default::default() };
            let u = ControlInput { steer: x[5], accel: x[6] };
            let att = Attitude::flat(0.0);
            let mut fine = s;
            for _ in 0..5 {
                fine = dynamics::step(&fine, &u, &att, &p, 0.02).unwrap();
            }
            let coarse = dynamics::step(&s, &u, &att, &p, 0.1).unwrap();
            let want = [fine.vx - coarse.vx, fine.vy - coarse.vy, fine.yaw_rate - coarse.yaw_rate];
            assert!(y.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-9), "{y:?} vs {want:?}");
            assert!(y.iter().all(|v| v.abs() < 1e-3), "{y:?}");
        }
    }
}

#[test]
fn mud_residuals_vary_more_than_grass() {
    let world = ScenarioParams::default().build().unwrap();
    let p = VehicleParams::default();
    let cfg = CollectConfig { samples: 5000, ..Default::default() };
    let data = collect_training_data(&world, &p, &cfg, 2).unwrap();
    let var_vy = |d: &crate::gp::GpDataset| {
        let n = d.len() as f64;
        let m = d.outputs.iter().map(|y| y[1]).sum::<f64>() / n;
        d.outputs.iter().map(|y| (y[1] - m).powi(2)).sum::<f64>() / n
    };
    let grass = &data.per_class[&TerrainClass::Grass];
    let mud = &data.per_class[&TerrainClass::Mud];
    assert!(var_vy(mud) > var_vy(grass));
    assert_eq!(grass.len() + mud.len(), data.total());
    assert!(data.total() >= 5000);
}

fn short_mission(goal: [f64; 2]) -> MissionSpec {
    MissionSpec { start: [3.0, 5.0, 0.0], goal, goal_radius: 0.5, time_limit: 10.0, rollover_limit: 1.0 }
}

fn light_config() -> MissionConfig {
    let mut cfg = MissionConfig::default();
    cfg.mppi.samples = 300;
    cfg.planner.samples = 4;
    cfg
}

#[test]
fn trivial_mission_succeeds_for_every_stack() {
    let world = uniform_world(TerrainClass::Grass, DisturbanceParams::grass(), 40, 20);
    let p = VehicleParams::default();
    let reg = GpRegistry::zero_residual();
    for stack in Stack::ALL {
        let (log, _) = run_mission(&world, &short_mission([5.0, 5.0]), stack, &reg, &light_config(), &p, 0);
        assert_eq!(log.outcome, Outcome::Success, "{stack}: {:?}", log.failure_detail);
        let sum: f64 = std::iter::once(VehicleState { x: 3.0, y: 5.0, ..Default::default() })
            .chain(log.samples.iter().map(|s| s.state))
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum();
        assert!((log.path_length - sum).abs() < 1e-9);
        assert!(log.path_length > 0.0);
    }
}

#[test]
fn blocking_wall_prevents_success() {
    let g = GridGeometry::new(0.5, [0.25, 0.25], 40, 20);
    let obstacles: Vec<Obstacle> =
        (0..11).map(|i| Obstacle { center: [10.0, i as f64], radius: 0.6, height: 0.8 }).collect();
    let elevation = GridMap2D::from_fn(g, |c, r| {
        let q = g.cell_center(c as isize, r as isize);
        if obstacles.iter().any(|o| (q[0] - o.center[0]).hypot(q[1] - o.center[1]) <= o.radius) {
            0.8
        } else {
            0.0
        }
    });
    let maps =
        TerrainMaps::new(elevation, TerrainTypeMap::filled(g, TerrainClass::Grass), TraversabilityConfig::default())
            .unwrap();
    let world = TerrainWorld::new(maps, BTreeMap::from([(TerrainClass::Grass, DisturbanceParams::grass())]), obstacles)
        .unwrap();
    let p = VehicleParams::default();
    let reg = GpRegistry::zero_residual();
    for stack in [Stack::Baseline1, Stack::Baseline2] {
        let (log, _) = run_mission(&world, &short_mission([15.0, 5.0]), stack, &reg, &light_config(), &p, 0);
        assert_ne!(log.outcome, Outcome::Success);
        assert!(
            log.failure_detail.as_deref().unwrap_or("").contains("unreachable")
                || log.outcome == Outcome::Timeout
                || log.outcome == Outcome::Collision
        );
    }
}

#[test]
fn missions_are_reproducible() {
    let world = ScenarioParams::default().build().unwrap();
    let p = VehicleParams::default();
    let reg = GpRegistry::zero_residual();
    let mut cfg = light_config();
    cfg.planner.steer_count = 7;
    let spec = MissionSpec { time_limit: 3.0, ..Default::default() };
    for stack in Stack::ALL {
        let a = run_mission(&world, &spec, stack, &reg, &cfg, &p, 5).0;
        let b = run_mission(&world, &spec, stack, &reg, &cfg, &p, 5).0;
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn stack_names_round_trip() {
    for s in Stack::ALL {
        assert_eq!(s.name().parse::<Stack>().unwrap(), s);
    }
    assert!("hybrid".parse::<Stack>().is_err());
}
