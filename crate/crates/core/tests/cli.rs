use std::path::Path;
use std::process::{Command, Output};

use offroad_nav::cli::{summarize, ExperimentReport, MapFile, ScenarioConfig};
use offroad_nav::dynamics::{ControlInput, VehicleState};
use offroad_nav::gp::{gp_features, GpRegistry};
use offroad_nav::sim_world::{DisturbanceParams, Outcome, WorldPreset};
use offroad_nav::terrain::Attitude;

fn cli(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_offroad-nav"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    v["error"].as_str().unwrap().to_string()
}

/// Small, quick training set-up.
fn quick_training() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.collect.samples = 600;
    cfg.gp.max_points = 40;
    cfg
}

/// Goal two metres ahead on flat, empty grass.
fn trivial_mission() -> ScenarioConfig {
    let mut cfg = quick_training();
    cfg.world.preset = WorldPreset::Flat;
    cfg.mission.start = [5.0, 10.0, 0.0];
    cfg.mission.goal = [7.0, 10.0];
    cfg.mission.time_limit = 10.0;
    cfg.stacks.mppi.samples = 500;
    cfg
}

#[test]
fn genmap_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = cli(&["genmap", "--seed", seed], None, out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &Path| std::fs::read(d.join("map.bin")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn genmap_presets() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.world.preset = WorldPreset::Flat;
    let flat = write_config(dir.path(), &cfg);
    assert!(cli(&["genmap"], Some(&flat), &dir.path().join("flat")).status.success());
    let map = MapFile::read(&dir.path().join("flat/map.bin")).unwrap();
    assert!(map.elevation.iter().all(|&z| z == 0.0));

    cfg.world.preset = WorldPreset::Hill;
    let hill = write_config(dir.path(), &cfg);
    assert!(cli(&["genmap"], Some(&hill), &dir.path().join("hill")).status.success());
    let map = MapFile::read(&dir.path().join("hill/map.bin")).unwrap();
    let top = map.elevation.iter().cloned().fold(f32::MIN, f32::max);
    assert_eq!(top, cfg.world.hill.height as f32);
    assert!(map.header.obstacles.is_empty());
}

#[test]
fn map_file_replaces_the_generated_world() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cli(&["genmap", "--seed", "3"], None, dir.path()).status.success());
    let cfg = ScenarioConfig { map_file: Some(dir.path().join("map.bin")), ..Default::default() };
    let loaded = cfg.world(99).unwrap();
    let generated = ScenarioConfig::default().world(3).unwrap();
    assert_eq!(loaded.obstacles, generated.obstacles);
    assert_eq!(loaded.maps.classes, generated.maps.classes);
}

#[test]
fn train_writes_one_model_per_class_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &quick_training());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = cli(&["train", "--seed", "4"], Some(&config), &a);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = cli(&["train", "--seed", "4"], Some(&config), &b);
    assert_eq!(first.stdout, second.stdout);

    let mut files: Vec<String> =
        std::fs::read_dir(a.join("models")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["gp_grass.json", "gp_mud.json"]);

    let summary: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    let total: u64 = summary.as_array().unwrap().iter().map(|c| c["samples"].as_u64().unwrap()).sum();
    assert_eq!(total, 600);
}

#[test]
fn zero_disturbance_models_predict_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_training();
    cfg.world.grass = DisturbanceParams::NONE;
    cfg.world.mud_disturbance = DisturbanceParams::NONE;
    let config = write_config(dir.path(), &cfg);
    assert!(cli(&["train"], Some(&config), dir.path()).status.success());
    let registry = GpRegistry::load_dir(&dir.path().join("models")).unwrap();
    // held-out inputs: a grid the random driving policy never visits exactly
    for class in registry.classes() {
        let model = registry.get(class).unwrap();
        for k in 0..20 {
            let f = k as f64 / 19.0;
            let s = VehicleState {
                vx: 0.5 + 2.5 * f,
                vy: 0.1 * (f - 0.5),
                yaw_rate: 0.6 * (0.5 - f),
                ..Default::default()
            };
            let u = ControlInput { steer: 0.3 * (2.0 * f - 1.0), accel: 1.0 - 2.0 * f };
            let pred = model.predict(&gp_features(&s, &u, &Attitude::default()));
            assert!(pred.mean.iter().all(|m| m.abs() < 0.01), "{class}: {:?}", pred.mean);
        }
    }
}

#[test]
fn train_rejects_a_class_with_too_few_samples() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick_training();
    cfg.world.mud = vec![[30.0, 16.0], [31.0, 16.0], [31.0, 17.0], [30.0, 17.0]];
    let config = write_config(dir.path(), &cfg);
    let out = cli(&["train"], Some(&config), dir.path());
    assert_eq!(error_kind(&out), "insufficient_data");
}

#[test]
fn run_without_models_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--trials", "1", "--stack", "proposed"], None, dir.path());
    assert_eq!(error_kind(&out), "config");
}

#[test]
fn bad_flag_is_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["run", "--stack", "teleport"], None, dir.path());
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn run_smoke_and_report_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &trivial_mission());
    assert!(cli(&["train"], Some(&config), dir.path()).status.success());

    let out = cli(&["run", "--trials", "10", "--stack", "all", "--threads", "2"], Some(&config), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: ExperimentReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 30);
    assert_eq!(summarize(&report.rows), report.summary);
    for s in &report.summary {
        assert_eq!(s.successes, 10, "{:?}", s.stack);
        let rows: Vec<_> = report.rows.iter().filter(|r| r.stack == s.stack && r.outcome == Outcome::Success).collect();
        let mean = rows.iter().map(|r| r.path_length).sum::<f64>() / rows.len() as f64;
        assert!((s.mean_path_length.unwrap() - mean).abs() < 1e-12);
    }
    let logs = std::fs::read_dir(dir.path().join("trials"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "json")
        .count();
    assert_eq!(logs, 30);
    assert!(dir.path().join("plot/paths.csv").exists());
    assert!(dir.path().join("plot/costmap_009.csv").exists());
    let proposed = report.timing.iter().find(|t| t.stack.name() == "proposed").unwrap();
    assert!(proposed.plan_ms.unwrap().count > 0 && proposed.track_ms.unwrap().p95 > 0.0);

    let table = cli(&["report"], None, dir.path());
    assert!(table.status.success());
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.contains("baseline2") && text.contains("10"));
}
