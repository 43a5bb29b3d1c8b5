//! Command-line front end: `genmap`, `train`, `run` and `report`.
//!
//! Every command is a pure function of the scenario config and `--seed`.
//! Trial `k` uses layout seed and mission seed `seed + k`; training uses the
//! layout of `seed` itself.

mod mapfile;
mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mapfile::{MapFile, MapHeader};
pub use report::{summarize, ExperimentReport, Percentiles, StackSummary, StackTiming, TrialRow};

use crate::dynamics::VehicleParams;
use crate::error::{NavError, Result};
use crate::gp::{fit, GpFitConfig, GpRegistry};
use crate::sim_world::{
    collect_training_data, run_mission, CollectConfig, MissionConfig, MissionSpec, ScenarioParams, Stack, TerrainWorld,
};
use crate::terrain::TerrainClass;

/// Fewest samples a terrain class needs before a model is fitted to it.
pub const MIN_CLASS_SAMPLES: usize = 50;

/// Everything a run depends on besides the code version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub trials: usize,
    /// Overrides the generated elevation and labels when set.
    pub map_file: Option<PathBuf>,
    pub world: ScenarioParams,
    pub vehicle: VehicleParams,
    pub mission: MissionSpec,
    pub stacks: MissionConfig,
    pub collect: CollectConfig,
    pub gp: GpFitConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10,
            map_file: None,
            world: ScenarioParams::default(),
            vehicle: VehicleParams::default(),
            mission: MissionSpec::default(),
            stacks: MissionConfig::default(),
            collect: CollectConfig::default(),
            gp: GpFitConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The world for one obstacle layout.
    pub fn world(&self, layout_seed: u64) -> Result<TerrainWorld> {
        let params = ScenarioParams { layout_seed, ..self.world.clone() };
        let generated = params.build()?;
        let Some(path) = &self.map_file else {
            return Ok(generated);
        };
        let file = MapFile::read(path)?;
        let maps = file.to_maps(self.world.traversability)?;
        TerrainWorld::new(maps, generated.disturbances, file.header.obstacles)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StackArg {
    Proposed,
    Baseline1,
    Baseline2,
    All,
}

impl StackArg {
    pub fn stacks(self) -> Vec<Stack> {
        match self {
            StackArg::Proposed => vec![Stack::Proposed],
            StackArg::Baseline1 => vec![Stack::Baseline1],
            StackArg::Baseline2 => vec![Stack::Baseline2],
            StackArg::All => Stack::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "offroad-nav", version, about = "Uncertainty-aware off-road navigation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario config (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "all")]
    pub stack: StackArg,
    /// Trial count; overrides the config.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for trials and planner internals.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the terrain map of the seed's layout to OUT/map.bin.
    Genmap,
    /// Collect driving data and fit one GP per terrain class into OUT/models.
    Train,
    /// Run trials and write OUT/report.json, OUT/trials and OUT/plot.
    Run,
    /// Print the table for OUT/report.json.
    Report,
}

impl Cli {
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        Ok(cfg)
    }
}

pub fn map_path(out: &Path) -> PathBuf {
    out.join("map.bin")
}

pub fn models_dir(out: &Path) -> PathBuf {
    out.join("models")
}

pub fn report_path(out: &Path) -> PathBuf {
    out.join("report.json")
}

pub fn cmd_genmap(cfg: &ScenarioConfig, out: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let world = cfg.world(cfg.seed)?;
    let path = map_path(out);
    MapFile::from_maps(&world.maps, &world.obstacles).write(&path)?;
    Ok(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTraining {
    pub class: TerrainClass,
    pub samples: usize,
    pub points_used: usize,
    /// Final log marginal likelihood per output.
    pub log_likelihood: Vec<f64>,
}

pub fn train_registry(cfg: &ScenarioConfig) -> Result<(GpRegistry, Vec<ClassTraining>)> {
    let world = cfg.world(cfg.seed)?;
    let classes = world.maps.classes.classes();
    if classes.len() < 2 {
        return Err(NavError::Config(format!(
            "training needs at least two terrain classes, map has {}",
            classes.len()
        )));
    }
    let data = collect_training_data(&world, &cfg.vehicle, &cfg.collect, cfg.seed)?;
    for class in &classes {
        let got = data.per_class.get(class).map_or(0, |d| d.len());
        if got < MIN_CLASS_SAMPLES {
            return Err(NavError::InsufficientSamples { needed: MIN_CLASS_SAMPLES, got });
        }
    }
    let fits = data
        .per_class
        .par_iter()
        .map(|(class, d)| {
            fit(d, class.name(), &GpFitConfig { seed: cfg.gp.seed ^ cfg.seed, ..cfg.gp }).map(|f| (*class, d.len(), f))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut registry = GpRegistry::new();
    let mut summary = Vec::new();
    for (class, samples, (model, report)) in fits {
        summary.push(ClassTraining {
            class,
            samples,
            points_used: report.points_used,
            log_likelihood: report.outputs.iter().map(|o| o.final_log_likelihood).collect(),
        });
        registry.insert(class, model);
    }
    Ok((registry, summary))
}

pub fn cmd_train(cfg: &ScenarioConfig, out: &Path) -> Result<Vec<ClassTraining>> {
    let (registry, summary) = train_registry(cfg)?;
    let dir = models_dir(out);
    std::fs::create_dir_all(&dir)?;
    registry.save_dir(&dir)?;
    Ok(summary)
}

fn load_registry(out: &Path) -> Result<GpRegistry> {
    let dir = models_dir(out);
    let registry = GpRegistry::load_dir(&dir).map_err(|e| match e {
        NavError::Io(_) => NavError::Config(format!("no trained models in {}; run `train` first", dir.display())),
        other => other,
    })?;
    if registry.is_empty() {
        return Err(NavError::Config(format!("no trained models in {}; run `train` first", dir.display())));
    }
    Ok(registry)
}

/// Runs every (stack, trial) pair and returns the report plus the logs in
/// row order.
pub fn run_trials(
    cfg: &ScenarioConfig,
    stacks: &[Stack],
    registry: &GpRegistry,
) -> Result<(ExperimentReport, Vec<crate::sim_world::TrialLog>)> {
    cfg.mission.validate()?;
    let jobs: Vec<(Stack, usize)> = stacks.iter().flat_map(|&s| (0..cfg.trials).map(move |k| (s, k))).collect();
    let worlds = (0..cfg.trials)
        .into_par_iter()
        .map(|k| cfg.world(cfg.seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(stack, k)| {
            let seed = cfg.seed.wrapping_add(k as u64);
            let (log, timing) = run_mission(&worlds[k], &cfg.mission, stack, registry, &cfg.stacks, &cfg.vehicle, seed);
            (TrialRow::new(k, seed, &log), log, (stack, timing))
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut logs = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for (row, log, timing) in results {
        rows.push(row);
        logs.push(log);
        timings.push(timing);
    }
    Ok((ExperimentReport::new(rows, &timings), logs))
}

pub fn cmd_run(cfg: &ScenarioConfig, stacks: &[Stack], out: &Path) -> Result<ExperimentReport> {
    let registry = if stacks.contains(&Stack::Proposed) { load_registry(out)? } else { GpRegistry::new() };
    let (report, logs) = run_trials(cfg, stacks, &registry)?;
    let trials = out.join("trials");
    let plot = out.join("plot");
    std::fs::create_dir_all(&trials)?;
    std::fs::create_dir_all(&plot)?;
    let mut paths = String::from("stack,trial,t,x,y\n");
    for (row, log) in report.rows.iter().zip(&logs) {
        let stem = format!("{}_{:03}", row.stack.name(), row.trial);
        std::fs::write(trials.join(format!("{stem}.json")), serde_json::to_vec(log)?)?;
        std::fs::write(trials.join(format!("{stem}.csv")), log.to_csv())?;
        for s in &log.samples {
            paths.push_str(&format!("{},{},{},{},{}\n", row.stack.name(), row.trial, s.t, s.state.x, s.state.y));
        }
    }
    std::fs::write(plot.join("paths.csv"), paths)?;
    for k in 0..cfg.trials {
        let world = cfg.world(cfg.seed.wrapping_add(k as u64))?;
        std::fs::write(plot.join(format!("costmap_{k:03}.csv")), costmap_csv(&world))?;
    }
    std::fs::write(report_path(out), serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

/// Cell centres with elevation, geometric cost and terrain class.
pub fn costmap_csv(world: &TerrainWorld) -> String {
    let maps = &world.maps;
    let g = maps.geometry();
    let mut out = String::from("x,y,elevation,cost,terrain\n");
    for row in 0..g.height {
        for col in 0..g.width {
            let [x, y] = g.cell_center(col as isize, row as isize);
            out.push_str(&format!(
                "{x},{y},{},{},{}\n",
                maps.elevation.get(col, row),
                maps.cost.get(col, row),
                maps.classes.get(col, row)
            ));
        }
    }
    out
}

pub fn cmd_report(out: &Path) -> Result<ExperimentReport> {
    let report: ExperimentReport = serde_json::from_slice(&std::fs::read(report_path(out))?)?;
    if summarize(&report.rows) != report.summary {
        return Err(NavError::Config("report summary does not match its rows".into()));
    }
    Ok(report)
}

fn execute(cli: &Cli) -> Result<String> {
    let cfg = cli.scenario()?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Genmap => {
            let path = cmd_genmap(&cfg, out)?;
            Ok(serde_json::json!({ "map": path }).to_string())
        }
        Command::Train => {
            let summary = cmd_train(&cfg, out)?;
            Ok(serde_json::to_string_pretty(&summary)?)
        }
        Command::Run => {
            let start = Instant::now();
            let report = cmd_run(&cfg, &cli.stack.stacks(), out)?;
            Ok(format!("{}wall time {:.1} s", report.table(), start.elapsed().as_secs_f64()))
        }
        Command::Report => Ok(cmd_report(out)?.table().trim_end().to_string()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures print `{"error": kind, "message": text}` on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", serde_json::json!({ "error": "usage", "message": e.to_string() }));
            return 2;
        }
    };
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| NavError::Config(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli))),
        None => execute(&cli),
    };
    match result {
        Ok(text) => {
            println!("{text}");
            0
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            1
        }
    }
}
