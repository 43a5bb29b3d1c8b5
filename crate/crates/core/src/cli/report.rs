use serde::{Deserialize, Serialize};

use crate::sim_world::{MissionTimings, Outcome, Stack, TrialLog};
use crate::terrain::TerrainClass;

/// One trial as it appears in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub stack: Stack,
    pub trial: usize,
    pub layout_seed: u64,
    pub seed: u64,
    pub outcome: Outcome,
    pub failure_detail: Option<String>,
    pub final_terrain: Option<TerrainClass>,
    pub path_length: f64,
    pub duration: f64,
}

impl TrialRow {
    pub fn new(trial: usize, layout_seed: u64, log: &TrialLog) -> Self {
        Self {
            stack: log.stack,
            trial,
            layout_seed,
            seed: log.seed,
            outcome: log.outcome,
            failure_detail: log.failure_detail.clone(),
            final_terrain: log.final_terrain,
            path_length: log.path_length,
            duration: log.duration,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackSummary {
    pub stack: Stack,
    pub trials: usize,
    pub successes: usize,
    /// Mean path length over successful trials.
    pub mean_path_length: Option<f64>,
    pub failures_in_mud: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Self { count: v.len(), p50: rank(0.5), p95: rank(0.95), max: v[v.len() - 1] })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackTiming {
    pub stack: Stack,
    pub plan_ms: Option<Percentiles>,
    pub track_ms: Option<Percentiles>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<TrialRow>,
    pub summary: Vec<StackSummary>,
    pub timing: Vec<StackTiming>,
}

/// Per-stack aggregates, in [`Stack::ALL`] order, for stacks present in `rows`.
pub fn summarize(rows: &[TrialRow]) -> Vec<StackSummary> {
    Stack::ALL
        .into_iter()
        .filter_map(|stack| {
            let mine: Vec<&TrialRow> = rows.iter().filter(|r| r.stack == stack).collect();
            if mine.is_empty() {
                return None;
            }
            let ok: Vec<f64> = mine.iter().filter(|r| r.outcome == Outcome::Success).map(|r| r.path_length).collect();
            let mean_path_length = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            let failures_in_mud = mine
                .iter()
                .filter(|r| r.outcome != Outcome::Success && r.final_terrain == Some(TerrainClass::Mud))
                .count();
            Some(StackSummary { stack, trials: mine.len(), successes: ok.len(), mean_path_length, failures_in_mud })
        })
        .collect()
}

impl ExperimentReport {
    pub fn new(rows: Vec<TrialRow>, timings: &[(Stack, MissionTimings)]) -> Self {
        let timing = Stack::ALL
            .into_iter()
            .filter(|s| rows.iter().any(|r| r.stack == *s))
            .map(|stack| {
                let pick = |f: fn(&MissionTimings) -> &Vec<f64>| -> Vec<f64> {
                    timings.iter().filter(|(s, _)| *s == stack).flat_map(|(_, t)| f(t).iter().copied()).collect()
                };
                StackTiming {
                    stack,
                    plan_ms: Percentiles::of(&pick(|t| &t.plan_ms)),
                    track_ms: Percentiles::of(&pick(|t| &t.track_ms)),
                }
            })
            .collect();
        Self { summary: summarize(&rows), rows, timing }
    }

    /// Plain-text table in the spirit of a results table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>7} {:>10} {:>16} {:>13}\n",
            "stack", "trials", "successes", "mean length (m)", "mud failures"
        );
        for s in &self.summary {
            let len = s.mean_path_length.map_or("-".to_string(), |v| format!("{v:.2}"));
            out.push_str(&format!(
                "{:<10} {:>7} {:>10} {:>16} {:>13}\n",
                s.stack.name(),
                s.trials,
                s.successes,
                len,
                s.failures_in_mud
            ));
        }
        for t in &self.timing {
            let fmt = |p: Option<Percentiles>| {
                p.map_or("-".to_string(), |p| format!("p50 {:.1} / p95 {:.1} ms", p.p50, p.p95))
            };
            out.push_str(&format!("{:<10} plan {}, track {}\n", t.stack.name(), fmt(t.plan_ms), fmt(t.track_ms)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(stack: Stack, outcome: Outcome, len: f64, terrain: TerrainClass) -> TrialRow {
        TrialRow {
            stack,
            trial: 0,
            layout_seed: 0,
            seed: 0,
            outcome,
            failure_detail: None,
            final_terrain: Some(terrain),
            path_length: len,
            duration: 1.0,
        }
    }

    #[test]
    fn summary_counts_only_successes_in_the_mean() {
        let rows = vec![
            row(Stack::Baseline1, Outcome::Success, 30.0, TerrainClass::Grass),
            row(Stack::Baseline1, Outcome::Collision, 12.0, TerrainClass::Mud),
            row(Stack::Baseline1, Outcome::Success, 34.0, TerrainClass::Grass),
            row(Stack::Proposed, Outcome::Timeout, 3.0, TerrainClass::Grass),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].stack, Stack::Proposed);
        assert_eq!(s[0].mean_path_length, None);
        assert_eq!(s[1].successes, 2);
        assert_eq!(s[1].mean_path_length, Some(32.0));
        assert_eq!(s[1].failures_in_mud, 1);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let p = Percentiles::of(&v).unwrap();
        assert_eq!((p.p50, p.p95, p.max, p.count), (50.0, 95.0, 100.0, 100));
        assert_eq!(Percentiles::of(&[]), None);
        assert_eq!(Percentiles::of(&[7.0]).unwrap().p95, 7.0);
    }
}
