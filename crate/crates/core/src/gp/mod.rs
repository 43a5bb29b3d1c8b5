//! Gaussian-process models of the residual between measured and predicted
//! body velocities, one model per terrain class.

mod fit;
mod linalg;
mod model;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use fit::{
    fit, fit_output, log_marginal_likelihood, log_marginal_likelihood_with_gradient, FitReport, GpFitConfig, OutputFit,
};
pub use model::{
    gp_features, GpInput, GpModel, Hyperparameters, Prediction, ScalarGp, INPUT_DIM, N_PARAMS, OUTPUT_DIM,
};

use crate::dynamics::{self, ControlInput, VehicleParams, VehicleState};
use crate::error::{NavError, Result};
use crate::terrain::{Attitude, TerrainClass};

/// Relative tolerance on the spacing of logged timestamps.
const LOG_SPACING_TOL: f64 = 1e-6;

/// Training pairs: features and velocity residuals `(e_vx, e_vy, e_omega)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GpDataset {
    pub inputs: Vec<GpInput>,
    pub outputs: Vec<[f64; OUTPUT_DIM]>,
}

impl GpDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, input: GpInput, output: [f64; OUTPUT_DIM]) {
        self.inputs.push(input);
        self.outputs.push(output);
    }

    pub fn extend(&mut self, other: GpDataset) {
        self.inputs.extend(other.inputs);
        self.outputs.extend(other.outputs);
    }
}

/// One logged sample: state at `t`, the input applied from `t` onwards and the
/// attitude under the vehicle at `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t: f64,
    pub state: VehicleState,
    pub input: ControlInput,
    pub attitude: Attitude,
}

/// Builds residual labels from a uniformly sampled log.
///
/// For every consecutive pair the nominal model is stepped from the earlier
/// entry and its velocities are subtracted from the measured ones. The
/// features are taken at the earlier entry.
pub fn residual_labels(log: &[LogEntry], p: &VehicleParams) -> Result<GpDataset> {
    let mut out = GpDataset::default();
    if log.len() < 2 {
        return Ok(out);
    }
    let dt = log[1].t - log[0].t;
    if !(dt > 0.0) {
        return Err(NavError::NonUniformLog { expected: dt, found: dt, index: 1 });
    }
    for k in 1..log.len() {
        let found = log[k].t - log[k - 1].t;
        if (found - dt).abs() > LOG_SPACING_TOL * dt.max(1.0) {
            return Err(NavError::NonUniformLog { expected: dt, found, index: k });
        }
        let prev = &log[k - 1];
        let predicted = dynamics::step(&prev.state, &prev.input, &prev.attitude, p, dt)?;
        let meas = &log[k].state;
        out.push(
            gp_features(&prev.state, &prev.input, &prev.attitude),
            [meas.vx - predicted.vx, meas.vy - predicted.vy, meas.yaw_rate - predicted.yaw_rate],
        );
    }
    Ok(out)
}

/// Trained residual models keyed by terrain class.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GpRegistry {
    models: BTreeMap<TerrainClass, GpModel>,
}

impl GpRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// A registry whose models predict zero residual with zero variance for
    /// every class, which reduces the predictive planner to the nominal model.
    pub fn zero_residual() -> Self {
        let mut r = Self::new();
        for c in TerrainClass::ALL {
            r.insert(c, GpModel::zero_residual(c.name()));
        }
        r
    }

    pub fn insert(&mut self, class: TerrainClass, model: GpModel) {
        self.models.insert(class, model);
    }

    pub fn get(&self, class: TerrainClass) -> Result<&GpModel> {
        self.models.get(&class).ok_or_else(|| NavError::UnknownTerrain(class.name().to_string()))
    }

    pub fn classes(&self) -> impl Iterator<Item = TerrainClass> + '_ {
        self.models.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Writes one `gp_<class>.json` file per model.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (class, model) in &self.models {
            let path = dir.join(format!("gp_{}.json", class.name()));
            std::fs::write(path, serde_json::to_vec(model)?)?;
        }
        Ok(())
    }

    /// Loads every `gp_<class>.json` present in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut r = Self::new();
        for class in TerrainClass::ALL {
            let path = dir.join(format!("gp_{}.json", class.name()));
            if path.exists() {
                let model: GpModel = serde_json::from_slice(&std::fs::read(path)?)?;
                r.insert(class, model);
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn nominal_log(n: usize, dt: f64, p: &VehicleParams) -> Vec<LogEntry> {
        let att = Attitude { roll: 0.05, pitch: -0.1, yaw: 0.0 };
        let mut state = VehicleState { vx: 1.5, ..Default::default() };
        let mut log = Vec::new();
        for k in 0..n {
            let input = ControlInput { steer: 0.1 * (k as f64 * 0.3).sin(), accel: 0.5 };
            log.push(LogEntry { t: k as f64 * dt, state, input, attitude: att });
            state = dynamics::step(&state, &input, &att, p, dt).unwrap();
        }
        log
    }

    #[test]
    fn nominal_log_has_zero_residuals() {
        let p = VehicleParams::default();
        let d = residual_labels(&nominal_log(20, 0.1, &p), &p).unwrap();
        assert_eq!(d.len(), 19);
        for y in &d.outputs {
            assert!(y.iter().all(|v| v.abs() < 1e-12), "{y:?}");
        }
    }

    #[test]
    fn injected_offset_is_recovered() {
        let p = VehicleParams::default();
        let mut log = nominal_log(10, 0.1, &p);
        log[4].state.vy += 0.2;
        let d = residual_labels(&log, &p).unwrap();
        assert!((d.outputs[3][1] - 0.2).abs() < 1e-12);
        assert_eq!(d.inputs[3], gp_features(&log[3].state, &log[3].input, &log[3].attitude));
    }

    #[test]
    fn uneven_timestamps_are_rejected() {
        let p = VehicleParams::default();
        let mut log = nominal_log(6, 0.1, &p);
        log[3].t += 0.02;
        match residual_labels(&log, &p) {
            Err(NavError::NonUniformLog { index, .. }) => assert_eq!(index, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_class_is_an_error() {
        let r = GpRegistry::new();
        assert!(matches!(r.get(TerrainClass::Mud), Err(NavError::UnknownTerrain(_))));
    }

    #[test]
    fn registry_round_trips_through_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut data = GpDataset::default();
        for _ in 0..20 {
            let x: GpInput = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            data.push(x, [x[0], rng.sample(StandardNormal), 0.0]);
        }
        let cfg = GpFitConfig { iterations: 10, ..Default::default() };
        let (m, _) = fit(&data, "mud", &cfg).unwrap();
        let mut r = GpRegistry::new();
        r.insert(TerrainClass::Mud, m.clone());
        let dir = tempfile::tempdir().unwrap();
        r.save_dir(dir.path()).unwrap();
        let back = GpRegistry::load_dir(dir.path()).unwrap();
        let m2 = back.get(TerrainClass::Mud).unwrap();
        for x in data.inputs.iter().take(5) {
            let a = m.predict(x);
            let b = m2.predict(x);
            for o in 0..OUTPUT_DIM {
                assert!((a.mean[o] - b.mean[o]).abs() <= 1e-12);
                assert!((a.variance[o] - b.variance[o]).abs() <= 1e-12);
            }
        }
        assert!(back.get(TerrainClass::Grass).is_err());
    }
}
