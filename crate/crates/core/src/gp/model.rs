use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{backward_solve_transposed, cholesky_in_place, dot, forward_solve};
use crate::dynamics::{ControlInput, VehicleState};
use crate::error::{NavError, Result};
use crate::terrain::Attitude;

pub const INPUT_DIM: usize = 7;
/// Number of modelled residual outputs: `(e_vx, e_vy, e_omega)`.
pub const OUTPUT_DIM: usize = 3;

/// Regression features `(vx, vy, yaw_rate, roll, pitch, steer, accel)`.
pub type GpInput = [f64; INPUT_DIM];

/// Jitter ladder tried on the kernel diagonal before giving up.
pub(crate) const JITTER_LADDER: [f64; 8] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

pub fn gp_features(state: &VehicleState, input: &ControlInput, att: &Attitude) -> GpInput {
    [state.vx, state.vy, state.yaw_rate, att.roll, att.pitch, input.steer, input.accel]
}

/// Squared-exponential kernel hyperparameters with one length-scale per input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub signal_var: f64,
    pub length_scales: [f64; INPUT_DIM],
    pub noise_var: f64,
}

pub const N_PARAMS: usize = INPUT_DIM + 2;

impl Hyperparameters {
    pub fn isotropic(signal_var: f64, length_scale: f64, noise_var: f64) -> Self {
        Self { signal_var, length_scales: [length_scale; INPUT_DIM], noise_var }
    }

    /// `(ln σ², ln ℓ₁ … ln ℓ₇, ln σₙ²)`.
    pub fn to_log(&self) -> [f64; N_PARAMS] {
        let mut out = [0.0; N_PARAMS];
        out[0] = self.signal_var.ln();
        for d in 0..INPUT_DIM {
            out[1 + d] = self.length_scales[d].ln();
        }
        out[N_PARAMS - 1] = self.noise_var.ln();
        out
    }

    pub fn from_log(theta: &[f64; N_PARAMS]) -> Self {
        Self {
            signal_var: theta[0].exp(),
            length_scales: std::array::from_fn(|d| theta[1 + d].exp()),
            noise_var: theta[N_PARAMS - 1].exp(),
        }
    }

    #[inline]
    pub fn kernel(&self, a: &GpInput, b: &GpInput) -> f64 {
        let mut d2 = 0.0;
        for d in 0..INPUT_DIM {
            let t = (a[d] - b[d]) / self.length_scales[d];
            d2 += t * t;
        }
        self.signal_var * (-0.5 * d2).exp()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.signal_var > 0.0
            && self.noise_var > 0.0
            && self.length_scales.iter().all(|&l| l > 0.0 && l.is_finite())
            && self.signal_var.is_finite()
            && self.noise_var.is_finite();
        if ok {
            Ok(())
        } else {
            Err(NavError::Config(format!("GP hyperparameters must be positive and finite: {self:?}")))
        }
    }
}

/// Persisted form of a [`ScalarGp`]; the factorisation is rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScalarGpData {
    hyperparameters: Hyperparameters,
    inputs: Vec<GpInput>,
    targets: Vec<f64>,
}

/// Exact zero-mean GP regressor for one output.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ScalarGpData", into = "ScalarGpData")]
pub struct ScalarGp {
    hyper: Hyperparameters,
    inputs: Vec<GpInput>,
    targets: Vec<f64>,
    /// Training inputs divided by the length-scales.
    scaled: Vec<GpInput>,
    alpha: Vec<f64>,
    chol: Vec<f64>,
    jitter: f64,
}

impl TryFrom<ScalarGpData> for ScalarGp {
    type Error = NavError;
    fn try_from(d: ScalarGpData) -> Result<Self> {
        ScalarGp::new(d.hyperparameters, d.inputs, d.targets)
    }
}

impl From<ScalarGp> for ScalarGpData {
    fn from(g: ScalarGp) -> Self {
        ScalarGpData { hyperparameters: g.hyper, inputs: g.inputs, targets: g.targets }
    }
}

/// Kernel matrix with noise on the diagonal, factorised with the smallest
/// jitter from [`JITTER_LADDER`] that makes it positive definite.
pub(crate) fn factorize(hyper: &Hyperparameters, inputs: &[GpInput]) -> Result<(Vec<f64>, f64)> {
    let n = inputs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = hyper.kernel(&inputs[i], &inputs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += hyper.noise_var;
    }
    for &jitter in &JITTER_LADDER {
        let mut l = k.clone();
        for i in 0..n {
            l[i * n + i] += jitter;
        }
        if cholesky_in_place(&mut l, n) {
            return Ok((l, jitter));
        }
    }
    Err(NavError::Conditioning { jitter: *JITTER_LADDER.last().unwrap() })
}

impl ScalarGp {
    pub fn new(hyper: Hyperparameters, inputs: Vec<GpInput>, targets: Vec<f64>) -> Result<Self> {
        hyper.validate()?;
        if inputs.len() != targets.len() {
            return Err(NavError::Config("GP inputs and targets differ in length".into()));
        }
        let n = inputs.len();
        let (chol, jitter) = factorize(&hyper, &inputs)?;
        let mut alpha = targets.clone();
        forward_solve(&chol, n, &mut alpha);
        backward_solve_transposed(&chol, n, &mut alpha);
        let scaled = inputs.iter().map(|x| std::array::from_fn(|d| x[d] / hyper.length_scales[d])).collect();
        Ok(Self { hyper, inputs, targets, scaled, alpha, chol, jitter })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn inputs(&self) -> &[GpInput] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Posterior mean and latent variance at `x`; `scratch` is reused between calls.
    pub fn predict_with(&self, x: &GpInput, scratch: &mut Vec<f64>) -> (f64, f64) {
        let n = self.inputs.len();
        let sv = self.hyper.signal_var;
        if n == 0 {
            return (0.0, sv);
        }
        let xs: GpInput = std::array::from_fn(|d| x[d] / self.hyper.length_scales[d]);
        scratch.clear();
        scratch.extend(self.scaled.iter().map(|s| {
            let mut d2 = 0.0;
            for d in 0..INPUT_DIM {
                let t = s[d] - xs[d];
                d2 += t * t;
            }
            sv * (-0.5 * d2).exp()
        }));
        let mean = dot(scratch, &self.alpha);
        forward_solve(&self.chol, n, scratch);
        let var = (sv - dot(scratch, scratch)).max(0.0);
        (mean, var)
    }

    pub fn predict(&self, x: &GpInput) -> (f64, f64) {
        self.predict_with(x, &mut Vec::with_capacity(self.len()))
    }
}

/// Three independent GPs modelling the one-step velocity residuals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GpModel {
    pub name: String,
    outputs: [ScalarGp; OUTPUT_DIM],
}

/// Posterior moments for the three residual outputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub mean: [f64; OUTPUT_DIM],
    pub variance: [f64; OUTPUT_DIM],
}

impl GpModel {
    pub fn new(name: impl Into<String>, outputs: [ScalarGp; OUTPUT_DIM]) -> Self {
        Self { name: name.into(), outputs }
    }

    /// A model with no data and a negligible prior: zero mean, ~zero variance.
    pub fn zero_residual(name: impl Into<String>) -> Self {
        let h = Hyperparameters::isotropic(1e-300, 1.0, 1e-12);
        let gp = ScalarGp::new(h, Vec::new(), Vec::new()).expect("empty GP is always valid");
        Self::new(name, [gp.clone(), gp.clone(), gp])
    }

    pub fn outputs(&self) -> &[ScalarGp; OUTPUT_DIM] {
        &self.outputs
    }

    pub fn predict_with(&self, x: &GpInput, scratch: &mut Vec<f64>) -> Prediction {
        let mut mean = [0.0; OUTPUT_DIM];
        let mut variance = [0.0; OUTPUT_DIM];
        for (o, gp) in self.outputs.iter().enumerate() {
            let (m, v) = gp.predict_with(x, scratch);
            mean[o] = m;
            variance[o] = v;
        }
        Prediction { mean, variance }
    }

    pub fn predict(&self, x: &GpInput) -> Prediction {
        self.predict_with(x, &mut Vec::new())
    }

    /// One draw from the per-output posterior marginals at `x`.
    pub fn sample_with<R: Rng + ?Sized>(&self, x: &GpInput, rng: &mut R, scratch: &mut Vec<f64>) -> [f64; OUTPUT_DIM] {
        let p = self.predict_with(x, scratch);
        std::array::from_fn(|o| {
            let z: f64 = rng.sample(StandardNormal);
            p.mean[o] + p.variance[o].sqrt() * z
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &GpInput, rng: &mut R) -> [f64; OUTPUT_DIM] {
        self.sample_with(x, rng, &mut Vec::new())
    }
}
