//! Type-II maximum likelihood for the squared-exponential GP.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{backward_solve_transposed, dot, forward_solve, inverse_from_cholesky};
use super::model::{factorize, GpInput, GpModel, Hyperparameters, ScalarGp, INPUT_DIM, N_PARAMS, OUTPUT_DIM};
use super::GpDataset;
use crate::error::{NavError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Box constraints on the log-parameters `(ln σ², ln ℓ, ln σₙ²)`.
const LOG_LOWER: [f64; N_PARAMS] = [-23.0, -7.0, -7.0, -7.0, -7.0, -7.0, -7.0, -7.0, -23.0];
const LOG_UPPER: [f64; N_PARAMS] = [9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0, 9.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpFitConfig {
    /// Larger datasets are uniformly subsampled down to this many points.
    pub max_points: usize,
    /// Number of optimiser starts; the first is data-driven, the rest random.
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        Self { max_points: 60, restarts: 3, iterations: 120, seed: 0 }
    }
}

/// Likelihood bookkeeping for one fitted output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFit {
    pub initial_log_likelihood: f64,
    pub final_log_likelihood: f64,
    pub hyperparameters: Hyperparameters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub points_used: usize,
    pub outputs: Vec<OutputFit>,
}

/// Exact log marginal likelihood of `targets` under `hyper`.
pub fn log_marginal_likelihood(hyper: &Hyperparameters, inputs: &[GpInput], targets: &[f64]) -> Result<f64> {
    let n = inputs.len();
    let (l, _) = factorize(hyper, inputs)?;
    let mut alpha = targets.to_vec();
    forward_solve(&l, n, &mut alpha);
    let quad = dot(&alpha, &alpha);
    let log_det: f64 = (0..n).map(|i| l[i * n + i].ln()).sum();
    Ok(-0.5 * quad - log_det - 0.5 * n as f64 * LN_2PI)
}

/// Log marginal likelihood and its gradient with respect to the log-parameters.
pub fn log_marginal_likelihood_with_gradient(
    hyper: &Hyperparameters,
    inputs: &[GpInput],
    targets: &[f64],
) -> Result<(f64, [f64; N_PARAMS])> {
    let n = inputs.len();
    let (l, _) = factorize(hyper, inputs)?;
    let mut alpha = targets.to_vec();
    forward_solve(&l, n, &mut alpha);
    let quad = dot(&alpha, &alpha);
    backward_solve_transposed(&l, n, &mut alpha);
    let log_det: f64 = (0..n).map(|i| l[i * n + i].ln()).sum();
    let lml = -0.5 * quad - log_det - 0.5 * n as f64 * LN_2PI;

    let kinv = inverse_from_cholesky(&l, n);
    let inv_l2: [f64; INPUT_DIM] = std::array::from_fn(|d| 1.0 / (hyper.length_scales[d] * hyper.length_scales[d]));
    let mut grad = [0.0; N_PARAMS];
    let mut trace_w = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let w = alpha[i] * alpha[j] - kinv[i * n + j];
            let factor = if i == j { 0.5 } else { 1.0 };
            let kf = hyper.kernel(&inputs[i], &inputs[j]);
            let wk = factor * w * kf;
            grad[0] += wk;
            for d in 0..INPUT_DIM {
                let diff = inputs[i][d] - inputs[j][d];
                grad[1 + d] += wk * diff * diff * inv_l2[d];
            }
            if i == j {
                trace_w += w;
            }
        }
    }
    grad[N_PARAMS - 1] = 0.5 * hyper.noise_var * trace_w;
    Ok((lml, grad))
}

fn clamp_params(x: &mut [f64; N_PARAMS]) {
    for i in 0..N_PARAMS {
        x[i] = x[i].clamp(LOG_LOWER[i], LOG_UPPER[i]);
    }
}

/// Projected limited-memory BFGS ascent with Armijo backtracking. Every
/// accepted step strictly increases the objective.
fn maximize(
    mut eval: impl FnMut(&[f64; N_PARAMS]) -> Option<(f64, [f64; N_PARAMS])>,
    start: [f64; N_PARAMS],
    iterations: usize,
) -> Option<([f64; N_PARAMS], f64)> {
    const MEMORY: usize = 7;
    let mut x = start;
    clamp_params(&mut x);
    let (mut f, mut g) = eval(&x)?;
    let mut hist: Vec<([f64; N_PARAMS], [f64; N_PARAMS])> = Vec::new();
    for _ in 0..iterations {
        // two-loop recursion on the minimisation problem -f
        let mut q: [f64; N_PARAMS] = std::array::from_fn(|i| -g[i]);
        let mut coef = Vec::with_capacity(hist.len());
        for (s, y) in hist.iter().rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            for i in 0..N_PARAMS {
                q[i] -= a * y[i];
            }
            coef.push((rho, a));
        }
        if let Some((s, y)) = hist.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gn = dot(&g, &g).sqrt().max(1e-12);
            let scale = (1.0 / gn).min(1.0);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y), (rho, a)) in hist.iter().zip(coef.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..N_PARAMS {
                q[i] += s[i] * (a - b);
            }
        }
        // q approximates H·(-g); ascent direction is its negation
        let mut dir: [f64; N_PARAMS] = std::array::from_fn(|i| -q[i]);
        if dot(&dir, &g) <= 0.0 {
            hist.clear();
            let gn = dot(&g, &g).sqrt().max(1e-12);
            dir = std::array::from_fn(|i| g[i] / gn.max(1.0));
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut cand: [f64; N_PARAMS] = std::array::from_fn(|i| x[i] + t * dir[i]);
            clamp_params(&mut cand);
            let step: [f64; N_PARAMS] = std::array::from_fn(|i| cand[i] - x[i]);
            let predicted = dot(&g, &step);
            if predicted <= 0.0 {
                t *= 0.5;
                continue;
            }
            if let Some((fc, gc)) = eval(&cand) {
                if fc.is_finite() && fc >= f + 1e-4 * predicted {
                    accepted = Some((cand, fc, gc, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else {
            if hist.is_empty() {
                break;
            }
            hist.clear();
            continue;
        };
        let y: [f64; N_PARAMS] = std::array::from_fn(|i| g[i] - gn[i]);
        if dot(&s, &y) > 1e-12 {
            hist.push((s, y));
            if hist.len() > MEMORY {
                hist.remove(0);
            }
        }
        let improvement = fn_ - f;
        x = xn;
        f = fn_;
        g = gn;
        let max_step = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if improvement < 1e-10 * (1.0 + f.abs()) && max_step < 1e-7 {
            break;
        }
    }
    Some((x, f))
}

fn initial_guess(inputs: &[GpInput], targets: &[f64]) -> Hyperparameters {
    let n = targets.len().max(1) as f64;
    let second_moment = targets.iter().map(|y| y * y).sum::<f64>() / n;
    let signal_var = second_moment.max(1e-8);
    let length_scales = std::array::from_fn(|d| {
        let mean = inputs.iter().map(|x| x[d]).sum::<f64>() / n;
        let var = inputs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / n;
        if var > 1e-12 {
            var.sqrt()
        } else {
            1.0
        }
    });
    Hyperparameters { signal_var, length_scales, noise_var: 0.1 * signal_var }
}

/// Fits one output; returns hyperparameters with the best likelihood over
/// all starts, together with the likelihood at the first start.
pub fn fit_output(inputs: &[GpInput], targets: &[f64], cfg: &GpFitConfig, stream: u64) -> Result<OutputFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let base = initial_guess(inputs, targets).to_log();
    let eval = |theta: &[f64; N_PARAMS]| -> Option<(f64, [f64; N_PARAMS])> {
        let h = Hyperparameters::from_log(theta);
        log_marginal_likelihood_with_gradient(&h, inputs, targets).ok()
    };
    let mut initial = None;
    let mut best: Option<([f64; N_PARAMS], f64)> = None;
    for r in 0..cfg.restarts.max(1) {
        let mut start = base;
        if r > 0 {
            for v in start.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += z;
            }
        }
        clamp_params(&mut start);
        if r == 0 {
            initial = eval(&start).map(|(f, _)| f);
        }
        if let Some((x, f)) = maximize(eval, start, cfg.iterations) {
            if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
                best = Some((x, f));
            }
        }
    }
    let (theta, final_lml) = best.ok_or(NavError::Conditioning { jitter: 1e-4 })?;
    Ok(OutputFit {
        initial_log_likelihood: initial.unwrap_or(f64::NEG_INFINITY),
        final_log_likelihood: final_lml,
        hyperparameters: Hyperparameters::from_log(&theta),
    })
}

/// Trains the three residual GPs on `data`.
pub fn fit(data: &GpDataset, name: &str, cfg: &GpFitConfig) -> Result<(GpModel, FitReport)> {
    if data.is_empty() {
        return Err(NavError::InsufficientSamples { needed: 1, got: 0 });
    }
    let (inputs, outputs) = if data.len() > cfg.max_points {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
        let mut idx = index::sample(&mut rng, data.len(), cfg.max_points).into_vec();
        idx.sort_unstable();
        (
            idx.iter().map(|&i| data.inputs[i]).collect::<Vec<_>>(),
            idx.iter().map(|&i| data.outputs[i]).collect::<Vec<_>>(),
        )
    } else {
        (data.inputs.clone(), data.outputs.clone())
    };
    let mut fits = Vec::with_capacity(OUTPUT_DIM);
    let mut gps = Vec::with_capacity(OUTPUT_DIM);
    for o in 0..OUTPUT_DIM {
        let targets: Vec<f64> = outputs.iter().map(|y| y[o]).collect();
        let fit = fit_output(&inputs, &targets, cfg, o as u64)?;
        gps.push(ScalarGp::new(fit.hyperparameters, inputs.clone(), targets)?);
        fits.push(fit);
    }
    let outputs: [ScalarGp; OUTPUT_DIM] = gps.try_into().expect("three outputs");
    Ok((GpModel::new(name, outputs), FitReport { points_used: inputs.len(), outputs: fits }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_inputs(n: usize, seed: u64, range: f64) -> Vec<GpInput> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-range..range))).collect()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for seed in 0..4 {
            let xs = random_inputs(15, seed, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let ys: Vec<f64> =
                xs.iter().map(|x| x[0].sin() + 0.3 * x[4] + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
            let h = Hyperparameters {
                signal_var: 0.8,
                length_scales: [0.9, 1.3, 0.7, 1.1, 2.0, 0.6, 1.5],
                noise_var: 0.03,
            };
            let (_, grad) = log_marginal_likelihood_with_gradient(&h, &xs, &ys).unwrap();
            let theta = h.to_log();
            for k in 0..N_PARAMS {
                let eps = 1e-5;
                let mut tp = theta;
                let mut tm = theta;
                tp[k] += eps;
                tm[k] -= eps;
                let fp = log_marginal_likelihood(&Hyperparameters::from_log(&tp), &xs, &ys).unwrap();
                let fm = log_marginal_likelihood(&Hyperparameters::from_log(&tm), &xs, &ys).unwrap();
                let fd = (fp - fm) / (2.0 * eps);
                let rel = (grad[k] - fd).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-5, "param {k}: analytic {} vs fd {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn fitting_never_lowers_the_likelihood() {
        let xs = random_inputs(40, 3, 1.0);
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x[1]).cos() - x[6]).collect();
        let cfg = GpFitConfig { iterations: 30, ..Default::default() };
        let f = fit_output(&xs, &ys, &cfg, 0).unwrap();
        assert!(f.final_log_likelihood >= f.initial_log_likelihood);
    }

    #[test]
    fn constant_output_is_reproduced_near_data() {
        let xs = random_inputs(30, 5, 1.0);
        let data = GpDataset { inputs: xs.clone(), outputs: vec![[0.25, -0.1, 0.05]; 30] };
        let (m, _) = fit(&data, "const", &GpFitConfig::default()).unwrap();
        for x in xs.iter().take(10) {
            let p = m.predict(x);
            assert!((p.mean[0] - 0.25).abs() < 0.01, "{:?}", p.mean);
            assert!((p.mean[1] + 0.1).abs() < 0.01);
            assert!((p.mean[2] - 0.05).abs() < 0.01);
        }
    }

    #[test]
    fn oversized_datasets_are_subsampled() {
        let xs = random_inputs(60, 8, 1.0);
        let data = GpDataset { outputs: xs.iter().map(|x| [x[0], x[1], x[2]]).collect(), inputs: xs };
        let cfg = GpFitConfig { max_points: 25, iterations: 5, ..Default::default() };
        let (m, r) = fit(&data, "s", &cfg).unwrap();
        assert_eq!(r.points_used, 25);
        assert_eq!(m.outputs()[0].len(), 25);
    }
}
