//! Posterior-predictive evaluation over stored weight samples.

use crate::bnn::{self, forward, IpeProvider, Likelihood, ModelSpec, OutputKind};
use crate::error::{Error, Result};

/// Predictive mean and population standard deviation at one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPrediction {
    pub mean: f64,
    pub std: f64,
}

/// Raw model outputs per test point and sample, plus evaluation telemetry.
///
/// `values[point][sample]` is the network output: predicted value for
/// regression, class-1 logit for classification.
#[derive(Debug, Clone)]
pub struct PredictiveDraws {
    pub values: Vec<Vec<f64>>,
    pub forward_passes: u64,
    /// Mean per-pass load-norm factor over all forward passes.
    pub re_mean: f64,
}

/// Evaluate every weight sample on every input (sample-major order, one
/// provider call per pre-activation).
pub fn predictive_draws(
    spec: &ModelSpec,
    samples: &[Vec<f64>],
    inputs: &[Vec<f64>],
    provider: &mut IpeProvider,
) -> Result<PredictiveDraws> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no posterior samples"));
    }
    let arch = &spec.arch;
    let mut values = vec![Vec::with_capacity(samples.len()); inputs.len()];
    let mut re_sum = 0.0;
    let mut passes = 0u64;
    for theta in samples {
        let row_norms: Vec<Vec<f64>> = (0..arch.blocks())
            .map(|t| {
                (0..arch.block_dims(t).1)
                    .map(|j| {
                        theta[arch.row_range(t, j)]
                            .iter()
                            .map(|w| w * w)
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            })
            .collect();
        for (point, x) in inputs.iter().enumerate() {
            let acts = forward(spec, theta, x, provider)?;
            let act_norms: Vec<f64> = acts
                .iter()
                .map(|a| a.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            re_sum += crate::cost::compute_re(arch.layer_sizes(), &row_norms, &act_norms)?;
            passes += 1;
            values[point].push(acts.last().unwrap()[0]);
        }
    }
    Ok(PredictiveDraws {
        values,
        forward_passes: passes,
        re_mean: re_sum / passes as f64,
    })
}

/// Reduce raw draws to per-point mean and population standard deviation.
/// Classification outputs pass through the logistic function first, so the
/// summary describes the class-1 probability.
pub fn summarize(spec: &ModelSpec, draws: &PredictiveDraws) -> Vec<PointPrediction> {
    draws
        .values
        .iter()
        .map(|row| {
            let transformed: Vec<f64> = match spec.arch.output_kind() {
                OutputKind::Regression => row.clone(),
                OutputKind::BinaryClassification => row.iter().map(|&z| bnn::sigmoid(z)).collect(),
            };
            let k = transformed.len() as f64;
            let mean = transformed.iter().sum::<f64>() / k;
            let var = transformed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
            PointPrediction {
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

/// Posterior predictive mean and standard deviation at each input.
pub fn posterior_predictive(
    spec: &ModelSpec,
    samples: &[Vec<f64>],
    inputs: &[Vec<f64>],
    provider: &mut IpeProvider,
) -> Result<Vec<PointPrediction>> {
    let draws = predictive_draws(spec, samples, inputs, provider)?;
    Ok(summarize(spec, &draws))
}

fn log_mean_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + (terms.iter().map(|t| (t - max).exp()).sum::<f64>() / terms.len() as f64).ln()
}

/// Mean predictive log-likelihood over points: each point contributes
/// `log[(1/K) Σ_k p(y | θ_k)]`, evaluated stably in log space.
pub fn predictive_log_likelihood(
    spec: &ModelSpec,
    values: &[Vec<f64>],
    targets: &[f64],
) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("no predictive values"));
    }
    if values.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: targets.len(),
        });
    }
    let mut total = 0.0;
    for (row, &y) in values.iter().zip(targets) {
        let terms: Vec<f64> = row
            .iter()
            .map(|&z| match spec.likelihood {
                Likelihood::Gaussian { sigma_y } => {
                    let r = y - z;
                    -r * r / (2.0 * sigma_y * sigma_y)
                        - 0.5 * (2.0 * std::f64::consts::PI * sigma_y * sigma_y).ln()
                }
                Likelihood::Bernoulli => y * z - (z.max(0.0) + (-z.abs()).exp().ln_1p()),
            })
            .collect();
        total += log_mean_exp(&terms);
    }
    Ok(total / values.len() as f64)
}

/// Mean and standard error of per-split log-likelihoods. A single split has
/// standard error 0 by convention.
pub fn log_likelihood_metric(per_split: &[f64]) -> Result<(f64, f64)> {
    if per_split.is_empty() {
        return Err(Error::EmptyInput("no splits"));
    }
    let s = per_split.len() as f64;
    let mean = per_split.iter().sum::<f64>() / s;
    if per_split.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = per_split.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1.0);
    Ok((mean, (var / s).sqrt()))
}
