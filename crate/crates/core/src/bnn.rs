//! Small fully-connected Bayesian network with provider-routed inner products.
//!
//! Every pre-activation and every backward signal is one inner product, so a
//! single substitution point — [`IpeProvider`] — switches the whole forward
//! and backward pass between exact arithmetic and the sampled oracle of
//! [`crate::ipe`]. Biases ride along as a constant-1 input augmentation, which
//! keeps them inside the inner products rather than as a separate add.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ipe::{self, IpeParams};

/// What the last layer's scalar output means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// Identity output, Gaussian observation model.
    Regression,
    /// Logit output, Bernoulli observation model.
    BinaryClassification,
}

/// Layer sizes plus output interpretation. Hidden activations are tanh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArchitecture {
    layer_sizes: Vec<usize>,
    output: OutputKind,
    /// Flat offset of each weight block in a parameter vector.
    block_offsets: Vec<usize>,
    weight_count: usize,
}

impl MlpArchitecture {
    pub fn new(layer_sizes: Vec<usize>, output: OutputKind) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "architecture needs at least 2 layers, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut block_offsets = Vec::with_capacity(layer_sizes.len() - 1);
        let mut offset = 0;
        for t in 0..layer_sizes.len() - 1 {
            block_offsets.push(offset);
            offset += layer_sizes[t + 1] * (layer_sizes[t] + 1);
        }
        Ok(Self {
            layer_sizes,
            output,
            block_offsets,
            weight_count: offset,
        })
    }

    /// Convenience constructor: input dim, hidden widths, scalar output.
    pub fn with_hidden(input_dim: usize, hidden: &[usize], output: OutputKind) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self::new(sizes, output)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output
    }

    /// Number of layers L, counting input and output.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len()
    }

    /// Number of weight blocks (connections between consecutive layers).
    pub fn blocks(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total neuron count Ω.
    pub fn neuron_count(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    /// Total parameter count P, biases included.
    pub fn weight_count(&self) -> usize {
        self.weight_count
    }

    /// Fan-in (without bias) and fan-out of weight block `t`.
    pub fn block_dims(&self, t: usize) -> (usize, usize) {
        (self.layer_sizes[t], self.layer_sizes[t + 1])
    }

    /// Slice of row `j` of block `t` inside a flat parameter vector; the last
    /// element of the row is the bias.
    pub fn row_range(&self, t: usize, j: usize) -> std::ops::Range<usize> {
        let width = self.layer_sizes[t] + 1;
        let start = self.block_offsets[t] + j * width;
        start..start + width
    }
}

/// Gaussian prior scale and the rank of initial chain positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub sigma_p: f64,
    pub init_rank: InitRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitRank {
    Full,
    LowRank(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Likelihood {
    Gaussian { sigma_y: f64 },
    Bernoulli,
}

/// Architecture, prior, and observation model of one Bayesian network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub arch: MlpArchitecture,
    pub prior: PriorSpec,
    pub likelihood: Likelihood,
}

impl ModelSpec {
    pub fn new(arch: MlpArchitecture, prior: PriorSpec, likelihood: Likelihood) -> Result<Self> {
        if arch.output_dim() != 1 {
            return Err(Error::Config(
                "likelihood evaluation needs a single output neuron".into(),
            ));
        }
        if prior.sigma_p <= 0.0 || !prior.sigma_p.is_finite() {
            return Err(Error::Config(format!(
                "sigma_p must be positive, got {}",
                prior.sigma_p
            )));
        }
        match (likelihood, arch.output_kind()) {
            (Likelihood::Gaussian { sigma_y }, OutputKind::Regression) => {
                if sigma_y <= 0.0 || !sigma_y.is_finite() {
                    return Err(Error::Config(format!(
                        "sigma_y must be positive, got {sigma_y}"
                    )));
                }
            }
            (Likelihood::Bernoulli, OutputKind::BinaryClassification) => {}
            _ => {
                return Err(Error::Config(
                    "likelihood does not match the architecture's output kind".into(),
                ))
            }
        }
        if let InitRank::LowRank(r) = prior.init_rank {
            let max = (0..arch.blocks())
                .map(|t| {
                    let (fan_in, fan_out) = arch.block_dims(t);
                    fan_in.min(fan_out)
                })
                .max()
                .unwrap_or(0);
            if r == 0 || r > max {
                return Err(Error::RankTooLarge { rank: r, max });
            }
        }
        Ok(Self {
            arch,
            prior,
            likelihood,
        })
    }
}

/// Inputs and scalar targets. Classification targets live in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let dim = inputs.first().map(|r| r.len()).unwrap_or(0);
        for row in &inputs {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset inputs"));
            }
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset targets"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map(|r| r.len()).unwrap_or(0)
    }
}

/// Running error statistics of a quantum provider's oracle calls.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleStats {
    pub invocations: u64,
    pub abs_error_sum: f64,
    pub abs_error_max: f64,
}

impl OracleStats {
    fn record(&mut self, runs: u64, abs_error: f64) {
        self.invocations += runs;
        self.abs_error_sum += abs_error;
        self.abs_error_max = self.abs_error_max.max(abs_error);
    }

    pub fn mean_abs_error(&self) -> f64 {
        if self.invocations == 0 {
            0.0
        } else {
            self.abs_error_sum / self.invocations as f64
        }
    }
}

/// Oracle-backed inner products with their own random stream and telemetry.
#[derive(Debug, Clone)]
pub struct QuantumIpe {
    pub params: IpeParams,
    rng: ChaCha8Rng,
    pub stats: OracleStats,
}

/// Strategy for evaluating inner products: exact arithmetic or one fresh
/// oracle draw per call (results are never cached).
#[derive(Debug, Clone)]
pub enum IpeProvider {
    Classical,
    Quantum(Box<QuantumIpe>),
}

impl IpeProvider {
    pub fn classical() -> Self {
        IpeProvider::Classical
    }

    pub fn quantum(params: IpeParams, rng: ChaCha8Rng) -> Self {
        IpeProvider::Quantum(Box::new(QuantumIpe {
            params,
            rng,
            stats: OracleStats::default(),
        }))
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, IpeProvider::Quantum(_))
    }

    pub fn qubits(&self) -> Option<u32> {
        match self {
            IpeProvider::Classical => None,
            IpeProvider::Quantum(q) => Some(q.params.qubits()),
        }
    }

    pub fn stats(&self) -> Option<&OracleStats> {
        match self {
            IpeProvider::Classical => None,
            IpeProvider::Quantum(q) => Some(&q.stats),
        }
    }

    /// Estimate `a·b`.
    ///
    /// A zero-norm operand short-circuits to the exact 0 without consuming
    /// the oracle: the product is identically zero and the encoding is not
    /// defined for zero vectors.
    pub fn inner_product(&mut self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        match self {
            IpeProvider::Classical => Ok(dot(a, b)),
            IpeProvider::Quantum(q) => {
                if norm_sq(a) == 0.0 || norm_sq(b) == 0.0 {
                    return Ok(0.0);
                }
                let estimate = ipe::sample_estimate(a, b, &q.params, &mut q.rng)?;
                q.stats
                    .record(q.params.repetitions() as u64, (estimate - dot(a, b)).abs());
                Ok(estimate)
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn augmented(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + 1);
    out.extend_from_slice(a);
    out.push(1.0);
    out
}

fn check_theta(arch: &MlpArchitecture, theta: &[f64]) -> Result<()> {
    if theta.len() != arch.weight_count() {
        return Err(Error::DimensionMismatch {
            expected: arch.weight_count(),
            got: theta.len(),
        });
    }
    Ok(())
}

fn check_input(arch: &MlpArchitecture, x: &[f64]) -> Result<()> {
    if x.len() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Forward pass; returns the activations of every layer, input first.
///
/// Hidden layers apply tanh; the last layer is left linear (the identity
/// value for regression, the logit for classification).
pub fn forward(
    spec: &ModelSpec,
    theta: &[f64],
    x: &[f64],
    provider: &mut IpeProvider,
) -> Result<Vec<Vec<f64>>> {
    let arch = &spec.arch;
    check_theta(arch, theta)?;
    check_input(arch, x)?;
    let mut activations = Vec::with_capacity(arch.depth());
    activations.push(x.to_vec());
    for t in 0..arch.blocks() {
        let aug = augmented(activations.last().unwrap());
        let (_, fan_out) = arch.block_dims(t);
        let last_block = t + 1 == arch.blocks();
        let mut next = Vec::with_capacity(fan_out);
        for j in 0..fan_out {
            let z = provider.inner_product(&theta[arch.row_range(t, j)], &aug)?;
            next.push(if last_block { z } else { z.tanh() });
        }
        activations.push(next);
    }
    Ok(activations)
}

/// Directional derivative of `v_i·v_j` along tangents `(t_1, t_2)`:
/// `v_j·t_1 + v_i·t_2`, each term one provider call. A zero-norm tangent
/// contributes exactly zero without touching the oracle.
pub fn jvp_inner_product(
    provider: &mut IpeProvider,
    v_i: &[f64],
    v_j: &[f64],
    t_1: &[f64],
    t_2: &[f64],
) -> Result<f64> {
    for v in [v_j, t_1, t_2] {
        if v.len() != v_i.len() {
            return Err(Error::DimensionMismatch {
                expected: v_i.len(),
                got: v.len(),
            });
        }
    }
    let mut total = 0.0;
    if norm_sq(t_1) != 0.0 {
        total += provider.inner_product(v_j, t_1)?;
    }
    if norm_sq(t_2) != 0.0 {
        total += provider.inner_product(v_i, t_2)?;
    }
    Ok(total)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Log-likelihood of one observation given the model output `z`.
fn point_loglik(likelihood: Likelihood, z: f64, y: f64) -> f64 {
    match likelihood {
        Likelihood::Gaussian { sigma_y } => {
            let r = y - z;
            -r * r / (2.0 * sigma_y * sigma_y)
                - 0.5 * (2.0 * std::f64::consts::PI * sigma_y * sigma_y).ln()
        }
        // y·log σ(z) + (1−y)·log(1−σ(z)) in softplus form.
        Likelihood::Bernoulli => y * z - softplus(z),
    }
}

/// d(log-likelihood)/dz at the output.
fn point_residual(likelihood: Likelihood, z: f64, y: f64) -> f64 {
    match likelihood {
        Likelihood::Gaussian { sigma_y } => (y - z) / (sigma_y * sigma_y),
        Likelihood::Bernoulli => y - sigmoid(z),
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gaussian prior log-density at `theta`, normalization constant included.
pub fn log_prior(spec: &ModelSpec, theta: &[f64]) -> f64 {
    let sp = spec.prior.sigma_p;
    let p = theta.len() as f64;
    -norm_sq(theta) / (2.0 * sp * sp) - 0.5 * p * (2.0 * std::f64::consts::PI * sp * sp).ln()
}

/// Log posterior (up to nothing: constants are kept) with exact arithmetic.
pub fn log_posterior(spec: &ModelSpec, theta: &[f64], data: &Dataset) -> Result<f64> {
    log_posterior_with(spec, theta, data, &mut IpeProvider::Classical)
}

/// Log posterior with every forward inner product routed through `provider`.
pub fn log_posterior_with(
    spec: &ModelSpec,
    theta: &[f64],
    data: &Dataset,
    provider: &mut IpeProvider,
) -> Result<f64> {
    let mut total = log_prior(spec, theta);
    for (x, &y) in data.inputs.iter().zip(&data.targets) {
        let acts = forward(spec, theta, x, provider)?;
        total += point_loglik(spec.likelihood, acts.last().unwrap()[0], y);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("log posterior"));
    }
    Ok(total)
}

/// Point log-likelihood, activations per layer, and backward signals per
/// block.
type PointBackprop = (f64, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Backward pass for one data point, accumulating d(loglik)/dθ into `grad`.
///
/// The provider sees two kinds of inner products: the forward pre-activations
/// and the column-times-signal products that carry the backward signal down a
/// layer. The rank-1 weight-gradient update itself is elementwise and involves
/// no inner product. Returns the point log-likelihood and the backward
/// signals per layer (output layer last) for callers that record telemetry.
fn backprop_point(
    spec: &ModelSpec,
    theta: &[f64],
    x: &[f64],
    y: f64,
    provider: &mut IpeProvider,
    grad: &mut [f64],
) -> Result<PointBackprop> {
    let arch = &spec.arch;
    let acts = forward(spec, theta, x, provider)?;
    let z_out = acts.last().unwrap()[0];
    let loglik = point_loglik(spec.likelihood, z_out, y);

    let blocks = arch.blocks();
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); blocks];
    deltas[blocks - 1] = vec![point_residual(spec.likelihood, z_out, y)];

    for t in (0..blocks).rev() {
        let delta = deltas[t].clone();
        let aug = augmented(&acts[t]);
        for (j, &dj) in delta.iter().enumerate() {
            let range = arch.row_range(t, j);
            for (g, &a) in grad[range].iter_mut().zip(&aug) {
                *g += dj * a;
            }
        }
        if t > 0 {
            let (fan_in, fan_out) = arch.block_dims(t);
            let mut prev = Vec::with_capacity(fan_in);
            for i in 0..fan_in {
                // Column i of block t, bias row excluded.
                let column: Vec<f64> = (0..fan_out)
                    .map(|j| theta[arch.row_range(t, j)][i])
                    .collect();
                let s = provider.inner_product(&column, &delta)?;
                let a = acts[t][i];
                prev.push((1.0 - a * a) * s);
            }
            deltas[t - 1] = prev;
        }
    }
    Ok((loglik, acts, deltas))
}

/// Gradient of the log posterior; the prior score is exact, the likelihood
/// part is one backward pass per data point through `provider`.
pub fn grad_log_posterior(
    spec: &ModelSpec,
    theta: &[f64],
    data: &Dataset,
    provider: &mut IpeProvider,
) -> Result<Vec<f64>> {
    logp_and_grad(spec, theta, data, provider).map(|(_, g)| g)
}

/// Log posterior and its gradient from a single shared forward pass per point.
pub fn logp_and_grad(
    spec: &ModelSpec,
    theta: &[f64],
    data: &Dataset,
    provider: &mut IpeProvider,
) -> Result<(f64, Vec<f64>)> {
    check_theta(&spec.arch, theta)?;
    let sp = spec.prior.sigma_p;
    let mut logp = log_prior(spec, theta);
    let mut grad: Vec<f64> = theta.iter().map(|w| -w / (sp * sp)).collect();
    for (x, &y) in data.inputs.iter().zip(&data.targets) {
        let (ll, _, _) = backprop_point(spec, theta, x, y, provider, &mut grad)?;
        logp += ll;
    }
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("log posterior gradient"));
    }
    Ok((logp, grad))
}

/// Per-point norms recorded for the runtime cost model: plain activation
/// norms per layer and backward-signal norms for layers past the input.
#[derive(Debug, Clone)]
pub struct PointNorms {
    pub activation_norms: Vec<f64>,
    pub delta_norms: Vec<f64>,
}

/// Re-evaluate one stored weight sample on one point with exact arithmetic
/// and record the norms the cost model needs.
pub fn forward_backward_norms(
    spec: &ModelSpec,
    theta: &[f64],
    x: &[f64],
    y: f64,
) -> Result<PointNorms> {
    let mut provider = IpeProvider::Classical;
    let mut scratch = vec![0.0; spec.arch.weight_count()];
    let (_, acts, deltas) = backprop_point(spec, theta, x, y, &mut provider, &mut scratch)?;
    Ok(PointNorms {
        activation_norms: acts.iter().map(|a| norm_sq(a).sqrt()).collect(),
        delta_norms: deltas.iter().map(|d| norm_sq(d).sqrt()).collect(),
    })
}

/// Draw an initial weight vector from the prior.
///
/// Full rank: every parameter i.i.d. `N(0, σ_p²)`. Low rank `r`: each weight
/// block whose min dimension exceeds `r` is the product `A·B` of factors with
/// i.i.d. `N(0, σ_p/√r)`-variance entries, which preserves the `σ_p²` entry
/// variance of the full-rank draw; blocks already at or below rank `r` and
/// all bias columns are drawn full rank.
pub fn sample_prior<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Vec<f64>> {
    let arch = &spec.arch;
    let sp = spec.prior.sigma_p;
    let gauss = |rng: &mut R, sd: f64| -> f64 { sd * rng.sample::<f64, _>(StandardNormal) };
    let mut theta = vec![0.0; arch.weight_count()];
    match spec.prior.init_rank {
        InitRank::Full => {
            for w in theta.iter_mut() {
                *w = gauss(rng, sp);
            }
        }
        InitRank::LowRank(r) => {
            for t in 0..arch.blocks() {
                let (fan_in, fan_out) = arch.block_dims(t);
                if r < fan_in.min(fan_out) {
                    let factor_sd = (sp / (r as f64).sqrt()).sqrt();
                    let a: Vec<f64> = (0..fan_out * r).map(|_| gauss(rng, factor_sd)).collect();
                    let b: Vec<f64> = (0..r * fan_in).map(|_| gauss(rng, factor_sd)).collect();
                    for j in 0..fan_out {
                        let range = arch.row_range(t, j);
                        let row = &mut theta[range];
                        for (i, w) in row[..fan_in].iter_mut().enumerate() {
                            *w = (0..r).map(|k| a[j * r + k] * b[k * fan_in + i]).sum();
                        }
                    }
                } else {
                    for j in 0..fan_out {
                        let range = arch.row_range(t, j);
                        for w in theta[range][..fan_in].iter_mut() {
                            *w = gauss(rng, sp);
                        }
                    }
                }
                for j in 0..fan_out {
                    let range = arch.row_range(t, j);
                    theta[range][fan_in] = gauss(rng, sp);
                }
            }
        }
    }
    Ok(theta)
}
