//! Gradient-guided MCMC: HMC and a multinomial no-U-turn sampler.
//!
//! Both samplers work against a [`Target`] giving the log density and its
//! gradient, which may be deterministic (classical provider) or stochastic
//! (oracle-backed provider). In the stochastic case the same noisy density is
//! used along the trajectory and in the accept step: the chain is treated as
//! a noisy approximate sampler, and its closeness to the exact-posterior
//! reference is an empirical question, not an exactness claim.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bnn::{self, Dataset, IpeProvider, ModelSpec};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Energy error (nats) beyond which a trajectory is flagged divergent.
pub const DIVERGENCE_ENERGY: f64 = 1000.0;

/// Log density and gradient of the distribution being sampled.
pub trait Target {
    fn dim(&self) -> usize;
    fn logp_and_grad(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Adapter for analytic targets given as a closure returning `(logp, grad)`.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Target for FnTarget<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn logp_and_grad(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.f)(theta))
    }
}

/// Bayesian-network posterior as a sampling target; one shared forward pass
/// per data point serves both the density and the gradient.
pub struct BnnTarget<'a> {
    pub spec: &'a ModelSpec,
    pub data: &'a Dataset,
    pub provider: &'a mut IpeProvider,
}

impl Target for BnnTarget<'_> {
    fn dim(&self) -> usize {
        self.spec.arch.weight_count()
    }

    fn logp_and_grad(&mut self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        bnn::logp_and_grad(self.spec, theta, self.data, self.provider)
    }
}

/// Sampler algorithm and its tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Hmc {
        step_size: f64,
        leapfrog_steps: usize,
    },
    Nuts {
        max_tree_depth: usize,
        target_accept: f64,
    },
}

/// Chain length, warmup length, algorithm, and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Post-warmup samples to keep (K).
    pub draws: usize,
    pub warmup: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        match self.algorithm {
            Algorithm::Hmc {
                step_size,
                leapfrog_steps,
            } => {
                if !(step_size > 0.0 && step_size.is_finite()) {
                    return Err(Error::Config(format!(
                        "step_size must be positive, got {step_size}"
                    )));
                }
                if leapfrog_steps == 0 {
                    return Err(Error::Config("leapfrog_steps must be at least 1".into()));
                }
            }
            Algorithm::Nuts {
                max_tree_depth,
                target_accept,
            } => {
                if max_tree_depth == 0 || max_tree_depth > 12 {
                    return Err(Error::Config(format!(
                        "max_tree_depth must be in 1..=12, got {max_tree_depth}"
                    )));
                }
                if !(target_accept > 0.0 && target_accept < 1.0) {
                    return Err(Error::Config(format!(
                        "target_accept must be in (0, 1), got {target_accept}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-draw bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawDiagnostics {
    /// Mean Metropolis statistic over the trajectory (HMC: the accept
    /// probability itself).
    pub accept_stat: f64,
    /// Doublings performed (NUTS only; 0 for HMC).
    pub tree_depth: usize,
    /// Trajectory stopped because the doubling limit was reached.
    pub max_depth_hit: bool,
    pub divergent: bool,
    /// Log density of the returned position.
    pub log_density: f64,
    pub warmup: bool,
}

/// K weight samples plus per-draw diagnostics (warmup draws included,
/// flagged) and the frozen step size.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub samples: Vec<Vec<f64>>,
    pub diagnostics: Vec<DrawDiagnostics>,
    pub step_size: f64,
}

impl PosteriorSamples {
    /// One row per kept sample.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for row in &self.samples {
            let mut first = true;
            for v in row {
                if !first {
                    write!(w, ",")?;
                }
                write!(w, "{v}")?;
                first = false;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn standard_normal_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// One position-momentum pair with its cached density and gradient.
#[derive(Debug, Clone)]
struct State {
    theta: Vec<f64>,
    momentum: Vec<f64>,
    grad: Vec<f64>,
    logp: f64,
}

impl State {
    fn energy(&self) -> f64 {
        -self.logp + 0.5 * norm_sq(&self.momentum)
    }
}

/// Störmer–Verlet step: half momentum kick, position drift, half kick.
/// Volume-preserving and reversible by construction.
pub fn leapfrog<F>(
    grad_fn: &mut F,
    theta: &[f64],
    momentum: &[f64],
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let grad0 = grad_fn(theta)?;
    let mut p: Vec<f64> = momentum
        .iter()
        .zip(&grad0)
        .map(|(p, g)| p + 0.5 * step * g)
        .collect();
    let theta1: Vec<f64> = theta.iter().zip(&p).map(|(t, p)| t + step * p).collect();
    let grad1 = grad_fn(&theta1)?;
    for (p, g) in p.iter_mut().zip(&grad1) {
        *p += 0.5 * step * g;
    }
    if theta1.iter().chain(&p).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("leapfrog step"));
    }
    Ok((theta1, p))
}

/// Leapfrog step reusing a cached gradient; `Ok(None)` when the target blows
/// up, which the callers flag as a divergence rather than an error.
fn leapfrog_state<T: Target>(target: &mut T, from: &State, step: f64) -> Result<Option<State>> {
    let half = 0.5 * step;
    let mut momentum: Vec<f64> = from
        .momentum
        .iter()
        .zip(&from.grad)
        .map(|(p, g)| p + half * g)
        .collect();
    let theta: Vec<f64> = from
        .theta
        .iter()
        .zip(&momentum)
        .map(|(t, p)| t + step * p)
        .collect();
    if theta.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    let (logp, grad) = match target.logp_and_grad(&theta) {
        Ok(pair) => pair,
        Err(Error::NonFinite(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    for (p, g) in momentum.iter_mut().zip(&grad) {
        *p += half * g;
    }
    if !logp.is_finite() || momentum.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    Ok(Some(State {
        theta,
        momentum,
        grad,
        logp,
    }))
}

/// One HMC transition: momentum refresh, fixed-length trajectory, Metropolis
/// accept/reject on the energy error.
pub fn hmc_draw<T: Target>(
    target: &mut T,
    theta: &[f64],
    step_size: f64,
    leapfrog_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, DrawDiagnostics)> {
    let (logp0, grad0) = target.logp_and_grad(theta)?;
    if !logp0.is_finite() {
        return Err(Error::ChainFailure(
            "log density not finite at the current position".into(),
        ));
    }
    let momentum = standard_normal_vec(rng, theta.len());
    let start = State {
        theta: theta.to_vec(),
        momentum,
        grad: grad0,
        logp: logp0,
    };
    let h0 = start.energy();

    let mut state = start.clone();
    let mut blew_up = false;
    for _ in 0..leapfrog_steps {
        match leapfrog_state(target, &state, step_size)? {
            Some(next) => state = next,
            None => {
                blew_up = true;
                break;
            }
        }
    }
    let energy_error = if blew_up {
        f64::INFINITY
    } else {
        state.energy() - h0
    };
    let divergent = !energy_error.is_finite() || energy_error > DIVERGENCE_ENERGY;
    let accept_stat = if energy_error.is_nan() {
        0.0
    } else {
        (-energy_error).exp().min(1.0)
    };
    let accept = !divergent && rng.random::<f64>() < accept_stat;
    let (theta_next, log_density) = if accept {
        (state.theta, state.logp)
    } else {
        (start.theta, start.logp)
    };
    Ok((
        theta_next,
        DrawDiagnostics {
            accept_stat,
            tree_depth: 0,
            max_depth_hit: false,
            divergent,
            log_density,
            warmup: false,
        },
    ))
}

/// Generalized U-turn check on a trajectory segment: the summed momentum must
/// keep a positive component along both boundary momenta.
fn is_uturn(rho: &[f64], inner_momentum: &[f64], outer_momentum: &[f64]) -> bool {
    dot(rho, inner_momentum) < 0.0 || dot(rho, outer_momentum) < 0.0
}

struct Subtree {
    inner: State,
    outer: State,
    proposal_theta: Vec<f64>,
    proposal_logp: f64,
    log_sum_weight: f64,
    rho: Vec<f64>,
    sum_accept: f64,
    n_accept: u64,
    divergent: bool,
    valid: bool,
}

/// Recursively build a balanced subtree of `2^depth` leapfrog steps starting
/// next to `from`, carrying a multinomially sampled proposal.
fn build_tree<T: Target>(
    target: &mut T,
    from: &State,
    depth: usize,
    step: f64,
    h0: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Subtree> {
    if depth == 0 {
        let state = leapfrog_state(target, from, step)?;
        return Ok(match state {
            Some(state) => {
                let energy_error = state.energy() - h0;
                let divergent = !energy_error.is_finite() || energy_error > DIVERGENCE_ENERGY;
                let accept = if energy_error.is_nan() {
                    0.0
                } else {
                    (-energy_error).exp().min(1.0)
                };
                Subtree {
                    proposal_theta: state.theta.clone(),
                    proposal_logp: state.logp,
                    log_sum_weight: if divergent {
                        f64::NEG_INFINITY
                    } else {
                        -energy_error
                    },
                    rho: state.momentum.clone(),
                    sum_accept: accept,
                    n_accept: 1,
                    divergent,
                    valid: !divergent,
                    inner: state.clone(),
                    outer: state,
                }
            }
            None => Subtree {
                inner: from.clone(),
                outer: from.clone(),
                proposal_theta: from.theta.clone(),
                proposal_logp: from.logp,
                log_sum_weight: f64::NEG_INFINITY,
                rho: vec![0.0; from.theta.len()],
                sum_accept: 0.0,
                n_accept: 1,
                divergent: true,
                valid: false,
            },
        });
    }

    let first = build_tree(target, from, depth - 1, step, h0, rng)?;
    if !first.valid {
        return Ok(first);
    }
    let second = build_tree(target, &first.outer, depth - 1, step, h0, rng)?;

    let log_sum_weight = logaddexp(first.log_sum_weight, second.log_sum_weight);
    // Multinomial draw between the two halves, proportional to their weight.
    let take_second = {
        let u: f64 = rng.random();
        u.ln() < second.log_sum_weight - log_sum_weight
    };
    let (proposal_theta, proposal_logp) = if take_second && second.valid {
        (second.proposal_theta.clone(), second.proposal_logp)
    } else {
        (first.proposal_theta.clone(), first.proposal_logp)
    };
    let rho: Vec<f64> = first
        .rho
        .iter()
        .zip(&second.rho)
        .map(|(a, b)| a + b)
        .collect();
    let valid = second.valid && !is_uturn(&rho, &first.inner.momentum, &second.outer.momentum);
    Ok(Subtree {
        inner: first.inner,
        outer: second.outer,
        proposal_theta,
        proposal_logp,
        log_sum_weight,
        rho,
        sum_accept: first.sum_accept + second.sum_accept,
        n_accept: first.n_accept + second.n_accept,
        divergent: second.divergent,
        valid,
    })
}

/// One no-U-turn transition with multinomial sampling over the trajectory and
/// biased progressive selection across doublings.
pub fn nuts_draw<T: Target>(
    target: &mut T,
    theta: &[f64],
    step_size: f64,
    max_tree_depth: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, DrawDiagnostics)> {
    let (logp0, grad0) = target.logp_and_grad(theta)?;
    if !logp0.is_finite() {
        return Err(Error::ChainFailure(
            "log density not finite at the current position".into(),
        ));
    }
    let momentum = standard_normal_vec(rng, theta.len());
    let init = State {
        theta: theta.to_vec(),
        momentum,
        grad: grad0,
        logp: logp0,
    };
    let h0 = init.energy();

    let mut left = init.clone();
    let mut right = init.clone();
    let mut rho = init.momentum.clone();
    let mut proposal_theta = init.theta.clone();
    let mut proposal_logp = init.logp;
    let mut log_sum_weight = 0.0; // weight of the start point: exp(h0 − h0)
    let mut sum_accept = 0.0;
    let mut n_accept = 0u64;
    let mut divergent = false;
    let mut depth = 0usize;
    let mut max_depth_hit = false;

    while depth < max_tree_depth {
        let forward: bool = rng.random();
        let tree = if forward {
            build_tree(target, &right, depth, step_size, h0, rng)?
        } else {
            build_tree(target, &left, depth, -step_size, h0, rng)?
        };
        sum_accept += tree.sum_accept;
        n_accept += tree.n_accept;
        if tree.divergent {
            divergent = true;
        }
        if !tree.valid {
            break;
        }
        // Biased progressive sampling: favor the fresh half of the trajectory.
        let u: f64 = rng.random();
        if u.ln() < tree.log_sum_weight - log_sum_weight {
            proposal_theta = tree.proposal_theta.clone();
            proposal_logp = tree.proposal_logp;
        }
        log_sum_weight = logaddexp(log_sum_weight, tree.log_sum_weight);
        for (r, t) in rho.iter_mut().zip(&tree.rho) {
            *r += t;
        }
        if forward {
            right = tree.outer;
        } else {
            left = tree.outer;
        }
        depth += 1;
        if is_uturn(&rho, &left.momentum, &right.momentum) {
            break;
        }
        if depth == max_tree_depth {
            max_depth_hit = true;
        }
    }

    let accept_stat = if n_accept == 0 {
        0.0
    } else {
        sum_accept / n_accept as f64
    };
    Ok((
        proposal_theta,
        DrawDiagnostics {
            accept_stat,
            tree_depth: depth,
            max_depth_hit,
            divergent,
            log_density: proposal_logp,
            warmup: false,
        },
    ))
}

/// Dual-averaging step-size controller (warmup only; frozen afterwards).
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target_accept: f64,
    log_step: f64,
    log_step_avg: f64,
    h_bar: f64,
    iteration: u64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(initial_step: f64, target_accept: f64) -> Self {
        Self {
            mu: (10.0 * initial_step).ln(),
            target_accept,
            log_step: initial_step.ln(),
            log_step_avg: initial_step.ln(),
            h_bar: 0.0,
            iteration: 0,
        }
    }

    /// Feed one accept statistic; returns the step size for the next
    /// warmup iteration.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.iteration += 1;
        let m = self.iteration as f64;
        let w = 1.0 / (m + Self::T0);
        self.h_bar =
            (1.0 - w) * self.h_bar + w * (self.target_accept - accept_stat.clamp(0.0, 1.0));
        self.log_step = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = m.powf(-Self::KAPPA);
        self.log_step_avg = eta * self.log_step + (1.0 - eta) * self.log_step_avg;
        self.current()
    }

    /// Step size while adapting.
    pub fn current(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged step size to freeze after warmup.
    pub fn finalized(&self) -> f64 {
        self.log_step_avg.exp()
    }
}

/// Doubling/halving heuristic for the initial step size: scale until a single
/// leapfrog step crosses acceptance probability 1/2.
pub fn find_reasonable_step<T: Target>(
    target: &mut T,
    theta: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let (logp, grad) = target.logp_and_grad(theta)?;
    let momentum = standard_normal_vec(rng, theta.len());
    let start = State {
        theta: theta.to_vec(),
        momentum,
        grad,
        logp,
    };
    let h0 = start.energy();
    let mut step = 1.0f64;
    let log_ratio_at = |target: &mut T, step: f64| -> Result<f64> {
        Ok(match leapfrog_state(target, &start, step)? {
            Some(state) => h0 - state.energy(),
            None => f64::NEG_INFINITY,
        })
    };
    let mut log_ratio = log_ratio_at(target, step)?;
    let direction: f64 = if log_ratio > (0.5f64).ln() { 1.0 } else { -1.0 };
    for _ in 0..60 {
        if direction * log_ratio <= direction * (0.5f64).ln() {
            break;
        }
        step *= (2.0f64).powf(direction);
        if !(1e-8..=1e6).contains(&step) {
            break;
        }
        log_ratio = log_ratio_at(target, step)?;
    }
    Ok(step.clamp(1e-8, 1e6))
}

/// Run one chain against the network posterior: prior init, warmup with
/// adaptation (NUTS), then `cfg.draws` kept samples. The chain is a pure
/// function of (seed, config, model, data, provider parameters); oracle
/// draws come from the provider's own stream.
pub fn run_chain(
    spec: &ModelSpec,
    data: &Dataset,
    provider: &mut IpeProvider,
    cfg: &SamplerConfig,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let mut init_rng = substream(cfg.seed, 0);
    let theta0 = bnn::sample_prior(spec, &mut init_rng)?;
    let mut rng = substream(cfg.seed, 1);
    let mut target = BnnTarget {
        spec,
        data,
        provider,
    };
    run_chain_with(&mut target, theta0, cfg, &mut rng)
}

/// Chain runner over any target (used directly by the sampler validation
/// tests on analytic densities).
pub fn run_chain_with<T: Target>(
    target: &mut T,
    theta0: Vec<f64>,
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let (logp0, _) = target.logp_and_grad(&theta0)?;
    if !logp0.is_finite() {
        return Err(Error::ChainFailure(
            "log density not finite at the initial position".into(),
        ));
    }

    let (mut step_size, mut adapter) = match cfg.algorithm {
        Algorithm::Hmc { step_size, .. } => (step_size, None),
        Algorithm::Nuts { target_accept, .. } => {
            let initial = find_reasonable_step(target, &theta0, rng)?;
            (initial, Some(DualAveraging::new(initial, target_accept)))
        }
    };

    let total = cfg.warmup + cfg.draws;
    let mut theta = theta0;
    let mut samples = Vec::with_capacity(cfg.draws);
    let mut diagnostics = Vec::with_capacity(total);
    for i in 0..total {
        let warmup = i < cfg.warmup;
        let result = match cfg.algorithm {
            Algorithm::Hmc { leapfrog_steps, .. } => {
                hmc_draw(target, &theta, step_size, leapfrog_steps, rng)
            }
            Algorithm::Nuts { max_tree_depth, .. } => {
                nuts_draw(target, &theta, step_size, max_tree_depth, rng)
            }
        };
        let (next, mut diag) = result.map_err(|e| match e {
            Error::NonFinite(what) => Error::ChainFailure(format!(
                "non-finite {what} at draw {i} ({} kept so far)",
                samples.len()
            )),
            other => other,
        })?;
        diag.warmup = warmup;
        theta = next;
        if let Some(da) = adapter.as_mut() {
            if warmup {
                step_size = da.update(diag.accept_stat);
                if i + 1 == cfg.warmup {
                    step_size = da.finalized();
                }
            }
        }
        if !warmup {
            samples.push(theta.clone());
        }
        diagnostics.push(diag);
    }
    Ok(PosteriorSamples {
        samples,
        diagnostics,
        step_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_gaussian(dim: usize) -> FnTarget<impl FnMut(&[f64]) -> (f64, Vec<f64>)> {
        FnTarget::new(dim, move |theta: &[f64]| {
            let logp = -0.5 * norm_sq(theta);
            let grad = theta.iter().map(|t| -t).collect();
            (logp, grad)
        })
    }

    /// Zero-mean 2-D Gaussian with unit variances and correlation `rho`.
    fn correlated_gaussian(rho: f64) -> FnTarget<impl FnMut(&[f64]) -> (f64, Vec<f64>)> {
        FnTarget::new(2, move |theta: &[f64]| {
            let (x, y) = (theta[0], theta[1]);
            let c = 1.0 - rho * rho;
            let logp = -0.5 * (x * x - 2.0 * rho * x * y + y * y) / c;
            let grad = vec![-(x - rho * y) / c, -(y - rho * x) / c];
            (logp, grad)
        })
    }

    #[test]
    fn leapfrog_free_particle() {
        let mut zero_grad = |theta: &[f64]| Ok(vec![0.0; theta.len()]);
        let (theta, p) = leapfrog(&mut zero_grad, &[1.0, -2.0], &[0.5, 0.25], 0.3).unwrap();
        assert_eq!(theta, vec![1.0 + 0.3 * 0.5, -2.0 + 0.3 * 0.25]);
        assert_eq!(p, vec![0.5, 0.25]);
    }

    #[test]
    fn leapfrog_matches_scalar_reference() {
        // Reference integrator written independently for the 1-D standard
        // Gaussian (grad = −θ).
        let step = 0.1;
        let (mut theta_ref, mut p_ref) = (1.0f64, 0.0f64);
        p_ref += 0.5 * step * (-theta_ref);
        theta_ref += step * p_ref;
        p_ref += 0.5 * step * (-theta_ref);

        let mut grad = |theta: &[f64]| Ok(vec![-theta[0]]);
        let (theta, p) = leapfrog(&mut grad, &[1.0], &[0.0], step).unwrap();
        assert!((theta[0] - theta_ref).abs() < 1e-12);
        assert!((p[0] - p_ref).abs() < 1e-12);
    }

    #[test]
    fn leapfrog_is_reversible() {
        let mut grad = |theta: &[f64]| Ok(theta.iter().map(|t| -t.powi(3)).collect());
        let theta0 = vec![0.4, -0.8, 1.2];
        let p0 = vec![0.3, 0.9, -0.5];
        let (theta1, p1) = leapfrog(&mut grad, &theta0, &p0, 0.2).unwrap();
        let p1_neg: Vec<f64> = p1.iter().map(|p| -p).collect();
        let (theta2, p2) = leapfrog(&mut grad, &theta1, &p1_neg, 0.2).unwrap();
        for ((t2, t0), (p2, p0)) in theta2.iter().zip(&theta0).zip(p2.iter().zip(&p0)) {
            assert!((t2 - t0).abs() < 1e-10);
            assert!((p2 + p0).abs() < 1e-10);
        }
    }

    #[test]
    fn leapfrog_volume_preservation() {
        // Determinant of the 6x6 Jacobian of the leapfrog map on a quartic
        // potential, by central differences, at random phase-space points.
        let step = 0.05;
        let flow = |q: &[f64]| -> Vec<f64> {
            let mut grad =
                |theta: &[f64]| Ok::<Vec<f64>, Error>(theta.iter().map(|t| -t.powi(3)).collect());
            let (t, p) = leapfrog(&mut grad, &q[..3], &q[3..], step).unwrap();
            t.into_iter().chain(p).collect()
        };
        let mut rng = substream(99, 0);
        for _ in 0..3 {
            let point: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-5;
            let mut jac = nalgebra::DMatrix::<f64>::zeros(6, 6);
            for col in 0..6 {
                let mut plus = point.clone();
                let mut minus = point.clone();
                plus[col] += h;
                minus[col] -= h;
                let (fp, fm) = (flow(&plus), flow(&minus));
                for row in 0..6 {
                    jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
                }
            }
            let det = jac.determinant();
            assert!((det - 1.0).abs() < 1e-8, "det {det}");
        }
    }

    #[test]
    fn hmc_accepts_in_small_step_limit() {
        let mut target = standard_gaussian(2);
        let mut rng = substream(1, 0);
        let mut theta = vec![0.3, -0.4];
        let mut accepted = 0usize;
        for _ in 0..1000 {
            let (next, diag) = hmc_draw(&mut target, &theta, 1e-6, 1, &mut rng).unwrap();
            if diag.accept_stat > 0.999 {
                accepted += 1;
            }
            theta = next;
        }
        assert!(accepted as f64 / 1000.0 > 0.999);
    }

    #[test]
    fn hmc_recovers_gaussian_mean() {
        let mut target = standard_gaussian(2);
        let mut rng = substream(2, 0);
        let cfg = SamplerConfig {
            draws: 10_000,
            warmup: 200,
            algorithm: Algorithm::Hmc {
                step_size: 0.4,
                leapfrog_steps: 8,
            },
            seed: 0,
        };
        let run = run_chain_with(&mut target, vec![2.0, -2.0], &cfg, &mut rng).unwrap();
        for d in 0..2 {
            let values: Vec<f64> = run.samples.iter().map(|s| s[d]).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let mcse = batch_means_mcse(&values);
            assert!(mean.abs() < 3.0 * mcse, "dim {d}: mean {mean}, mcse {mcse}");
        }
    }

    #[test]
    fn hmc_replays_deterministically() {
        let chain = |seed: u64| {
            let mut target = standard_gaussian(3);
            let mut rng = substream(seed, 0);
            let mut theta = vec![0.1, 0.2, 0.3];
            let mut out = Vec::new();
            for _ in 0..50 {
                let (next, _) = hmc_draw(&mut target, &theta, 0.3, 5, &mut rng).unwrap();
                theta = next;
                out.push(theta.clone());
            }
            out
        };
        assert_eq!(chain(5), chain(5));
        assert_ne!(chain(5), chain(6));
    }

    /// Batch-means Monte Carlo standard error.
    pub(crate) fn batch_means_mcse(values: &[f64]) -> f64 {
        let b = (values.len() as f64).sqrt() as usize;
        let n_batches = values.len() / b;
        let means: Vec<f64> = (0..n_batches)
            .map(|i| values[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / n_batches as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
        (var / n_batches as f64).sqrt()
    }

    #[test]
    fn nuts_recovers_gaussian_variance() {
        let mut target = standard_gaussian(1);
        let mut rng = substream(3, 0);
        let cfg = SamplerConfig {
            draws: 10_000,
            warmup: 500,
            algorithm: Algorithm::Nuts {
                max_tree_depth: 8,
                target_accept: 0.8,
            },
            seed: 0,
        };
        let run = run_chain_with(&mut target, vec![1.5], &cfg, &mut rng).unwrap();
        let values: Vec<f64> = run.samples.iter().map(|s| s[0]).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn nuts_recovers_correlated_covariance() {
        let rho = 0.9;
        let mut target = correlated_gaussian(rho);
        let mut rng = substream(4, 0);
        let cfg = SamplerConfig {
            draws: 20_000,
            warmup: 500,
            algorithm: Algorithm::Nuts {
                max_tree_depth: 8,
                target_accept: 0.8,
            },
            seed: 0,
        };
        let run = run_chain_with(&mut target, vec![0.0, 0.0], &cfg, &mut rng).unwrap();
        let n = run.samples.len() as f64;
        let mean: Vec<f64> = (0..2)
            .map(|d| run.samples.iter().map(|s| s[d]).sum::<f64>() / n)
            .collect();
        let cov = |a: usize, b: usize| {
            run.samples
                .iter()
                .map(|s| (s[a] - mean[a]) * (s[b] - mean[b]))
                .sum::<f64>()
                / n
        };
        assert!((cov(0, 0) - 1.0).abs() < 0.15);
        assert!((cov(1, 1) - 1.0).abs() < 0.15);
        assert!((cov(0, 1) - rho).abs() < 0.15 * rho);
    }

    #[test]
    fn nuts_replays_deterministically() {
        let draw_seq = |seed: u64| {
            let mut target = correlated_gaussian(0.5);
            let mut rng = substream(seed, 0);
            let mut theta = vec![0.2, -0.1];
            let mut out = Vec::new();
            for _ in 0..40 {
                let (next, _) = nuts_draw(&mut target, &theta, 0.3, 6, &mut rng).unwrap();
                theta = next;
                out.push(theta.clone());
            }
            out
        };
        assert_eq!(draw_seq(9), draw_seq(9));
    }

    #[test]
    fn dual_averaging_controller_direction() {
        // The anchor sits above the initial step, so the controller's
        // direction shows in the sequence of post-update step sizes.
        let mut up = DualAveraging::new(0.1, 0.8);
        let mut last = up.update(1.0);
        for _ in 0..30 {
            let step = up.update(1.0);
            assert!(step > last, "all-accept must grow the step");
            last = step;
        }
        let mut down = DualAveraging::new(0.1, 0.8);
        let mut last = down.update(0.0);
        for _ in 0..30 {
            let step = down.update(0.0);
            assert!(step < last, "all-reject must shrink the step");
            last = step;
        }
    }

    #[test]
    fn adaptation_hits_target_acceptance() {
        // End to end on a 2-D Gaussian: warmup adapts toward 0.8, then the
        // frozen step must realize an acceptance statistic near the target.
        let mut target = standard_gaussian(2);
        let mut rng = substream(6, 0);
        let cfg = SamplerConfig {
            draws: 2000,
            warmup: 500,
            algorithm: Algorithm::Nuts {
                max_tree_depth: 8,
                target_accept: 0.8,
            },
            seed: 0,
        };
        let run = run_chain_with(&mut target, vec![0.5, 0.5], &cfg, &mut rng).unwrap();
        let kept: Vec<&DrawDiagnostics> = run.diagnostics.iter().filter(|d| !d.warmup).collect();
        let mean_accept = kept.iter().map(|d| d.accept_stat).sum::<f64>() / kept.len() as f64;
        assert!(
            (0.7..=0.9).contains(&mean_accept),
            "mean acceptance {mean_accept}"
        );
    }

    #[test]
    fn warmup_only_run_is_empty_but_diagnosed() {
        let mut target = standard_gaussian(2);
        let mut rng = substream(7, 0);
        let cfg = SamplerConfig {
            draws: 0,
            warmup: 25,
            algorithm: Algorithm::Nuts {
                max_tree_depth: 6,
                target_accept: 0.8,
            },
            seed: 0,
        };
        let run = run_chain_with(&mut target, vec![0.0, 0.0], &cfg, &mut rng).unwrap();
        assert!(run.samples.is_empty());
        assert_eq!(run.diagnostics.len(), 25);
        assert!(run.diagnostics.iter().all(|d| d.warmup));
    }

    #[test]
    fn quantum_chain_is_bit_identical_across_reruns() {
        use crate::bnn::tests::regression_spec;
        use crate::bnn::IpeProvider;
        use crate::ipe::IpeParams;

        let spec = regression_spec(vec![1, 3, 1]);
        let data =
            crate::bnn::Dataset::new(vec![vec![0.2], vec![-0.7], vec![0.5]], vec![0.1, -0.4, 0.3])
                .unwrap();
        let cfg = SamplerConfig {
            draws: 20,
            warmup: 15,
            algorithm: Algorithm::Nuts {
                max_tree_depth: 5,
                target_accept: 0.8,
            },
            seed: 12,
        };
        let run = || {
            let mut provider =
                IpeProvider::quantum(IpeParams::with_qubits(6).unwrap(), substream(99, 0));
            run_chain(&spec, &data, &mut provider, &cfg)
                .unwrap()
                .samples
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn samples_serialize_one_row_per_draw() {
        let run = PosteriorSamples {
            samples: vec![vec![1.0, 2.5], vec![-0.5, 0.0]],
            diagnostics: vec![],
            step_size: 0.1,
        };
        let mut buf = Vec::new();
        run.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,2.5\n-0.5,0\n");
    }

    #[test]
    fn config_validation() {
        let bad_depth = SamplerConfig {
            draws: 1,
            warmup: 0,
            algorithm: Algorithm::Nuts {
                max_tree_depth: 13,
                target_accept: 0.8,
            },
            seed: 0,
        };
        assert!(bad_depth.validate().is_err());
        let bad_accept = SamplerConfig {
            draws: 1,
            warmup: 0,
            algorithm: Algorithm::Nuts {
                max_tree_depth: 8,
                target_accept: 1.0,
            },
            seed: 0,
        };
        assert!(bad_accept.validate().is_err());
        let bad_step = SamplerConfig {
            draws: 1,
            warmup: 0,
            algorithm: Algorithm::Hmc {
                step_size: 0.0,
                leapfrog_steps: 4,
            },
            seed: 0,
        };
        assert!(bad_step.validate().is_err());
    }
}
