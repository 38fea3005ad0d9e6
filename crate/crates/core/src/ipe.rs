//! Exact output distribution of the quantum inner-product estimator.
//!
//! The estimator amplitude-encodes two real vectors, so the normalized inner
//! product appears as the amplitude `a = (v_i·v_j / (‖v_i‖‖v_j‖) + 1) / 2`,
//! which amplitude estimation reads back through an `n`-qubit phase register.
//! The register quantizes the target phase `ω̄ = arcsin(√a)/π` onto the grid
//! `{0, 1/2^n, …}`: with `b` the nearest grid index and `δ = ω̄ − b/2^n`, the
//! register returns grid point `(b + l) mod 2^n` with probability
//!
//! ```text
//! p_l = sin²(π(2^n δ − l)) / (2^{2n} sin²(π(δ − l/2^n)))
//! ```
//!
//! and the measured phase unmaps to the estimate `(2 sin²(π ω_l) − 1)·‖v_i‖‖v_j‖`.
//! Everything here evaluates that distribution in closed form or samples it by
//! inversion; there is no gate-level state vector anywhere.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};

/// Upper bound on the phase-register width. Keeps the `2^n`-outcome
/// enumeration tractable.
pub const MAX_QUBITS: u32 = 24;

/// Tolerance for clamping an amplitude just outside `[0, 1]`.
const AMPLITUDE_CLAMP_TOL: f64 = 1e-12;

/// Maximum tolerated drift of `Σ p_l` from 1 before renormalizing is refused.
const NORMALIZATION_TOL: f64 = 1e-9;

/// Phase-register width `n` and per-estimate repetition count `m`.
///
/// `m = 1` is the intended operating point (a single oracle run per
/// estimate); `m > 1` re-enables median-of-`m` amplification so the effect of
/// removing it can be measured. Odd `m` keeps the median unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpeParams {
    qubits: u32,
    repetitions: u32,
}

impl IpeParams {
    pub fn new(qubits: u32, repetitions: u32) -> Result<Self> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "qubits must be in 1..={MAX_QUBITS}, got {qubits}"
            )));
        }
        if repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if repetitions > 1 && repetitions.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "repetitions must be odd when above 1, got {repetitions}"
            )));
        }
        Ok(Self {
            qubits,
            repetitions,
        })
    }

    /// Single-run estimator with `n` qubits.
    pub fn with_qubits(qubits: u32) -> Result<Self> {
        Self::new(qubits, 1)
    }

    pub fn qubits(&self) -> u32 {
        self.qubits
    }

    pub fn repetitions(&self) -> u32 {
        self.repetitions
    }
}

/// One attainable estimate value and its probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub value: f64,
    pub probability: f64,
}

/// The full `2^n`-outcome distribution of a single estimator run, together
/// with the geometry that produced it.
#[derive(Debug, Clone)]
pub struct EstimateDistribution {
    /// Outcome `l` of the phase register, in register order `l = 0..2^n`.
    pub outcomes: Vec<Outcome>,
    pub true_inner_product: f64,
    pub norms_product: f64,
    /// `a ∈ [0, 1]`, the encoded amplitude.
    pub amplitude: f64,
    /// `ω̄ ∈ [0, 1/2]`, the phase the register tries to resolve.
    pub target_phase: f64,
    /// Nearest grid index `b` (argmin over `{0..2^n}`, ties to the smaller).
    pub grid_index: u32,
    /// `δ = ω̄ − b/2^n`, bounded by `1/2^{n+1}` in magnitude.
    pub grid_offset: f64,
}

impl EstimateDistribution {
    /// Mean of the estimate under the exact distribution.
    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability * o.value).sum()
    }

    /// Serialize as `value,probability` rows for plotting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "value,probability")?;
        for o in &self.outcomes {
            writeln!(w, "{},{}", o.value, o.probability)?;
        }
        Ok(())
    }
}

/// Summary of the estimator error computed exactly from the distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub bias: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// `sin(πx)`, exact at half-integers.
///
/// Reduces to `[0, 1/2]` first so arguments near integers keep full relative
/// precision (`1 − x` is exact for `x ∈ [1/2, 1]`).
fn sin_pi(x: f64) -> f64 {
    if x < 0.0 {
        return -sin_pi(-x);
    }
    debug_assert!(x <= 1.0, "sin_pi argument out of reduced range: {x}");
    let r = if x > 0.5 { 1.0 - x } else { x };
    if r == 0.0 {
        0.0
    } else if r == 0.5 {
        1.0
    } else {
        (std::f64::consts::PI * r).sin()
    }
}

/// `cos(2πx)` for `x ∈ [0, 1)`, exact at quarter turns.
///
/// Grid phases are dyadic rationals, so the quarter-turn cases are hit by
/// exact float equality and yield exact point-mass estimates.
fn cos_two_pi(x: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&x), "cos_two_pi argument: {x}");
    if x == 0.0 {
        1.0
    } else if x == 0.25 || x == 0.75 {
        0.0
    } else if x == 0.5 {
        -1.0
    } else {
        (2.0 * std::f64::consts::PI * x).cos()
    }
}

fn check_dims(v_i: &[f64], v_j: &[f64]) -> Result<()> {
    if v_i.is_empty() {
        return Err(Error::EmptyInput("vector of dimension 0"));
    }
    if v_i.len() != v_j.len() {
        return Err(Error::DimensionMismatch {
            expected: v_i.len(),
            got: v_j.len(),
        });
    }
    Ok(())
}

fn dot(v_i: &[f64], v_j: &[f64]) -> f64 {
    v_i.iter().zip(v_j).map(|(a, b)| a * b).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Amplitude `a = (cosine similarity + 1) / 2` encoded by the oracle state.
pub fn normalized_amplitude(v_i: &[f64], v_j: &[f64]) -> Result<f64> {
    check_dims(v_i, v_j)?;
    let (ni, nj) = (norm(v_i), norm(v_j));
    if ni == 0.0 || nj == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    let a = 0.5 * (dot(v_i, v_j) / (ni * nj) + 1.0);
    Ok(a.clamp(0.0, 1.0))
}

/// Phase `ω̄ = arcsin(√a)/π ∈ [0, 1/2]` that the register resolves.
pub fn target_phase(a: f64) -> Result<f64> {
    if !(-AMPLITUDE_CLAMP_TOL..=1.0 + AMPLITUDE_CLAMP_TOL).contains(&a) {
        return Err(Error::Domain(format!(
            "amplitude {a} outside [0, 1] beyond clamp tolerance"
        )));
    }
    let a = a.clamp(0.0, 1.0);
    // arcsin(√a)/π is exactly dyadic for a ∈ {0, 1/2, 1}; floating-point
    // asin misses the middle case by an ulp, which would break the exact
    // point-mass property for orthogonal vectors.
    if a == 0.5 {
        return Ok(0.25);
    }
    Ok(a.sqrt().asin() / std::f64::consts::PI)
}

/// Nearest register grid point to `phase`: index `b ∈ {0..2^n}` minimizing
/// `|b/2^n − phase|` (ties to the smaller index) and the offset
/// `δ = phase − b/2^n`.
pub fn nearest_grid_point(phase: f64, qubits: u32) -> (u32, f64) {
    debug_assert!((0.0..=0.5).contains(&phase), "phase out of range: {phase}");
    let size = (1u64 << qubits) as f64;
    let scaled = phase * size;
    let floor = scaled.floor();
    let frac = scaled - floor;
    // Half-way ties round down so the choice is deterministic.
    let b = if frac > 0.5 { floor + 1.0 } else { floor };
    let delta = phase - b / size;
    (b as u32, delta)
}

/// Precomputed geometry shared by the distribution, the sampler, and the
/// moment routines.
struct Geometry {
    dot: f64,
    norms_product: f64,
    amplitude: f64,
    phase: f64,
    grid_index: u32,
    delta: f64,
    size: u64,
    /// `sin²(π 2^n δ)`: the numerator of `p_l`, identical for every `l`.
    numerator: f64,
}

impl Geometry {
    fn build(v_i: &[f64], v_j: &[f64], qubits: u32) -> Result<Self> {
        let amplitude = normalized_amplitude(v_i, v_j)?;
        let phase = target_phase(amplitude)?;
        let (grid_index, delta) = nearest_grid_point(phase, qubits);
        let size = 1u64 << qubits;
        let numerator = {
            let s = sin_pi(delta * size as f64);
            s * s
        };
        Ok(Self {
            dot: dot(v_i, v_j),
            norms_product: norm(v_i) * norm(v_j),
            amplitude,
            phase,
            grid_index,
            delta,
            size,
            numerator,
        })
    }

    fn is_point_mass(&self) -> bool {
        self.delta == 0.0
    }

    /// `p_l` for register outcome `l`. The denominator can only vanish at
    /// `l = 0` with `δ = 0`, which the point-mass branch covers; the value is
    /// the analytic limit 1 there.
    fn probability(&self, l: u64) -> f64 {
        if self.is_point_mass() {
            return if l == 0 { 1.0 } else { 0.0 };
        }
        let size = self.size as f64;
        let s = sin_pi(self.delta - l as f64 / size);
        (self.numerator / (size * size * s * s)).clamp(0.0, 1.0)
    }

    /// Estimate value for register outcome `l`.
    ///
    /// Uses `2 sin²(πω) − 1 = −cos(2πω)` on the exact dyadic phase. In the
    /// point-mass case `ω_0 = ω̄`, so the estimate is returned as the true
    /// inner product itself rather than through the trig round-trip.
    fn value(&self, l: u64) -> f64 {
        if self.is_point_mass() && l == 0 {
            return self.dot;
        }
        let phase_l = ((self.grid_index as u64 + l) % self.size) as f64 / self.size as f64;
        let estimate = -cos_two_pi(phase_l) * self.norms_product;
        // Avoid the negative-zero representation in outputs.
        if estimate == 0.0 {
            0.0
        } else {
            estimate
        }
    }

    /// One inversion-sampled estimate.
    ///
    /// Outcomes are accumulated by distance from the target grid point
    /// (`l = 0, 2^n−1, 1, 2^n−2, …`), where the mass concentrates, so the
    /// expected number of evaluated terms is `O(n)` even for wide registers.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_point_mass() {
            return self.dot;
        }
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        for k in 0..self.size {
            let l = if k % 2 == 0 {
                k / 2
            } else {
                self.size - 1 - k / 2
            };
            cumulative += self.probability(l);
            if u < cumulative {
                return self.value(l);
            }
        }
        // Rounding exhausted the unit mass; fall back to the heaviest outcome.
        self.value(0)
    }
}

/// Exact distribution of a single estimator run.
///
/// `params.repetitions` does not enter here: the distribution describes one
/// oracle run, and medians of several runs are a sampling-time concern.
pub fn outcome_distribution(
    v_i: &[f64],
    v_j: &[f64],
    params: &IpeParams,
) -> Result<EstimateDistribution> {
    let geom = Geometry::build(v_i, v_j, params.qubits())?;
    let mut outcomes = Vec::with_capacity(geom.size as usize);
    let mut total = 0.0;
    for l in 0..geom.size {
        let probability = geom.probability(l);
        total += probability;
        outcomes.push(Outcome {
            value: geom.value(l),
            probability,
        });
    }
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Internal(format!(
            "outcome probabilities sum to {total}, expected 1"
        )));
    }
    if total != 1.0 {
        for o in &mut outcomes {
            o.probability /= total;
        }
    }
    Ok(EstimateDistribution {
        outcomes,
        true_inner_product: geom.dot,
        norms_product: geom.norms_product,
        amplitude: geom.amplitude,
        target_phase: geom.phase,
        grid_index: geom.grid_index,
        grid_offset: geom.delta,
    })
}

/// Draw one estimate of `v_i·v_j` from the oracle.
///
/// With `m = 1` the draw follows [`outcome_distribution`] exactly; with
/// `m > 1` it is the median of `m` independent runs. Deterministic for a
/// given `(inputs, rng state)`.
pub fn sample_estimate<R: Rng + ?Sized>(
    v_i: &[f64],
    v_j: &[f64],
    params: &IpeParams,
    rng: &mut R,
) -> Result<f64> {
    let geom = Geometry::build(v_i, v_j, params.qubits())?;
    let m = params.repetitions();
    if m == 1 {
        return Ok(geom.sample(rng));
    }
    let mut draws: Vec<f64> = (0..m).map(|_| geom.sample(rng)).collect();
    draws.sort_by(f64::total_cmp);
    Ok(draws[m as usize / 2])
}

/// Exact moments of the estimator error for a single run, streamed over the
/// outcome grid without materializing it.
pub fn estimate_error_stats(v_i: &[f64], v_j: &[f64], params: &IpeParams) -> Result<ErrorStats> {
    let geom = Geometry::build(v_i, v_j, params.qubits())?;
    if geom.is_point_mass() {
        return Ok(ErrorStats {
            mean: geom.dot,
            bias: 0.0,
            mae: 0.0,
            rmse: 0.0,
        });
    }
    let mut mean = 0.0;
    let mut mae = 0.0;
    let mut mse = 0.0;
    for l in 0..geom.size {
        let p = geom.probability(l);
        if p == 0.0 {
            continue;
        }
        let v = geom.value(l);
        let err = v - geom.dot;
        mean += p * v;
        mae += p * err.abs();
        mse += p * err * err;
    }
    Ok(ErrorStats {
        mean,
        bias: mean - geom.dot,
        mae,
        rmse: mse.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle for `p_l`: evaluates the geometric series
    /// `|Σ_k e^{2πi(ω̄ − (b+l)/2^n)k}|² / 2^{2n}` term by term with complex
    /// arithmetic, never touching the closed form used by the implementation.
    fn brute_force_probability(phase: f64, b: u32, l: u64, qubits: u32) -> f64 {
        let size = 1u64 << qubits;
        let angle = 2.0 * std::f64::consts::PI * (phase - (b as u64 + l) as f64 / size as f64);
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for k in 0..size {
            let t = angle * k as f64;
            re += t.cos();
            im += t.sin();
        }
        (re * re + im * im) / (size as f64 * size as f64)
    }

    fn deg60() -> Vec<f64> {
        vec![60f64.to_radians().cos(), 60f64.to_radians().sin()]
    }

    #[test]
    fn amplitude_examples() {
        assert_eq!(normalized_amplitude(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.5);
        assert_eq!(normalized_amplitude(&[2.0, 0.0], &[3.0, 0.0]).unwrap(), 1.0);
        let a = normalized_amplitude(&[1.0, 0.0], &deg60()).unwrap();
        assert!((a - 0.75).abs() < 1e-15);
    }

    #[test]
    fn amplitude_errors() {
        assert!(matches!(
            normalized_amplitude(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNormVector)
        ));
        assert!(matches!(
            normalized_amplitude(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn target_phase_examples() {
        assert_eq!(target_phase(0.0).unwrap(), 0.0);
        assert_eq!(target_phase(1.0).unwrap(), 0.5);
        assert_eq!(target_phase(0.5).unwrap(), 0.25);
        assert!((target_phase(0.75).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(target_phase(1.5).is_err());
        assert!(target_phase(-1e-3).is_err());
        // Clamp tolerance admits tiny excursions.
        assert_eq!(target_phase(1.0 + 1e-13).unwrap(), 0.5);
    }

    #[test]
    fn target_phase_is_monotone() {
        let mut last = -1.0;
        for i in 0..=1000 {
            let v = target_phase(i as f64 / 1000.0).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn grid_point_examples() {
        assert_eq!(nearest_grid_point(0.25, 5), (8, 0.0));
        assert_eq!(nearest_grid_point(0.5, 1), (1, 0.0));
        let (b, delta) = nearest_grid_point(1.0 / 3.0, 3);
        assert_eq!(b, 3);
        assert!((delta - (1.0 / 3.0 - 3.0 / 8.0)).abs() < 1e-16);
        assert!((delta + 1.0 / 24.0).abs() < 1e-16);
    }

    #[test]
    fn grid_point_ties_round_down() {
        // 3/16 sits exactly between 1/8 and 2/8.
        let (b, delta) = nearest_grid_point(3.0 / 16.0, 3);
        assert_eq!(b, 1);
        assert_eq!(delta, 1.0 / 16.0);
    }

    #[test]
    fn grid_offset_is_bounded() {
        for n in [2u32, 5, 9, 13] {
            for i in 0..=500 {
                let phase = 0.5 * i as f64 / 500.0;
                let (_, delta) = nearest_grid_point(phase, n);
                assert!(delta.abs() <= 1.0 / (1u64 << (n + 1)) as f64 + 1e-18);
            }
        }
    }

    #[test]
    fn point_mass_distributions() {
        // ω̄ = 0.25 lies on the n = 5 grid exactly.
        let d = outcome_distribution(
            &[1.0, 0.0],
            &[0.0, 1.0],
            &IpeParams::with_qubits(5).unwrap(),
        )
        .unwrap();
        assert_eq!(d.outcomes.len(), 32);
        assert_eq!(d.outcomes[0].probability, 1.0);
        assert_eq!(d.outcomes[0].value, 0.0);
        assert!(d.outcomes[1..].iter().all(|o| o.probability == 0.0));

        // Parallel vectors: ω̄ = 0.5, estimate is the unnormalized product.
        let d = outcome_distribution(
            &[2.0, 0.0],
            &[3.0, 0.0],
            &IpeParams::with_qubits(4).unwrap(),
        )
        .unwrap();
        assert_eq!(d.outcomes[0].probability, 1.0);
        assert_eq!(d.outcomes[0].value, 6.0);
    }

    #[test]
    fn sixty_degree_distribution_matches_brute_force() {
        let params = IpeParams::with_qubits(3).unwrap();
        let d = outcome_distribution(&[1.0, 0.0], &deg60(), &params).unwrap();
        assert_eq!(d.grid_index, 3);
        assert!((d.grid_offset + 1.0 / 24.0).abs() < 1e-15);
        assert_eq!(d.outcomes.len(), 8);

        let total: f64 = d.outcomes.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);

        for (l, o) in d.outcomes.iter().enumerate() {
            let expect = brute_force_probability(d.target_phase, d.grid_index, l as u64, 3);
            assert!(
                (o.probability - expect).abs() < 1e-12,
                "p_{l}: {} vs {}",
                o.probability,
                expect
            );
        }
        // Heaviest outcome stays on the nearest grid point.
        assert!(d.outcomes[0].probability > 0.5);
    }

    #[test]
    fn error_stats_examples() {
        let stats = estimate_error_stats(
            &[1.0, 0.0],
            &[0.0, 1.0],
            &IpeParams::with_qubits(5).unwrap(),
        )
        .unwrap();
        assert_eq!(stats.bias, 0.0);
        assert_eq!(stats.mae, 0.0);
        assert_eq!(stats.rmse, 0.0);

        let stats = estimate_error_stats(
            &[2.0, 0.0],
            &[3.0, 0.0],
            &IpeParams::with_qubits(4).unwrap(),
        )
        .unwrap();
        assert_eq!(stats.bias, 0.0);
        assert_eq!(stats.mae, 0.0);

        // Non-degenerate case: moments agree with direct summation over the
        // materialized distribution.
        let params = IpeParams::with_qubits(3).unwrap();
        let d = outcome_distribution(&[1.0, 0.0], &deg60(), &params).unwrap();
        let stats = estimate_error_stats(&[1.0, 0.0], &deg60(), &params).unwrap();
        let mean: f64 = d.outcomes.iter().map(|o| o.probability * o.value).sum();
        let mae: f64 = d
            .outcomes
            .iter()
            .map(|o| o.probability * (o.value - d.true_inner_product).abs())
            .sum();
        let mse: f64 = d
            .outcomes
            .iter()
            .map(|o| o.probability * (o.value - d.true_inner_product).powi(2))
            .sum();
        assert!((stats.mean - mean).abs() < 1e-14);
        assert!((stats.bias - (mean - 0.5)).abs() < 1e-14);
        assert!((stats.mae - mae).abs() < 1e-14);
        assert!((stats.rmse - mse.sqrt()).abs() < 1e-14);
        assert!(stats.mae > 0.0);
    }

    #[test]
    fn sampler_is_deterministic_and_exact_on_point_masses() {
        let params = IpeParams::with_qubits(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..50 {
            assert_eq!(
                sample_estimate(&[1.0, 0.0], &[0.0, 1.0], &params, &mut rng).unwrap(),
                0.0
            );
        }
        let params = IpeParams::with_qubits(6).unwrap();
        assert_eq!(
            sample_estimate(&[2.0, 0.0], &[3.0, 0.0], &params, &mut rng).unwrap(),
            6.0
        );

        let params = IpeParams::with_qubits(4).unwrap();
        let draw = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_estimate(&[1.0, 0.2], &deg60(), &params, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn sampler_tracks_exact_distribution() {
        let params = IpeParams::with_qubits(5).unwrap();
        let d = outcome_distribution(&[1.0, 0.0], &deg60(), &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let draws = 100_000usize;
        let mut counts = std::collections::BTreeMap::<u64, usize>::new();
        for _ in 0..draws {
            let v = sample_estimate(&[1.0, 0.0], &deg60(), &params, &mut rng).unwrap();
            *counts.entry(v.to_bits()).or_default() += 1;
        }
        // Merge exact probabilities by estimate value (distinct register
        // outcomes can share a value), then compare in total variation.
        let mut exact = std::collections::BTreeMap::<u64, f64>::new();
        for o in &d.outcomes {
            *exact.entry(o.value.to_bits()).or_default() += o.probability;
        }
        let keys: std::collections::BTreeSet<u64> =
            exact.keys().chain(counts.keys()).copied().collect();
        let tv: f64 = keys
            .iter()
            .map(|k| {
                let p = exact.get(k).copied().unwrap_or(0.0);
                let q = counts
                    .get(k)
                    .map(|&c| c as f64 / draws as f64)
                    .unwrap_or(0.0);
                (p - q).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "TV distance {tv}");
    }

    #[test]
    fn median_mode_reduces_spread() {
        let single = IpeParams::new(5, 1).unwrap();
        let median = IpeParams::new(5, 9).unwrap();
        let spread = |params: &IpeParams| {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let truth = dot(&[1.0, 0.0], &deg60());
            let n = 2000;
            (0..n)
                .map(|_| {
                    let v = sample_estimate(&[1.0, 0.0], &deg60(), params, &mut rng).unwrap();
                    (v - truth).abs()
                })
                .sum::<f64>()
                / n as f64
        };
        assert!(spread(&median) < spread(&single));
    }

    #[test]
    fn params_validation() {
        assert!(IpeParams::new(0, 1).is_err());
        assert!(IpeParams::new(25, 1).is_err());
        assert!(IpeParams::new(5, 0).is_err());
        assert!(IpeParams::new(5, 2).is_err());
        assert!(IpeParams::new(5, 3).is_ok());
        assert!(IpeParams::new(24, 1).is_ok());
    }

    #[test]
    fn accuracy_improves_with_register_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
            .map(|_| {
                let unit = |rng: &mut ChaCha8Rng| {
                    let v: Vec<f64> = (0..3)
                        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect();
                    let n = norm(&v);
                    v.into_iter().map(|x| x / n).collect::<Vec<_>>()
                };
                (unit(&mut rng), unit(&mut rng))
            })
            .collect();
        let mean_mae = |n: u32| {
            let params = IpeParams::with_qubits(n).unwrap();
            pairs
                .iter()
                .map(|(a, b)| estimate_error_stats(a, b, &params).unwrap().mae)
                .sum::<f64>()
                / pairs.len() as f64
        };
        let (m5, m7, m10, m13) = (mean_mae(5), mean_mae(7), mean_mae(10), mean_mae(13));
        assert!(m5 > m7 && m7 > m10 && m10 > m13, "{m5} {m7} {m10} {m13}");
    }

    #[test]
    fn csv_serialization_round_trips_by_line() {
        let d = outcome_distribution(&[1.0, 0.0], &deg60(), &IpeParams::with_qubits(2).unwrap())
            .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("value,probability\n"));
    }
}
