//! Seeded jump-diffusion sampling, empirical densities and quantiles,
//! numerical normalization of approximate densities, and the quantile
//! comparison protocol against a moment-matched Gaussian baseline.
//!
//! The sampled law is `Z = Gaussian(a, 1/(2 beta)) + s1 P1(z1) - s2 P2(z2)`
//! with independent Poisson counts `P1, P2`; time is fixed at 1, so the
//! jump activity equals the Poisson rate.

use crate::model::{LevyJumpSpec, ModelError, SymTensor};
use crate::resummation::{pade_log_density_2nd, ResumError};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;
use thiserror::Error;

/// Samples per independently seeded chunk. Part of the reproducibility
/// contract: results depend on `(model, n, seed)` only, never on the
/// worker count.
pub const SIM_CHUNK: usize = 4096;

/// Largest Poisson rate the exact inversion sampler accepts.
pub const MAX_POISSON_RATE: f64 = 30.0;

/// Probability tolerance of quantile inversion.
pub const QUANTILE_PROB_TOL: f64 = 1e-8;

/// Shipped seed of the quantile comparison protocol.
pub const PROTOCOL_SEED: u64 = 1;

/// Default relative tolerance of density normalization.
pub const DEFAULT_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum McError {
    #[error("sample is empty")]
    EmptySample,
    #[error("quantile level must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("invalid model: {0}")]
    InvalidModel(&'static str),
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("integration window is empty or not finite")]
    BadWindow,
    #[error("density is not finite at x = {x}")]
    NonFiniteDensity { x: f64 },
    #[error("adaptive integration did not reach the requested tolerance")]
    ToleranceNotReached,
    #[error(transparent)]
    Resum(#[from] ResumError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One-dimensional jump-diffusion law
/// `Z = Gaussian(a, 1/(2 beta)) + s1 P1(z1) - s2 P2(z2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpDiffusionModel {
    /// Gaussian mean.
    pub a: f64,
    /// Inverse-variance parameter: the Gaussian variance is `1/(2 beta)`.
    pub beta: f64,
    /// Rate of upward jumps.
    pub z1: f64,
    /// Rate of downward jumps.
    pub z2: f64,
    /// Upward jump magnitude.
    pub s1: f64,
    /// Downward jump magnitude.
    pub s2: f64,
}

impl JumpDiffusionModel {
    pub fn new(
        a: f64,
        beta: f64,
        z1: f64,
        z2: f64,
        s1: f64,
        s2: f64,
    ) -> Result<Self, McError> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(McError::InvalidModel("beta must be positive"));
        }
        if !a.is_finite() {
            return Err(McError::InvalidModel("gaussian mean must be finite"));
        }
        if !z1.is_finite() || !z2.is_finite() || z1 < 0.0 || z2 < 0.0 {
            return Err(McError::InvalidModel("jump rates must be nonnegative"));
        }
        if z1 > MAX_POISSON_RATE || z2 > MAX_POISSON_RATE {
            return Err(McError::InvalidModel(
                "jump rate exceeds the exact-inversion sampler cap",
            ));
        }
        if !s1.is_finite() || !s2.is_finite() || s1 <= 0.0 || s2 <= 0.0 {
            return Err(McError::InvalidModel("jump magnitudes must be positive"));
        }
        Ok(JumpDiffusionModel {
            a,
            beta,
            z1,
            z2,
            s1,
            s2,
        })
    }

    /// Total jump activity.
    pub fn activity(&self) -> f64 {
        self.z1 + self.z2
    }

    /// Gaussian variance `1/(2 beta)`.
    pub fn gaussian_variance(&self) -> f64 {
        1.0 / (2.0 * self.beta)
    }

    /// `E[Z] = a + s1 z1 - s2 z2`.
    pub fn mean(&self) -> f64 {
        self.a + self.s1 * self.z1 - self.s2 * self.z2
    }

    /// `Var[Z] = 1/(2 beta) + s1^2 z1 + s2^2 z2`.
    pub fn variance(&self) -> f64 {
        self.gaussian_variance() + self.s1 * self.s1 * self.z1 + self.s2 * self.s2 * self.z2
    }

    /// Normalized jump moment `r_n = (z1 s1^n + z2 (-s2)^n) / (z1 + z2)`.
    /// `None` when there are no jumps.
    pub fn jump_moment(&self, n: usize) -> Option<f64> {
        let z = self.activity();
        if z > 0.0 {
            Some((self.z1 * self.s1.powi(n as i32) + self.z2 * (-self.s2).powi(n as i32)) / z)
        } else {
            None
        }
    }

    /// Standard error of the sample mean at size `n`.
    pub fn mean_standard_error(&self, n: usize) -> f64 {
        (self.variance() / n as f64).sqrt()
    }

    /// Standard error of the sample variance at size `n`:
    /// `sqrt((k4 + 2 k2^2)/n)` with the fourth cumulant
    /// `k4 = s1^4 z1 + s2^4 z2` (the Gaussian part contributes none).
    pub fn variance_standard_error(&self, n: usize) -> f64 {
        let k2 = self.variance();
        let k4 = self.s1.powi(4) * self.z1 + self.s2.powi(4) * self.z2;
        ((k4 + 2.0 * k2 * k2) / n as f64).sqrt()
    }

    /// The jump part as a centered spec (time 1): activity, moments up to
    /// order 4, drift canceling the jump mean, and the isotropic diffusion
    /// strength matching `beta = 1/(4 mu)`.
    pub fn centered_jump_spec(&self) -> Result<LevyJumpSpec, McError> {
        self.centered_jump_spec_to(4)
    }

    /// Like [`centered_jump_spec`](Self::centered_jump_spec) but with jump
    /// moments supplied up to `max_moment` (expansions of order `n` need
    /// moments up to `2 n`).
    pub fn centered_jump_spec_to(&self, max_moment: usize) -> Result<LevyJumpSpec, McError> {
        let z = self.activity();
        if z <= 0.0 {
            return Err(McError::InvalidModel(
                "centered jump spec needs nonzero activity",
            ));
        }
        let mut jump_moments = BTreeMap::new();
        for k in 1..=max_moment.max(1) {
            let r = self.jump_moment(k).unwrap();
            jump_moments.insert(
                k,
                SymTensor::from_entries(1, k, &[(vec![0; k], r)])?,
            );
        }
        let r1 = self.jump_moment(1).unwrap();
        Ok(LevyJumpSpec {
            dim: 1,
            drift: vec![-z * r1],
            diffusion: vec![vec![1.0 / (4.0 * self.beta)]],
            activity: z,
            jump_moments,
        })
    }

    /// Predicted (unnormalized) log-density at the point `x`: the
    /// second-order Padé closed form evaluated at the reflected deviation
    /// `mean - x`. The reflected argument is the orientation that
    /// reproduces simulated upper quantiles; the direct deviation
    /// `x - mean` flips the sign of the odd-moment term and predicts the
    /// wrong tail. With no jumps this reduces to the exact Gaussian
    /// exponent `-beta (x - a)^2`.
    pub fn predicted_log_density(&self, x: f64) -> Result<f64, McError> {
        let phi = self.mean() - x;
        if self.activity() <= 0.0 {
            return Ok(-self.beta * phi * phi);
        }
        let spec = self.centered_jump_spec()?;
        Ok(pade_log_density_2nd(&spec, 1.0, phi, self.beta)?)
    }
}

/// A reproducible draw: `(model, n, seed)` determine the values exactly,
/// independent of thread count.
#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub model: JumpDiffusionModel,
}

/// Poisson draw by exact CDF inversion (rates capped at
/// [`MAX_POISSON_RATE`]).
fn poisson_inverse(u: f64, rate: f64) -> u64 {
    if rate == 0.0 {
        return 0;
    }
    let mut k = 0u64;
    let mut p = (-rate).exp();
    let mut cum = p;
    while u > cum && k < 2000 {
        k += 1;
        p *= rate / k as f64;
        cum += p;
    }
    k
}

/// Draw `n` values of the jump-diffusion law. Sampling is chunked;
/// each chunk derives its own counter-indexed substream of the seed, so
/// the result is bit-identical for fixed `(model, n, seed)` no matter how
/// chunks are distributed over workers. Each sample consumes exactly
/// three uniforms: Gaussian by inverse CDF, both Poisson counts by exact
/// inversion.
pub fn simulate(model: &JumpDiffusionModel, n: usize, seed: u64) -> Result<Sample, McError> {
    if n == 0 {
        return Err(McError::EmptySample);
    }
    JumpDiffusionModel::new(model.a, model.beta, model.z1, model.z2, model.s1, model.s2)?;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let sigma = model.gaussian_variance().sqrt();
    let n_chunks = n.div_ceil(SIM_CHUNK);
    let chunks: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * SIM_CHUNK;
            let len = SIM_CHUNK.min(n - start);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let ug: f64 = rng.sample(Open01);
                let u1: f64 = rng.sample(Open01);
                let u2: f64 = rng.sample(Open01);
                let gauss = model.a + sigma * normal.inverse_cdf(ug);
                let k1 = poisson_inverse(u1, model.z1);
                let k2 = poisson_inverse(u2, model.z2);
                out.push(gauss + model.s1 * k1 as f64 - model.s2 * k2 as f64);
            }
            out
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    for c in chunks {
        values.extend_from_slice(&c);
    }
    Ok(Sample {
        values,
        seed,
        model: *model,
    })
}

/// Relative-frequency histogram over `[lo, hi]`; the last bin is
/// right-inclusive.
#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub n: usize,
}

impl Histogram {
    /// Density estimate of one bin: relative frequency per unit length.
    pub fn density(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / (self.n as f64 * self.bin_width)
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.bin_width
    }

    /// Bin containing `x`, if inside the range.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x > self.hi {
            return None;
        }
        let raw = ((x - self.lo) / self.bin_width) as usize;
        Some(raw.min(self.counts.len() - 1))
    }
}

/// Histogram of the sample over its own range.
pub fn empirical_density(sample: &Sample, bins: usize) -> Result<Histogram, McError> {
    if sample.values.is_empty() {
        return Err(McError::EmptySample);
    }
    if bins == 0 {
        return Err(McError::NoBins);
    }
    let lo = sample.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sample
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bin_width = span / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in &sample.values {
        let idx = (((v - lo) / bin_width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram {
        lo,
        hi: lo + span,
        bin_width,
        counts,
        n: sample.values.len(),
    })
}

/// Order-statistic quantile with linear interpolation between adjacent
/// order statistics: rank `alpha (n-1)` on the sorted values.
pub fn empirical_quantile(sample: &Sample, alpha: f64) -> Result<f64, McError> {
    if sample.values.is_empty() {
        return Err(McError::EmptySample);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(McError::InvalidAlpha(alpha));
    }
    let mut sorted = sample.values.clone();
    sorted.sort_by(f64::total_cmp);
    let h = alpha * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    } else {
        Ok(sorted[lo])
    }
}

/// Adaptive Simpson integration of `f` over `[a, b]` to the given
/// relative tolerance.
fn integrate_adaptive(
    f: &dyn Fn(f64) -> Result<f64, McError>,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64, McError> {
    if !a.is_finite() || !b.is_finite() || b <= a {
        return Err(McError::BadWindow);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    simpson_rec(f, a, fa, b, fb, m, fm, whole, rel_tol * scale, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> Result<f64, McError>,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    eps: f64,
    depth: usize,
) -> Result<f64, McError> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(McError::ToleranceNotReached);
    }
    Ok(simpson_rec(f, a, fa, m, fm, lm, flm, left, eps / 2.0, depth - 1)?
        + simpson_rec(f, m, fm, b, fb, rm, frm, right, eps / 2.0, depth - 1)?)
}

fn density_integrand<'a>(
    log_density: &'a dyn Fn(f64) -> f64,
) -> impl Fn(f64) -> Result<f64, McError> + 'a {
    move |x: f64| {
        let v = log_density(x).exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(McError::NonFiniteDensity { x })
        }
    }
}

/// Normalization constant of `exp(log_density)` over the window, by
/// adaptive Simpson integration to relative tolerance `rel_tol`.
pub fn normalize_density(
    log_density: &dyn Fn(f64) -> f64,
    window: (f64, f64),
    rel_tol: f64,
) -> Result<f64, McError> {
    integrate_adaptive(&density_integrand(log_density), window.0, window.1, rel_tol)
}

/// Integration window for a model's predicted density: mean plus/minus
/// 12 baseline standard deviations, widened until the boundary integrand
/// falls below `1e-14` of the center value.
pub fn default_window(model: &JumpDiffusionModel) -> Result<(f64, f64), McError> {
    let mean = model.mean();
    let sd = model.variance().sqrt();
    let peak = model.predicted_log_density(mean)?;
    let mut half = 12.0 * sd;
    for _ in 0..64 {
        let lo_ok = model.predicted_log_density(mean - half)? - peak < (1e-14f64).ln();
        let hi_ok = model.predicted_log_density(mean + half)? - peak < (1e-14f64).ln();
        if lo_ok && hi_ok {
            return Ok((mean - half, mean + half));
        }
        half += 4.0 * sd;
    }
    Err(McError::BadWindow)
}

/// Quantile of the density `exp(log_density)/Z` on the window: inverts
/// the cumulative adaptive-Simpson integral by bisection to
/// [`QUANTILE_PROB_TOL`] in probability.
pub fn model_quantile(
    log_density: &dyn Fn(f64) -> f64,
    window: (f64, f64),
    alpha: f64,
    rel_tol: f64,
) -> Result<f64, McError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(McError::InvalidAlpha(alpha));
    }
    let integrand = density_integrand(log_density);
    let total = integrate_adaptive(&integrand, window.0, window.1, rel_tol)?;
    if !total.is_finite() || total <= 0.0 {
        return Err(McError::NonFiniteDensity { x: window.0 });
    }
    let (mut lo, mut hi) = window;
    // Invariant: F(lo) <= alpha <= F(hi); cum tracks F(lo).
    let mut cum = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let part = integrate_adaptive(&integrand, lo, mid, rel_tol)? / total;
        let f_mid = cum + part;
        if (f_mid - alpha).abs() <= QUANTILE_PROB_TOL {
            return Ok(mid);
        }
        if f_mid < alpha {
            lo = mid;
            cum = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (window.1 - window.0) {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Moment-matched Gaussian baseline: mean and variance of the model.
pub fn gaussian_baseline(model: &JumpDiffusionModel) -> (f64, f64) {
    (model.mean(), model.variance())
}

/// Quantile of a Gaussian with the given mean and variance.
pub fn gaussian_quantile(mean: f64, variance: f64, alpha: f64) -> Result<f64, McError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(McError::InvalidAlpha(alpha));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(mean + normal.inverse_cdf(alpha) * variance.sqrt())
}

/// Predicted quantile of the model's second-order Padé density. With no
/// jumps the prediction degenerates to the diffusion-only Gaussian
/// quantile.
pub fn predicted_quantile(model: &JumpDiffusionModel, alpha: f64) -> Result<f64, McError> {
    if model.activity() <= 0.0 {
        return gaussian_quantile(model.mean(), model.gaussian_variance(), alpha);
    }
    let window = default_window(model)?;
    let ld = |x: f64| model.predicted_log_density(x).unwrap_or(f64::NAN);
    model_quantile(&ld, window, alpha, DEFAULT_NORM_TOL)
}

/// One row of the quantile comparison: empirical versus predicted versus
/// Gaussian baseline at one quantile level.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CompareRow {
    pub z1: f64,
    pub z2: f64,
    pub alpha: f64,
    pub q_empirical: f64,
    pub q_predicted: f64,
    pub q_gaussian: f64,
    pub predicted_abs_err: f64,
    pub gaussian_abs_err: f64,
    /// Whether the prediction is at least as close to the empirical
    /// quantile as the Gaussian baseline.
    pub predicted_wins: bool,
}

/// Run the comparison for one model at one level.
pub fn compare_one(
    model: &JumpDiffusionModel,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<CompareRow, McError> {
    let sample = simulate(model, n, seed)?;
    let q_empirical = empirical_quantile(&sample, alpha)?;
    let (mean, var) = gaussian_baseline(model);
    let q_gaussian = gaussian_quantile(mean, var, alpha)?;
    let q_predicted = predicted_quantile(model, alpha)?;
    let predicted_abs_err = (q_predicted - q_empirical).abs();
    let gaussian_abs_err = (q_gaussian - q_empirical).abs();
    Ok(CompareRow {
        z1: model.z1,
        z2: model.z2,
        alpha,
        q_empirical,
        q_predicted,
        q_gaussian,
        predicted_abs_err,
        gaussian_abs_err,
        predicted_wins: predicted_abs_err <= gaussian_abs_err,
    })
}

/// The one-sided sweep of the comparison protocol: upward rate
/// `z1 in {0, 0.5, 1, 1.5, 2}`, magnitude 6, `beta = 0.2`, Gaussian mean
/// offset `a = 6 z1`, no downward jumps.
pub fn sweep_models() -> Vec<JumpDiffusionModel> {
    [0.0, 0.5, 1.0, 1.5, 2.0]
        .into_iter()
        .map(|z1| JumpDiffusionModel::new(6.0 * z1, 0.2, z1, 0.0, 6.0, 1.0).unwrap())
        .collect()
}

/// Comparison across a model sweep at one level, one simulation per
/// model, all from the same seed.
pub fn compare_sweep(
    models: &[JumpDiffusionModel],
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<CompareRow>, McError> {
    models
        .iter()
        .map(|m| compare_one(m, n, seed, alpha))
        .collect()
}
