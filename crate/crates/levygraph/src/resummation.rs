//! Rational and integral resummation of the truncated coefficient series:
//! [M/N] Padé approximants with a re-match contract, the closed-form
//! second-order Padé log-density for one-dimensional jump models, and
//! truncated-Borel evaluation by Gauss–Laguerre quadrature.

use crate::evaluator::{BetaSeries, SeriesKind};
use crate::model::{LevyJumpSpec, ModelError};
use crate::series::mul_trunc;
use thiserror::Error;

/// Default Gauss–Laguerre node count.
pub const DEFAULT_BOREL_NODES: usize = 64;

/// Relative tolerance of the Padé re-match contract: the Taylor expansion
/// of every constructed approximant must reproduce its input coefficients
/// this closely, else construction fails.
pub const PADE_REMATCH_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ResumError {
    #[error("Padé linear system is numerically singular (growth estimate {cond_estimate:.3e})")]
    SingularSystem { cond_estimate: f64 },
    #[error("denominator vanishes on the evaluation path near beta = {beta}")]
    PoleOnPath { beta: f64 },
    #[error("second-order closed form undefined: t*z*r2 + phi^2 is not positive")]
    ZeroDenominatorH1,
    #[error("need series coefficients through order {needed}, got {got}")]
    NotEnoughCoefficients { needed: usize, got: usize },
    #[error("quadrature needs at least 2 nodes, got {0}")]
    InvalidNodeCount(usize),
    #[error("Newton iteration for quadrature node {0} did not converge")]
    NodeNotConverged(usize),
    #[error("Borel evaluation of a log-kind series is experimental; enable allow_log")]
    LogSeriesNotEnabled,
    #[error("expansion strength must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("this closed form requires a one-dimensional model, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("result is not finite")]
    NonFiniteResult,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rational approximant of type [M/N]: `P(beta) / Q(beta)` with
/// `deg P = M`, `deg Q = N`, normalized to `Q(0) = 1`, matching the input
/// series through order `M + N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PadeApprox {
    pub m: usize,
    pub n: usize,
    /// Numerator coefficients `a_0..a_M`.
    pub numer: Vec<f64>,
    /// Denominator coefficients `b_0..b_N` with `b_0 = 1`.
    pub denom: Vec<f64>,
    /// Rough conditioning indicator of the denominator solve:
    /// max pivot / min pivot of the eliminated system (1.0 when N = 0).
    pub cond_estimate: f64,
}

impl PadeApprox {
    /// Taylor coefficients of `P/Q` through `order` (inclusive): the
    /// numerator times the reciprocal series of the denominator.
    pub fn taylor(&self, order: usize) -> Vec<f64> {
        // Reciprocal of Q: r_0 = 1, r_k = -sum_{j=1..min(k,N)} b_j r_{k-j}.
        let mut recip = vec![0.0; order + 1];
        recip[0] = 1.0;
        for k in 1..=order {
            let mut acc = 0.0;
            for j in 1..=k.min(self.n) {
                acc -= self.denom[j] * recip[k - j];
            }
            recip[k] = acc;
        }
        mul_trunc(&self.numer, &recip, order)
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Dense linear solve with partial pivoting, returning the solution and
/// the (max pivot / min pivot) growth estimate. `None` when a pivot is
/// smaller than `tol`.
#[allow(clippy::needless_range_loop)] // elimination updates two rows of `a` in place
fn solve_pivoted(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>, tol: f64) -> Option<(Vec<f64>, f64)> {
    let n = rhs.len();
    let mut max_piv = 0.0f64;
    let mut min_piv = f64::INFINITY;
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot_abs <= tol {
            return None;
        }
        max_piv = max_piv.max(pivot_abs);
        min_piv = min_piv.min(pivot_abs);
        if pivot_row != col {
            a.swap(pivot_row, col);
            rhs.swap(pivot_row, col);
        }
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    let cond = if n == 0 { 1.0 } else { max_piv / min_piv };
    Some((x, cond))
}

/// [M/N] Padé approximant of a raw coefficient slice `h_0..`, requiring
/// coefficients through order `M + N`. Solves the denominator linear
/// system (`sum_j b_j h_{M+i-j} = -h_{M+i}`, `h_{k<0} = 0`, `b_0 = 1`)
/// with partial pivoting, assembles the numerator by convolution, and
/// verifies that the result re-expands to the input through order `M + N`
/// within [`PADE_REMATCH_TOL`]; a singular or too-ill-conditioned system
/// is reported, never regularized.
pub fn pade_from_coeffs(h: &[f64], m: usize, n: usize) -> Result<PadeApprox, ResumError> {
    if h.len() < m + n + 1 {
        return Err(ResumError::NotEnoughCoefficients {
            needed: m + n,
            got: h.len().saturating_sub(1),
        });
    }
    let scale = h[..=m + n]
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1.0);
    let at = |k: isize| -> f64 {
        if k < 0 {
            0.0
        } else {
            h[k as usize]
        }
    };
    let (b_tail, cond_estimate) = if n == 0 {
        (Vec::new(), 1.0)
    } else {
        let mut a = vec![vec![0.0; n]; n];
        let mut rhs = vec![0.0; n];
        for i in 1..=n {
            for j in 1..=n {
                a[i - 1][j - 1] = at(m as isize + i as isize - j as isize);
            }
            rhs[i - 1] = -h[m + i];
        }
        match solve_pivoted(a, rhs, 1e-13 * scale) {
            Some(sol) => sol,
            None => {
                return Err(ResumError::SingularSystem {
                    cond_estimate: f64::INFINITY,
                })
            }
        }
    };
    let mut denom = Vec::with_capacity(n + 1);
    denom.push(1.0);
    denom.extend_from_slice(&b_tail);
    // a_k = sum_{j=0..min(k,N)} b_j h_{k-j}.
    let mut numer = vec![0.0; m + 1];
    for (k, slot) in numer.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &bj) in denom.iter().enumerate().take(k.min(n) + 1) {
            acc += bj * h[k - j];
        }
        *slot = acc;
    }
    let approx = PadeApprox {
        m,
        n,
        numer,
        denom,
        cond_estimate,
    };
    let rematch = approx.taylor(m + n);
    for (k, &want) in h.iter().enumerate().take(m + n + 1) {
        if (rematch[k] - want).abs() > PADE_REMATCH_TOL * scale {
            return Err(ResumError::SingularSystem { cond_estimate });
        }
    }
    Ok(approx)
}

/// [M/N] Padé approximant of a coefficient series.
pub fn pade(series: &BetaSeries, m: usize, n: usize) -> Result<PadeApprox, ResumError> {
    pade_from_coeffs(&series.coeffs, m, n)
}

/// Number of scan intervals used to detect a denominator sign change on
/// the evaluation path.
const POLE_SCAN_STEPS: usize = 256;

/// Rational evaluation at `beta`, guarding the path: a denominator sign
/// change or zero anywhere on `(0, beta]` (scanned in [`POLE_SCAN_STEPS`]
/// steps) is a pole and is reported instead of evaluated through.
pub fn eval_pade(p: &PadeApprox, beta: f64) -> Result<f64, ResumError> {
    if !beta.is_finite() {
        return Err(ResumError::InvalidBeta(beta));
    }
    if beta == 0.0 {
        return Ok(p.numer[0]);
    }
    let mut prev = horner(&p.denom, 0.0); // = 1 by construction
    for step in 1..=POLE_SCAN_STEPS {
        let b = beta * step as f64 / POLE_SCAN_STEPS as f64;
        let q = horner(&p.denom, b);
        if q == 0.0 || (q < 0.0) != (prev < 0.0) {
            return Err(ResumError::PoleOnPath { beta: b });
        }
        prev = q;
    }
    let val = horner(&p.numer, beta) / horner(&p.denom, beta);
    if val.is_finite() {
        Ok(val)
    } else {
        Err(ResumError::NonFiniteResult)
    }
}

fn scalar_jump_moment(spec: &LevyJumpSpec, order: usize) -> Result<f64, ResumError> {
    let t = spec
        .jump_moments
        .get(&order)
        .ok_or(ModelError::MissingJumpMoment(order))?;
    Ok(t.get(&vec![0; order])?)
}

/// The two leading connected coefficients of the one-dimensional
/// second-order expansion, as explicit polynomials in the jump data:
/// `h1 = t z r2 + phi^2` and
/// `h2c = (t z r4 + 2 t^2 z^2 r2^2 + 4 t z r2 phi^2 - 4 t z r3 phi) / 2`,
/// where `r_n` are the scalar jump moments. The log series is
/// `-h1 beta + h2c beta^2 + O(beta^3)`.
///
/// Sign convention: the odd-moment term carries a minus sign at this
/// argument, exactly matching what the graph pipeline produces for the
/// same `phi`; the opposite printed convention corresponds to evaluating
/// at `-phi`.
fn second_order_h(
    spec: &LevyJumpSpec,
    t: f64,
    phi: f64,
) -> Result<(f64, f64), ResumError> {
    if spec.dim != 1 {
        return Err(ResumError::NotOneDimensional(spec.dim));
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(ResumError::Model(ModelError::NonPositiveTime(t)));
    }
    let z = spec.activity;
    let (r2, r3, r4) = if z > 0.0 {
        (
            scalar_jump_moment(spec, 2)?,
            scalar_jump_moment(spec, 3)?,
            scalar_jump_moment(spec, 4)?,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let tz = t * z;
    let h1 = tz * r2 + phi * phi;
    let h2c = 0.5 * (tz * r4 + 2.0 * (tz * r2).powi(2) + 4.0 * tz * r2 * phi * phi
        - 4.0 * tz * r3 * phi);
    Ok((h1, h2c))
}

/// Closed-form [1/1] Padé of the second-order log-density of a
/// one-dimensional jump model: `-beta h1 / (1 + beta h2c / h1)`.
/// Independent of the graph pipeline, which it cross-checks: both compute
/// the same rational function of `beta`.
pub fn pade_log_density_2nd(
    spec: &LevyJumpSpec,
    t: f64,
    phi: f64,
    beta: f64,
) -> Result<f64, ResumError> {
    let (h1, h2c) = second_order_h(spec, t, phi)?;
    if h1 <= 0.0 {
        return Err(ResumError::ZeroDenominatorH1);
    }
    // The denominator is affine in beta and equals 1 at beta = 0, so a
    // root lies on (0, beta] exactly when the endpoint value is <= 0.
    let denom = 1.0 + beta * h2c / h1;
    if denom <= 0.0 {
        return Err(ResumError::PoleOnPath { beta });
    }
    Ok(-beta * h1 / denom)
}

/// Plain order-2 partial sum of the same log-density series:
/// `-h1 beta + h2c beta^2`. Unlike the Padé form it turns positive for
/// large `|phi|` whenever `2 beta t z r2 > 1`, so its exponential is not
/// normalizable there.
pub fn raw_log_density_2nd(
    spec: &LevyJumpSpec,
    t: f64,
    phi: f64,
    beta: f64,
) -> Result<f64, ResumError> {
    let (h1, h2c) = second_order_h(spec, t, phi)?;
    Ok(-beta * h1 + beta * beta * h2c)
}

/// Borel evaluation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BorelSpec {
    /// Gauss–Laguerre node count.
    pub node_count: usize,
    /// Permit log-kind series. The Borel treatment of the connected
    /// (log) series has no convergence guarantee, so it is gated as
    /// experimental and off by default.
    pub allow_log: bool,
}

impl Default for BorelSpec {
    fn default() -> Self {
        BorelSpec {
            node_count: DEFAULT_BOREL_NODES,
            allow_log: false,
        }
    }
}

/// Truncated-Borel evaluation: forms `B_N(tau) = sum_m h_m tau^m / m!`
/// and integrates `e^{-u} B_N(beta u)` over `[0, inf)` by Gauss–Laguerre
/// quadrature. Because `int e^{-u} u^m du = m!`, the exact value on a
/// truncated series equals the plain partial sum (times the dimensional
/// prefactor `(beta/pi)^{d/2}` carried by large-diffusion kinds); the
/// quadrature reproduces that identity to high accuracy, which is the
/// permanent regression gate for this routine.
pub fn borel_resum(series: &BetaSeries, beta: f64, spec: &BorelSpec) -> Result<f64, ResumError> {
    if spec.node_count < 2 {
        return Err(ResumError::InvalidNodeCount(spec.node_count));
    }
    if series.kind.is_log() && !spec.allow_log {
        return Err(ResumError::LogSeriesNotEnabled);
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(ResumError::InvalidBeta(beta));
    }
    let (nodes, weights) = gauss_laguerre(spec.node_count)?;
    let mut total = 0.0;
    for (&u, &w) in nodes.iter().zip(weights.iter()) {
        let tau = beta * u;
        // B_N(tau) via a running tau^m / m! factor.
        let mut term = 0.0;
        let mut pow_over_fact = 1.0;
        for (m, &h) in series.coeffs.iter().enumerate() {
            if m > 0 {
                pow_over_fact *= tau / m as f64;
            }
            term += h * pow_over_fact;
        }
        total += w * term;
    }
    let d = series.phi.len();
    // The dimensional prefactor belongs to the density representation of
    // the Laplace-type integral; the log-kind variant (experimental) has
    // no such representation and resums plainly.
    let prefactor = if series.kind == SeriesKind::LargeDiffusion {
        (beta / std::f64::consts::PI).powf(d as f64 / 2.0)
    } else {
        1.0
    };
    let out = prefactor * total;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(ResumError::NonFiniteResult)
    }
}

/// Gauss–Laguerre nodes and weights for `int_0^inf e^{-u} f(u) du`.
/// Nodes are the roots of the degree-`n` Laguerre polynomial found by
/// Newton iteration from the classical initial guesses; the weight at a
/// root `x` is `x / ((n+1)^2 L_{n+1}(x)^2)`.
pub fn gauss_laguerre(n: usize) -> Result<(Vec<f64>, Vec<f64>), ResumError> {
    if n < 2 {
        return Err(ResumError::InvalidNodeCount(n));
    }
    let nf = n as f64;
    // L_n and L_{n-1} at x via the three-term recurrence.
    let eval = |x: f64| -> (f64, f64) {
        let mut lm1 = 0.0; // L_{k-1}
        let mut l = 1.0; // L_k
        for k in 0..n {
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0 - x) * l - kf * lm1) / (kf + 1.0);
            lm1 = l;
            l = next;
        }
        (l, lm1)
    };
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut x = 0.0;
    for i in 0..n {
        // Classical initial guesses, each continuing from the last root.
        if i == 0 {
            x = 3.0 / (1.0 + 2.4 * nf);
        } else if i == 1 {
            x += 15.0 / (1.0 + 2.5 * nf);
        } else {
            let ai = (i - 1) as f64;
            x += (1.0 + 2.55 * ai) / (1.9 * ai) * (x - nodes[i - 2]);
        }
        let mut converged = false;
        for _ in 0..100 {
            let (l, lm1) = eval(x);
            // L'_n(x) = n (L_n(x) - L_{n-1}(x)) / x.
            let deriv = nf * (l - lm1) / x;
            let step = l / deriv;
            x -= step;
            if step.abs() <= 1e-14 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !x.is_finite() || x <= 0.0 {
            return Err(ResumError::NodeNotConverged(i));
        }
        nodes[i] = x;
        // L_{n+1}(x) from L_n, L_{n-1} by one more recurrence step.
        let (l, lm1) = eval(x);
        let lp1 = ((2.0 * nf + 1.0 - x) * l - nf * lm1) / (nf + 1.0);
        weights[i] = x / ((nf + 1.0) * (nf + 1.0) * lp1 * lp1);
    }
    Ok((nodes, weights))
}
