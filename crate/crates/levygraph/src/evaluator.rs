//! Graph-sum evaluation: process moments from the operator symbol, values
//! of single graphs, coefficient series of the tilted-density expansion,
//! the one-dimensional fast path, exact interval integrals, and the
//! large-diffusion expansion.
//!
//! The order-`m` coefficient is `(-1)^m / m!` times the sum over all
//! order-`m` graphs of the product of potential components on vertices,
//! `-phi` factors on external legs, and `t *` cumulant factors on blocks.
//! The logarithm of the series keeps connected graphs only.

use crate::combinatorics::{
    advance_odometer, binomial, enumerate_partitions, h_factor, integer_partitions,
    CombinatoricsError, MAX_PARTITION_LEGS,
};
use crate::graphs::{
    enumerate_graphs, group_by_topology, FeynmanGraph, GraphError, PruneRules, QuadGraph,
};
use crate::model::{
    factorial_f64, levy_to_symbol, EvalPoint, LevyJumpSpec, ModelError, OperatorSymbol, Potential,
};
use crate::series::Poly;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Default truncation order of coefficient series.
pub const DEFAULT_MAX_ORDER: usize = 6;

/// Cap on the per-graph index-assignment space `dim^legs`.
const MAX_ASSIGNMENT_SPACE: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("this path requires a one-dimensional model, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("large-diffusion expansion requires an isotropic diffusion matrix")]
    AnisotropicDiffusion,
    #[error("large-diffusion expansion requires strictly positive diffusion")]
    ZeroDiffusion,
    #[error("index assignment space dim^{legs} exceeds the evaluation cap")]
    AssignmentSpaceTooLarge { legs: usize },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
}

/// How the expansion coefficients are meant to be read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// Coefficients of the tilted density in the tilt strength.
    Density,
    /// Coefficients of its logarithm (connected graphs only).
    LogDensity,
    /// Density coefficients where the expansion variable is `1/(4*mu*t)`
    /// for isotropic diffusion strength `mu`.
    LargeDiffusion,
    /// Logarithm of the large-diffusion expansion.
    LargeDiffusionLog,
}

impl SeriesKind {
    pub fn is_log(self) -> bool {
        matches!(self, SeriesKind::LogDensity | SeriesKind::LargeDiffusionLog)
    }

    pub fn is_large_diffusion(self) -> bool {
        matches!(
            self,
            SeriesKind::LargeDiffusion | SeriesKind::LargeDiffusionLog
        )
    }
}

/// Truncated coefficient series in the tilt strength, tagged with the
/// evaluation point it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaSeries {
    pub kind: SeriesKind,
    pub t: f64,
    pub phi: Vec<f64>,
    /// `coeffs[m]` multiplies the m-th power of the tilt strength.
    pub coeffs: Vec<f64>,
}

impl BetaSeries {
    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Plain partial sum at tilt strength `beta`.
    pub fn eval_partial(&self, beta: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * beta + c)
    }

    /// Reinterpret a large-diffusion series as coefficients of `1/mu`:
    /// with tilt `1/(4*mu*t)`, the m-th `1/mu` coefficient is
    /// `coeffs[m] / (4t)^m`.
    pub fn inv_mu_coefficients(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, &h)| h / (4.0 * self.t).powi(m as i32))
            .collect()
    }
}

/// A moment query: index tuple and time.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentRequest {
    pub t: f64,
    pub indices: Vec<usize>,
}

impl MomentRequest {
    pub fn new(t: f64, indices: Vec<usize>) -> Result<Self, EvalError> {
        if !t.is_finite() || t <= 0.0 {
            return Err(EvalError::NonPositiveTime(t));
        }
        Ok(MomentRequest { t, indices })
    }
}

/// Truncated (single-block) moment: `t *` the cumulant at the index tuple.
pub fn truncated_moment(sym: &OperatorSymbol, req: &MomentRequest) -> Result<f64, EvalError> {
    Ok(req.t * sym.cumulant(&req.indices)?)
}

/// Full raw moment at time `t`: sum over set partitions of the index
/// positions of products of truncated moments of the blocks.
pub fn moment(sym: &OperatorSymbol, req: &MomentRequest) -> Result<f64, EvalError> {
    let n = req.indices.len();
    let mut total = 0.0;
    for p in enumerate_partitions(n)? {
        let mut term = 1.0;
        for block in p.blocks() {
            let idx: Vec<usize> = block.iter().map(|&pos| req.indices[pos]).collect();
            term *= req.t * sym.cumulant(&idx)?;
        }
        total += term;
    }
    Ok(total)
}

/// Dense lookup tables for one evaluation point.
struct EvalContext<'a> {
    dim: usize,
    t: f64,
    phi: &'a [f64],
    /// Potential Taylor components per vertex degree, full `dim^p` table.
    lam: BTreeMap<usize, Vec<f64>>,
    /// Cumulant components per block size, full `dim^l` table.
    cum: BTreeMap<usize, Vec<f64>>,
}

impl<'a> EvalContext<'a> {
    fn new(
        sym: &OperatorSymbol,
        pot: &Potential,
        point: &'a EvalPoint,
        cum_orders: &[usize],
        degrees: &[usize],
    ) -> Result<Self, EvalError> {
        let dim = sym.dim();
        if pot.dim() != dim {
            return Err(EvalError::DimensionMismatch {
                expected: dim,
                got: pot.dim(),
            });
        }
        if point.phi.len() != dim {
            return Err(EvalError::DimensionMismatch {
                expected: dim,
                got: point.phi.len(),
            });
        }
        if !point.t.is_finite() || point.t <= 0.0 {
            return Err(EvalError::NonPositiveTime(point.t));
        }
        let mut lam = BTreeMap::new();
        for &p in degrees {
            check_space(dim, p)?;
            let table = match pot.coeff(p) {
                Some(t) => t.dense_full(),
                None => vec![0.0; dim.pow(p as u32)],
            };
            lam.insert(p, table);
        }
        let mut cum = BTreeMap::new();
        for &l in cum_orders {
            check_space(dim, l)?;
            let mut table = sym.coeff(l)?.dense_full();
            let fact = factorial_f64(l);
            table.iter_mut().for_each(|v| *v *= fact);
            cum.insert(l, table);
        }
        Ok(EvalContext {
            dim,
            t: point.t,
            phi: &point.phi,
            lam,
            cum,
        })
    }

    /// Sum over all `dim^legs` index assignments of the product of vertex,
    /// external-leg, and block factors.
    fn graph_value(&self, g: &FeynmanGraph) -> Result<f64, EvalError> {
        let n = g.total_legs();
        check_space(self.dim, n)?;
        let mut offsets = Vec::with_capacity(g.order());
        let mut acc = 0;
        for &p in &g.leg_counts {
            offsets.push(acc);
            acc += p;
        }
        let mut x = vec![0usize; n];
        let limits = vec![self.dim; n];
        let mut total = Compensated::default();
        loop {
            let mut w = 1.0;
            for (q, &p) in g.leg_counts.iter().enumerate() {
                let rank = rank_of(&x[offsets[q]..offsets[q] + p], self.dim);
                w *= self.lam[&p][rank];
                if w == 0.0 {
                    break;
                }
            }
            if w != 0.0 {
                for &i in &g.k_legs {
                    w *= -self.phi[x[i]];
                }
                for b in &g.blocks {
                    let mut rank = 0;
                    for (k, &i) in b.iter().enumerate() {
                        rank += x[i] * self.dim.pow(k as u32);
                    }
                    w *= self.t * self.cum[&b.len()][rank];
                }
                total.add(w);
            }
            if !advance_odometer(&mut x, &limits) {
                break;
            }
        }
        Ok(total.value())
    }
}

fn rank_of(tuple: &[usize], dim: usize) -> usize {
    tuple
        .iter()
        .enumerate()
        .map(|(k, &v)| v * dim.pow(k as u32))
        .sum()
}

/// Neumaier-compensated accumulator. The census sums run over up to
/// hundreds of thousands of terms whose magnitudes can exceed the result
/// by orders of magnitude; compensation keeps the totals independent of
/// enumeration order at machine precision, which the dual-route identity
/// checks rely on.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        self.carry += if self.sum.abs() >= v.abs() {
            (self.sum - t) + v
        } else {
            (v - t) + self.sum
        };
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

fn check_space(dim: usize, legs: usize) -> Result<(), EvalError> {
    if dim.checked_pow(legs as u32).is_none_or(|s| s > MAX_ASSIGNMENT_SPACE) {
        return Err(EvalError::AssignmentSpaceTooLarge { legs });
    }
    Ok(())
}

/// Value of a single graph under the per-leg assignment sum.
pub fn eval_graph(
    g: &FeynmanGraph,
    sym: &OperatorSymbol,
    pot: &Potential,
    point: &EvalPoint,
) -> Result<f64, EvalError> {
    let mut cum_orders: Vec<usize> = g.blocks.iter().map(Vec::len).collect();
    cum_orders.sort_unstable();
    cum_orders.dedup();
    let mut degrees = g.leg_counts.clone();
    degrees.sort_unstable();
    degrees.dedup();
    let ctx = EvalContext::new(sym, pot, point, &cum_orders, &degrees)?;
    ctx.graph_value(g)
}

/// Value of a quadratic-specialization graph under the per-edge assignment
/// sum: one coordinate per edge (`dim^m` assignments), a scalar quadratic
/// coefficient `lambda` per vertex. Agrees with [`eval_graph`] on the
/// corresponding two-leg graph for the isotropic potential
/// `lambda * |phi|^2`.
pub fn eval_quad_graph(
    qg: &QuadGraph,
    sym: &OperatorSymbol,
    lambda: f64,
    point: &EvalPoint,
) -> Result<f64, EvalError> {
    let dim = sym.dim();
    if point.phi.len() != dim {
        return Err(EvalError::DimensionMismatch {
            expected: dim,
            got: point.phi.len(),
        });
    }
    if !point.t.is_finite() || point.t <= 0.0 {
        return Err(EvalError::NonPositiveTime(point.t));
    }
    check_space(dim, qg.m)?;
    let mut cum: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for b in &qg.blocks {
        let l = b.len();
        if let std::collections::btree_map::Entry::Vacant(e) = cum.entry(l) {
            check_space(dim, l)?;
            let mut table = sym.coeff(l)?.dense_full();
            let fact = factorial_f64(l);
            table.iter_mut().for_each(|v| *v *= fact);
            e.insert(table);
        }
    }
    let mut x = vec![0usize; qg.m];
    let limits = vec![dim; qg.m];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for &i in &qg.k_legs {
            w *= -point.phi[x[QuadGraph::edge_of(i)]];
        }
        for b in &qg.blocks {
            let mut rank = 0;
            for (k, &i) in b.iter().enumerate() {
                rank += x[QuadGraph::edge_of(i)] * dim.pow(k as u32);
            }
            w *= point.t * cum[&b.len()][rank];
        }
        total += w;
        if qg.m == 0 || !advance_odometer(&mut x, &limits) {
            break;
        }
    }
    Ok(total * lambda.powi(qg.m as i32))
}

/// Which enumeration backs a series evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EvalPath {
    /// Every graph evaluated individually.
    #[default]
    Raw,
    /// Graphs grouped by canonical key; one evaluation per class, weighted
    /// by multiplicity. Identical result, fewer evaluations.
    Topological,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesOptions {
    /// Skip graphs containing a block whose cumulant tensor is identically
    /// zero (their value vanishes).
    pub prune: bool,
    pub path: EvalPath,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            prune: true,
            path: EvalPath::Raw,
        }
    }
}

fn series_coeffs(
    sym: &OperatorSymbol,
    pot: &Potential,
    point: &EvalPoint,
    n_max: usize,
    opts: &SeriesOptions,
    connected_only: bool,
) -> Result<Vec<f64>, EvalError> {
    let degrees = pot.nonzero_degrees();
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    let max_legs = n_max * max_deg;
    if max_legs > MAX_PARTITION_LEGS {
        return Err(EvalError::Combinatorics(CombinatoricsError::PartitionCap(
            max_legs,
        )));
    }
    let prune = if opts.prune {
        PruneRules::from_symbol(sym)
    } else {
        PruneRules::none()
    };
    let cum_orders: Vec<usize> = (1..=max_legs)
        .filter(|l| !prune.zero_cumulant_orders.contains(l))
        .collect();
    let ctx = EvalContext::new(sym, pot, point, &cum_orders, &degrees)?;

    let mut coeffs = vec![0.0; n_max + 1];
    coeffs[0] = if connected_only { 0.0 } else { 1.0 };
    for (m, slot) in coeffs.iter_mut().enumerate().skip(1) {
        let stream = enumerate_graphs(m, pot, &prune)?
            .filter(|g| !connected_only || g.connected);
        let total = match opts.path {
            EvalPath::Raw => {
                let mut acc = Compensated::default();
                for g in stream {
                    acc.add(ctx.graph_value(&g)?);
                }
                acc.value()
            }
            EvalPath::Topological => {
                let mut acc = Compensated::default();
                for class in group_by_topology(stream)? {
                    acc.add(class.multiplicity as f64 * ctx.graph_value(&class.representative)?);
                }
                acc.value()
            }
        };
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        *slot = sign / factorial_f64(m) * total;
    }
    Ok(coeffs)
}

/// Coefficient series of the tilted density at one evaluation point.
pub fn phi_series(
    sym: &OperatorSymbol,
    pot: &Potential,
    point: &EvalPoint,
    n_max: usize,
    opts: &SeriesOptions,
) -> Result<BetaSeries, EvalError> {
    Ok(BetaSeries {
        kind: SeriesKind::Density,
        t: point.t,
        phi: point.phi.clone(),
        coeffs: series_coeffs(sym, pot, point, n_max, opts, false)?,
    })
}

/// Coefficient series of the logarithm: connected graphs only.
pub fn log_phi_series(
    sym: &OperatorSymbol,
    pot: &Potential,
    point: &EvalPoint,
    n_max: usize,
    opts: &SeriesOptions,
) -> Result<BetaSeries, EvalError> {
    Ok(BetaSeries {
        kind: SeriesKind::LogDensity,
        t: point.t,
        phi: point.phi.clone(),
        coeffs: series_coeffs(sym, pot, point, n_max, opts, true)?,
    })
}

/// One-dimensional fast path: collapses the graph sum into scalar
/// combinatorics. For each ordered degree tuple with `P` total legs,
/// the inner sum is `sum_k C(P,k) (-phi)^k S(P-k)` where `S(j)` sums
/// `h(l) * prod_i t * kappa(l_i)` over integer partitions `l` of `j`
/// (`S(0) = 1`), with `h(l)` the number of set partitions realizing the
/// part-size multiset. Identical to the raw enumeration.
pub fn phi_series_1d(
    sym: &OperatorSymbol,
    pot: &Potential,
    point: &EvalPoint,
    n_max: usize,
) -> Result<BetaSeries, EvalError> {
    let polys = density_polynomials(sym, pot, point.t, n_max)?;
    if point.phi.len() != 1 {
        return Err(EvalError::DimensionMismatch {
            expected: 1,
            got: point.phi.len(),
        });
    }
    let coeffs = polys.iter().map(|p| p.eval(point.phi[0])).collect();
    Ok(BetaSeries {
        kind: SeriesKind::Density,
        t: point.t,
        phi: point.phi.clone(),
        coeffs,
    })
}

/// Coefficients of the one-dimensional expansion as polynomials in the
/// spatial argument (one polynomial per order).
pub fn density_polynomials(
    sym: &OperatorSymbol,
    pot: &Potential,
    t: f64,
    n_max: usize,
) -> Result<Vec<Poly>, EvalError> {
    if sym.dim() != 1 {
        return Err(EvalError::NotOneDimensional(sym.dim()));
    }
    if pot.dim() != 1 {
        return Err(EvalError::NotOneDimensional(pot.dim()));
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(EvalError::NonPositiveTime(t));
    }
    let degrees = pot.nonzero_degrees();
    let max_deg = degrees.iter().copied().max().unwrap_or(0);
    let max_legs = n_max * max_deg;
    if max_legs > MAX_PARTITION_LEGS {
        return Err(EvalError::Combinatorics(CombinatoricsError::PartitionCap(
            max_legs,
        )));
    }
    let lam: BTreeMap<usize, f64> = degrees
        .iter()
        .map(|&p| (p, pot.coeff(p).unwrap().get(&vec![0; p]).unwrap()))
        .collect();
    // Scalar cumulants, required up to the largest block size.
    let mut kappa = vec![0.0; max_legs + 1];
    for (l, slot) in kappa.iter_mut().enumerate().skip(1) {
        *slot = sym.cumulant(&vec![0; l])?;
    }
    // S(j): weighted sum over integer partitions of j.
    let mut s = vec![0.0; max_legs + 1];
    for (j, slot) in s.iter_mut().enumerate() {
        let mut acc = 0.0;
        for parts in integer_partitions(j) {
            let h = h_factor(&parts)? as f64;
            let prod: f64 = parts.iter().map(|&l| t * kappa[l]).product();
            acc += h * prod;
        }
        *slot = acc; // S(0) = 1 from the empty partition.
    }

    let mut polys = vec![Poly(vec![1.0])];
    for m in 1..=n_max {
        let mut poly = Poly::zero();
        let mut tuple = vec![0usize; m];
        let limits = vec![degrees.len(); m];
        loop {
            let lam_prod: f64 = tuple.iter().map(|&i| lam[&degrees[i]]).product();
            if lam_prod != 0.0 {
                let total_p: usize = tuple.iter().map(|&i| degrees[i]).sum();
                for k in 0..=total_p {
                    let c = binomial(total_p, k) as f64;
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    poly.add_scaled_monomial(k, lam_prod * c * sign * s[total_p - k]);
                }
            }
            if m == 0 || !advance_odometer(&mut tuple, &limits) {
                break;
            }
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let scale = sign / factorial_f64(m);
        poly.0.iter_mut().for_each(|c| *c *= scale);
        polys.push(poly);
    }
    Ok(polys)
}

/// Exact interval integrals of the one-dimensional coefficient
/// polynomials: entry `m` is the integral over `[a, b]` of the order-`m`
/// coefficient as a function of the spatial argument.
pub fn cdf_series(
    sym: &OperatorSymbol,
    pot: &Potential,
    a: f64,
    b: f64,
    t: f64,
    n_max: usize,
) -> Result<Vec<f64>, EvalError> {
    let polys = density_polynomials(sym, pot, t, n_max)?;
    Ok(polys.iter().map(|p| p.integral(a, b)).collect())
}

/// Isotropic diffusion strength `mu` with `D = mu * I`; errors if the
/// matrix is anisotropic or zero.
pub fn isotropic_mu(spec: &LevyJumpSpec) -> Result<f64, EvalError> {
    let d = spec.dim;
    let scale = spec
        .diffusion
        .iter()
        .flatten()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1.0);
    let mu = spec.diffusion[0][0];
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { mu } else { 0.0 };
            if (spec.diffusion[i][j] - want).abs() > 1e-12 * scale {
                return Err(EvalError::AnisotropicDiffusion);
            }
        }
    }
    if mu <= 0.0 {
        return Err(EvalError::ZeroDiffusion);
    }
    Ok(mu)
}

/// Tilt strength of the large-diffusion expansion: `1/(4*mu*t)`.
pub fn beta_for_large_diffusion(mu: f64, t: f64) -> f64 {
    1.0 / (4.0 * mu * t)
}

/// Large-diffusion expansion: for `D = mu * I`, expand the density of the
/// process around its pure-jump part (drift kept) against the isotropic
/// quadratic potential, in the tilt strength `1/(4*mu*t)`. Jump moments
/// are required up to `2 * n_max`.
pub fn large_diffusion_series(
    spec: &LevyJumpSpec,
    point: &EvalPoint,
    n_max: usize,
    log: bool,
) -> Result<BetaSeries, EvalError> {
    spec.validate()?;
    isotropic_mu(spec)?;
    let jump = spec.without_diffusion();
    let sym = levy_to_symbol(&jump, 2 * n_max)?;
    let pot = Potential::isotropic_quadratic(spec.dim);
    let opts = SeriesOptions::default();
    let (kind, coeffs) = if log {
        (
            SeriesKind::LargeDiffusionLog,
            series_coeffs(&sym, &pot, point, n_max, &opts, true)?,
        )
    } else {
        (
            SeriesKind::LargeDiffusion,
            series_coeffs(&sym, &pot, point, n_max, &opts, false)?,
        )
    };
    Ok(BetaSeries {
        kind,
        t: point.t,
        phi: point.phi.clone(),
        coeffs,
    })
}
