//! Model data: symmetric tensors, operator symbols, Lévy triplets with
//! moment data, confining potentials, and the JSON model-file loader.
//!
//! An operator symbol is stored as the Taylor coefficients of
//! `Psi(xi) = <a, xi> + <xi, D xi> + z * integral(exp(<s, xi>) - 1) dr(s)`
//! in the moment-generating (real-exponent) convention. A [`SymTensor`] of
//! degree `n` keeps one entry per ascending multi-index; the value is the
//! common Taylor coefficient of every permutation of that index, so the
//! unrestricted sum over all `dim^n` tuples reproduces the polynomial. The
//! order-`n` cumulant attached to a multi-index is `n!` times the stored
//! Taylor component, whatever the index multiplicities.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Sample count used when a validation has to probe directions numerically.
pub const DEFAULT_VALIDATION_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("index value {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("duplicate tensor entry for one symmetry class")]
    DuplicateEntry,
    #[error("tensor data is not symmetric under index permutation")]
    AsymmetricTensor,
    #[error("diffusion matrix is not symmetric")]
    AsymmetricDiffusion,
    #[error("diffusion matrix is not positive semidefinite")]
    NonPsdDiffusion,
    #[error("jump activity must be nonnegative, got {0}")]
    NegativeActivity(f64),
    #[error("jump moment of order {0} required but not provided")]
    MissingJumpMoment(usize),
    #[error("potential has no nonzero coefficient")]
    ZeroPotential,
    #[error("leading potential degree {0} is odd; the top form cannot confine")]
    OddTopDegree(usize),
    #[error("top potential form takes non-positive value {value} in a sampled direction")]
    NonPositiveTopForm { value: f64 },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("coefficient of order {order} requested but symbol is truncated at {max}")]
    OrderBeyondTruncation { order: usize, max: usize },
    #[error("operator symbol must vanish at the origin")]
    NonzeroConstantTerm,
    #[error("value must be finite")]
    NonFiniteValue,
    #[error("model file parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model file: {0}")]
    Shape(String),
    #[error("model file does not define {0}")]
    MissingSection(&'static str),
}

pub(crate) fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Number of distinct permutations of a sorted multi-index.
pub(crate) fn permutation_count(sorted: &[u8]) -> f64 {
    let mut numer = factorial_f64(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        numer /= factorial_f64(j - i);
        i = j;
    }
    numer
}

/// All ascending multi-indices of the given degree over `0..dim`,
/// lexicographically ordered.
pub(crate) fn ascending_tuples(dim: usize, degree: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; degree];
    loop {
        out.push(cur.clone());
        // Next combination with repetition.
        let mut k = degree;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if (cur[k] as usize) < dim - 1 {
                let v = cur[k] + 1;
                for slot in cur.iter_mut().skip(k) {
                    *slot = v;
                }
                break;
            }
        }
        if degree == 0 {
            return out;
        }
    }
}

/// Dense symmetric tensor of fixed degree: one stored component per
/// ascending multi-index (complete, zeros included).
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<Vec<u8>, f64>,
}

impl SymTensor {
    pub fn zeros(dim: usize, degree: usize) -> Self {
        assert!(dim >= 1 && dim <= u8::MAX as usize);
        let coeffs = ascending_tuples(dim, degree)
            .into_iter()
            .map(|t| (t, 0.0))
            .collect();
        SymTensor { dim, degree, coeffs }
    }

    /// Build from `(multi-index, value)` pairs (indices in any order,
    /// 0-based). Unlisted components are zero; listing one symmetry class
    /// twice is an error.
    pub fn from_entries(
        dim: usize,
        degree: usize,
        entries: &[(Vec<usize>, f64)],
    ) -> Result<Self, ModelError> {
        let mut t = SymTensor::zeros(dim, degree);
        let mut touched: Vec<Vec<u8>> = Vec::new();
        for (idx, v) in entries {
            let key = t.key_for(idx)?;
            if touched.contains(&key) {
                return Err(ModelError::DuplicateEntry);
            }
            if !v.is_finite() {
                return Err(ModelError::NonFiniteValue);
            }
            touched.push(key.clone());
            *t.coeffs.get_mut(&key).unwrap() = *v;
        }
        Ok(t)
    }

    fn key_for(&self, idx: &[usize]) -> Result<Vec<u8>, ModelError> {
        if idx.len() != self.degree {
            return Err(ModelError::DegreeMismatch {
                expected: self.degree,
                got: idx.len(),
            });
        }
        let mut key = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.dim {
                return Err(ModelError::IndexOutOfRange { index: i, dim: self.dim });
            }
            key.push(i as u8);
        }
        key.sort_unstable();
        Ok(key)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Taylor component at a multi-index (any order).
    pub fn get(&self, idx: &[usize]) -> Result<f64, ModelError> {
        let key = self.key_for(idx)?;
        Ok(self.coeffs[&key])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<(), ModelError> {
        if !value.is_finite() {
            return Err(ModelError::NonFiniteValue);
        }
        let key = self.key_for(idx)?;
        *self.coeffs.get_mut(&key).unwrap() = value;
        Ok(())
    }

    /// Cumulant component: `degree! *` Taylor component.
    pub fn cumulant(&self, idx: &[usize]) -> Result<f64, ModelError> {
        Ok(factorial_f64(self.degree) * self.get(idx)?)
    }

    /// Value of the homogeneous polynomial `sum_X C_X x^X` (sum over all
    /// `dim^degree` tuples).
    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut acc = 0.0;
        for (key, &c) in &self.coeffs {
            if c == 0.0 {
                continue;
            }
            let mono: f64 = key.iter().map(|&i| x[i as usize]).product();
            acc += permutation_count(key) * c * mono;
        }
        Ok(acc)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|&v| v == 0.0)
    }

    /// Iterate `(ascending index, Taylor component)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[u8], f64)> {
        self.coeffs.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Dense table over all `dim^degree` unsorted tuples; entry at rank
    /// `sum_k idx[k] * dim^k`. Used by evaluation hot loops.
    pub(crate) fn dense_full(&self) -> Vec<f64> {
        let size = self.dim.pow(self.degree as u32);
        let mut out = vec![0.0; size];
        let mut idx = vec![0usize; self.degree];
        for (rank, slot) in out.iter_mut().enumerate() {
            let mut r = rank;
            for v in idx.iter_mut() {
                *v = r % self.dim;
                r /= self.dim;
            }
            let mut key: Vec<u8> = idx.iter().map(|&i| i as u8).collect();
            key.sort_unstable();
            *slot = self.coeffs[&key];
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.coeffs.values_mut() {
            *v *= factor;
        }
    }

    pub fn add_scaled(&mut self, other: &SymTensor, factor: f64) -> Result<(), ModelError> {
        if other.dim != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if other.degree != self.degree {
            return Err(ModelError::DegreeMismatch {
                expected: self.degree,
                got: other.degree,
            });
        }
        for (k, v) in self.coeffs.iter_mut() {
            *v += factor * other.coeffs[k];
        }
        Ok(())
    }
}

/// Truncated operator symbol: Taylor tensors `C(0) .. C(N)` of the exponent
/// `Psi`, with `C(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSymbol {
    dim: usize,
    coeffs: Vec<SymTensor>,
}

impl OperatorSymbol {
    pub fn new(dim: usize, coeffs: Vec<SymTensor>) -> Result<Self, ModelError> {
        if coeffs.is_empty() || !coeffs[0].is_zero() {
            return Err(ModelError::NonzeroConstantTerm);
        }
        for (n, c) in coeffs.iter().enumerate() {
            if c.dim() != dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
            if c.degree() != n {
                return Err(ModelError::DegreeMismatch {
                    expected: n,
                    got: c.degree(),
                });
            }
        }
        Ok(OperatorSymbol { dim, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest Taylor order carried.
    pub fn max_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, order: usize) -> Result<&SymTensor, ModelError> {
        self.coeffs.get(order).ok_or(ModelError::OrderBeyondTruncation {
            order,
            max: self.max_order(),
        })
    }

    /// Order-`idx.len()` cumulant at a multi-index.
    pub fn cumulant(&self, idx: &[usize]) -> Result<f64, ModelError> {
        self.coeff(idx.len())?.cumulant(idx)
    }

    pub fn order_is_zero(&self, order: usize) -> bool {
        self.coeffs.get(order).is_none_or(SymTensor::is_zero)
    }
}

/// Lévy data: drift vector, diffusion matrix, jump activity, and raw jump
/// moment tensors `M_n = integral of s^(x_1..x_n) dr(s)` keyed by order.
#[derive(Clone, Debug)]
pub struct LevyJumpSpec {
    pub dim: usize,
    pub drift: Vec<f64>,
    pub diffusion: Vec<Vec<f64>>,
    pub activity: f64,
    pub jump_moments: BTreeMap<usize, SymTensor>,
}

impl LevyJumpSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.dim;
        if self.drift.len() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                got: self.drift.len(),
            });
        }
        if self.diffusion.len() != d || self.diffusion.iter().any(|r| r.len() != d) {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                got: self.diffusion.len(),
            });
        }
        let scale = self
            .diffusion
            .iter()
            .flatten()
            .fold(0.0f64, |a, &v| a.max(v.abs()))
            .max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (self.diffusion[i][j] - self.diffusion[j][i]).abs() > 1e-12 * scale {
                    return Err(ModelError::AsymmetricDiffusion);
                }
            }
        }
        if !psd_by_principal_minors(&self.diffusion) {
            return Err(ModelError::NonPsdDiffusion);
        }
        if self.activity < 0.0 || !self.activity.is_finite() {
            return Err(ModelError::NegativeActivity(self.activity));
        }
        for (&n, t) in &self.jump_moments {
            if t.dim() != d {
                return Err(ModelError::DimensionMismatch {
                    expected: d,
                    got: t.dim(),
                });
            }
            if t.degree() != n {
                return Err(ModelError::DegreeMismatch {
                    expected: n,
                    got: t.degree(),
                });
            }
        }
        Ok(())
    }

    fn jump_moment(&self, order: usize) -> Result<&SymTensor, ModelError> {
        self.jump_moments
            .get(&order)
            .ok_or(ModelError::MissingJumpMoment(order))
    }

    /// Copy with the diffusion matrix zeroed (jump and drift parts kept).
    pub fn without_diffusion(&self) -> LevyJumpSpec {
        let mut s = self.clone();
        s.diffusion = vec![vec![0.0; self.dim]; self.dim];
        s
    }
}

/// PSD test via nonnegativity of all principal minors (sufficient and
/// necessary for symmetric matrices; covers singular ones, unlike leading
/// minors alone).
fn psd_by_principal_minors(mat: &[Vec<f64>]) -> bool {
    let d = mat.len();
    let scale = mat
        .iter()
        .flatten()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1.0);
    for mask in 1u32..(1 << d) {
        let rows: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
        let k = rows.len();
        let mut sub = vec![vec![0.0; k]; k];
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in rows.iter().enumerate() {
                sub[a][b] = mat[i][j];
            }
        }
        if det_lu(&mut sub) < -1e-10 * scale.powi(k as i32) {
            return false;
        }
    }
    true
}

#[allow(clippy::needless_range_loop)] // elimination updates two rows of `a` in place
fn det_lu(a: &mut [Vec<f64>]) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let (pivot, _) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .fold((col, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

/// Build the truncated operator symbol of a Lévy triplet:
/// `C(1) = a + z M_1`, `C(2) = D + z M_2 / 2!`, `C(n) = z M_n / n!` for
/// `n >= 3`. Jump moments are required up to `max_order` whenever the
/// activity is nonzero.
pub fn levy_to_symbol(spec: &LevyJumpSpec, max_order: usize) -> Result<OperatorSymbol, ModelError> {
    spec.validate()?;
    let d = spec.dim;
    let z = spec.activity;
    let mut coeffs = Vec::with_capacity(max_order + 1);
    coeffs.push(SymTensor::zeros(d, 0));
    for n in 1..=max_order {
        let mut t = SymTensor::zeros(d, n);
        if n == 1 {
            for i in 0..d {
                t.set(&[i], spec.drift[i])?;
            }
        }
        if n == 2 {
            for i in 0..d {
                for j in i..d {
                    let cur = t.get(&[i, j])?;
                    t.set(&[i, j], cur + spec.diffusion[i][j])?;
                }
            }
        }
        if z != 0.0 {
            t.add_scaled(spec.jump_moment(n)?, z / factorial_f64(n))?;
        }
        coeffs.push(t);
    }
    OperatorSymbol::new(d, coeffs)
}

/// Recentering: replace `C(1)` by `C(1) - shift / t0`, leaving all other
/// orders untouched. Expanding around `shift` at time `t0` then evaluating
/// at the origin reproduces the original expansion at `shift`.
pub fn shift_symbol(
    sym: &OperatorSymbol,
    shift: &[f64],
    t0: f64,
) -> Result<OperatorSymbol, ModelError> {
    if t0 <= 0.0 || !t0.is_finite() {
        return Err(ModelError::NonPositiveTime(t0));
    }
    if shift.len() != sym.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: sym.dim(),
            got: shift.len(),
        });
    }
    let mut coeffs: Vec<SymTensor> = sym.coeffs.clone();
    if coeffs.len() < 2 {
        coeffs.push(SymTensor::zeros(sym.dim(), 1));
    }
    for (i, &s) in shift.iter().enumerate() {
        let cur = coeffs[1].get(&[i])?;
        coeffs[1].set(&[i], cur - s / t0)?;
    }
    OperatorSymbol::new(sym.dim(), coeffs)
}

/// Polynomial potential: `V(phi) = sum_n sum_X lambda(n)_X phi^X`, one
/// symmetric tensor per degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    dim: usize,
    coeffs: Vec<SymTensor>,
}

impl Potential {
    pub fn new(dim: usize, coeffs: Vec<SymTensor>) -> Result<Self, ModelError> {
        for (n, c) in coeffs.iter().enumerate() {
            if c.dim() != dim {
                return Err(ModelError::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
            if c.degree() != n {
                return Err(ModelError::DegreeMismatch {
                    expected: n,
                    got: c.degree(),
                });
            }
        }
        Ok(Potential { dim, coeffs })
    }

    /// `V(phi) = |phi|^2`: unit coefficients on the squared coordinates.
    pub fn isotropic_quadratic(dim: usize) -> Potential {
        let mut quad = SymTensor::zeros(dim, 2);
        for i in 0..dim {
            quad.set(&[i, i], 1.0).unwrap();
        }
        Potential {
            dim,
            coeffs: vec![SymTensor::zeros(dim, 0), SymTensor::zeros(dim, 1), quad],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, degree: usize) -> Option<&SymTensor> {
        self.coeffs.get(degree)
    }

    /// Degrees carrying a nonzero tensor, ascending.
    pub fn nonzero_degrees(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(n, _)| n)
            .collect()
    }

    pub fn top_degree(&self) -> Option<usize> {
        self.nonzero_degrees().into_iter().max()
    }

    pub fn eval(&self, phi: &[f64]) -> Result<f64, ModelError> {
        let mut acc = 0.0;
        for c in &self.coeffs {
            acc += c.eval(phi)?;
        }
        Ok(acc)
    }

    /// Whether the potential is a pure quadratic form (only degree 2
    /// nonzero).
    pub fn is_pure_quadratic(&self) -> bool {
        self.nonzero_degrees() == vec![2]
    }
}

/// Outcome of `validate_potential`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialReport {
    pub top_degree: usize,
    pub samples: usize,
    /// Smallest sampled value of the top homogeneous form on unit vectors.
    pub min_top_value: f64,
}

/// Confinement check: the leading homogeneous form must have even degree
/// and be strictly positive along sampled unit directions, so that
/// `exp(-beta V)` decays in every direction.
pub fn validate_potential(pot: &Potential) -> Result<PotentialReport, ModelError> {
    let top = pot.top_degree().ok_or(ModelError::ZeroPotential)?;
    if top == 0 {
        return Err(ModelError::ZeroPotential);
    }
    if top % 2 != 0 {
        return Err(ModelError::OddTopDegree(top));
    }
    let form = pot.coeff(top).unwrap();
    let d = pot.dim();
    let samples = if d == 1 { 2 } else { DEFAULT_VALIDATION_SAMPLES };
    let mut min_val = f64::INFINITY;
    let mut rng = SmallRng::new(0x5EED_u64);
    for k in 0..samples {
        let x = if d == 1 {
            vec![if k == 0 { 1.0 } else { -1.0 }]
        } else {
            let mut v: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
            v.iter_mut().for_each(|a| *a /= norm);
            v
        };
        let val = form.eval(&x)?;
        min_val = min_val.min(val);
        if val <= 0.0 {
            return Err(ModelError::NonPositiveTopForm { value: val });
        }
    }
    Ok(PotentialReport {
        top_degree: top,
        samples,
        min_top_value: min_val,
    })
}

/// Minimal deterministic generator for validation sampling (xorshift with
/// Box-Muller); avoids threading an external RNG through validation APIs.
struct SmallRng {
    state: u64,
    spare: Option<f64>,
}

impl SmallRng {
    fn new(seed: u64) -> Self {
        SmallRng {
            state: seed | 1,
            spare: None,
        }
    }

    fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.state = x;
        x
    }

    fn next_unit(&mut self) -> f64 {
        // Open (0, 1).
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    fn next_gaussian(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Evaluation point of a density expansion: time and spatial argument.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub t: f64,
    pub phi: Vec<f64>,
}

impl EvalPoint {
    pub fn new(t: f64, phi: Vec<f64>) -> Result<Self, ModelError> {
        if !t.is_finite() || t <= 0.0 {
            return Err(ModelError::NonPositiveTime(t));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteValue);
        }
        Ok(EvalPoint { t, phi })
    }
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

/// On-disk model description. Sections are independent; commands require
/// the ones they need.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levy: Option<LevyFile>,
    /// Explicit symbol Taylor tensors (alternative to `levy`), order 1 up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<TensorFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_diffusion: Option<JumpDiffusionFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevyFile {
    #[serde(default)]
    pub drift: Option<Vec<f64>>,
    #[serde(default)]
    pub diffusion: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub activity: f64,
    /// Raw jump moments keyed by order; each value is a fully nested array
    /// (depth = order), or a bare number in dimension one.
    #[serde(default)]
    pub jump_moments: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorFile {
    pub degree: usize,
    #[serde(default)]
    pub entries: Vec<EntryFile>,
}

/// One symmetric component; `index` holds 1-based coordinate labels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntryFile {
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpDiffusionFile {
    pub z1: f64,
    pub z2: f64,
    pub s1: f64,
    pub s2: f64,
    pub beta: f64,
    #[serde(default)]
    pub a: Option<f64>,
}

/// Fully resolved model sections.
#[derive(Clone, Debug)]
pub struct Model {
    pub dim: usize,
    pub levy: Option<LevyJumpSpec>,
    pub explicit_symbol: Option<OperatorSymbol>,
    pub potential: Option<Potential>,
    pub jump_diffusion: Option<JumpDiffusionFile>,
    /// The raw file, kept for embedding into reports.
    pub source: ModelFile,
}

impl ModelFile {
    pub fn from_json_str(s: &str) -> Result<ModelFile, ModelError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn resolve(self) -> Result<Model, ModelError> {
        let dim = self.dim;
        if dim == 0 || dim > u8::MAX as usize {
            return Err(ModelError::Shape(format!("unsupported dimension {dim}")));
        }
        let levy = match &self.levy {
            None => None,
            Some(lf) => {
                let mut jump_moments = BTreeMap::new();
                for (k, v) in &lf.jump_moments {
                    let order: usize = k
                        .parse()
                        .map_err(|_| ModelError::Shape(format!("bad jump moment key '{k}'")))?;
                    if order == 0 {
                        return Err(ModelError::Shape("jump moment order 0".into()));
                    }
                    jump_moments.insert(order, tensor_from_nested(v, dim, order)?);
                }
                let spec = LevyJumpSpec {
                    dim,
                    drift: lf.drift.clone().unwrap_or_else(|| vec![0.0; dim]),
                    diffusion: lf
                        .diffusion
                        .clone()
                        .unwrap_or_else(|| vec![vec![0.0; dim]; dim]),
                    activity: lf.activity,
                    jump_moments,
                };
                spec.validate()?;
                Some(spec)
            }
        };
        let explicit_symbol = match &self.coeffs {
            None => None,
            Some(tensors) => {
                let max_order = tensors.iter().map(|t| t.degree).max().unwrap_or(0);
                let mut coeffs: Vec<SymTensor> =
                    (0..=max_order).map(|n| SymTensor::zeros(dim, n)).collect();
                for tf in tensors {
                    let t = tensor_from_entries(tf, dim)?;
                    coeffs[tf.degree] = t;
                }
                Some(OperatorSymbol::new(dim, coeffs)?)
            }
        };
        let potential = match &self.potential {
            None => None,
            Some(pf) => {
                let max_degree = pf.coeffs.iter().map(|t| t.degree).max().unwrap_or(0);
                let mut coeffs: Vec<SymTensor> =
                    (0..=max_degree).map(|n| SymTensor::zeros(dim, n)).collect();
                for tf in &pf.coeffs {
                    coeffs[tf.degree] = tensor_from_entries(tf, dim)?;
                }
                Some(Potential::new(dim, coeffs)?)
            }
        };
        Ok(Model {
            dim,
            levy,
            explicit_symbol,
            potential,
            jump_diffusion: self.jump_diffusion.clone(),
            source: self,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialFile {
    pub coeffs: Vec<TensorFile>,
}

fn tensor_from_entries(tf: &TensorFile, dim: usize) -> Result<SymTensor, ModelError> {
    let entries: Result<Vec<(Vec<usize>, f64)>, ModelError> = tf
        .entries
        .iter()
        .map(|e| {
            let idx: Result<Vec<usize>, ModelError> = e
                .index
                .iter()
                .map(|&i| {
                    if i == 0 {
                        Err(ModelError::Shape("tensor indices are 1-based".into()))
                    } else {
                        Ok(i - 1)
                    }
                })
                .collect();
            Ok((idx?, e.value))
        })
        .collect();
    SymTensor::from_entries(dim, tf.degree, &entries?)
}

/// Parse a nested-array jump moment of the given order, verifying symmetry.
fn tensor_from_nested(
    v: &serde_json::Value,
    dim: usize,
    order: usize,
) -> Result<SymTensor, ModelError> {
    fn lookup(v: &serde_json::Value, idx: &[usize]) -> Result<f64, ModelError> {
        match idx.split_first() {
            None => v
                .as_f64()
                .ok_or_else(|| ModelError::Shape("jump moment leaf is not a number".into())),
            Some((&i, rest)) => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| ModelError::Shape("jump moment nesting too shallow".into()))?;
                let elem = arr
                    .get(i)
                    .ok_or_else(|| ModelError::Shape("jump moment array too short".into()))?;
                lookup(elem, rest)
            }
        }
    }

    // Bare number is accepted when there is a single component.
    if dim == 1 {
        if let Some(x) = v.as_f64() {
            return SymTensor::from_entries(1, order, &[(vec![0; order], x)]);
        }
    }
    let mut t = SymTensor::zeros(dim, order);
    // Walk every unsorted tuple; check permutation classes agree.
    let total = dim.pow(order as u32);
    let mut idx = vec![0usize; order];
    for rank in 0..total {
        let mut r = rank;
        for slot in idx.iter_mut() {
            *slot = r % dim;
            r /= dim;
        }
        let val = lookup(v, &idx)?;
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        if sorted == idx {
            t.set(&idx, val)?;
        } else {
            let stored = t.get(&sorted)?;
            let scale = stored.abs().max(val.abs()).max(1.0);
            if (stored - val).abs() > 1e-12 * scale {
                return Err(ModelError::AsymmetricTensor);
            }
        }
    }
    Ok(t)
}

impl Model {
    /// Operator symbol truncated at `max_order`, from whichever source the
    /// file provides (explicit tensors win over a Lévy block).
    pub fn symbol_at_order(&self, max_order: usize) -> Result<OperatorSymbol, ModelError> {
        if let Some(sym) = &self.explicit_symbol {
            if sym.max_order() < max_order {
                return Err(ModelError::OrderBeyondTruncation {
                    order: max_order,
                    max: sym.max_order(),
                });
            }
            let coeffs = (0..=max_order)
                .map(|n| sym.coeff(n).unwrap().clone())
                .collect();
            return OperatorSymbol::new(self.dim, coeffs);
        }
        if let Some(levy) = &self.levy {
            return levy_to_symbol(levy, max_order);
        }
        Err(ModelError::MissingSection("levy or coeffs"))
    }

    pub fn require_potential(&self) -> Result<&Potential, ModelError> {
        self.potential
            .as_ref()
            .ok_or(ModelError::MissingSection("potential"))
    }

    pub fn require_jump_diffusion(&self) -> Result<&JumpDiffusionFile, ModelError> {
        self.jump_diffusion
            .as_ref()
            .ok_or(ModelError::MissingSection("jump_diffusion"))
    }

    pub fn require_levy(&self) -> Result<&LevyJumpSpec, ModelError> {
        self.levy.as_ref().ok_or(ModelError::MissingSection("levy"))
    }
}
