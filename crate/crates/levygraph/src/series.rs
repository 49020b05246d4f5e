//! Truncated power-series arithmetic and small polynomial helpers.
//!
//! All series are dense coefficient vectors `c[0..=N]` in one formal
//! variable. The exp/ln recurrences are the standard ones obtained by
//! differentiating `E = exp(C)` resp. `L = ln(H)` and matching
//! coefficients; they are exact on truncated series.

/// Product of two truncated series, truncated at `order` (inclusive).
pub fn mul_trunc(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, &ai) in a.iter().enumerate().take(order + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// `exp` of a truncated series with zero constant term.
///
/// Panics if `c` is empty or `c[0] != 0`; callers own that invariant.
pub fn exp_trunc(c: &[f64], order: usize) -> Vec<f64> {
    assert!(!c.is_empty() && c[0] == 0.0, "exp_trunc needs c[0] == 0");
    let mut e = vec![0.0; order + 1];
    e[0] = 1.0;
    for n in 1..=order {
        let mut acc = 0.0;
        for k in 1..=n.min(c.len() - 1) {
            acc += (k as f64) * c[k] * e[n - k];
        }
        e[n] = acc / n as f64;
    }
    e
}

/// `ln` of a truncated series with unit constant term.
///
/// Panics if `h` is empty or `h[0] != 1`; callers own that invariant.
pub fn ln_trunc(h: &[f64], order: usize) -> Vec<f64> {
    assert!(!h.is_empty() && h[0] == 1.0, "ln_trunc needs h[0] == 1");
    let mut l = vec![0.0; order + 1];
    let at = |s: &[f64], i: usize| if i < s.len() { s[i] } else { 0.0 };
    for n in 1..=order {
        let mut acc = at(h, n);
        for (k, &lk) in l.iter().enumerate().take(n).skip(1) {
            acc -= (k as f64 / n as f64) * lk * at(h, n - k);
        }
        l[n] = acc;
    }
    l
}

/// Dense univariate polynomial with ascending coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(k, &c)| c * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0))
            .sum()
    }

    pub fn add_scaled_monomial(&mut self, degree: usize, coeff: f64) {
        if self.0.len() <= degree {
            self.0.resize(degree + 1, 0.0);
        }
        self.0[degree] += coeff;
    }
}
