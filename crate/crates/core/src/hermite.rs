//! Normalized multivariate Hermite polynomials, least-squares regression in
//! that basis, and expected gradient outer products from coefficients.
//!
//! The 1-D basis is `H_i(x) = He_i(x) / √(i!)`, orthonormal under `N(0, 1)`;
//! the multivariate basis is the tensor product `H_α(x) = ∏_i H_{α_i}(x_i)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector `α ∈ ℕ^k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(k: usize) -> Self {
        MultiIndex(vec![0; k])
    }

    pub fn unit(k: usize, i: usize) -> Self {
        let mut e = vec![0; k];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// All multi-indices in `k` variables with total degree at most `m`, ordered
/// by degree then lexicographically (descending in the first coordinate).
pub fn multi_indices(k: usize, m: u32) -> Vec<MultiIndex> {
    fn fill(k: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == k {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            fill(k, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        out.push(MultiIndex(Vec::new()));
        return out;
    }
    for deg in 0..=m {
        fill(k, deg, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Number of Hermite features of degree at most `m` in `k` variables, `C(k+m, m)`.
pub fn feature_count(k: usize, m: u32) -> usize {
    let mut c: u128 = 1;
    for i in 1..=m as u128 {
        c = c * (k as u128 + i) / i;
    }
    c as usize
}

/// Normalized 1-D values `H_0(x), …, H_m(x)` via the `He` recurrence
/// `He_{j+1} = x He_j − j He_{j−1}`.
pub fn hermite_1d_all(m: u32, x: f64, out: &mut [f64]) {
    let m = m as usize;
    out[0] = 1.0;
    if m >= 1 {
        out[1] = x;
    }
    for j in 1..m {
        out[j + 1] = x * out[j] - j as f64 * out[j - 1];
    }
    let mut fact = 1.0;
    for (j, v) in out.iter_mut().enumerate().take(m + 1).skip(1) {
        fact *= j as f64;
        *v /= fact.sqrt();
    }
}

/// `H_idx(x)`.
pub fn hermite_eval(idx: &MultiIndex, x: &[f64]) -> Result<f64> {
    if idx.dim() != x.len() {
        return Err(Error::DimensionMismatch { expected: idx.dim(), got: x.len() });
    }
    let mut buf = Vec::new();
    let mut value = 1.0;
    for (&a, &xi) in idx.0.iter().zip(x) {
        if a == 0 {
            continue;
        }
        buf.resize(a as usize + 1, 0.0);
        hermite_1d_all(a, xi, &mut buf);
        value *= buf[a as usize];
    }
    Ok(value)
}

/// Polynomial `Σ_β p̂(β) H_β` of degree at most `degree` in `dim` variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteCoefficients {
    dim: usize,
    degree: u32,
    coeffs: BTreeMap<MultiIndex, f64>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientEntry {
    exponents: MultiIndex,
    value: f64,
}

impl HermiteCoefficients {
    pub fn zero(dim: usize, degree: u32) -> Self {
        Self { dim, degree, coeffs: BTreeMap::new() }
    }

    pub fn from_terms(dim: usize, degree: u32, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Result<Self> {
        let mut p = Self::zero(dim, degree);
        for (idx, c) in terms {
            p.set(idx, c)?;
        }
        Ok(p)
    }

    pub fn set(&mut self, idx: MultiIndex, value: f64) -> Result<()> {
        if idx.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: idx.dim() });
        }
        if idx.degree() > self.degree {
            return Err(Error::InvalidParameter(format!(
                "term of degree {} exceeds polynomial degree {}",
                idx.degree(),
                self.degree
            )));
        }
        self.coeffs.insert(idx, value);
        Ok(())
    }

    pub fn get(&self, idx: &MultiIndex) -> f64 {
        self.coeffs.get(idx).copied().unwrap_or(0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.coeffs.iter().map(|(k, &v)| (k, v))
    }

    /// Gaussian `L²` norm squared, `Σ p̂(β)²` (Parseval).
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }

    /// JSON list of `{exponents, value}` records.
    pub fn to_json(&self) -> Result<String> {
        let entries: Vec<CoefficientEntry> =
            self.terms().map(|(e, v)| CoefficientEntry { exponents: e.clone(), value: v }).collect();
        Ok(serde_json::to_string(&entries)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let entries: Vec<CoefficientEntry> = serde_json::from_str(s)?;
        let dim = entries.first().map(|e| e.exponents.dim()).unwrap_or(0);
        let degree = entries.iter().map(|e| e.exponents.degree()).max().unwrap_or(0);
        Self::from_terms(dim, degree, entries.into_iter().map(|e| (e.exponents, e.value)))
    }
}

/// `Σ_β p̂(β) H_β(x)`.
pub fn poly_eval(p: &HermiteCoefficients, x: &[f64]) -> Result<f64> {
    if x.len() != p.dim {
        return Err(Error::DimensionMismatch { expected: p.dim, got: x.len() });
    }
    let table = HermiteTable::new(p.degree, x);
    Ok(p.coeffs.iter().map(|(idx, c)| c * table.product(idx)).sum())
}

/// Per-coordinate values `H_j(x_i)` for `j ≤ m`.
struct HermiteTable {
    width: usize,
    values: Vec<f64>,
}

impl HermiteTable {
    fn new(m: u32, x: &[f64]) -> Self {
        let width = m as usize + 1;
        let mut values = vec![0.0; width * x.len()];
        for (i, &xi) in x.iter().enumerate() {
            hermite_1d_all(m, xi, &mut values[i * width..(i + 1) * width]);
        }
        Self { width, values }
    }

    fn product(&self, idx: &MultiIndex) -> f64 {
        idx.0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| self.values[i * self.width + a as usize])
            .product()
    }
}

/// Least-squares design in the Hermite basis: the feature Gram matrix of a
/// point set, reusable across several regression targets.
pub struct HermiteDesign {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    features: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl HermiteDesign {
    /// `points` is row-major `n × dim`.
    pub fn new(points: &[f64], dim: usize, degree: u32) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: points.len() });
        }
        let n = points.len() / dim;
        let indices = multi_indices(dim, degree);
        let f = indices.len();
        let rows: Vec<Vec<f64>> = points
            .par_chunks(dim)
            .map(|x| {
                let table = HermiteTable::new(degree, x);
                indices.iter().map(|idx| table.product(idx)).collect()
            })
            .collect();
        let features = DMatrix::from_fn(n, f, |i, j| rows[i][j]);
        let gram = if n > 0 { features.tr_mul(&features) / n as f64 } else { DMatrix::zeros(f, f) };
        Ok(Self { dim, degree, indices, features, gram })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_count(&self) -> usize {
        self.indices.len()
    }

    /// Minimizes `(1/n) Σ (t_j − p(x_j))² + ridge · Σ p̂(β)²`.
    pub fn solve(&self, targets: &[f64], ridge: f64) -> Result<HermiteCoefficients> {
        self.solve_many(&[targets], ridge).map(|mut v| v.remove(0))
    }

    /// Solves several targets with one factorization.
    pub fn solve_many(&self, targets: &[&[f64]], ridge: f64) -> Result<Vec<HermiteCoefficients>> {
        let n = self.len();
        let f = self.feature_count();
        if ridge < 0.0 || !ridge.is_finite() {
            return Err(Error::InvalidParameter(format!("ridge {ridge} must be >= 0")));
        }
        if ridge == 0.0 && n < f {
            return Err(Error::RankDeficient { features: f });
        }
        let mut g = self.gram.clone();
        for i in 0..f {
            g[(i, i)] += ridge;
        }
        let scale = (0..f).map(|i| g[(i, i)]).fold(0.0, f64::max);
        let chol = g.cholesky().ok_or(Error::RankDeficient { features: f })?;
        let l = chol.l_dirty();
        let min_pivot = (0..f).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if ridge == 0.0 && min_pivot < 1e-12 * scale {
            return Err(Error::RankDeficient { features: f });
        }
        targets
            .iter()
            .map(|t| {
                if t.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: t.len() });
                }
                let rhs = self.features.tr_mul(&DVector::from_column_slice(t)) / n as f64;
                let sol = chol.solve(&rhs);
                let mut p = HermiteCoefficients::zero(self.dim, self.degree);
                for (idx, &c) in self.indices.iter().zip(sol.iter()) {
                    p.coeffs.insert(idx.clone(), c);
                }
                Ok(p)
            })
            .collect()
    }

    /// Empirical projections `(1/n) Σ t_j H_β(x_j)`: the population
    /// least-squares solution under `N(0, I)` with sample moments plugged in.
    pub fn project_many(&self, targets: &[&[f64]]) -> Result<Vec<HermiteCoefficients>> {
        let n = self.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        targets
            .iter()
            .map(|t| {
                if t.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: t.len() });
                }
                let proj = self.features.tr_mul(&DVector::from_column_slice(t)) / n as f64;
                let mut p = HermiteCoefficients::zero(self.dim, self.degree);
                for (idx, &c) in self.indices.iter().zip(proj.iter()) {
                    p.coeffs.insert(idx.clone(), c);
                }
                Ok(p)
            })
            .collect()
    }

    /// Mean squared residual of `p` on the design points.
    pub fn mse(&self, p: &HermiteCoefficients, targets: &[f64]) -> f64 {
        let coeffs = DVector::from_iterator(self.indices.len(), self.indices.iter().map(|i| p.get(i)));
        let pred = &self.features * coeffs;
        pred.iter().zip(targets).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / targets.len().max(1) as f64
    }
}

/// Degree-`m` least-squares fit of `targets` on `points` (row-major `n × k`)
/// in the normalized Hermite basis, with optional ridge.
pub fn hermite_regression(
    points: &[f64],
    k: usize,
    targets: &[f64],
    m: u32,
    ridge: f64,
) -> Result<HermiteCoefficients> {
    HermiteDesign::new(points, k, m)?.solve(targets, ridge)
}

/// `E_{x∼N(0,I_k)}[∇p ∇pᵀ]` computed from coefficients using
/// `∂_i H_α = √α_i · H_{α−e_i}` and orthonormality.
pub fn gradient_outer_product(p: &HermiteCoefficients) -> DMatrix<f64> {
    let k = p.dim;
    // Hermite expansion of each partial derivative, keyed by the lowered index.
    let mut partials: BTreeMap<MultiIndex, Vec<f64>> = BTreeMap::new();
    for (alpha, &c) in &p.coeffs {
        for i in 0..k {
            let a = alpha.0[i];
            if a == 0 || c == 0.0 {
                continue;
            }
            let mut lowered = alpha.clone();
            lowered.0[i] -= 1;
            partials.entry(lowered).or_insert_with(|| vec![0.0; k])[i] += c * (a as f64).sqrt();
        }
    }
    let mut m = DMatrix::zeros(k, k);
    for g in partials.values() {
        crate::subspace::add_outer(&mut m, g, 1.0);
    }
    m
}

/// Drops the constant term and rescales to unit Gaussian `L²` norm.
pub fn center_and_normalize(p: &HermiteCoefficients) -> Result<HermiteCoefficients> {
    let zero = MultiIndex::zero(p.dim);
    let norm_sq: f64 = p.coeffs.iter().filter(|(k, _)| **k != zero).map(|(_, c)| c * c).sum();
    if norm_sq == 0.0 {
        return Err(Error::DegeneratePolynomial);
    }
    let s = norm_sq.sqrt();
    let coeffs = p
        .coeffs
        .iter()
        .filter(|(k, _)| **k != zero)
        .map(|(k, c)| (k.clone(), c / s))
        .collect();
    Ok(HermiteCoefficients { dim: p.dim, degree: p.degree, coeffs })
}
