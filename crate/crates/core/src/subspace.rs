//! Orthonormal row bases of subspaces of R^d and the dense linear algebra the
//! learners share.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the orthonormality invariant `B Bᵀ = I`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthonormal `k × d` row basis of a subspace `V`. `k = 0` encodes `V = {0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    ambient: usize,
    rows: Vec<Vec<f64>>,
}

impl SubspaceBasis {
    /// The trivial subspace `{0}` of `R^d`.
    pub fn zero(ambient: usize) -> Self {
        Self { ambient, rows: Vec::new() }
    }

    /// Wraps rows that must already be orthonormal.
    pub fn new(ambient: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() > ambient {
            return Err(Error::InvalidParameter(format!(
                "{} rows exceed ambient dimension {}",
                rows.len(),
                ambient
            )));
        }
        for row in &rows {
            if row.len() != ambient {
                return Err(Error::DimensionMismatch { expected: ambient, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("basis row is not finite".into()));
            }
        }
        for i in 0..rows.len() {
            for j in 0..=i {
                let g = dot(&rows[i], &rows[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                if (g - target).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "rows are not orthonormal: <b{i}, b{j}> = {g}"
                    )));
                }
            }
        }
        Ok(Self { ambient, rows })
    }

    /// Orthonormal basis for the span of arbitrary vectors (Gram–Schmidt, drops
    /// vectors whose residual norm falls below `tol`).
    pub fn from_span(ambient: usize, vectors: &[Vec<f64>], tol: f64) -> Result<Self> {
        Self::zero(ambient).extended(vectors, tol)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Coordinates `B x` of `x` in the basis.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| dot(r, x)).collect()
    }

    /// Writes `B x` into `out` without allocating.
    pub fn coords_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.rows) {
            *o = dot(r, x);
        }
    }

    /// `x^{⊥V} = x − Bᵀ B x`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for r in &self.rows {
            let c = dot(r, &out);
            axpy(-c, r, &mut out);
        }
        out
    }

    /// Orthonormal basis of `V^⊥`, built by Gram–Schmidt over the standard
    /// basis, so the result is deterministic.
    pub fn complement(&self) -> SubspaceBasis {
        let target = self.ambient - self.dim();
        let mut rows = self.rows.clone();
        let mut out = Vec::with_capacity(target);
        for axis in 0..self.ambient {
            if out.len() == target {
                break;
            }
            let mut e = vec![0.0; self.ambient];
            e[axis] = 1.0;
            if let Some(v) = orthonormalize_against(&e, &rows, 1e-8) {
                rows.push(v.clone());
                out.push(v);
            }
        }
        SubspaceBasis { ambient: self.ambient, rows: out }
    }

    /// Appends new vectors by Gram–Schmidt against the existing rows and each
    /// other. Vectors with residual norm below `tol` are dropped.
    pub fn extended(&self, vectors: &[Vec<f64>], tol: f64) -> Result<Self> {
        let mut rows = self.rows.clone();
        for v in vectors {
            if v.len() != self.ambient {
                return Err(Error::DimensionMismatch { expected: self.ambient, got: v.len() });
            }
            if rows.len() == self.ambient {
                break;
            }
            if let Some(u) = orthonormalize_against(v, &rows, tol) {
                rows.push(u);
            }
        }
        Ok(Self { ambient: self.ambient, rows })
    }

    /// First `k` rows as a basis of their own.
    pub fn prefix(&self, k: usize) -> SubspaceBasis {
        SubspaceBasis { ambient: self.ambient, rows: self.rows[..k.min(self.dim())].to_vec() }
    }

    /// Squared norm of the projection of `x` onto `V`.
    pub fn projected_norm_sq(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| dot(r, x).powi(2)).sum()
    }

    /// Largest deviation of `B Bᵀ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&self.rows[i], &self.rows[j]) - target).abs());
            }
        }
        worst
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim(), self.ambient, |i, j| self.rows[i][j])
    }
}

/// Two passes of modified Gram–Schmidt; returns the normalized residual of `v`
/// against `basis` or `None` if its norm relative to `v` is below `tol`.
fn orthonormalize_against(v: &[f64], basis: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let norm0 = norm(v);
    if norm0 == 0.0 || !norm0.is_finite() {
        return None;
    }
    let mut u: Vec<f64> = v.iter().map(|x| x / norm0).collect();
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &u);
            axpy(-c, b, &mut u);
        }
    }
    let n = norm(&u);
    if n < tol {
        return None;
    }
    u.iter_mut().for_each(|x| *x /= n);
    Some(u)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Flips `v` so its first entry with magnitude above `1e-12` is positive.
pub fn canonical_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted
/// descending and eigenvectors under the [`canonical_sign`] convention.
/// Ties in eigenvalue are ordered lexicographically by eigenvector.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            canonical_sign(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                b.1.iter()
                    .zip(&a.1)
                    .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                    .find(|o| *o != std::cmp::Ordering::Equal)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    pairs.into_iter().unzip()
}

/// Outer product accumulation `m += w · v vᵀ`.
pub fn add_outer(m: &mut DMatrix<f64>, v: &[f64], w: f64) {
    let n = v.len();
    for i in 0..n {
        let wi = w * v[i];
        for j in 0..n {
            m[(i, j)] += wi * v[j];
        }
    }
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let s = 0.5f64.sqrt();
        let v = SubspaceBasis::new(3, vec![vec![s, s, 0.0]]).unwrap();
        let c = v.complement();
        assert_eq!(c.dim(), 2);
        assert!(c.orthonormality_error() < 1e-12);
        for r in c.rows() {
            assert!(dot(r, v.row(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_orthonormal_rows() {
        assert!(SubspaceBasis::new(2, vec![vec![1.0, 0.0], vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn eigen_sorted_descending_with_sign_convention() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = symmetric_eigen_desc(&m);
        assert!((vals[0] - 3.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        assert!((vecs[0][1] - 1.0).abs() < 1e-12);
        assert!((vecs[1][0] - 1.0).abs() < 1e-12);
    }
}
