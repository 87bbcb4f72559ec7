//! Gauss quadrature rules from the Golub–Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a one-dimensional rule; weights sum to one.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes/weights for the orthogonal polynomials with Jacobi matrix diagonal
/// `diag` and off-diagonal `off` (length `n − 1`), weights normalized to sum 1.
fn golub_welsch(diag: &[f64], off: &[f64]) -> GaussRule {
    let n = diag.len();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = off[i];
            j[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|c| (eig.eigenvalues[c], eig.eigenvectors[(0, c)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

/// `n`-point rule for the standard normal density (probabilists' Hermite).
/// Exact for polynomials of degree up to `2n − 1`.
pub fn gauss_hermite(n: usize) -> GaussRule {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|i| (i as f64).sqrt()).collect();
    golub_welsch(&diag, &off)
}

/// `n`-point rule for the Gamma(α + 1) density `s^α e^{−s} / Γ(α + 1)` on
/// `[0, ∞)` (generalized Laguerre). Exact for polynomials of degree up to `2n − 1`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> GaussRule {
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + 1.0 + alpha).collect();
    let off: Vec<f64> = (1..n).map(|i| (i as f64 * (i as f64 + alpha)).sqrt()).collect();
    golub_welsch(&diag, &off)
}

/// `n`-point Gauss–Legendre rule for the uniform density on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|i| i as f64 / (4.0 * (i * i) as f64 - 1.0).sqrt()).collect();
    golub_welsch(&diag, &off)
}
