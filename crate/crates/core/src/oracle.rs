//! Brute-force reference computations for tests: quadrature conditional
//! moments, exhaustive piecewise fitting and principal angles.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hermite::{poly_eval, HermiteCoefficients};
use crate::models::{Concept, Label, LabeledDataset};
use crate::partition::{ApproximatingPartition, CubeIndex};
use crate::quadrature::{gauss_hermite, gauss_legendre, GaussRule};
use crate::subspace::SubspaceBasis;

/// Tensor quadrature in up to three dimensions. Whole-space integrals use the
/// Gauss–Hermite rule; box integrals use composite Gauss–Legendre panels of
/// width `panel` aligned to multiples of `panel`, truncated at `±radius`.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub dims: usize,
    pub hermite: GaussRule,
    pub panel: f64,
    pub order: usize,
    pub radius: f64,
}

impl QuadratureGrid {
    pub fn new(dims: usize, nodes: usize) -> Result<Self> {
        if dims == 0 || dims > 3 {
            return Err(Error::InvalidParameter(format!("quadrature supports 1 to 3 dims, got {dims}")));
        }
        let panel = match dims {
            1 => 0.01,
            2 => 0.05,
            _ => 0.2,
        };
        Ok(Self { dims, hermite: gauss_hermite(nodes), panel, order: 4, radius: 9.0 })
    }

    /// `E[g(x)]` for `x ~ N(0, I_dims)`.
    pub fn integrate(&self, g: impl Fn(&[f64]) -> f64) -> f64 {
        let axes = vec![(self.hermite.nodes.clone(), self.hermite.weights.clone()); self.dims];
        tensor_sum(&axes, &g)
    }

    /// Nodes and Gaussian-weighted weights on `[lo, hi]`.
    fn axis(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let lo = lo.max(-self.radius);
        let hi = hi.min(self.radius);
        let rule = gauss_legendre(self.order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if lo >= hi {
            return (nodes, weights);
        }
        let mut cuts = vec![lo];
        let first = (lo / self.panel).floor() as i64 + 1;
        cuts.extend((first..).map(|j| j as f64 * self.panel).take_while(|&c| c < hi).filter(|&c| c > lo));
        cuts.push(hi);
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = mid + half * t;
                nodes.push(x);
                // Legendre weights sum to 1 over [−1, 1]; scale by the panel length.
                weights.push(w * (b - a) * (-0.5 * x * x).exp() / (2.0 * PI).sqrt());
            }
        }
        (nodes, weights)
    }
}

fn tensor_sum(axes: &[(Vec<f64>, Vec<f64>)], g: &dyn Fn(&[f64]) -> f64) -> f64 {
    let dims = axes.len();
    let mut point = vec![0.0; dims];
    let mut total = 0.0;
    let mut idx = vec![0usize; dims];
    if axes.iter().any(|a| a.0.is_empty()) {
        return 0.0;
    }
    loop {
        let mut w = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            point[j] = axes[j].0[i];
            w *= axes[j].1[i];
        }
        total += w * g(&point);
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < axes[j].0.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == dims {
                return total;
            }
        }
    }
}

/// `E[p(x)·1(concept(x) = label) | x ∈ box]` for a concept on at most three
/// coordinates; `cube` gives one interval per coordinate.
pub fn exact_conditional_moment(
    concept: &Concept,
    cube: &[(f64, f64)],
    label: Label,
    poly: &HermiteCoefficients,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let d = concept.dim();
    if d > 3 || d != grid.dims {
        return Err(Error::InvalidParameter(format!("concept dim {d} with {}-dim grid", grid.dims)));
    }
    if cube.len() != d || poly.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: cube.len().min(poly.dim()) });
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = cube.iter().map(|&(lo, hi)| grid.axis(lo, hi)).collect();
    let mass = tensor_sum(&axes, &|_| 1.0);
    if mass < 1e-12 {
        return Err(Error::DegenerateBox(mass));
    }
    let num = tensor_sum(&axes, &|x| {
        if concept.predict_unchecked(x) == label {
            poly_eval(poly, x).unwrap_or(0.0)
        } else {
            0.0
        }
    });
    Ok(num / mass)
}

/// Hard cap on nonempty cubes for the exhaustive search.
pub const EXHAUSTIVE_CUBE_LIMIT: usize = 12;

/// Smallest empirical 0-1 error over every assignment of labels to the
/// nonempty cubes and to the outside-of-grid fallback, by enumeration.
pub fn best_piecewise_error_exhaustive(partition: &ApproximatingPartition, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = dataset.label_count();
    let mut cubes: BTreeMap<CubeIndex, Vec<usize>> = BTreeMap::new();
    let mut outside = vec![0usize; k];
    for (x, y) in dataset.iter() {
        match partition.locate(x) {
            Some(c) => cubes.entry(c).or_insert_with(|| vec![0; k])[y] += 1,
            None => outside[y] += 1,
        }
    }
    if cubes.len() > EXHAUSTIVE_CUBE_LIMIT {
        return Err(Error::TooManyCubes { cubes: cubes.len(), limit: EXHAUSTIVE_CUBE_LIMIT });
    }
    let mut groups: Vec<Vec<usize>> = cubes.into_values().collect();
    groups.push(outside);
    let slots = groups.len();
    let totals: Vec<usize> = groups.iter().map(|g| g.iter().sum()).collect();
    let mut assignment = vec![0usize; slots];
    let mut best = usize::MAX;
    loop {
        let wrong: usize = (0..slots).map(|s| totals[s] - groups[s][assignment[s]]).sum();
        best = best.min(wrong);
        let mut s = 0;
        loop {
            assignment[s] += 1;
            if assignment[s] < k {
                break;
            }
            assignment[s] = 0;
            s += 1;
            if s == slots {
                return Ok(best as f64 / dataset.len() as f64);
            }
        }
    }
}

/// Principal angles between two subspaces, ascending: `arccos` of the
/// singular values of `A Bᵀ`, clamped to `[0, 1]`.
pub fn principal_angles(a: &SubspaceBasis, b: &SubspaceBasis) -> Vec<f64> {
    if a.dim() == 0 || b.dim() == 0 {
        return Vec::new();
    }
    let m: DMatrix<f64> = a.to_matrix() * b.to_matrix().transpose();
    let mut angles: Vec<f64> =
        m.singular_values().iter().map(|s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}
