//! Hard instances behind the statistical-query lower bounds: a rotational
//! planar classifier and circulant label channels that hide it from
//! low-degree moments.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{random_orthonormal_rows, BoxPlusBand, Concept, ConfusionMatrix, MulticlassLinearClassifier};
use crate::quadrature::gauss_laguerre;
use crate::rng::{self, derive_seed, Purpose};
use crate::subspace::dot;

/// `ω_j = e^{2πi·rate·j/K}` for `j = 0..K`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootOfUnityVector {
    pub k: usize,
    pub rate: i64,
    pub entries: Vec<Complex64>,
}

impl RootOfUnityVector {
    pub fn new(k: usize, rate: i64) -> Self {
        let entries = (0..k)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (rate * j as i64) as f64 / k as f64))
            .collect();
        Self { k, rate, entries }
    }
}

/// Planar classifier `argmax_k (cos 2πk/K, sin 2πk/K)·x`; label `k` owns the
/// angular sector `[2πk/K − π/K, 2πk/K + π/K)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HardInstance2D {
    pub k: usize,
    pub classifier: MulticlassLinearClassifier,
}

impl HardInstance2D {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 classes, got {k}")));
        }
        let weights = (0..k)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / k as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        Ok(Self { k, classifier: MulticlassLinearClassifier::new(weights, vec![0.0; k])? })
    }

    /// Angular interval of sector `j`.
    pub fn sector(&self, j: usize) -> (f64, f64) {
        let c = 2.0 * PI * j as f64 / self.k as f64;
        let h = PI / self.k as f64;
        (c - h, c + h)
    }

    pub fn concept(&self) -> Concept {
        Concept::Mlc(self.classifier.clone())
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 8 || k % 4 != 0 {
        return Err(Error::UnsupportedLabelCount(k));
    }
    Ok(())
}

fn generator(k: usize, sign: f64) -> Vec<f64> {
    let kf = k as f64;
    let raw: Vec<f64> = (0..k)
        .map(|j| {
            let alt = if j % 2 == 0 { 1.0 } else { -1.0 };
            // Fold the angle so h_j and h_{K−j} are bitwise equal.
            let m = j.min(k - j) as f64;
            2.0 / kf + sign * (2.0 / kf) * alt * (2.0 * PI * m / kf).cos()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|h| (h / total).max(0.0)).collect()
}

/// Normalized generator `h'_j = 2/K + (2/K)(−1)^j cos(2πj/K)` of the RCN channel.
pub fn rcn_generator(k: usize) -> Result<Vec<f64>> {
    check_k(k)?;
    Ok(generator(k, 1.0))
}

/// Normalized generator `h'_j = 2/K − (2/K)(−1)^j cos(2πj/K)` of the contrastive channel.
pub fn contrastive_generator(k: usize) -> Result<Vec<f64>> {
    check_k(k)?;
    Ok(generator(k, -1.0))
}

/// Circulant confusion matrix `H_{i,j} = h'_{(j−i) mod K}` whose label noise
/// matches all moments of degree ≤ `K/2 − 2` with the uniform channel.
pub fn build_rcn_confusion_matrix(k: usize) -> Result<ConfusionMatrix> {
    ConfusionMatrix::circulant(&rcn_generator(k)?)
}

/// Circulant channel with zero diagonal: the observed label is never the true one.
pub fn build_contrastive_confusion_matrix(k: usize) -> Result<ConfusionMatrix> {
    ConfusionMatrix::circulant(&contrastive_generator(k)?)
}

/// `λ_j = Σ_m c_m e^{2πi·j·m/K}`.
pub fn circulant_eigenvalues(generator: &[f64]) -> Vec<Complex64> {
    let k = generator.len();
    (0..k)
        .map(|j| {
            let w = RootOfUnityVector::new(k, j as i64);
            generator.iter().zip(&w.entries).map(|(c, e)| e * *c).sum()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MomentMethod {
    Quadrature,
    MonteCarlo { n: usize, seed: u64 },
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(1/2π) ∫_{t0}^{t1} cos^a θ sin^b θ dθ` by expanding into complex exponentials.
fn angular_moment(a: u32, b: u32, t0: f64, t1: f64) -> f64 {
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..=a {
        for q in 0..=b {
            let coef = binomial(a, p) * binomial(b, q) * if (b - q) % 2 == 0 { 1.0 } else { -1.0 };
            let m = 2 * p as i64 - a as i64 + 2 * q as i64 - b as i64;
            let integral = if m == 0 {
                Complex64::new(t1 - t0, 0.0)
            } else {
                let mf = m as f64;
                (Complex64::from_polar(1.0, mf * t1) - Complex64::from_polar(1.0, mf * t0)) / Complex64::new(0.0, mf)
            };
            total += integral * coef;
        }
    }
    let scale = Complex64::new(2.0, 0.0).powu(a) * Complex64::new(0.0, 2.0).powu(b);
    (total / scale).re / (2.0 * PI)
}

/// `E[r^n]` for the radius of a planar standard Gaussian. With `s = r²/2 ~ Exp(1)`,
/// `E[r^n] = 2^{n/2} E[s^{n/2}]`, integrated by Gauss–Laguerre rules.
fn radial_moment(n: u32) -> f64 {
    const NODES: usize = 64;
    let half = n / 2;
    let scale = 2f64.powf(n as f64 / 2.0);
    if n % 2 == 0 {
        let rule = gauss_laguerre(NODES, 0.0);
        scale * rule.integrate(|s| s.powi(half as i32))
    } else {
        // s^{n/2} = s^{1/2}·s^{(n−1)/2}; the s^{1/2} factor goes into the weight.
        let rule = gauss_laguerre(NODES, 0.5);
        scale * 0.5 * PI.sqrt() * rule.integrate(|s| s.powi(half as i32))
    }
}

/// Max over labels `i` and monomials `x^a y^b` with `a + b ≤ max_degree` of
/// `|E[(H_{f(x),i} − 1/K) x^a y^b]|` under the rotational `K`-class instance.
pub fn verify_moment_matching(h: &ConfusionMatrix, k: usize, max_degree: u32, method: MomentMethod) -> Result<f64> {
    if h.size() != k {
        return Err(Error::DimensionMismatch { expected: k, got: h.size() });
    }
    let instance = HardInstance2D::new(k)?;
    let monomials: Vec<(u32, u32)> =
        (0..=max_degree).flat_map(|deg| (0..=deg).map(move |a| (a, deg - a))).collect();
    let kf = k as f64;
    let pairs: Vec<(usize, (u32, u32))> =
        (0..k).flat_map(|i| monomials.iter().map(move |&m| (i, m))).collect();
    let deviations: Vec<f64> = match method {
        MomentMethod::Quadrature => pairs
            .par_iter()
            .map(|&(i, (a, b))| {
                let radial = radial_moment(a + b);
                let value: f64 = (0..k)
                    .map(|s| {
                        let (t0, t1) = instance.sector(s);
                        (h.get(s, i) - 1.0 / kf) * angular_moment(a, b, t0, t1)
                    })
                    .sum();
                (value * radial).abs()
            })
            .collect(),
        MomentMethod::MonteCarlo { n, seed } => {
            if n == 0 {
                return Err(Error::EmptyDataset);
            }
            // Fixed-size chunks summed in order keep the result thread-count independent.
            const CHUNK: u64 = 8192;
            let chunks = (n as u64).div_ceil(CHUNK);
            let width = pairs.len();
            let partial: Vec<Vec<f64>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut acc = vec![0.0; width];
                    for idx in c * CHUNK..((c + 1) * CHUNK).min(n as u64) {
                        let mut r = rng::stream(seed, Purpose::MonteCarlo, idx);
                        let x: f64 = StandardNormal.sample(&mut r);
                        let y: f64 = StandardNormal.sample(&mut r);
                        let f = instance.classifier.predict_unchecked(&[x, y]);
                        for (slot, &(i, (a, b))) in acc.iter_mut().zip(&pairs) {
                            *slot += (h.get(f, i) - 1.0 / kf) * x.powi(a as i32) * y.powi(b as i32);
                        }
                    }
                    acc
                })
                .collect();
            let mut total = vec![0.0; width];
            for p in partial {
                for (t, v) in total.iter_mut().zip(p) {
                    *t += v;
                }
            }
            total.into_iter().map(|t| (t / n as f64).abs()).collect()
        }
    };
    Ok(deviations.into_iter().fold(0.0, f64::max))
}

/// `count` random `rows × d` orthonormal-row matrices with pairwise
/// `‖P Qᵀ‖_F ≤ corr_tol`, by rejection sampling with `100·count` attempts.
pub fn near_orthogonal_family(
    d: usize,
    rows: usize,
    count: usize,
    corr_tol: f64,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if rows == 0 || rows > d || count == 0 {
        return Err(Error::InvalidParameter(format!("need 1 <= rows <= d and count >= 1 (rows {rows}, d {d})")));
    }
    let family_seed = derive_seed(seed, Purpose::Family as u64);
    let budget = 100 * count as u64;
    let mut accepted: Vec<Vec<Vec<f64>>> = Vec::with_capacity(count);
    for attempt in 0..budget {
        if accepted.len() == count {
            break;
        }
        let q = random_orthonormal_rows(d, rows, family_seed, attempt);
        let ok = accepted.iter().all(|p| frobenius_cross(p, &q) <= corr_tol);
        if ok {
            accepted.push(q);
        }
    }
    if accepted.len() < count {
        return Err(Error::Infeasible { achieved: accepted.len(), requested: count });
    }
    Ok(accepted)
}

/// `‖P Qᵀ‖_F`.
pub fn frobenius_cross(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    p.iter().flat_map(|a| q.iter().map(move |b| dot(a, b).powi(2))).sum::<f64>().sqrt()
}

/// Box half-width of the two-index composite instance.
pub const BOX_HALF_WIDTH: f64 = 1.0;

/// Two-index composite `A + B` planted along random orthonormal directions
/// `(w¹, w²)` in `R^d`: `A = 1(|w¹·x| ≤ a)·1(|w²·x| ≤ a)` is invisible to first
/// moments, `B = 1(|w¹·x + w²·x| ≥ 2b)` with `b = max(a, k/4)`.
pub fn build_appendix_f_instance(k: u32, d: usize, seed: u64) -> Result<Concept> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    let a = BOX_HALF_WIDTH;
    let b = a.max(k as f64 / 4.0);
    let mut rows = random_orthonormal_rows(d, 2, seed, 0);
    let second = rows.pop().expect("two rows");
    let first = rows.pop().expect("two rows");
    Ok(Concept::BoxPlusBand(BoxPlusBand::new(first, second, a, b)?))
}
