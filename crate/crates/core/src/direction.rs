//! One round of subspace discovery: condition on the cubes of a partition over
//! the current subspace `V`, estimate label-conditional moments in `V^⊥`, and
//! return the dominant directions of their mass-weighted aggregate.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{feature_count, gradient_outer_product, HermiteDesign};
use crate::models::LabeledDataset;
use crate::partition::{build_partition, CubeIndex};
use crate::subspace::{add_outer, canonical_sign, dot, symmetric_eigen_desc, SubspaceBasis};

/// How per-cube label indicators are fitted by low-degree polynomials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionMethod {
    /// Ridge-stabilized least squares in the Hermite basis.
    #[default]
    LeastSquares,
    /// Coefficients as empirical Hermite moments `E[1(y=i) H_β]`; the
    /// mean/covariance shortcut for degree ≤ 2.
    MomentProjection,
}

/// Thresholds and widths for one direction-finding round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectionFinderConfig {
    /// Target accuracy ε.
    pub eps: f64,
    /// Cube width ε' of the conditioning partition.
    pub cube_eps: f64,
    /// Grid offset; `None` means `0.25 · cube_eps`.
    pub shift: Option<f64>,
    /// Moment threshold σ.
    pub sigma: f64,
    /// Regression degree m.
    pub m: u32,
    /// Allowed regression slack η.
    pub eta: Option<f64>,
    /// Eigenvalue threshold on the aggregate matrix; `None` means `σ·ε/(4K²)`.
    pub t_eig: Option<f64>,
    /// Bound K on the hidden subspace dimension.
    pub k_hint: usize,
    pub ridge: f64,
    /// At most this many complement coordinates enter the regression.
    pub max_regression_dims: usize,
    /// Cubes with fewer than `factor × features` samples are skipped.
    pub min_cube_factor: f64,
    pub regression: RegressionMethod,
}

impl Default for DirectionFinderConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            cube_eps: 0.5,
            shift: None,
            sigma: 0.05,
            m: 1,
            eta: None,
            t_eig: None,
            k_hint: 2,
            ridge: 1e-8,
            max_regression_dims: 16,
            min_cube_factor: 2.0,
            regression: RegressionMethod::LeastSquares,
        }
    }
}

impl DirectionFinderConfig {
    pub fn shift(&self) -> f64 {
        self.shift.unwrap_or(0.25 * self.cube_eps)
    }

    pub fn t_eig(&self) -> f64 {
        self.t_eig.unwrap_or(self.sigma * self.eps / (4.0 * (self.k_hint * self.k_hint) as f64))
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.sigma / 8.0)
    }

    /// Per-cube eigenvalue threshold `σ² / (4K)`.
    pub fn cube_threshold(&self) -> f64 {
        self.sigma * self.sigma / (4.0 * self.k_hint as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps", self.eps),
            ("cube_eps", self.cube_eps),
            ("sigma", self.sigma),
            ("eta", self.eta()),
            ("t_eig", self.t_eig()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cube_eps >= 1.0 {
            return Err(Error::InvalidParameter("cube_eps must be < 1".into()));
        }
        if self.m < 1 || self.k_hint < 1 || self.max_regression_dims < 1 {
            return Err(Error::InvalidParameter("m, k_hint and max_regression_dims must be >= 1".into()));
        }
        if self.ridge < 0.0 {
            return Err(Error::InvalidParameter("ridge must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-cube record for diagnostics output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeDiagnostic {
    /// `None` for the single improper cube used when `V = {0}`.
    pub cube: Option<CubeIndex>,
    pub mass: f64,
    pub samples: usize,
    /// Per label: moment norm (first-moment finder) or top gradient eigenvalue.
    pub per_label: Vec<f64>,
    pub directions: usize,
    pub skipped: bool,
}

/// Unit directions in `V^⊥` with their aggregate eigenvalues, sorted descending.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub vectors: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub diagnostics: Vec<CubeDiagnostic>,
    /// Full spectrum of the aggregate matrix, for inspection.
    pub spectrum: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// One JSON object per cube.
    pub fn write_diagnostics_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for d in &self.diagnostics {
            serde_json::to_writer(&mut out, d)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Samples grouped by the cube of `V`'s partition containing them, in cube
/// order, plus the number of samples that fell outside the grid.
fn group_by_cube(
    dataset: &LabeledDataset,
    v: &SubspaceBasis,
    cfg: &DirectionFinderConfig,
) -> Result<Vec<(Option<CubeIndex>, Vec<usize>)>> {
    if v.dim() == 0 {
        return Ok(vec![(None, (0..dataset.len()).collect())]);
    }
    let partition = build_partition(v.clone(), cfg.cube_eps, cfg.shift())?;
    let cells: Vec<Option<CubeIndex>> =
        (0..dataset.len()).into_par_iter().map(|i| partition.locate(dataset.x(i))).collect();
    let mut groups: BTreeMap<CubeIndex, Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.into_iter().enumerate() {
        if let Some(c) = c {
            groups.entry(c).or_default().push(i);
        }
    }
    if groups.is_empty() {
        return Err(Error::EmptyPartition);
    }
    Ok(groups.into_iter().map(|(c, idx)| (Some(c), idx)).collect())
}

/// Complement coordinates `C x` for the given rows.
fn complement_coords(dataset: &LabeledDataset, complement: &SubspaceBasis, rows: &[usize]) -> Vec<f64> {
    let r = complement.dim();
    let mut out = vec![0.0; rows.len() * r];
    out.par_chunks_mut(r.max(1)).zip(rows.par_iter()).for_each(|(o, &i)| {
        complement.coords_into(dataset.x(i), o);
    });
    out
}

/// Eigenvectors of the aggregate (in complement coordinates) with eigenvalue
/// at least `threshold`, lifted back to `R^d`.
fn lift_candidates(
    aggregate: &DMatrix<f64>,
    complement: &SubspaceBasis,
    threshold: f64,
    diagnostics: Vec<CubeDiagnostic>,
) -> CandidateSet {
    let (values, vectors) = symmetric_eigen_desc(aggregate);
    let d = complement.ambient();
    let mut set = CandidateSet { diagnostics, spectrum: values.clone(), ..Default::default() };
    for (lambda, e) in values.into_iter().zip(vectors) {
        if lambda < threshold {
            continue;
        }
        let mut v = vec![0.0; d];
        for (c, row) in e.iter().zip(complement.rows()) {
            crate::subspace::axpy(*c, row, &mut v);
        }
        let n = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        canonical_sign(&mut v);
        set.vectors.push(v);
        set.eigenvalues.push(lambda);
    }
    set
}

/// First-moment direction finder for multiclass linear classifiers:
/// `Û = Σ_{S,i} Pr̂[S] · u_{S,i} u_{S,i}ᵀ` with
/// `u_{S,i} = (E[x 1(y=i) | x ∈ S])^{⊥V}`, eigenvalues at least `σ`.
pub fn mlc_direction_candidates(
    dataset: &LabeledDataset,
    v: &SubspaceBasis,
    cfg: &DirectionFinderConfig,
) -> Result<CandidateSet> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if v.ambient() != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: dataset.dim(), got: v.ambient() });
    }
    let complement = v.complement();
    let r = complement.dim();
    if r == 0 {
        return Ok(CandidateSet::default());
    }
    let n = dataset.len() as f64;
    let k = dataset.label_count();
    let groups = group_by_cube(dataset, v, cfg)?;

    let per_cube: Vec<(DMatrix<f64>, CubeDiagnostic)> = groups
        .par_iter()
        .map(|(cube, rows)| {
            let z = complement_coords(dataset, &complement, rows);
            let mut moments = vec![vec![0.0; r]; k];
            for (zj, &i) in z.chunks(r).zip(rows) {
                crate::subspace::axpy(1.0, zj, &mut moments[dataset.y(i)]);
            }
            let ns = rows.len() as f64;
            let mass = ns / n;
            let mut contrib = DMatrix::zeros(r, r);
            let mut norms = Vec::with_capacity(k);
            for u in &mut moments {
                u.iter_mut().for_each(|c| *c /= ns);
                norms.push(dot(u, u).sqrt());
                add_outer(&mut contrib, u, mass);
            }
            let diag = CubeDiagnostic {
                cube: cube.clone(),
                mass,
                samples: rows.len(),
                per_label: norms,
                directions: k,
                skipped: false,
            };
            (contrib, diag)
        })
        .collect();

    let mut aggregate = DMatrix::zeros(r, r);
    let mut diagnostics = Vec::with_capacity(per_cube.len());
    for (m, d) in per_cube {
        aggregate += m;
        diagnostics.push(d);
    }
    Ok(lift_candidates(&aggregate, &complement, cfg.sigma, diagnostics))
}

/// Complement basis used for regression: all of `V^⊥` when small enough,
/// otherwise the `max_regression_dims` directions of `V^⊥` carrying the most
/// label-dependent first- and second-moment energy.
fn regression_frame(dataset: &LabeledDataset, v: &SubspaceBasis, cfg: &DirectionFinderConfig) -> SubspaceBasis {
    let complement = v.complement();
    let r = complement.dim();
    if r <= cfg.max_regression_dims {
        return complement;
    }
    let k = dataset.label_count();
    let n = dataset.len() as f64;
    let all: Vec<usize> = (0..dataset.len()).collect();
    let z = complement_coords(dataset, &complement, &all);
    let mut first = vec![vec![0.0; r]; k];
    let mut second = vec![DMatrix::<f64>::zeros(r, r); k];
    for (zj, &y) in z.chunks(r).zip(dataset.labels()) {
        crate::subspace::axpy(1.0 / n, zj, &mut first[y]);
        add_outer(&mut second[y], zj, 1.0 / n);
    }
    let hist = dataset.label_histogram();
    let mut energy = DMatrix::zeros(r, r);
    for y in 0..k {
        add_outer(&mut energy, &first[y], 1.0);
        let mut s = second[y].clone();
        for i in 0..r {
            s[(i, i)] -= hist[y] as f64 / n;
        }
        energy += &s * &s;
    }
    let (_, vecs) = symmetric_eigen_desc(&energy);
    let rows: Vec<Vec<f64>> = vecs
        .into_iter()
        .take(cfg.max_regression_dims)
        .map(|e| {
            let mut w = vec![0.0; v.ambient()];
            for (c, row) in e.iter().zip(complement.rows()) {
                crate::subspace::axpy(*c, row, &mut w);
            }
            w
        })
        .collect();
    SubspaceBasis::from_span(v.ambient(), &rows, 1e-8).expect("rows live in R^d")
}

/// Low-degree regression direction finder for general multi-index models.
///
/// In each cube `S` with enough samples, every label indicator is regressed on
/// the complement coordinates with degree `m`; unit eigenvectors of
/// `E[∇p ∇pᵀ]` with eigenvalue at least `σ²/(4K)` form `U_S`, and the result
/// holds the eigenvectors of `Σ_S Pr̂[S] Σ_{u∈U_S} u uᵀ` with eigenvalue at
/// least `t_eig`. Undersized cubes are skipped and reported.
pub fn mim_direction_candidates(
    dataset: &LabeledDataset,
    v: &SubspaceBasis,
    cfg: &DirectionFinderConfig,
) -> Result<CandidateSet> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if v.ambient() != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: dataset.dim(), got: v.ambient() });
    }
    let frame = regression_frame(dataset, v, cfg);
    let r = frame.dim();
    if r == 0 {
        return Ok(CandidateSet::default());
    }
    let n = dataset.len() as f64;
    let k = dataset.label_count();
    let features = feature_count(r, cfg.m);
    let min_samples = (cfg.min_cube_factor * features as f64).ceil() as usize;
    let cube_threshold = cfg.cube_threshold();
    let slack_budget = cfg.eta().powi(2);
    let groups = group_by_cube(dataset, v, cfg)?;

    let per_cube: Vec<Result<(DMatrix<f64>, CubeDiagnostic)>> = groups
        .par_iter()
        .map(|(cube, rows)| {
            let mass = rows.len() as f64 / n;
            let mut diag = CubeDiagnostic {
                cube: cube.clone(),
                mass,
                samples: rows.len(),
                per_label: Vec::new(),
                directions: 0,
                skipped: true,
            };
            let mut contrib = DMatrix::zeros(r, r);
            if rows.len() < min_samples.max(1) {
                return Ok((contrib, diag));
            }
            let z = complement_coords(dataset, &frame, rows);
            let design = HermiteDesign::new(&z, r, cfg.m)?;
            let indicators: Vec<Vec<f64>> = (0..k)
                .map(|label| rows.iter().map(|&i| (dataset.y(i) == label) as u8 as f64).collect())
                .collect();
            let targets: Vec<&[f64]> = indicators.iter().map(Vec::as_slice).collect();
            let fits = match cfg.regression {
                RegressionMethod::LeastSquares => design.solve_many(&targets, cfg.ridge),
                RegressionMethod::MomentProjection => design.project_many(&targets),
            };
            let fits = match fits {
                Ok(f) => f,
                Err(Error::RankDeficient { .. }) => return Ok((contrib, diag)),
                Err(e) => return Err(e),
            };
            diag.skipped = false;
            for p in &fits {
                if cfg.regression == RegressionMethod::LeastSquares && cfg.ridge * p.norm_sq() > slack_budget {
                    // Ridge bias exceeds the allowed slack; the fit is unreliable here.
                    diag.per_label.push(f64::NAN);
                    continue;
                }
                let g = gradient_outer_product(p);
                let (vals, vecs) = symmetric_eigen_desc(&g);
                diag.per_label.push(vals.first().copied().unwrap_or(0.0));
                for (lambda, u) in vals.into_iter().zip(vecs) {
                    if lambda >= cube_threshold {
                        add_outer(&mut contrib, &u, mass);
                        diag.directions += 1;
                    }
                }
            }
            Ok((contrib, diag))
        })
        .collect();

    let mut aggregate = DMatrix::zeros(r, r);
    let mut diagnostics = Vec::with_capacity(per_cube.len());
    for item in per_cube {
        let (m, d) = item?;
        aggregate += m;
        diagnostics.push(d);
    }
    Ok(lift_candidates(&aggregate, &frame, cfg.t_eig(), diagnostics))
}

/// Appends candidates to `V` by Gram–Schmidt, dropping those whose residual
/// against the growing basis has norm below `tol`.
pub fn orthonormal_extend(v: &SubspaceBasis, new: &CandidateSet, tol: f64) -> Result<SubspaceBasis> {
    v.extended(&new.vectors, tol)
}
