//! Cube grids over a subspace and classifiers that are constant on each cube.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Label, LabeledDataset};
use crate::subspace::SubspaceBasis;

/// Multi-index `(j_1, …, j_k)` of a cube; `j_i` is the 0-based cell along the
/// i-th basis direction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CubeIndex(pub Vec<u32>);

/// What happens to projections beyond the outermost thresholds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Points beyond the grid are outside every cube.
    #[default]
    Truncate,
    /// The two edge cells of every axis extend to infinity.
    Clamp,
}

/// Half-width `√(2 ln(k/ε))` of the grid box for a `k`-dimensional subspace.
pub fn grid_radius(k: usize, eps: f64) -> f64 {
    (2.0 * (k as f64 / eps).ln()).sqrt()
}

/// Uniform cube grid of width `eps` over the coordinates of a subspace basis.
/// Thresholds are `z_i = lower + i·eps` for `i = 0..=cells`, shared by all axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximatingPartition {
    basis: SubspaceBasis,
    eps: f64,
    shift: f64,
    radius: f64,
    cells: u32,
    boundary: Boundary,
}

/// Builds the grid with `z_i = −√(2 ln(k/ε)) + i·ε + shift` and
/// `M = ⌈2√(2 ln(k/ε))/ε⌉` cells per axis.
pub fn build_partition(basis: SubspaceBasis, eps: f64, shift: f64) -> Result<ApproximatingPartition> {
    let k = basis.dim();
    if k == 0 {
        return Err(Error::DegeneratePartition);
    }
    ApproximatingPartition::with_grid(basis, eps, shift, grid_radius(k, eps), Boundary::Truncate)
}

impl ApproximatingPartition {
    /// Grid with an explicit half-width; used when several partitions over
    /// nested bases must share thresholds.
    pub fn with_grid(
        basis: SubspaceBasis,
        eps: f64,
        shift: f64,
        radius: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if basis.dim() == 0 {
            return Err(Error::DegeneratePartition);
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps {eps} outside (0, 1)")));
        }
        if !(shift > 0.0 && shift < eps / 2.0) {
            return Err(Error::InvalidParameter(format!("shift {shift} outside (0, eps/2)")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid radius {radius} must be positive")));
        }
        let cells = (2.0 * radius / eps).ceil() as u32;
        Ok(Self { basis, eps, shift, radius, cells, boundary })
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Cells per axis, `M`.
    pub fn cells_per_axis(&self) -> u32 {
        self.cells
    }

    /// `M^k` as a float; the cubes themselves are never materialized.
    pub fn cube_count(&self) -> f64 {
        (self.cells as f64).powi(self.dim() as i32)
    }

    #[inline]
    pub fn threshold(&self, i: u32) -> f64 {
        -self.radius + i as f64 * self.eps + self.shift
    }

    pub fn thresholds(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.threshold(i)).collect()
    }

    /// Cell along one axis: `[z_j, z_{j+1})`, the last cell closed on the right.
    pub fn cell_of(&self, c: f64) -> Option<u32> {
        let m = self.cells;
        let lo = self.threshold(0);
        let hi = self.threshold(m);
        if !(c >= lo && c <= hi) {
            return match self.boundary {
                Boundary::Clamp if c < lo => Some(0),
                Boundary::Clamp if c > hi => Some(m - 1),
                _ => None,
            };
        }
        let mut j = (((c - lo) / self.eps).floor().max(0.0) as u32).min(m - 1);
        while j > 0 && c < self.threshold(j) {
            j -= 1;
        }
        while j + 1 < m && c >= self.threshold(j + 1) {
            j += 1;
        }
        Some(j)
    }

    /// Cube containing the projection of `x`, or `None` when outside the grid.
    pub fn locate(&self, x: &[f64]) -> Option<CubeIndex> {
        let mut idx = Vec::with_capacity(self.dim());
        for row in self.basis.rows() {
            idx.push(self.cell_of(crate::subspace::dot(row, x))?);
        }
        Some(CubeIndex(idx))
    }

    /// Same as [`locate`](Self::locate) but from precomputed coordinates `B x`.
    pub fn locate_coords(&self, coords: &[f64]) -> Option<CubeIndex> {
        coords.iter().map(|&c| self.cell_of(c)).collect::<Option<Vec<_>>>().map(CubeIndex)
    }

    pub fn is_valid_index(&self, idx: &CubeIndex) -> bool {
        idx.0.len() == self.dim() && idx.0.iter().all(|&j| j < self.cells)
    }

    /// Representative point of a cube in subspace coordinates (the cube centre).
    pub fn representative(&self, idx: &CubeIndex) -> Vec<f64> {
        idx.0.iter().map(|&j| self.threshold(j) + 0.5 * self.eps).collect()
    }

    /// Closed coordinate intervals of a cube; clamped edge cells are unbounded.
    pub fn cube_bounds(&self, idx: &CubeIndex) -> Vec<(f64, f64)> {
        idx.0.iter().map(|&j| self.axis_interval(j)).collect()
    }

    fn axis_interval(&self, j: u32) -> (f64, f64) {
        let mut lo = self.threshold(j);
        let mut hi = self.threshold(j + 1);
        if self.boundary == Boundary::Clamp {
            if j == 0 {
                lo = f64::NEG_INFINITY;
            }
            if j + 1 == self.cells {
                hi = f64::INFINITY;
            }
        }
        (lo, hi)
    }
}

/// True iff every cube of `fine` lies inside exactly one cube of `coarse`.
/// Requires `fine`'s basis to start with `coarse`'s rows and the same width.
pub fn refine_alignment_check(coarse: &ApproximatingPartition, fine: &ApproximatingPartition) -> bool {
    const TOL: f64 = 1e-9;
    if fine.dim() < coarse.dim() || coarse.basis.ambient() != fine.basis.ambient() {
        return false;
    }
    if (coarse.eps - fine.eps).abs() > 1e-15 {
        return false;
    }
    let prefix_matches = coarse.basis.rows().iter().zip(fine.basis.rows()).all(|(a, b)| {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
    });
    if !prefix_matches {
        return false;
    }
    // Every axis of a partition uses the same thresholds, so one axis decides.
    let coarse_cells: Vec<(f64, f64)> = (0..coarse.cells).map(|j| coarse.axis_interval(j)).collect();
    (0..fine.cells).map(|j| fine.axis_interval(j)).all(|(lo, hi)| {
        coarse_cells.iter().filter(|(clo, chi)| lo >= clo - TOL && hi <= chi + TOL).count() == 1
    })
}

/// Classifier constant on each cube of a partition; `partition = None` means
/// the subspace is `{0}` and the classifier is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseConstantClassifier {
    partition: Option<ApproximatingPartition>,
    labels: BTreeMap<CubeIndex, Label>,
    fallback: Label,
    label_count: usize,
}

fn majority(counts: &[usize]) -> Label {
    // First maximum wins, i.e. the smallest label among ties.
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Majority label per nonempty cube (smallest label on ties). Points outside
/// the grid and empty cubes get the fallback: the majority over samples that
/// fall outside the grid, or the global majority if none do.
pub fn fit_piecewise_constant(
    partition: &ApproximatingPartition,
    dataset: &LabeledDataset,
) -> Result<PiecewiseConstantClassifier> {
    PiecewiseConstantClassifier::fit(Some(partition.clone()), dataset)
}

impl PiecewiseConstantClassifier {
    pub fn fit(partition: Option<ApproximatingPartition>, dataset: &LabeledDataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = dataset.label_count();
        let global = majority(&dataset.label_histogram());
        let Some(partition) = partition else {
            return Ok(Self { partition: None, labels: BTreeMap::new(), fallback: global, label_count: k });
        };
        if partition.basis.ambient() != dataset.dim() {
            return Err(Error::DimensionMismatch { expected: partition.basis.ambient(), got: dataset.dim() });
        }
        let cells: Vec<Option<CubeIndex>> =
            (0..dataset.len()).into_par_iter().map(|i| partition.locate(dataset.x(i))).collect();
        let mut counts: BTreeMap<CubeIndex, Vec<usize>> = BTreeMap::new();
        let mut outside = vec![0usize; k];
        for (cell, &y) in cells.into_iter().zip(dataset.labels()) {
            match cell {
                Some(c) => counts.entry(c).or_insert_with(|| vec![0; k])[y] += 1,
                None => outside[y] += 1,
            }
        }
        let fallback = if outside.iter().any(|&c| c > 0) { majority(&outside) } else { global };
        let labels = counts.into_iter().map(|(c, v)| (c, majority(&v))).collect();
        Ok(Self { partition: Some(partition), labels, fallback, label_count: k })
    }

    /// Constant classifier.
    pub fn constant(label: Label, label_count: usize) -> Self {
        Self { partition: None, labels: BTreeMap::new(), fallback: label, label_count }
    }

    pub fn partition(&self) -> Option<&ApproximatingPartition> {
        self.partition.as_ref()
    }

    pub fn labels(&self) -> &BTreeMap<CubeIndex, Label> {
        &self.labels
    }

    pub fn fallback(&self) -> Label {
        self.fallback
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn classify(&self, x: &[f64]) -> Label {
        self.partition
            .as_ref()
            .and_then(|p| p.locate(x))
            .and_then(|c| self.labels.get(&c).copied())
            .unwrap_or(self.fallback)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ClassifierFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ClassifierFile>(s)?.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Classify a point; alias kept for symmetry with the other free functions.
pub fn classify(classifier: &PiecewiseConstantClassifier, x: &[f64]) -> Label {
    classifier.classify(x)
}

#[derive(Serialize, Deserialize)]
struct CubeLabel {
    cube: CubeIndex,
    label: Label,
}

/// JSON form: basis rows, grid parameters, cube → label list, fallback.
#[derive(Serialize, Deserialize)]
struct ClassifierFile {
    ambient: usize,
    basis: Vec<Vec<f64>>,
    eps: Option<f64>,
    shift: Option<f64>,
    radius: Option<f64>,
    #[serde(default)]
    boundary: Boundary,
    label_count: usize,
    cubes: Vec<CubeLabel>,
    fallback: Label,
}

impl From<&PiecewiseConstantClassifier> for ClassifierFile {
    fn from(c: &PiecewiseConstantClassifier) -> Self {
        let p = c.partition.as_ref();
        ClassifierFile {
            ambient: p.map(|p| p.basis.ambient()).unwrap_or(0),
            basis: p.map(|p| p.basis.rows().to_vec()).unwrap_or_default(),
            eps: p.map(|p| p.eps),
            shift: p.map(|p| p.shift),
            radius: p.map(|p| p.radius),
            boundary: p.map(|p| p.boundary).unwrap_or_default(),
            label_count: c.label_count,
            cubes: c.labels.iter().map(|(cube, &label)| CubeLabel { cube: cube.clone(), label }).collect(),
            fallback: c.fallback,
        }
    }
}

impl TryFrom<ClassifierFile> for PiecewiseConstantClassifier {
    type Error = Error;

    fn try_from(f: ClassifierFile) -> Result<Self> {
        let partition = if f.basis.is_empty() {
            None
        } else {
            let missing = |name: &str| Error::InvalidParameter(format!("classifier JSON lacks `{name}`"));
            let basis = SubspaceBasis::new(f.ambient, f.basis)?;
            Some(ApproximatingPartition::with_grid(
                basis,
                f.eps.ok_or_else(|| missing("eps"))?,
                f.shift.ok_or_else(|| missing("shift"))?,
                f.radius.ok_or_else(|| missing("radius"))?,
                f.boundary,
            )?)
        };
        if f.fallback >= f.label_count {
            return Err(Error::InvalidParameter("fallback label outside label set".into()));
        }
        let mut labels = BTreeMap::new();
        for CubeLabel { cube, label } in f.cubes {
            let valid = partition.as_ref().is_some_and(|p| p.is_valid_index(&cube));
            if !valid || label >= f.label_count {
                return Err(Error::InvalidParameter(format!("invalid cube entry {:?} -> {label}", cube.0)));
            }
            labels.insert(cube, label);
        }
        Ok(Self { partition, labels, fallback: f.fallback, label_count: f.label_count })
    }
}
