//! Ground-truth concepts, Gaussian sampling and label-noise channels.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::subspace::{dot, norm, SubspaceBasis};

/// Class label; labels are `0..label_count`.
pub type Label = usize;

fn check_rows(weights: &[Vec<f64>], biases: &[f64]) -> Result<usize> {
    let d = weights.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidParameter("weights must have at least one column".into()));
    }
    if biases.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: biases.len() });
    }
    for row in weights {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("weight row is not finite".into()));
        }
    }
    if biases.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("bias is not finite".into()));
    }
    Ok(d)
}

/// `x ↦ argmax_i (w⁽ⁱ⁾·x + t_i)`, ties resolved to the smallest index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MulticlassLinearClassifier {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl MulticlassLinearClassifier {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        check_rows(&weights, &biases)?;
        if weights.len() < 2 {
            return Err(Error::InvalidParameter("a multiclass classifier needs K >= 2".into()));
        }
        Ok(Self { weights, biases })
    }

    pub fn label_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        self.top_two(x).0
    }

    /// Best label, runner-up label and the score gap between them.
    fn top_two(&self, x: &[f64]) -> (Label, Label, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        let mut second = (0, f64::NEG_INFINITY);
        for (i, (w, t)) in self.weights.iter().zip(&self.biases).enumerate() {
            let s = dot(w, x) + t;
            if s > best.1 {
                second = best;
                best = (i, s);
            } else if s > second.1 {
                second = (i, s);
            }
        }
        (best.0, second.0, best.1 - second.1)
    }

    /// Span of the pairwise weight differences; the classifier depends on `x`
    /// only through its projection onto this subspace.
    pub fn relevant_subspace(&self) -> SubspaceBasis {
        let base = &self.weights[0];
        let diffs: Vec<Vec<f64>> = self.weights[1..]
            .iter()
            .map(|w| w.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        SubspaceBasis::from_span(self.dim(), &diffs, 1e-9).expect("rows share dimension")
    }
}

/// `x ↦ 1` iff `w⁽ⁱ⁾·x + t_i ≥ 0` for every `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionOfHalfspaces {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl IntersectionOfHalfspaces {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        check_rows(&weights, &biases)?;
        Ok(Self { weights, biases })
    }

    /// The slab `|w·x| ≤ half_width` as the intersection of two halfspaces.
    pub fn slab(w: &[f64], half_width: f64) -> Result<Self> {
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        Self::new(vec![w.to_vec(), neg], vec![half_width, half_width])
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        let inside = self.weights.iter().zip(&self.biases).all(|(w, t)| dot(w, x) + t >= 0.0);
        inside as Label
    }

    fn margin(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, t)| (dot(w, x) + t).abs() / norm(w).max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn relevant_subspace(&self) -> SubspaceBasis {
        SubspaceBasis::from_span(self.dim(), &self.weights, 1e-9).expect("rows share dimension")
    }
}

/// Two-index Boolean concept `A + B` on coordinates `(s, r) = (w¹·x, w²·x)`:
/// `A = 1(|s| ≤ a)·1(|r| ≤ a)` and `B = 1(|s + r| ≥ 2b)`, with `b ≥ a` so the
/// two supports are disjoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPlusBand {
    directions: [Vec<f64>; 2],
    half_width: f64,
    band: f64,
}

impl BoxPlusBand {
    pub fn new(first: Vec<f64>, second: Vec<f64>, half_width: f64, band: f64) -> Result<Self> {
        check_rows(&[first.clone(), second.clone()], &[half_width, band])?;
        if half_width <= 0.0 || band < half_width {
            return Err(Error::InvalidParameter(format!(
                "need 0 < a <= b, got a = {half_width}, b = {band}"
            )));
        }
        Ok(Self { directions: [first, second], half_width, band })
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn directions(&self) -> &[Vec<f64>; 2] {
        &self.directions
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn band(&self) -> f64 {
        self.band
    }

    pub fn box_part(&self, x: &[f64]) -> bool {
        let s = dot(&self.directions[0], x);
        let r = dot(&self.directions[1], x);
        s.abs() <= self.half_width && r.abs() <= self.half_width
    }

    pub fn band_part(&self, x: &[f64]) -> bool {
        let s = dot(&self.directions[0], x);
        let r = dot(&self.directions[1], x);
        (s + r).abs() >= 2.0 * self.band
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        (self.box_part(x) || self.band_part(x)) as Label
    }

    fn margin(&self, x: &[f64]) -> f64 {
        let s = dot(&self.directions[0], x);
        let r = dot(&self.directions[1], x);
        let box_gap = (s.abs() - self.half_width).abs().min((r.abs() - self.half_width).abs());
        let band_gap = ((s + r).abs() - 2.0 * self.band).abs() / std::f64::consts::SQRT_2;
        box_gap.min(band_gap)
    }

    pub fn relevant_subspace(&self) -> SubspaceBasis {
        SubspaceBasis::from_span(self.dim(), &self.directions, 1e-9).expect("rows share dimension")
    }
}

/// A ground-truth labelling function of a Gaussian point.
#[derive(Clone, Debug, PartialEq)]
pub enum Concept {
    Mlc(MulticlassLinearClassifier),
    Intersection(IntersectionOfHalfspaces),
    BoxPlusBand(BoxPlusBand),
}

impl Concept {
    pub fn dim(&self) -> usize {
        match self {
            Concept::Mlc(m) => m.dim(),
            Concept::Intersection(h) => h.dim(),
            Concept::BoxPlusBand(c) => c.dim(),
        }
    }

    pub fn label_count(&self) -> usize {
        match self {
            Concept::Mlc(m) => m.label_count(),
            Concept::Intersection(_) | Concept::BoxPlusBand(_) => 2,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        match self {
            Concept::Mlc(m) => m.predict_unchecked(x),
            Concept::Intersection(h) => h.predict_unchecked(x),
            Concept::BoxPlusBand(c) => c.predict_unchecked(x),
        }
    }

    /// Distance-like confidence of the prediction at `x`; small near the
    /// decision boundary.
    pub fn margin(&self, x: &[f64]) -> f64 {
        match self {
            Concept::Mlc(m) => m.top_two(x).2,
            Concept::Intersection(h) => h.margin(x),
            Concept::BoxPlusBand(c) => c.margin(x),
        }
    }

    /// The label an adversary flips to when attacking the boundary.
    fn runner_up(&self, x: &[f64]) -> Label {
        match self {
            Concept::Mlc(m) => m.top_two(x).1,
            _ => 1 - self.predict_unchecked(x),
        }
    }

    /// Orthonormal basis of the subspace the concept depends on.
    pub fn relevant_subspace(&self) -> SubspaceBasis {
        match self {
            Concept::Mlc(m) => m.relevant_subspace(),
            Concept::Intersection(h) => h.relevant_subspace(),
            Concept::BoxPlusBand(c) => c.relevant_subspace(),
        }
    }
}

/// On-disk concept: `{kind, weights, biases, label_count}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConceptFile {
    pub kind: String,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub label_count: usize,
}

impl From<&Concept> for ConceptFile {
    fn from(c: &Concept) -> Self {
        match c {
            Concept::Mlc(m) => ConceptFile {
                kind: "mlc".into(),
                weights: m.weights.clone(),
                biases: m.biases.clone(),
                label_count: m.label_count(),
            },
            Concept::Intersection(h) => ConceptFile {
                kind: "intersection".into(),
                weights: h.weights.clone(),
                biases: h.biases.clone(),
                label_count: 2,
            },
            Concept::BoxPlusBand(b) => ConceptFile {
                kind: "box-plus-band".into(),
                weights: b.directions.to_vec(),
                biases: vec![b.half_width, b.band],
                label_count: 2,
            },
        }
    }
}

impl TryFrom<ConceptFile> for Concept {
    type Error = Error;

    fn try_from(f: ConceptFile) -> Result<Self> {
        let concept = match f.kind.as_str() {
            "mlc" => Concept::Mlc(MulticlassLinearClassifier::new(f.weights, f.biases)?),
            "intersection" => {
                Concept::Intersection(IntersectionOfHalfspaces::new(f.weights, f.biases)?)
            }
            "box-plus-band" => {
                if f.weights.len() != 2 || f.biases.len() != 2 {
                    return Err(Error::InvalidParameter(
                        "box-plus-band needs two directions and biases [a, b]".into(),
                    ));
                }
                let mut w = f.weights.into_iter();
                let (first, second) = (w.next().unwrap(), w.next().unwrap());
                Concept::BoxPlusBand(BoxPlusBand::new(first, second, f.biases[0], f.biases[1])?)
            }
            other => return Err(Error::InvalidParameter(format!("unknown concept kind {other:?}"))),
        };
        if concept.label_count() != f.label_count {
            return Err(Error::InvalidParameter(format!(
                "label_count {} does not match the {} concept ({})",
                f.label_count,
                f.kind,
                concept.label_count()
            )));
        }
        Ok(concept)
    }
}

impl Serialize for Concept {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConceptFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Concept {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = ConceptFile::deserialize(d)?;
        Concept::try_from(file).map_err(serde::de::Error::custom)
    }
}

/// Row-stochastic `K × K` label channel: `Pr[y = j | f(x) = i] = H_{i,j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfusion")]
pub struct ConfusionMatrix {
    entries: Vec<Vec<f64>>,
    gamma: f64,
}

/// Deserialized form; `gamma` is recomputed rather than trusted.
#[derive(Deserialize)]
struct RawConfusion {
    entries: Vec<Vec<f64>>,
}

impl TryFrom<RawConfusion> for ConfusionMatrix {
    type Error = Error;

    fn try_from(raw: RawConfusion) -> Result<Self> {
        ConfusionMatrix::new(raw.entries)
    }
}

impl ConfusionMatrix {
    /// Validates row-stochasticity and records `gamma` as the diagonal margin
    /// `min_i min_{j≠i} (H_ii − H_ij)` (negative when the diagonal is not dominant).
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let k = entries.len();
        if k < 2 {
            return Err(Error::InvalidParameter("confusion matrix needs K >= 2".into()));
        }
        for row in &entries {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: row.len() });
            }
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter("entries must lie in [0, 1]".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("row sums to {sum}, not 1")));
            }
        }
        let gamma = diagonal_margin(&entries);
        Ok(Self { entries, gamma })
    }

    pub fn identity(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect()).collect())
    }

    /// Symmetric channel with `H_ii − H_ij = gamma` for every `j ≠ i`.
    pub fn symmetric(k: usize, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma {gamma} outside [0, 1]")));
        }
        let off = (1.0 - gamma) / k as f64;
        Self::new(
            (0..k)
                .map(|i| (0..k).map(|j| if i == j { off + gamma } else { off }).collect())
                .collect(),
        )
    }

    /// Circulant matrix `H_{i,j} = h_{(j − i) mod K}`.
    pub fn circulant(generator: &[f64]) -> Result<Self> {
        let k = generator.len();
        Self::new((0..k).map(|i| (0..k).map(|j| generator[(j + k - i) % k]).collect()).collect())
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Smallest off-diagonal entry.
    pub fn min_off_diagonal(&self) -> f64 {
        let k = self.size();
        (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.entries[i][j])
            .fold(f64::INFINITY, f64::min)
    }

    /// `H_ii ≥ H_ij + gamma` for all `j ≠ i`.
    pub fn satisfies_rcn(&self, gamma: f64) -> bool {
        self.gamma >= gamma
    }

    /// Zero diagonal and off-diagonal entries at least `gamma`.
    pub fn satisfies_contrastive(&self, gamma: f64) -> bool {
        (0..self.size()).all(|i| self.entries[i][i] == 0.0) && self.min_off_diagonal() >= gamma
    }

    /// Draws a label from row `row` given a uniform variate in `[0, 1)`.
    /// Zero-probability labels are never returned.
    pub fn draw(&self, row: usize, u: f64) -> Label {
        let probs = &self.entries[row];
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (j, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                cum += p;
                last_positive = j;
                if u < cum {
                    return j;
                }
            }
        }
        last_positive
    }
}

fn diagonal_margin(entries: &[Vec<f64>]) -> f64 {
    let k = entries.len();
    let mut margin = f64::INFINITY;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                margin = margin.min(entries[i][i] - entries[i][j]);
            }
        }
    }
    margin
}

/// How an adversary picks which labels to corrupt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipStrategy {
    /// Victims chosen uniformly at random; new label uniform among the others.
    UniformFlip,
    /// Victims are the smallest-margin points; new label is the runner-up.
    BoundaryFlip,
}

/// Label channel applied after the concept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    None,
    Rcn { matrix: ConfusionMatrix },
    Adversarial { rate: f64, strategy: FlipStrategy },
    Contrastive { matrix: ConfusionMatrix },
}

impl NoiseSpec {
    pub fn validate(&self, label_count: usize) -> Result<()> {
        match self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Adversarial { rate, .. } => {
                if (0.0..0.5).contains(rate) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("adversarial rate {rate} outside [0, 1/2)")))
                }
            }
            NoiseSpec::Rcn { matrix } | NoiseSpec::Contrastive { matrix } => {
                if matrix.size() != label_count {
                    return Err(Error::DimensionMismatch { expected: label_count, got: matrix.size() });
                }
                Ok(())
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NoiseSpec::None => "none",
            NoiseSpec::Rcn { .. } => "rcn",
            NoiseSpec::Adversarial { .. } => "adversarial",
            NoiseSpec::Contrastive { .. } => "contrastive",
        }
    }

    /// Corruption rate for adversarial noise, zero otherwise.
    pub fn rate(&self) -> f64 {
        match self {
            NoiseSpec::Adversarial { rate, .. } => *rate,
            _ => 0.0,
        }
    }
}

/// `n` points in `R^d` with integer labels in `0..label_count`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    label_count: usize,
    xs: Vec<f64>,
    ys: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(dim: usize, label_count: usize, xs: Vec<f64>, ys: Vec<Label>) -> Result<Self> {
        if xs.len() != dim * ys.len() {
            return Err(Error::DimensionMismatch { expected: dim * ys.len(), got: xs.len() });
        }
        if let Some(&bad) = ys.iter().find(|&&y| y >= label_count) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} outside label set 0..{label_count}"
            )));
        }
        Ok(Self { dim, label_count, xs, ys })
    }

    pub fn from_rows(label_count: usize, rows: &[Vec<f64>], ys: Vec<Label>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut xs = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
            }
            xs.extend_from_slice(r);
        }
        Self::new(dim, label_count, xs, ys)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> Label {
        self.ys[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.ys
    }

    pub fn features(&self) -> &[f64] {
        &self.xs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], Label)> + '_ {
        self.xs.chunks_exact(self.dim.max(1)).zip(self.ys.iter().copied())
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [Label] {
        &mut self.ys
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> LabeledDataset {
        LabeledDataset {
            dim: self.dim,
            label_count: self.label_count,
            xs: self.xs[start * self.dim..end * self.dim].to_vec(),
            ys: self.ys[start..end].to_vec(),
        }
    }

    /// Per-label counts.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_count];
        for &y in &self.ys {
            counts[y] += 1;
        }
        counts
    }

    /// Writes `x0,...,x{d-1},y` CSV with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.dim + 1);
        for (x, y) in self.iter() {
            record.clear();
            record.extend(x.iter().map(|v| v.to_string()));
            record.push(y.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV format produced by [`write_csv`](Self::write_csv). The
    /// label set is `0..label_count`.
    pub fn read_csv<R: Read>(input: R, label_count: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols == 0 || &header[cols - 1] != "y" {
            return Err(Error::InvalidParameter("CSV header must end with column `y`".into()));
        }
        for (j, name) in header.iter().take(cols - 1).enumerate() {
            if name != format!("x{j}") {
                return Err(Error::InvalidParameter(format!("unexpected CSV column {name:?}")));
            }
        }
        let dim = cols - 1;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for j in 0..dim {
                xs.push(rec[j].parse::<f64>().map_err(|e| {
                    Error::InvalidParameter(format!("bad float {:?}: {e}", &rec[j]))
                })?);
            }
            ys.push(rec[dim].parse::<usize>().map_err(|e| {
                Error::InvalidParameter(format!("bad label {:?}: {e}", &rec[dim]))
            })?);
        }
        Self::new(dim, label_count, xs, ys)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: impl AsRef<Path>, label_count: usize) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), label_count)
    }
}

/// Standard Gaussian point for sample `index` of the stream `seed`.
pub fn gaussian_point(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, Purpose::Features, index);
    (0..dim).map(|_| r.sample(StandardNormal)).collect()
}

/// `n` i.i.d. `N(0, I_d)` points labelled by `concept` and passed through `noise`.
/// Deterministic in `seed` and independent of the thread count.
pub fn sample_dataset(concept: &Concept, noise: &NoiseSpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    let k = concept.label_count();
    noise.validate(k)?;
    let d = concept.dim();
    let channel = match noise {
        NoiseSpec::Rcn { matrix } | NoiseSpec::Contrastive { matrix } => Some(matrix),
        _ => None,
    };
    let rows: Vec<(Vec<f64>, Label)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let x = gaussian_point(seed, i, d);
            let clean = concept.predict_unchecked(&x);
            let y = match channel {
                Some(h) => {
                    let u: f64 = rng::stream(seed, Purpose::Labels, i).random();
                    h.draw(clean, u)
                }
                None => clean,
            };
            (x, y)
        })
        .collect();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for (x, y) in rows {
        xs.extend(x);
        ys.push(y);
    }
    let ds = LabeledDataset::new(d, k, xs, ys)?;
    match noise {
        NoiseSpec::Adversarial { rate, strategy } => apply_adversarial(&ds, concept, *rate, *strategy, seed),
        _ => Ok(ds),
    }
}

/// Corrupts exactly `⌊rate·n⌋` labels. Uniform flips choose victims uniformly
/// at random and move them to a uniformly random different label; boundary
/// flips take the smallest-margin points under `concept` (ties by index) and
/// move them to the concept's runner-up label.
pub fn apply_adversarial(
    dataset: &LabeledDataset,
    concept: &Concept,
    rate: f64,
    strategy: FlipStrategy,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(0.0..0.5).contains(&rate) {
        return Err(Error::InvalidParameter(format!("adversarial rate {rate} outside [0, 1/2)")));
    }
    if dataset.dim() != concept.dim() {
        return Err(Error::DimensionMismatch { expected: concept.dim(), got: dataset.dim() });
    }
    let n = dataset.len();
    let budget = (rate * n as f64).floor() as usize;
    let mut out = dataset.clone();
    if budget == 0 {
        return Ok(out);
    }
    let k = dataset.label_count();
    let mut r = rng::stream(seed, Purpose::Adversary, 0);
    match strategy {
        FlipStrategy::UniformFlip => {
            // Partial Fisher–Yates: the first `budget` slots are the victims.
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..budget {
                let j = r.random_range(i..n);
                idx.swap(i, j);
            }
            let ys = out.labels_mut();
            for &v in &idx[..budget] {
                let shift = r.random_range(1..k);
                ys[v] = (ys[v] + shift) % k;
            }
        }
        FlipStrategy::BoundaryFlip => {
            let margins: Vec<f64> =
                (0..n).into_par_iter().map(|i| concept.margin(dataset.x(i))).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]).then(a.cmp(&b)));
            for &v in &idx[..budget] {
                let x = dataset.x(v);
                let current = out.labels()[v];
                let target = concept.runner_up(x);
                let flipped = if target != current { target } else { concept.predict_unchecked(x) };
                let flipped = if flipped != current { flipped } else { (current + 1) % k };
                out.labels_mut()[v] = flipped;
            }
        }
    }
    Ok(out)
}

/// Orthonormal `rows × d` matrix from Gaussian rows by Gram–Schmidt.
pub fn random_orthonormal_rows(d: usize, rows: usize, seed: u64, index: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed, Purpose::Concept, index);
    loop {
        let raw: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..d).map(|_| r.sample(StandardNormal)).collect()).collect();
        let basis = SubspaceBasis::from_span(d, &raw, 1e-6).expect("consistent dimensions");
        if basis.dim() == rows {
            return basis.rows().to_vec();
        }
    }
}

/// Multiclass linear classifier with i.i.d. Gaussian weight rows and zero biases.
pub fn random_mlc(label_count: usize, d: usize, seed: u64) -> Result<MulticlassLinearClassifier> {
    let mut r = rng::stream(seed, Purpose::Concept, 0);
    let weights =
        (0..label_count).map(|_| (0..d).map(|_| r.sample(StandardNormal)).collect()).collect();
    MulticlassLinearClassifier::new(weights, vec![0.0; label_count])
}

/// Intersection of `count` homogeneous halfspaces with orthonormal normals.
pub fn random_intersection(count: usize, d: usize, seed: u64) -> Result<IntersectionOfHalfspaces> {
    let weights = random_orthonormal_rows(d, count, seed, 1);
    IntersectionOfHalfspaces::new(weights, vec![0.0; count])
}
