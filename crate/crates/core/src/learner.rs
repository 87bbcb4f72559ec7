//! The outer loop: grow a subspace from direction-finder candidates, then fit
//! a piecewise-constant classifier over it.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direction::{
    mim_direction_candidates, mlc_direction_candidates, orthonormal_extend, CandidateSet, DirectionFinderConfig,
};
use crate::error::{Error, Result};
use crate::models::{sample_dataset, Concept, ConfusionMatrix, LabeledDataset, NoiseSpec};
use crate::partition::{grid_radius, ApproximatingPartition, Boundary, PiecewiseConstantClassifier};
use crate::rng::{self, derive_seed, Purpose};
use crate::subspace::SubspaceBasis;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerMode {
    /// First-moment finder, all candidates accepted.
    #[default]
    MlcAgnostic,
    /// Regression finder, all candidates accepted.
    MimAgnostic,
    /// Regression finder, one candidate per iteration, `2·K` iterations.
    MimRcn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub mode: LearnerMode,
    /// Iteration cap `T`; `None` means `4K²/σ²` (agnostic) or `2K` (RCN).
    pub max_iters: Option<usize>,
    pub n_per_iter: usize,
    pub finder: DirectionFinderConfig,
    /// Width of the final partition; `None` means `finder.cube_eps`.
    pub final_eps: Option<f64>,
    /// Boundary policy of the final partition.
    pub final_boundary: Boundary,
    pub seed: u64,
    /// Largest admissible basis dimension; `None` means no cap.
    pub max_basis_dim: Option<usize>,
    /// Residual norm below which a candidate is treated as already spanned.
    pub extend_tol: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            mode: LearnerMode::MlcAgnostic,
            max_iters: None,
            n_per_iter: 100_000,
            finder: DirectionFinderConfig::default(),
            final_eps: None,
            final_boundary: Boundary::Truncate,
            seed: 0,
            max_basis_dim: None,
            extend_tol: 1e-6,
        }
    }
}

impl LearnerConfig {
    pub fn iterations(&self) -> usize {
        if let Some(t) = self.max_iters {
            return t;
        }
        let k = self.finder.k_hint as f64;
        match self.mode {
            LearnerMode::MimRcn => 2 * self.finder.k_hint,
            _ => (4.0 * k * k / (self.finder.sigma * self.finder.sigma)).ceil() as usize,
        }
    }

    pub fn final_eps(&self) -> f64 {
        self.final_eps.unwrap_or(self.finder.cube_eps)
    }

    pub fn validate(&self) -> Result<()> {
        self.finder.validate()?;
        if self.iterations() < 1 {
            return Err(Error::InvalidParameter("T must be >= 1".into()));
        }
        if self.n_per_iter < 1 {
            return Err(Error::InvalidParameter("n_per_iter must be >= 1".into()));
        }
        let e = self.final_eps();
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidParameter(format!("final_eps {e} outside (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub k_t: usize,
    pub candidates: usize,
    pub interim_error: f64,
    pub potential: Option<f64>,
}

/// Per-iteration record of the learner; row 0 is the state before any search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub basis: Option<SubspaceBasis>,
}

impl TrainTrace {
    /// Iterations that added at least one direction.
    pub fn productive_iterations(&self) -> usize {
        self.records.windows(2).filter(|w| w[1].k_t > w[0].k_t).count()
    }

    /// Number of direction-finding rounds run.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_dim(&self) -> usize {
        self.records.last().map_or(0, |r| r.k_t)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "k_t", "candidates", "interim_error", "potential"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.k_t.to_string(),
                r.candidates.to_string(),
                r.interim_error.to_string(),
                r.potential.map(|p| p.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Supplier of labelled batches.
pub trait DataSource {
    fn dim(&self) -> usize;
    fn label_count(&self) -> usize;
    /// Next `n` samples, disjoint from everything drawn before.
    fn draw(&mut self, n: usize) -> Result<LabeledDataset>;
    /// Basis of the relevant subspace when the generating concept is known.
    fn truth(&self) -> Option<SubspaceBasis> {
        None
    }
}

/// Unlimited fresh samples from a concept and noise channel.
pub struct GeneratorSource {
    concept: Concept,
    noise: NoiseSpec,
    seed: u64,
    batches: u64,
}

impl GeneratorSource {
    pub fn new(concept: Concept, noise: NoiseSpec, seed: u64) -> Result<Self> {
        noise.validate(concept.label_count())?;
        Ok(Self { concept, noise, seed, batches: 0 })
    }

    pub fn concept(&self) -> &Concept {
        &self.concept
    }
}

impl DataSource for GeneratorSource {
    fn dim(&self) -> usize {
        self.concept.dim()
    }

    fn label_count(&self) -> usize {
        self.concept.label_count()
    }

    fn draw(&mut self, n: usize) -> Result<LabeledDataset> {
        let seed = derive_seed(self.seed, self.batches);
        self.batches += 1;
        sample_dataset(&self.concept, &self.noise, n, seed)
    }

    fn truth(&self) -> Option<SubspaceBasis> {
        Some(self.concept.relevant_subspace())
    }
}

/// Consecutive slices of a fixed dataset.
pub struct DatasetSource {
    data: LabeledDataset,
    cursor: usize,
    truth: Option<SubspaceBasis>,
}

impl DatasetSource {
    pub fn new(data: LabeledDataset) -> Self {
        Self { data, cursor: 0, truth: None }
    }

    pub fn with_truth(mut self, truth: SubspaceBasis) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.cursor
    }
}

impl DataSource for DatasetSource {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn label_count(&self) -> usize {
        self.data.label_count()
    }

    fn draw(&mut self, n: usize) -> Result<LabeledDataset> {
        if n > self.remaining() {
            return Err(Error::SourceExhausted { requested: n, available: self.remaining() });
        }
        let out = self.data.slice(self.cursor, self.cursor + n);
        self.cursor += n;
        Ok(out)
    }

    fn truth(&self) -> Option<SubspaceBasis> {
        self.truth.clone()
    }
}

/// `Σ_i ‖b_i − proj_V b_i‖²` over the rows of `truth`.
pub fn potential(truth: &SubspaceBasis, v: &SubspaceBasis) -> f64 {
    truth
        .rows()
        .iter()
        .map(|b| {
            let r = v.residual(b);
            r.iter().map(|x| x * x).sum::<f64>()
        })
        .sum()
}

/// Fraction of samples the classifier gets wrong.
pub fn zero_one_error(classifier: &PiecewiseConstantClassifier, dataset: &LabeledDataset) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let wrong: usize = (0..dataset.len())
        .into_par_iter()
        .map(|i| (classifier.classify(dataset.x(i)) != dataset.y(i)) as usize)
        .sum();
    wrong as f64 / dataset.len() as f64
}

/// Monte-Carlo estimate of `Pr[f(x) ≠ y] = E[1 − H_{f(x),f(x)}]` and its standard error.
pub fn opt_of_rcn(concept: &Concept, h: &ConfusionMatrix, n_mc: usize, seed: u64) -> Result<(f64, f64)> {
    if h.size() != concept.label_count() {
        return Err(Error::DimensionMismatch { expected: concept.label_count(), got: h.size() });
    }
    if n_mc == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = concept.dim();
    let losses: Vec<f64> = (0..n_mc as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, Purpose::MonteCarlo, i);
            let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
            let f = concept.predict_unchecked(&x);
            1.0 - h.get(f, f)
        })
        .collect();
    let n = n_mc as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Interim fits share one grid across iterations: fixed width, shift and
/// radius with clamped edges, so the partition at `V_{t+1}` refines the one
/// at `V_t` and their training errors are ordered.
fn interim_partition(v: &SubspaceBasis, eps: f64, radius: f64) -> Result<Option<ApproximatingPartition>> {
    if v.dim() == 0 {
        return Ok(None);
    }
    ApproximatingPartition::with_grid(v.clone(), eps, 0.25 * eps, radius, Boundary::Clamp).map(Some)
}

fn find(mode: LearnerMode, batch: &LabeledDataset, v: &SubspaceBasis, cfg: &DirectionFinderConfig) -> Result<CandidateSet> {
    match mode {
        LearnerMode::MlcAgnostic => mlc_direction_candidates(batch, v, cfg),
        LearnerMode::MimAgnostic | LearnerMode::MimRcn => mim_direction_candidates(batch, v, cfg),
    }
}

/// Runs the iterative subspace search and returns the final classifier with
/// its trace.
pub fn learn<S: DataSource + ?Sized>(
    source: &mut S,
    cfg: &LearnerConfig,
) -> Result<(PiecewiseConstantClassifier, TrainTrace)> {
    cfg.validate()?;
    let d = source.dim();
    let truth = source.truth();
    let final_eps = cfg.final_eps();
    let cap = cfg.max_basis_dim.unwrap_or(d).min(d).max(1);
    let radius = grid_radius(cap, final_eps);

    let trace_batch = source.draw(cfg.n_per_iter)?;
    let mut v = SubspaceBasis::zero(d);
    let mut trace = TrainTrace::default();
    let record = |v: &SubspaceBasis, iteration: usize, candidates: usize| -> Result<TraceRecord> {
        let fit = PiecewiseConstantClassifier::fit(interim_partition(v, final_eps, radius)?, &trace_batch)?;
        Ok(TraceRecord {
            iteration,
            k_t: v.dim(),
            candidates,
            interim_error: zero_one_error(&fit, &trace_batch),
            potential: truth.as_ref().map(|t| potential(t, v)),
        })
    };
    trace.records.push(record(&v, 0, 0)?);

    for t in 1..=cfg.iterations() {
        if v.dim() == d {
            break;
        }
        let batch = source.draw(cfg.n_per_iter)?;
        let mut found = find(cfg.mode, &batch, &v, &cfg.finder)?;
        let count = found.len();
        if cfg.mode == LearnerMode::MimRcn {
            found.vectors.truncate(1);
            found.eigenvalues.truncate(1);
        }
        if count > 0 {
            v = orthonormal_extend(&v, &found, cfg.extend_tol)?;
        }
        if v.dim() > cap {
            trace.records.push(record(&v, t, count)?);
            trace.basis = Some(v.clone());
            return Err(Error::BasisCapExceeded { dim: v.dim(), cap, trace: Box::new(trace) });
        }
        trace.records.push(record(&v, t, count)?);
        if count == 0 {
            break;
        }
    }

    let final_batch = source.draw(cfg.n_per_iter)?;
    let partition = if v.dim() == 0 {
        None
    } else {
        let r = grid_radius(v.dim(), final_eps);
        Some(ApproximatingPartition::with_grid(v.clone(), final_eps, 0.25 * final_eps, r, cfg.final_boundary)?)
    };
    let classifier = PiecewiseConstantClassifier::fit(partition, &final_batch)?;
    trace.basis = Some(v);
    Ok((classifier, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(d: usize, rows: Vec<Vec<f64>>) -> SubspaceBasis {
        SubspaceBasis::new(d, rows).unwrap()
    }

    #[test]
    fn potential_examples() {
        let truth = basis(3, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        assert_eq!(potential(&truth, &SubspaceBasis::zero(3)), 2.0);
        let all = basis(3, vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]]);
        assert!(potential(&truth, &all) < 1e-15);
        let e1 = basis(2, vec![vec![1.0, 0.0]]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let diag = basis(2, vec![vec![s, s]]);
        assert!((potential(&e1, &diag) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trace_csv_header_and_empty_potential() {
        let trace = TrainTrace {
            records: vec![TraceRecord { iteration: 0, k_t: 0, candidates: 0, interim_error: 0.5, potential: None }],
            basis: None,
        };
        assert_eq!(trace.to_csv_string().unwrap(), "iteration,k_t,candidates,interim_error,potential\n0,0,0,0.5,\n");
    }

    #[test]
    fn dataset_source_exhausts() {
        let ds = LabeledDataset::from_rows(2, &[vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0]).unwrap();
        let mut src = DatasetSource::new(ds);
        assert_eq!(src.draw(2).unwrap().len(), 2);
        assert!(matches!(src.draw(2), Err(Error::SourceExhausted { requested: 2, available: 1 })));
    }

    #[test]
    fn default_iteration_counts() {
        let cfg = LearnerConfig::default();
        assert_eq!(cfg.iterations(), 6400);
        let rcn = LearnerConfig { mode: LearnerMode::MimRcn, ..cfg };
        assert_eq!(rcn.iterations(), 4);
    }
}
