use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mimlearn::models::{random_intersection, random_mlc};
use mimlearn::rng::derive_seed;
use mimlearn::{sq, Concept, ConfusionMatrix, FlipStrategy, LearnerConfig, NoiseSpec};
use serde::Deserialize;

/// How the ground-truth concept of a trial is obtained.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConceptSpec {
    /// Gaussian weight rows, zero biases.
    RandomMlc { label_count: usize, dim: usize },
    /// Homogeneous halfspaces with orthonormal normals.
    RandomIntersection { count: usize, dim: usize },
    /// Two-index box-plus-band instance.
    AppendixF { k: u32, dim: usize },
    /// Rotational planar classifier with `label_count` sectors.
    Rotational { label_count: usize },
    /// Concept JSON file.
    File { path: PathBuf },
}

impl ConceptSpec {
    /// Same family with a different `(K, d)`, for sweeps.
    pub fn with_shape(&self, label_count: Option<usize>, dim: Option<usize>) -> anyhow::Result<Self> {
        let mut out = self.clone();
        match &mut out {
            ConceptSpec::RandomMlc { label_count: k, dim: d } => {
                *k = label_count.unwrap_or(*k);
                *d = dim.unwrap_or(*d);
            }
            ConceptSpec::RandomIntersection { dim: d, .. } | ConceptSpec::AppendixF { dim: d, .. } => {
                if label_count.is_some_and(|k| k != 2) {
                    bail!("this concept family is binary; the sweep grid asks for K != 2");
                }
                *d = dim.unwrap_or(*d);
            }
            _ if label_count.is_none() && dim.is_none() => {}
            _ => bail!("sweeps over K or d need a random concept family"),
        }
        Ok(out)
    }

    pub fn build(&self, seed: u64) -> anyhow::Result<Concept> {
        Ok(match self {
            ConceptSpec::RandomMlc { label_count, dim } => Concept::Mlc(random_mlc(*label_count, *dim, seed)?),
            ConceptSpec::RandomIntersection { count, dim } => {
                Concept::Intersection(random_intersection(*count, *dim, seed)?)
            }
            ConceptSpec::AppendixF { k, dim } => sq::build_appendix_f_instance(*k, *dim, seed)?,
            ConceptSpec::Rotational { label_count } => sq::HardInstance2D::new(*label_count)?.concept(),
            ConceptSpec::File { path } => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing concept {}", path.display()))?
            }
        })
    }
}

/// Label channel; matrices can be given inline, by file, or by construction.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseConfig {
    None,
    Adversarial {
        rate: f64,
        #[serde(default = "uniform_flip")]
        strategy: FlipStrategy,
    },
    SymmetricRcn { gamma: f64 },
    Rcn {
        #[serde(default)]
        matrix: Option<ConfusionMatrix>,
        #[serde(default)]
        path: Option<PathBuf>,
    },
    /// The moment-matching circulant channel for the concept's `K`.
    SqRcn,
    SqContrastive,
}

fn uniform_flip() -> FlipStrategy {
    FlipStrategy::UniformFlip
}

impl NoiseConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            NoiseConfig::None => "none",
            NoiseConfig::Adversarial { .. } => "adversarial",
            NoiseConfig::SymmetricRcn { .. } | NoiseConfig::Rcn { .. } | NoiseConfig::SqRcn => "rcn",
            NoiseConfig::SqContrastive => "contrastive",
        }
    }

    pub fn with_rate(&self, rate: f64) -> anyhow::Result<Self> {
        Ok(match self {
            NoiseConfig::None | NoiseConfig::Adversarial { .. } => {
                let strategy = match self {
                    NoiseConfig::Adversarial { strategy, .. } => *strategy,
                    _ => FlipStrategy::UniformFlip,
                };
                NoiseConfig::Adversarial { rate, strategy }
            }
            NoiseConfig::SymmetricRcn { .. } => NoiseConfig::SymmetricRcn { gamma: 1.0 - rate },
            _ => bail!("noise-rate sweeps support adversarial and symmetric-rcn noise"),
        })
    }

    pub fn build(&self, label_count: usize) -> anyhow::Result<NoiseSpec> {
        Ok(match self {
            NoiseConfig::None => NoiseSpec::None,
            NoiseConfig::Adversarial { rate, strategy } => NoiseSpec::Adversarial { rate: *rate, strategy: *strategy },
            NoiseConfig::SymmetricRcn { gamma } => {
                NoiseSpec::Rcn { matrix: ConfusionMatrix::symmetric(label_count, *gamma)? }
            }
            NoiseConfig::Rcn { matrix, path } => {
                let matrix = match (matrix, path) {
                    (Some(m), None) => m.clone(),
                    (None, Some(p)) => read_matrix(p)?,
                    _ => bail!("rcn noise needs exactly one of `matrix` and `path`"),
                };
                NoiseSpec::Rcn { matrix }
            }
            NoiseConfig::SqRcn => NoiseSpec::Rcn { matrix: sq::build_rcn_confusion_matrix(label_count)? },
            NoiseConfig::SqContrastive => {
                NoiseSpec::Contrastive { matrix: sq::build_contrastive_confusion_matrix(label_count)? }
            }
        })
    }
}

pub fn read_matrix(path: &Path) -> anyhow::Result<ConfusionMatrix> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing confusion matrix {}", path.display()))
}

/// Grid for `sweep`; an absent axis stays at the base config.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub noise_rates: Option<Vec<f64>>,
    pub label_counts: Option<Vec<usize>>,
    pub dims: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub concept: ConceptSpec,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default = "one")]
    pub trials: usize,
    /// Explicit per-trial seeds; otherwise derived from the global seed.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Samples per generated dataset (`gen`).
    #[serde(default = "default_n")]
    pub n: usize,
    /// Held-out samples for test error (`sweep`).
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Monte-Carlo samples for the RCN optimum.
    #[serde(default = "default_n_test")]
    pub n_opt: usize,
    /// Train on this CSV instead of fresh generator draws.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<SweepGrid>,
}

fn one() -> usize {
    1
}

fn default_n() -> usize {
    10_000
}

fn default_n_test() -> usize {
    100_000
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.learner.validate()?;
        if self.trials == 0 {
            bail!("`trials` must be >= 1");
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.trials {
                bail!("`seeds` has {} entries but `trials` is {}", seeds.len(), self.trials);
            }
        }
        if let ConceptSpec::File { path } = &self.concept {
            if !path.exists() {
                bail!("concept file {} does not exist", path.display());
            }
        }
        if let Some(p) = &self.dataset {
            if !p.exists() {
                bail!("dataset {} does not exist", p.display());
            }
        }
        if let NoiseConfig::Rcn { path: Some(p), .. } = &self.noise {
            if !p.exists() {
                bail!("confusion matrix {} does not exist", p.display());
            }
        }
        Ok(())
    }

    pub fn trial_seed(&self, global: u64, trial: usize) -> u64 {
        match &self.seeds {
            Some(s) => s[trial],
            None => derive_seed(global, trial as u64),
        }
    }
}
