//! Learning multi-index models under Gaussian marginals by iterative subspace
//! discovery, with the hard label channels used for statistical-query lower
//! bounds.

pub mod direction;
pub mod error;
pub mod hermite;
pub mod learner;
pub mod models;
pub mod oracle;
pub mod partition;
pub mod quadrature;
pub mod rng;
pub mod sq;
pub mod subspace;

pub use direction::{
    mim_direction_candidates, mlc_direction_candidates, orthonormal_extend, CandidateSet, DirectionFinderConfig,
    RegressionMethod,
};
pub use error::{Error, Result};
pub use hermite::{
    center_and_normalize, gradient_outer_product, hermite_eval, hermite_regression, HermiteCoefficients, MultiIndex,
};
pub use learner::{
    learn, opt_of_rcn, potential, zero_one_error, DataSource, DatasetSource, GeneratorSource, LearnerConfig,
    LearnerMode, TrainTrace,
};
pub use models::{
    sample_dataset, BoxPlusBand, Concept, ConfusionMatrix, FlipStrategy, IntersectionOfHalfspaces, Label,
    LabeledDataset, MulticlassLinearClassifier, NoiseSpec,
};
pub use partition::{
    build_partition, classify, fit_piecewise_constant, refine_alignment_check, ApproximatingPartition, Boundary,
    CubeIndex, PiecewiseConstantClassifier,
};
pub use subspace::SubspaceBasis;
