//! Pairwise propagation-probability estimators used as comparison methods,
//! low-rank completion of their tables, and the common [`Predictor`]
//! interface they share with the factor model.

mod pmf;
mod predictor;
mod table;

pub use pmf::{pmf_complete, PmfConfig, PmfPredictor};
pub use predictor::{or_combine, or_combine_mode, uniform_estimator, Predictor, UniformPredictor};
pub use table::{
    bernoulli_estimator, em_estimator, em_from_exposures, jaccard_estimator, EmOutcome, PairEstimate,
    PairwiseTable,
};
