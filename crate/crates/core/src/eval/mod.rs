//! Evaluation: reference probabilities, KL-based accuracy, ranking of the
//! credited parent, restart-robustness matrix distance and the
//! influence/susceptibility histogram.

mod assignment;
mod histogram;
mod metrics;

pub use assignment::{linear_assignment, matrix_difference};
pub use histogram::{influence_susceptibility_histogram, Histogram, Norm};
pub use metrics::{
    bernoulli_kl, classify, compositive, estimate_ground_truth, evaluate, mkl, mrr, random_guess_rmrr,
    random_guess_rmrr_sampled, ranking_cases_model, ranking_cases_recorded, ranks_of_truth, split_observed_hidden,
    synthetic_ground_truth, synthetic_truth_for, write_pair_kl_csv, Bucket, EvalPair, GroundTruth, MetricsReport,
    PairKl, RankCase, TruthEntry, KL_EPS,
};
