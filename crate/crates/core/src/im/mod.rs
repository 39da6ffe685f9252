//! The influence-susceptibility model.
//!
//! Each individual `u` carries a nonnegative influence vector `I_u` and a
//! susceptibility vector `S_u`. The chance that `v` forwards after the set
//! `x` of its influencers did is `1 - exp(-λ Σ_{u∈x} I_u·S_v)`; which of them
//! `v` credits follows a softmax over the same dot products.

mod model;
mod objective;
mod params;
mod train;

pub use model::{choice_distribution, prob_from_score, propagation_prob, rank_influencers, IMModel};
pub use objective::{gradients, objective, objective_terms, ObjectiveTerms, Problem, EPS};
pub use params::{Hyperparams, StepRule};
pub use train::{initial_model, train, train_from, train_observed, train_on, write_trace_csv, TrainOutcome, TraceRow};

use crate::cascades::ExposureTable;

/// Prior mean that makes an average exposure reproduce the overall observed
/// forwarding rate when every entry of `I` and `S` equals it.
///
/// Solves `1 - exp(-λ k x̄ μ²) = r` where `r` is the pooled success rate and
/// `x̄` the trial-weighted mean mode size. Returns 0 for an empty table.
pub fn empirical_prior_mean(exposures: &ExposureTable, lambda: f64, k: usize) -> f64 {
    let (mut succ, mut trials, mut weighted_size) = (0.0, 0.0, 0.0);
    for (_, mode, c) in exposures.iter() {
        let t = c.trials() as f64;
        succ += c.successes as f64;
        trials += t;
        weighted_size += t * mode.len() as f64;
    }
    if trials == 0.0 || succ == 0.0 {
        return 0.0;
    }
    let rate = (succ / trials).min(1.0 - EPS);
    let mean_size = weighted_size / trials;
    (-(-rate).ln_1p() / (lambda * k as f64 * mean_size)).sqrt()
}
