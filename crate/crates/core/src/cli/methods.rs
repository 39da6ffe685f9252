use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    bernoulli_estimator, em_from_exposures, jaccard_estimator, pmf_complete, uniform_estimator, EmOutcome,
    PairwiseTable, PmfConfig, Predictor,
};
use crate::error::{Error, Result};
use crate::eval::{
    estimate_ground_truth, evaluate, random_guess_rmrr, random_guess_rmrr_sampled, ranking_cases_model,
    ranking_cases_recorded, synthetic_truth_for, GroundTruth, MetricsReport, PairKl, RankCase,
};
use crate::im::{empirical_prior_mean, train_on, Hyperparams, IMModel, TrainOutcome};
use crate::node::NodeId;
use crate::seed;

use super::config::{ExperimentConfig, Method};
use super::corpus::{Dataset, Scenario, TruthSource};

/// Training hyperparameters for one run: the configured ones with the
/// init seed derived from the global seed and, if enabled, the empirical
/// prior mean.
pub fn im_hyperparams(cfg: &ExperimentConfig, exposures: &crate::cascades::ExposureTable) -> Hyperparams {
    let mut hp = cfg.train.clone();
    hp.init_seed = seed::derive(cfg.seed ^ cfg.train.init_seed, "im-init-seed");
    if cfg.empirical_prior_mean {
        let mu = empirical_prior_mean(exposures, hp.lambda, hp.k);
        if mu > 0.0 {
            hp.mu_i = mu;
            hp.mu_s = mu;
        }
    }
    hp
}

pub fn train_im(cfg: &ExperimentConfig, data: &Dataset, universe: &[NodeId]) -> Result<(TrainOutcome, Hyperparams)> {
    let hp = im_hyperparams(cfg, &data.exposures);
    let out = train_on(&data.exposures, universe.to_vec(), &hp)?;
    Ok((out, hp))
}

/// The three pairwise tables.
#[derive(Debug, Clone)]
pub struct PairwiseFits {
    pub bd: PairwiseTable,
    pub ji: PairwiseTable,
    pub em: EmOutcome,
}

pub fn fit_tables(cfg: &ExperimentConfig, data: &Dataset) -> Result<PairwiseFits> {
    let ((bd, ji), em) = rayon::join(
        || rayon::join(|| bernoulli_estimator(&data.exposures), || jaccard_estimator(&data.log, &data.network)),
        || em_from_exposures(&data.exposures, cfg.baselines.em_max_iters, cfg.baselines.em_tol),
    );
    Ok(PairwiseFits { bd, ji, em: em? })
}

pub(crate) fn pmf_config(cfg: &ExperimentConfig) -> PmfConfig {
    PmfConfig { seed: seed::derive(cfg.seed ^ cfg.baselines.mf.seed, "pmf-seed"), ..cfg.baselines.mf.clone() }
}

/// Builds the predictors for the enabled methods, in configuration order.
/// `Un` expands to one predictor per configured probability.
pub fn build_predictors(
    cfg: &ExperimentConfig,
    im: Option<&IMModel>,
    fits: Option<&PairwiseFits>,
) -> Result<Vec<Box<dyn Predictor + Send>>> {
    let need_fits = || fits.ok_or_else(|| Error::InvalidConfig("pairwise baselines were not fitted".into()));
    let mf = pmf_config(cfg);
    let mut jobs: Vec<(Method, Option<&PairwiseTable>)> = Vec::new();
    for &m in &cfg.baselines.methods {
        match m {
            Method::EmMf | Method::Em => jobs.push((m, Some(&need_fits()?.em.table))),
            Method::BdMf | Method::Bd => jobs.push((m, Some(&need_fits()?.bd))),
            Method::JiMf | Method::Ji => jobs.push((m, Some(&need_fits()?.ji))),
            Method::Im | Method::Un => jobs.push((m, None)),
        }
    }
    use rayon::prelude::*;
    let built: Vec<Result<Vec<Box<dyn Predictor + Send>>>> = jobs
        .into_par_iter()
        .map(|(m, table)| -> Result<Vec<Box<dyn Predictor + Send>>> {
            Ok(match m {
                Method::Im => {
                    let model = im.ok_or_else(|| Error::InvalidConfig("IM was not trained".into()))?;
                    vec![Box::new(model.clone())]
                }
                Method::EmMf | Method::BdMf | Method::JiMf => {
                    vec![Box::new(pmf_complete(table.expect("table"), &mf)?)]
                }
                Method::Em | Method::Bd | Method::Ji => vec![Box::new(table.expect("table").clone())],
                Method::Un => cfg
                    .baselines
                    .uniform_p
                    .iter()
                    .map(|&p| uniform_estimator(p).map(|u| Box::new(u) as Box<dyn Predictor + Send>))
                    .collect::<Result<_>>()?,
            })
        })
        .collect();
    let mut out = Vec::new();
    for b in built {
        out.extend(b?);
    }
    Ok(out)
}

/// Reference probabilities and ranking cases of one scenario.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub name: String,
    pub truth: GroundTruth,
    pub cases: Vec<RankCase>,
    pub random_guess: Option<RandomGuess>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomGuess {
    /// Expected R-MRR of a uniformly random ranking.
    pub analytic: f64,
    pub sampled_mean: f64,
    pub sampled_sd: f64,
}

pub fn prepare(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<PreparedScenario> {
    let exposures = &scenario.data.exposures;
    let (truth, cases) = match &scenario.truth {
        TruthSource::Model(model) => (synthetic_truth_for(model, exposures)?, ranking_cases_model(exposures, model)?),
        TruthSource::Ratio => (estimate_ground_truth(exposures, cfg.eval.min_support)?, ranking_cases_recorded(exposures)),
    };
    let random_guess = match random_guess_rmrr(&cases) {
        Ok(analytic) => {
            let reps = cfg.eval.random_guess_reps.max(1);
            let (mean, sd) = random_guess_rmrr_sampled(&cases, seed::derive(cfg.seed, &scenario.name), reps)?;
            Some(RandomGuess { analytic, sampled_mean: mean, sampled_sd: sd })
        }
        Err(_) => None,
    };
    Ok(PreparedScenario { name: scenario.name.clone(), truth, cases, random_guess })
}

/// Nodes the evaluation touches that `model` has no vectors for.
pub fn missing_nodes(model: &IMModel, prepared: &PreparedScenario) -> Vec<NodeId> {
    let mut missing = BTreeSet::new();
    for (v, mode, _) in prepared.truth.iter() {
        for id in std::iter::once(v).chain(mode.members()) {
            if !model.contains(id) {
                missing.insert(id.clone());
            }
        }
    }
    missing.into_iter().collect()
}

pub fn check_domain(model: &IMModel, prepared: &PreparedScenario) -> Result<()> {
    let missing = missing_nodes(model, prepared);
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::EvaluationDomain { missing })
    }
}

pub fn evaluate_prepared(
    predictor: &dyn Predictor,
    prepared: &PreparedScenario,
    train_network: &crate::cascades::DiffusionNetwork,
) -> Result<(MetricsReport, Vec<PairKl>)> {
    evaluate(predictor, &prepared.truth, train_network, &prepared.cases)
}
