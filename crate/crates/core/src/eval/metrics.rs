use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::baselines::Predictor;
use crate::cascades::{AssembleMode, DiffusionNetwork, ExposureKey, ExposureTable};
use crate::error::{Error, Result};
use crate::im::{propagation_prob, rank_influencers, IMModel};
use crate::node::NodeId;
use crate::seed;

/// Clamp applied to predictions before taking logs.
pub const KL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub p_true: f64,
    /// Received-message observations behind the estimate.
    pub support: u64,
}

/// Reference propagation probabilities per `(v, mode)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    entries: BTreeMap<ExposureKey, TruthEntry>,
}

impl GroundTruth {
    pub fn insert(&mut self, v: NodeId, mode: AssembleMode, entry: TruthEntry) {
        self.entries.insert((v, mode), entry);
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&NodeId, &AssembleMode, &TruthEntry)> + '_ {
        self.entries.iter().map(|((v, x), e)| (v, x, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keeps the entries selected by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&NodeId, &AssembleMode) -> bool) -> GroundTruth {
        GroundTruth {
            entries: self.entries.iter().filter(|((v, x), _)| keep(v, x)).map(|(k, e)| (k.clone(), *e)).collect(),
        }
    }
}

/// Forward ratio `n / (n + ñ)` for every key with at least `min_support`
/// observations.
pub fn estimate_ground_truth(exposures: &ExposureTable, min_support: u64) -> Result<GroundTruth> {
    if min_support == 0 {
        return Err(Error::InvalidConfig("min_support must be at least 1".into()));
    }
    let mut truth = GroundTruth::default();
    for (v, mode, c) in exposures.iter() {
        let trials = c.trials();
        if trials >= min_support {
            truth.insert(
                v.clone(),
                mode.clone(),
                TruthEntry { p_true: c.successes as f64 / trials as f64, support: trials },
            );
        }
    }
    Ok(truth)
}

/// Exact probabilities under a known generating model.
pub fn synthetic_ground_truth(model: &IMModel, pairs: &[(NodeId, AssembleMode)]) -> Result<GroundTruth> {
    let mut truth = GroundTruth::default();
    for (v, mode) in pairs {
        let p_true = propagation_prob(model, v, mode.members())?;
        truth.insert(v.clone(), mode.clone(), TruthEntry { p_true, support: 1 });
    }
    Ok(truth)
}

/// [`synthetic_ground_truth`] over the keys of a test exposure table, with
/// the observation counts as support.
pub fn synthetic_truth_for(model: &IMModel, exposures: &ExposureTable) -> Result<GroundTruth> {
    let mut truth = GroundTruth::default();
    for (v, mode, c) in exposures.iter() {
        let p_true = propagation_prob(model, v, mode.members())?;
        truth.insert(v.clone(), mode.clone(), TruthEntry { p_true, support: c.trials().max(1) });
    }
    Ok(truth)
}

/// Bernoulli KL divergence `KL(p ‖ q)` in nats with `0 log 0 = 0`.
/// A term whose `q`-side mass is below `eps` uses `eps` instead, so the
/// result stays finite; `KL(p ‖ p)` is exactly 0, boundaries included.
pub fn bernoulli_kl(p: f64, q: f64, eps: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b.max(eps)).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Observed,
    Hidden,
}

/// Hidden if any `(u, v)` with `u` in the mode is missing from the training
/// network.
pub fn classify(train_net: &DiffusionNetwork, v: &NodeId, mode: &AssembleMode) -> Bucket {
    if mode.members().iter().all(|u| train_net.has_edge(u, v)) {
        Bucket::Observed
    } else {
        Bucket::Hidden
    }
}

pub type EvalPair = (NodeId, AssembleMode);

/// Per-edge evaluation pairs `(v, {u})` for every edge of the test network,
/// split by whether the edge exists in the training network.
pub fn split_observed_hidden(
    train_net: &DiffusionNetwork,
    test_net: &DiffusionNetwork,
) -> (Vec<EvalPair>, Vec<EvalPair>) {
    let mut observed = Vec::new();
    let mut hidden = Vec::new();
    for (u, v) in test_net.edges() {
        let pair = (v.clone(), AssembleMode::singleton(u.clone()));
        if train_net.has_edge(u, v) {
            observed.push(pair);
        } else {
            hidden.push(pair);
        }
    }
    (observed, hidden)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairKl {
    pub v: NodeId,
    pub mode: String,
    pub p_true: f64,
    pub q: f64,
    pub kl: f64,
    pub bucket: Bucket,
}

pub fn write_pair_kl_csv<W: Write>(rows: &[PairKl], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Mean per-pair KL between truth and prediction.
pub fn mkl(truth: &GroundTruth, predictor: &dyn Predictor) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Domain("MKL over an empty ground truth".into()));
    }
    let mut total = 0.0;
    for (v, mode, e) in truth.iter() {
        total += bernoulli_kl(e.p_true, predictor.set_prob(v, mode.members())?, KL_EPS);
    }
    Ok(total / truth.len() as f64)
}

/// `sqrt(observed² + hidden²)`
pub fn compositive(mkl_observed: f64, mkl_hidden: f64) -> f64 {
    mkl_observed.hypot(mkl_hidden)
}

/// Mean reciprocal rank and its complement.
pub fn mrr(ranks: &[usize]) -> Result<(f64, f64)> {
    if ranks.is_empty() {
        return Err(Error::Domain("MRR over no cases".into()));
    }
    if ranks.contains(&0) {
        return Err(Error::Domain("ranks start at 1".into()));
    }
    let m = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64;
    Ok((m, 1.0 - m))
}

/// A multiple-exposure forward whose credited parent should be ranked first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankCase {
    pub v: NodeId,
    pub mode: AssembleMode,
    pub truth: NodeId,
    /// Number of forwards this case stands for.
    pub weight: u64,
}

/// Cases from recorded parents, one per `(v, mode, parent)` with `|mode| ≥ 2`.
pub fn ranking_cases_recorded(exposures: &ExposureTable) -> Vec<RankCase> {
    let mut out = Vec::new();
    for (v, mode, c) in exposures.iter() {
        if mode.len() < 2 {
            continue;
        }
        for (u, &m) in &c.choices {
            if m > 0 {
                out.push(RankCase { v: v.clone(), mode: mode.clone(), truth: u.clone(), weight: m });
            }
        }
    }
    out
}

/// Cases whose truth is the most influential member under a known model:
/// every multiple exposure counts, forwarded or not.
pub fn ranking_cases_model(exposures: &ExposureTable, model: &IMModel) -> Result<Vec<RankCase>> {
    let mut out = Vec::new();
    for (v, mode, c) in exposures.iter() {
        if mode.len() < 2 || c.trials() == 0 {
            continue;
        }
        let best = rank_influencers(model, v, mode.members())?.swap_remove(0);
        out.push(RankCase { v: v.clone(), mode: mode.clone(), truth: best, weight: c.trials() });
    }
    Ok(out)
}

/// 1-based rank of each case's truth under `predictor`, repeated by weight.
pub fn ranks_of_truth(cases: &[RankCase], predictor: &dyn Predictor) -> Result<Vec<usize>> {
    let mut ranks = Vec::new();
    for c in cases {
        let order = predictor.rank(&c.v, c.mode.members())?;
        let r = order
            .iter()
            .position(|u| *u == c.truth)
            .ok_or_else(|| Error::Domain(format!("truth `{}` missing from ranking", c.truth)))?
            + 1;
        ranks.extend(std::iter::repeat_n(r, c.weight as usize));
    }
    Ok(ranks)
}

/// Expected R-MRR of a uniformly random ranking: mean of `1 - H_n / n`.
pub fn random_guess_rmrr(cases: &[RankCase]) -> Result<f64> {
    let total: u64 = cases.iter().map(|c| c.weight).sum();
    if total == 0 {
        return Err(Error::Domain("R-MRR over no cases".into()));
    }
    let mut acc = 0.0;
    for c in cases {
        let n = c.mode.len();
        let harmonic: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
        acc += c.weight as f64 * (1.0 - harmonic / n as f64);
    }
    Ok(acc / total as f64)
}

/// Mean and standard deviation of R-MRR over `reps` random rankings.
pub fn random_guess_rmrr_sampled(cases: &[RankCase], seed: u64, reps: usize) -> Result<(f64, f64)> {
    if reps == 0 {
        return Err(Error::InvalidConfig("need at least one repetition".into()));
    }
    let mut rng = seed::rng(seed, "random-guess");
    let mut values = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut ranks = Vec::new();
        for c in cases {
            for _ in 0..c.weight {
                let mut order = c.mode.members().to_vec();
                order.shuffle(&mut rng);
                ranks.push(order.iter().position(|u| *u == c.truth).expect("truth in mode") + 1);
            }
        }
        values.push(mrr(&ranks)?.1);
    }
    let mean = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / reps as f64;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    /// MKL over every evaluation pair.
    pub mkl: f64,
    /// 0 when the bucket is empty; see the pair counts.
    pub mkl_observed: f64,
    pub mkl_hidden: f64,
    pub compositive: f64,
    /// `None` when there are no multiple-exposure cases.
    pub mrr: Option<f64>,
    pub r_mrr: Option<f64>,
    pub pairs: usize,
    pub observed_pairs: usize,
    pub hidden_pairs: usize,
    pub rank_cases: usize,
}

/// Scores one predictor against a ground truth and a set of ranking cases.
pub fn evaluate(
    predictor: &dyn Predictor,
    truth: &GroundTruth,
    train_net: &DiffusionNetwork,
    cases: &[RankCase],
) -> Result<(MetricsReport, Vec<PairKl>)> {
    if truth.is_empty() {
        return Err(Error::Domain("no evaluation pairs".into()));
    }
    let mut rows = Vec::with_capacity(truth.len());
    let (mut sum_all, mut sum_obs, mut sum_hid) = (0.0, 0.0, 0.0);
    let (mut n_obs, mut n_hid) = (0usize, 0usize);
    for (v, mode, e) in truth.iter() {
        let q = predictor.set_prob(v, mode.members())?;
        let kl = bernoulli_kl(e.p_true, q, KL_EPS);
        let bucket = classify(train_net, v, mode);
        sum_all += kl;
        match bucket {
            Bucket::Observed => {
                sum_obs += kl;
                n_obs += 1;
            }
            Bucket::Hidden => {
                sum_hid += kl;
                n_hid += 1;
            }
        }
        rows.push(PairKl { v: v.clone(), mode: mode.to_string(), p_true: e.p_true, q, kl, bucket });
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    let mkl_observed = mean(sum_obs, n_obs);
    let mkl_hidden = mean(sum_hid, n_hid);
    let ranks = ranks_of_truth(cases, predictor)?;
    let (mrr_value, r_mrr) = match mrr(&ranks) {
        Ok((m, r)) => (Some(m), Some(r)),
        Err(_) => (None, None),
    };
    let report = MetricsReport {
        method: predictor.name(),
        mkl: sum_all / truth.len() as f64,
        mkl_observed,
        mkl_hidden,
        compositive: compositive(mkl_observed, mkl_hidden),
        mrr: mrr_value,
        r_mrr,
        pairs: truth.len(),
        observed_pairs: n_obs,
        hidden_pairs: n_hid,
        rank_cases: ranks.len(),
    };
    Ok((report, rows))
}
