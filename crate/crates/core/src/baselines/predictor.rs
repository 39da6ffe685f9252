use crate::error::{Error, Result};
use crate::im::{propagation_prob, rank_influencers, IMModel};
use crate::node::NodeId;

/// Uniform query interface over the factor model and pairwise estimators.
pub trait Predictor: Sync {
    fn name(&self) -> String;

    /// Probability that `u` alone makes `v` forward.
    fn pair_prob(&self, u: &NodeId, v: &NodeId) -> Result<f64>;

    /// Probability that `v` forwards given the active influencer set.
    fn set_prob(&self, v: &NodeId, mode: &[NodeId]) -> Result<f64> {
        let probs = mode.iter().map(|u| self.pair_prob(u, v)).collect::<Result<Vec<f64>>>()?;
        Ok(or_combine(|i| probs[i], mode.len()))
    }

    /// Mode members ordered from most to least likely credited parent.
    fn rank(&self, v: &NodeId, mode: &[NodeId]) -> Result<Vec<NodeId>> {
        let mut scored = mode
            .iter()
            .map(|u| Ok((self.pair_prob(u, v)?, u.clone())))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        Ok(scored.into_iter().map(|(_, u)| u).collect())
    }
}

/// Independent-cascade combination `1 - Π (1 - p_i)` over `len` members,
/// with `pair(i)` giving member `i`'s probability.
pub fn or_combine(pair: impl Fn(usize) -> f64, len: usize) -> f64 {
    let mut miss = 1.0;
    for i in 0..len {
        miss *= 1.0 - pair(i).clamp(0.0, 1.0);
    }
    1.0 - miss
}

/// `or_combine` over a mode with a pairwise lookup.
pub fn or_combine_mode(pair_prob: impl Fn(&NodeId, &NodeId) -> f64, v: &NodeId, mode: &[NodeId]) -> f64 {
    or_combine(|i| pair_prob(&mode[i], v), mode.len())
}

/// Same probability on every pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformPredictor {
    p: f64,
}

pub fn uniform_estimator(p: f64) -> Result<UniformPredictor> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("uniform probability {p} outside [0, 1]")));
    }
    Ok(UniformPredictor { p })
}

impl UniformPredictor {
    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Predictor for UniformPredictor {
    fn name(&self) -> String {
        format!("UN (p={})", self.p)
    }

    fn pair_prob(&self, _u: &NodeId, _v: &NodeId) -> Result<f64> {
        Ok(self.p)
    }
}

impl Predictor for IMModel {
    fn name(&self) -> String {
        "IM".to_string()
    }

    fn pair_prob(&self, u: &NodeId, v: &NodeId) -> Result<f64> {
        propagation_prob(self, v, std::slice::from_ref(u))
    }

    fn set_prob(&self, v: &NodeId, mode: &[NodeId]) -> Result<f64> {
        propagation_prob(self, v, mode)
    }

    fn rank(&self, v: &NodeId, mode: &[NodeId]) -> Result<Vec<NodeId>> {
        rank_influencers(self, v, mode)
    }
}
