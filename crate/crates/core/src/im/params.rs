use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the projected-gradient step length is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Backtracking line search with sufficient decrease; the loss trace is
    /// non-increasing.
    #[default]
    Armijo,
    /// Always step by the learning rate.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Weight of the cascade likelihood against the retweet-choice likelihood.
    pub alpha: f64,
    /// Learning rate; the first trial step of the line search.
    pub beta: f64,
    pub mu_i: f64,
    pub sigma2_i: f64,
    pub mu_s: f64,
    pub sigma2_s: f64,
    pub max_epochs: usize,
    pub k: usize,
    pub lambda: f64,
    pub init_seed: u64,
    pub init_scale: f64,
    pub step_rule: StepRule,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha: 0.9,
            beta: 1.0,
            mu_i: 0.0,
            sigma2_i: 0.1,
            mu_s: 0.0,
            sigma2_s: 0.1,
            max_epochs: 250,
            k: 20,
            lambda: 0.01,
            init_seed: 0,
            init_scale: 0.1,
            step_rule: StepRule::Armijo,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.sigma2_i > 0.0) || !(self.sigma2_s > 0.0) {
            return bad("prior variances must be positive".into());
        }
        if !self.mu_i.is_finite() || !self.mu_s.is_finite() {
            return bad("prior means must be finite".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be positive, got {}", self.init_scale));
        }
        Ok(())
    }

    /// Same settings with both Gaussian priors switched off.
    pub fn without_priors(mut self) -> Self {
        self.sigma2_i = f64::INFINITY;
        self.sigma2_s = f64::INFINITY;
        self
    }
}
