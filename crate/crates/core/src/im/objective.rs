//! Negative log of the combined cascade / retweet-choice posterior and its
//! analytic gradient.
//!
//! For every exposure group `(v, x)` with `s = Σ_{u∈x} I_u·S_v` and
//! `p = 1 - exp(-λ s)`:
//!
//! ```text
//! L = -α Σ [n log p + ñ log(1-p)]
//!     -(1-α) Σ Σ_{u*} m(u*) log softmax_x(I·S_v)[u*]
//!     + Σ_u |I_u - μ_I|² / (2σ_I²) + Σ_v |S_v - μ_S|² / (2σ_S²)
//! ```
//!
//! Probabilities inside logs are clamped to `[EPS, 1 - EPS]`; where a clamp
//! is active the clamped term contributes no gradient.

use ndarray::Array2;
use rayon::prelude::*;

use super::model::{dot, prob_from_score, IMModel};
use super::params::Hyperparams;
use crate::cascades::ExposureTable;
use crate::error::Result;

pub const EPS: f64 = 1e-12;

/// Groups evaluated per parallel work item. Fixed so the reduction order,
/// and therefore every bit of the result, does not depend on thread count.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy)]
struct Group {
    v: u32,
    start: u32,
    len: u32,
    successes: f64,
    failures: f64,
}

/// Exposure table compiled against a model's row indices.
#[derive(Debug, Clone)]
pub struct Problem {
    n: usize,
    groups: Vec<Group>,
    members: Vec<u32>,
    /// `m(v, x, u)` aligned with `members`.
    credits: Vec<f64>,
}

/// The three additive pieces of the objective, unweighted.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjectiveTerms {
    /// `-Σ [n log p + ñ log(1-p)]`
    pub cascade: f64,
    /// `-Σ m log σ`
    pub choice: f64,
    /// Both Gaussian prior penalties.
    pub prior: f64,
}

impl ObjectiveTerms {
    pub fn total(&self, alpha: f64) -> f64 {
        alpha * self.cascade + (1.0 - alpha) * self.choice + self.prior
    }

    fn add(&mut self, o: &ObjectiveTerms) {
        self.cascade += o.cascade;
        self.choice += o.choice;
        self.prior += o.prior;
    }
}

impl Problem {
    /// Fails with `UnknownNode` if the table mentions a node the model lacks.
    pub fn compile(model: &IMModel, exposures: &ExposureTable) -> Result<Self> {
        let mut groups = Vec::with_capacity(exposures.len());
        let mut members = Vec::new();
        let mut credits = Vec::new();
        for (v, mode, counts) in exposures.iter() {
            let start = members.len() as u32;
            for u in mode.members() {
                members.push(model.row(u)? as u32);
                credits.push(counts.choices.get(u).copied().unwrap_or(0) as f64);
            }
            groups.push(Group {
                v: model.row(v)? as u32,
                start,
                len: mode.len() as u32,
                successes: counts.successes as f64,
                failures: counts.failures as f64,
            });
        }
        Ok(Problem { n: model.node_count(), groups, members, credits })
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn terms(&self, influence: &Array2<f64>, susceptibility: &Array2<f64>, hp: &Hyperparams) -> ObjectiveTerms {
        self.evaluate_full(influence, susceptibility, hp, false).0
    }

    pub fn value(&self, influence: &Array2<f64>, susceptibility: &Array2<f64>, hp: &Hyperparams) -> f64 {
        self.terms(influence, susceptibility, hp).total(hp.alpha)
    }

    /// Objective value and the number of groups with successes whose
    /// probability sits below the log clamp (and so receive no gradient).
    pub(crate) fn value_and_clamped(
        &self,
        influence: &Array2<f64>,
        susceptibility: &Array2<f64>,
        hp: &Hyperparams,
    ) -> (f64, usize) {
        let (terms, _, clamped) = self.evaluate_full(influence, susceptibility, hp, false);
        (terms.total(hp.alpha), clamped)
    }

    /// Objective value together with `(dL/dI, dL/dS)`.
    pub fn value_and_gradient(
        &self,
        influence: &Array2<f64>,
        susceptibility: &Array2<f64>,
        hp: &Hyperparams,
    ) -> (f64, Array2<f64>, Array2<f64>) {
        let (terms, grads, _) = self.evaluate_full(influence, susceptibility, hp, true);
        let (gi, gs) = grads.expect("gradient requested");
        (terms.total(hp.alpha), gi, gs)
    }

    fn evaluate_full(
        &self,
        influence: &Array2<f64>,
        susceptibility: &Array2<f64>,
        hp: &Hyperparams,
        want_grad: bool,
    ) -> (ObjectiveTerms, Option<(Array2<f64>, Array2<f64>)>, usize) {
        let k = influence.ncols();
        assert_eq!(influence.dim(), (self.n, k));
        assert_eq!(susceptibility.dim(), (self.n, k));
        let inf = influence.as_slice().expect("standard layout");
        let sus = susceptibility.as_slice().expect("standard layout");

        let partials: Vec<Partial> = self
            .groups
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut part = Partial::new(if want_grad { self.n * k } else { 0 });
                for g in chunk {
                    self.accumulate_group(g, inf, sus, k, hp, want_grad, &mut part);
                }
                part
            })
            .collect();

        let mut terms = ObjectiveTerms::default();
        let mut gi = vec![0.0; if want_grad { self.n * k } else { 0 }];
        let mut gs = gi.clone();
        let mut clamped = 0;
        for p in &partials {
            terms.add(&p.terms);
            clamped += p.clamped;
            if want_grad {
                for (a, b) in gi.iter_mut().zip(&p.gi) {
                    *a += b;
                }
                for (a, b) in gs.iter_mut().zip(&p.gs) {
                    *a += b;
                }
            }
        }

        // priors
        let wi = prior_weight(hp.sigma2_i);
        let ws = prior_weight(hp.sigma2_s);
        let mut prior_i = 0.0;
        for (idx, &x) in inf.iter().enumerate() {
            let d = x - hp.mu_i;
            prior_i += d * d;
            if want_grad {
                gi[idx] += 2.0 * wi * d;
            }
        }
        let mut prior_s = 0.0;
        for (idx, &x) in sus.iter().enumerate() {
            let d = x - hp.mu_s;
            prior_s += d * d;
            if want_grad {
                gs[idx] += 2.0 * ws * d;
            }
        }
        terms.prior = wi * prior_i + ws * prior_s;

        let grads = want_grad.then(|| {
            (
                Array2::from_shape_vec((self.n, k), gi).expect("shape"),
                Array2::from_shape_vec((self.n, k), gs).expect("shape"),
            )
        });
        (terms, grads, clamped)
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate_group(
        &self,
        g: &Group,
        inf: &[f64],
        sus: &[f64],
        k: usize,
        hp: &Hyperparams,
        want_grad: bool,
        part: &mut Partial,
    ) {
        let v = g.v as usize;
        let sv = &sus[v * k..(v + 1) * k];
        let range = g.start as usize..(g.start + g.len) as usize;
        let members = &self.members[range.clone()];
        let credits = &self.credits[range];

        let mut scores = [0.0f64; 16];
        let mut heap;
        let scores: &mut [f64] = if members.len() <= scores.len() {
            &mut scores[..members.len()]
        } else {
            heap = vec![0.0; members.len()];
            &mut heap
        };
        let mut total = 0.0;
        for (z, &u) in scores.iter_mut().zip(members) {
            let u = u as usize;
            *z = dot(&inf[u * k..(u + 1) * k], sv);
            total += *z;
        }

        // cascade term
        let lambda = hp.lambda;
        let p = prob_from_score(lambda, total);
        let mut dlogp = 0.0;
        let log_p = if p < EPS {
            if g.successes > 0.0 {
                part.clamped += 1;
            }
            EPS.ln()
        } else {
            dlogp = lambda * (-lambda * total).exp() / p;
            p.ln()
        };
        let mut dlog1mp = 0.0;
        let log_1mp = if -lambda * total < EPS.ln() {
            EPS.ln()
        } else {
            dlog1mp = -lambda;
            -lambda * total
        };
        let cascade = -(g.successes * log_p + g.failures * log_1mp);
        part.terms.cascade += cascade;
        let h = -(g.successes * dlogp + g.failures * dlog1mp);

        // choice term; a singleton mode has log σ = 0 exactly
        let mut choice_grad_scale = 0.0;
        let mut lse = 0.0;
        let choice_active = members.len() >= 2 && g.successes > 0.0;
        if choice_active {
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lse = max + scores.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            let (lo, hi) = (EPS.ln(), (1.0 - EPS).ln());
            for (z, &m) in scores.iter().zip(credits) {
                if m > 0.0 {
                    let log_sigma = z - lse;
                    part.terms.choice -= m * log_sigma.clamp(lo, hi);
                    if (lo..=hi).contains(&log_sigma) {
                        choice_grad_scale += m;
                    }
                }
            }
        }

        if !want_grad {
            return;
        }
        let alpha = hp.alpha;
        let gs_v = v * k;
        for (j, &u) in members.iter().enumerate() {
            let u = u as usize;
            let mut dz = alpha * h;
            if choice_active {
                let sigma = (scores[j] - lse).exp();
                let log_sigma = scores[j] - lse;
                let credited = credits[j] > 0.0 && (EPS.ln()..=(1.0 - EPS).ln()).contains(&log_sigma);
                let own = if credited { credits[j] } else { 0.0 };
                dz += (1.0 - alpha) * (choice_grad_scale * sigma - own);
            }
            if dz == 0.0 {
                continue;
            }
            let iu = &inf[u * k..(u + 1) * k];
            for d in 0..k {
                part.gi[u * k + d] += dz * sv[d];
                part.gs[gs_v + d] += dz * iu[d];
            }
        }
    }
}

struct Partial {
    terms: ObjectiveTerms,
    gi: Vec<f64>,
    gs: Vec<f64>,
    clamped: usize,
}

impl Partial {
    fn new(len: usize) -> Self {
        Partial { terms: ObjectiveTerms::default(), gi: vec![0.0; len], gs: vec![0.0; len], clamped: 0 }
    }
}

/// `1 / (2σ²)`; an infinite variance switches the prior off.
fn prior_weight(sigma2: f64) -> f64 {
    if sigma2.is_infinite() {
        0.0
    } else {
        0.5 / sigma2
    }
}

/// Objective value of `model` on `exposures`.
pub fn objective(model: &IMModel, exposures: &ExposureTable, hp: &Hyperparams) -> Result<f64> {
    let problem = Problem::compile(model, exposures)?;
    Ok(problem.value(model.influence(), model.susceptibility(), &hp_for(model, hp)))
}

/// Unweighted cascade, choice and prior pieces of the objective.
pub fn objective_terms(model: &IMModel, exposures: &ExposureTable, hp: &Hyperparams) -> Result<ObjectiveTerms> {
    let problem = Problem::compile(model, exposures)?;
    Ok(problem.terms(model.influence(), model.susceptibility(), &hp_for(model, hp)))
}

/// Analytic `(dL/dI, dL/dS)`.
pub fn gradients(
    model: &IMModel,
    exposures: &ExposureTable,
    hp: &Hyperparams,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let problem = Problem::compile(model, exposures)?;
    let (_, gi, gs) = problem.value_and_gradient(model.influence(), model.susceptibility(), &hp_for(model, hp));
    Ok((gi, gs))
}

// The model's own λ is authoritative when scoring a fitted model.
fn hp_for(model: &IMModel, hp: &Hyperparams) -> Hyperparams {
    Hyperparams { lambda: model.lambda(), ..hp.clone() }
}
