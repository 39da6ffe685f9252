use std::io::Write;

use log::debug;
use ndarray::{Array2, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::model::IMModel;
use super::objective::Problem;
use super::params::{Hyperparams, StepRule};
use crate::cascades::ExposureTable;
use crate::error::{Error, Result};
use crate::node::NodeId;
use crate::seed;

const SUFFICIENT_DECREASE: f64 = 0.01;
const SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub loss: f64,
    /// Accepted step length; 0 when the line search found no decrease.
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: IMModel,
    /// Row 0 is the initialization; row `e` is the state after epoch `e`.
    pub trace: Vec<TraceRow>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.loss)
    }

    /// Loss after `epoch` epochs, or the last recorded loss if training
    /// stopped early at a stationary point.
    pub fn loss_at(&self, epoch: usize) -> f64 {
        self.trace.get(epoch).or(self.trace.last()).map_or(f64::NAN, |r| r.loss)
    }
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for row in trace {
        wr.serialize(row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Entries i.i.d. uniform in `(0, init_scale]`.
pub fn initial_model(nodes: Vec<NodeId>, hp: &Hyperparams) -> Result<IMModel> {
    hp.validate()?;
    let n = nodes.len();
    let mut rng = seed::rng(hp.init_seed, "im-init");
    let mut draw = |_: (usize, usize)| hp.init_scale * (1.0 - rng.gen::<f64>());
    let influence = Array2::from_shape_fn((n, hp.k), &mut draw);
    let susceptibility = Array2::from_shape_fn((n, hp.k), &mut draw);
    IMModel::new(nodes, influence, susceptibility, hp.lambda)
}

/// Trains on the nodes mentioned by `exposures`.
pub fn train(exposures: &ExposureTable, hp: &Hyperparams) -> Result<TrainOutcome> {
    let nodes: Vec<NodeId> = exposures.nodes().into_iter().collect();
    train_on(exposures, nodes, hp)
}

/// Trains a model over an explicit node universe, which may include nodes
/// with no exposure data (their vectors are driven by the priors alone).
pub fn train_on(exposures: &ExposureTable, mut nodes: Vec<NodeId>, hp: &Hyperparams) -> Result<TrainOutcome> {
    if exposures.is_empty() {
        return Err(Error::NothingToTrain);
    }
    nodes.sort_unstable();
    nodes.dedup();
    let init = initial_model(nodes, hp)?;
    train_from(init, exposures, hp)
}

/// Projected gradient descent from a given starting model.
///
/// Each epoch takes one step `x ← max(0, x - η ∇L)`. With [`StepRule::Armijo`]
/// the trial length starts at `min(β, 2 η_prev)` and halves until
/// `L(x_new) - L(x) ≤ 0.01 ⟨∇L, x_new - x⟩`, at most 20 times; if no trial
/// passes the epoch leaves the model unchanged. Trials that push more groups
/// with successes under the log clamp than the current point has are
/// rejected as well.
pub fn train_from(init: IMModel, exposures: &ExposureTable, hp: &Hyperparams) -> Result<TrainOutcome> {
    train_observed(init, exposures, hp, |_, _, _| {})
}

/// [`train_from`], calling `observe(epoch, I, S)` after every epoch.
pub fn train_observed(
    init: IMModel,
    exposures: &ExposureTable,
    hp: &Hyperparams,
    mut observe: impl FnMut(usize, &Array2<f64>, &Array2<f64>),
) -> Result<TrainOutcome> {
    hp.validate()?;
    let hp = Hyperparams { lambda: init.lambda(), ..hp.clone() };
    let problem = Problem::compile(&init, exposures)?;
    let mut inf = init.influence().clone();
    let mut sus = init.susceptibility().clone();

    let (mut loss, mut clamped) = problem.value_and_clamped(&inf, &sus, &hp);
    if !loss.is_finite() {
        return Err(Error::Diverged { epoch: 0 });
    }
    let mut trace = vec![TraceRow { epoch: 0, loss, step_size: 0.0 }];
    let mut eta_prev = hp.beta;

    for epoch in 1..=hp.max_epochs {
        let (_, gi, gs) = problem.value_and_gradient(&inf, &sus, &hp);

        let mut stationary = false;
        let (next, step) = match hp.step_rule {
            StepRule::Fixed => {
                let (ni, ns) = (project(&inf, &gi, hp.beta), project(&sus, &gs, hp.beta));
                let (l, c) = problem.value_and_clamped(&ni, &ns, &hp);
                (Some((ni, ns, l, c)), hp.beta)
            }
            StepRule::Armijo => {
                let mut eta = if epoch == 1 { hp.beta } else { (2.0 * eta_prev).min(hp.beta) };
                let mut accepted = None;
                for _ in 0..=MAX_BACKTRACKS {
                    let ni = project(&inf, &gi, eta);
                    let ns = project(&sus, &gs, eta);
                    let predicted = inner_delta(&gi, &inf, &ni) + inner_delta(&gs, &sus, &ns);
                    if predicted == 0.0 {
                        // projected gradient vanished
                        stationary = true;
                        break;
                    }
                    let (l, c) = problem.value_and_clamped(&ni, &ns, &hp);
                    // a success pushed under the log clamp loses its gradient
                    // for good, so such trials are rejected
                    if l.is_finite() && l - loss <= SUFFICIENT_DECREASE * predicted && c <= clamped {
                        accepted = Some((ni, ns, l, c));
                        break;
                    }
                    eta *= SHRINK;
                }
                eta_prev = eta;
                let step = if accepted.is_some() { eta } else { 0.0 };
                (accepted, step)
            }
        };

        match next {
            Some((ni, ns, l, c)) => {
                if !l.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                inf = ni;
                sus = ns;
                loss = l;
                clamped = c;
            }
            None if stationary => {
                trace.push(TraceRow { epoch, loss, step_size: 0.0 });
                observe(epoch, &inf, &sus);
                debug!("epoch {epoch}: stationary point, stopping");
                break;
            }
            None => {}
        }
        trace.push(TraceRow { epoch, loss, step_size: step });
        observe(epoch, &inf, &sus);
        if epoch % 25 == 0 {
            debug!("epoch {epoch}: loss {loss:.6} step {step:.3e}");
        }
    }

    Ok(TrainOutcome { model: init.with_matrices(inf, sus), trace })
}

fn project(x: &Array2<f64>, g: &Array2<f64>, eta: f64) -> Array2<f64> {
    let mut out = x.clone();
    Zip::from(&mut out).and(g).for_each(|o, &gv| *o = (*o - eta * gv).max(0.0));
    out
}

/// `⟨g, new - old⟩`
fn inner_delta(g: &Array2<f64>, old: &Array2<f64>, new: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(g).and(old).and(new).for_each(|&gv, &o, &n| acc += gv * (n - o));
    acc
}
