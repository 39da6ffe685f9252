use std::collections::{BTreeSet, HashMap};

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::predictor::Predictor;
use super::table::PairwiseTable;
use crate::error::{Error, Result};
use crate::node::NodeId;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmfConfig {
    pub rank: usize,
    pub reg: f64,
    pub iters: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for PmfConfig {
    fn default() -> Self {
        PmfConfig { rank: 20, reg: 0.01, iters: 500, seed: 0, init_scale: 0.1 }
    }
}

/// Low-rank completion of a pairwise table: `p(u, v) ≈ clamp(U_u · V_v, 0, 1)`.
#[derive(Debug, Clone)]
pub struct PmfPredictor {
    name: String,
    index: HashMap<NodeId, usize>,
    source: Array2<f64>,
    target: Array2<f64>,
    trace: Vec<f64>,
}

impl PmfPredictor {
    /// Loss after initialization and after every accepted step.
    pub fn loss_trace(&self) -> &[f64] {
        &self.trace
    }

    fn raw(&self, u: &NodeId, v: &NodeId) -> f64 {
        match (self.index.get(u), self.index.get(v)) {
            (Some(&i), Some(&j)) => self.source.row(i).dot(&self.target.row(j)),
            // no factors learned for a node the table never mentions
            _ => 0.0,
        }
    }
}

impl Predictor for PmfPredictor {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn pair_prob(&self, u: &NodeId, v: &NodeId) -> Result<f64> {
        Ok(self.raw(u, v).clamp(0.0, 1.0))
    }
}

struct Observed {
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl Observed {
    fn loss(&self, u: &Array2<f64>, v: &Array2<f64>, reg: f64) -> f64 {
        let mut total = 0.0;
        for ((&i, &j), &p) in self.rows.iter().zip(&self.cols).zip(&self.values) {
            let r = p - u.row(i).dot(&v.row(j));
            total += r * r;
        }
        total + reg * (u.iter().map(|x| x * x).sum::<f64>() + v.iter().map(|x| x * x).sum::<f64>())
    }

    fn gradient(&self, u: &Array2<f64>, v: &Array2<f64>, reg: f64) -> (Array2<f64>, Array2<f64>) {
        let mut gu = u * (2.0 * reg);
        let mut gv = v * (2.0 * reg);
        for ((&i, &j), &p) in self.rows.iter().zip(&self.cols).zip(&self.values) {
            let r = p - u.row(i).dot(&v.row(j));
            let ui: Array1<f64> = u.row(i).to_owned();
            gu.row_mut(i).scaled_add(-2.0 * r, &v.row(j));
            gv.row_mut(j).scaled_add(-2.0 * r, &ui);
        }
        (gu, gv)
    }
}

/// Fits the factors by gradient descent with backtracking line search
/// (sufficient decrease 0.01, halving, at most 20 backtracks per step).
pub fn pmf_complete(table: &PairwiseTable, cfg: &PmfConfig) -> Result<PmfPredictor> {
    if cfg.rank == 0 {
        return Err(Error::InvalidConfig("MF rank must be at least 1".into()));
    }
    if !(cfg.reg >= 0.0) {
        return Err(Error::InvalidConfig("MF regularization must be nonnegative".into()));
    }
    let nodes: BTreeSet<&NodeId> = table.iter().flat_map(|(u, v, _)| [u, v]).collect();
    let index: HashMap<NodeId, usize> = nodes.into_iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    let n = index.len();
    let obs = Observed {
        rows: table.iter().map(|(u, _, _)| index[u]).collect(),
        cols: table.iter().map(|(_, v, _)| index[v]).collect(),
        values: table.iter().map(|(_, _, e)| e.probability).collect(),
    };

    let mut rng = seed::rng(cfg.seed, "pmf-init");
    let mut draw = |_: (usize, usize)| cfg.init_scale * (1.0 - rng.gen::<f64>());
    let mut u = Array2::from_shape_fn((n, cfg.rank), &mut draw);
    let mut v = Array2::from_shape_fn((n, cfg.rank), &mut draw);

    let mut loss = obs.loss(&u, &v, cfg.reg);
    let mut trace = vec![loss];
    let mut eta: f64 = 1.0;
    for _ in 0..cfg.iters {
        let (gu, gv) = obs.gradient(&u, &v, cfg.reg);
        let sq = gu.iter().chain(gv.iter()).map(|g| g * g).sum::<f64>();
        if sq == 0.0 {
            break;
        }
        eta = (eta * 2.0).min(1.0);
        let mut accepted = false;
        for _ in 0..=20 {
            let nu = &u - &(&gu * eta);
            let nv = &v - &(&gv * eta);
            let l = obs.loss(&nu, &nv, cfg.reg);
            if l <= loss - 0.01 * eta * sq {
                u = nu;
                v = nv;
                loss = l;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if accepted {
            trace.push(loss);
        }
    }
    Ok(PmfPredictor { name: format!("{}+MF", table.label()), index, source: u, target: v, trace })
}
