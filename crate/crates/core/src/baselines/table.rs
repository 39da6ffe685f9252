use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::predictor::Predictor;
use crate::cascades::{extract_exposures, CascadeLog, DiffusionNetwork, ExposureTable};
use crate::error::{Error, Result};
use crate::node::NodeId;

/// One per-edge estimate with the counts behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub probability: f64,
    pub successes: u64,
    pub attempts: u64,
}

/// Per-edge propagation probability estimates keyed by `(u, v)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairwiseTable {
    name: String,
    entries: BTreeMap<(NodeId, NodeId), PairEstimate>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    u: NodeId,
    v: NodeId,
    probability: f64,
    successes: u64,
    attempts: u64,
}

impl PairwiseTable {
    pub fn new(name: impl Into<String>) -> Self {
        PairwiseTable { name: name.into(), entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, u: NodeId, v: NodeId, est: PairEstimate) {
        self.entries.insert((u, v), est);
    }

    pub fn get(&self, u: &NodeId, v: &NodeId) -> Option<&PairEstimate> {
        self.entries.get(&(u.clone(), v.clone()))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&NodeId, &NodeId, &PairEstimate)> + '_ {
        self.entries.iter().map(|((u, v), e)| (u, v, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.name
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for ((u, v), e) in &self.entries {
            wr.serialize(CsvRow {
                u: u.clone(),
                v: v.clone(),
                probability: e.probability,
                successes: e.successes,
                attempts: e.attempts,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(name: impl Into<String>, r: R) -> Result<Self> {
        let mut table = PairwiseTable::new(name);
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: CsvRow = row?;
            if !(0.0..=1.0).contains(&row.probability) {
                return Err(Error::Domain(format!("probability {} outside [0, 1]", row.probability)));
            }
            table.insert(
                row.u,
                row.v,
                PairEstimate { probability: row.probability, successes: row.successes, attempts: row.attempts },
            );
        }
        Ok(table)
    }
}

/// Raw table lookup; pairs without an estimate get 0.
impl Predictor for PairwiseTable {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn pair_prob(&self, u: &NodeId, v: &NodeId) -> Result<f64> {
        Ok(self.get(u, v).map_or(0.0, |e| e.probability))
    }
}

fn ratio(successes: u64, attempts: u64) -> f64 {
    if attempts == 0 {
        0.0
    } else {
        successes as f64 / attempts as f64
    }
}

/// Credited forwards over exposures, per edge.
///
/// A forward credits only its recorded parent; every exposure of `v` while
/// `u` was active (success or failure) is one attempt for `(u, v)`.
pub fn bernoulli_estimator(exposures: &ExposureTable) -> PairwiseTable {
    let mut counts: BTreeMap<(NodeId, NodeId), (u64, u64)> = BTreeMap::new();
    for (v, mode, c) in exposures.iter() {
        for u in mode.members() {
            let e = counts.entry((u.clone(), v.clone())).or_default();
            e.0 += c.choices.get(u).copied().unwrap_or(0);
            e.1 += c.trials();
        }
    }
    let mut table = PairwiseTable::new("BD");
    for ((u, v), (s, a)) in counts {
        table.insert(u, v, PairEstimate { probability: ratio(s, a), successes: s, attempts: a });
    }
    table
}

/// Messages where `v` forwarded after `u` (or crediting `u`), over messages
/// where either endpoint forwarded, for every edge of `net`.
pub fn jaccard_estimator(log: &CascadeLog, net: &DiffusionNetwork) -> PairwiseTable {
    let mut num: HashMap<(usize, usize), u64> = HashMap::new();
    let mut den: HashMap<(usize, usize), u64> = HashMap::new();
    for (_, events) in log.messages() {
        let (events, _) = CascadeLog::first_forwards(events);
        let mut when: HashMap<usize, u64> = HashMap::new();
        for e in &events {
            if let Some(v) = net.index_of(&e.child) {
                when.insert(v, e.time);
            }
        }
        let mut touched = std::collections::HashSet::new();
        for &w in when.keys() {
            touched.extend(net.out_indices(w).iter().map(|&x| (w, x)));
            touched.extend(net.in_indices(w).iter().map(|&x| (x, w)));
        }
        for edge in touched {
            *den.entry(edge).or_default() += 1;
        }
        for e in &events {
            let (Some(parent), Some(v)) = (&e.parent, net.index_of(&e.child)) else { continue };
            let parent = net.index_of(parent);
            for &u in net.in_indices(v) {
                if Some(u) == parent || when.get(&u).is_some_and(|&tu| tu < e.time) {
                    *num.entry((u, v)).or_default() += 1;
                }
            }
        }
    }
    let mut table = PairwiseTable::new("JI");
    for (u, v) in net.edge_indices() {
        let s = num.get(&(u, v)).copied().unwrap_or(0);
        let a = den.get(&(u, v)).copied().unwrap_or(0);
        table.insert(
            net.node(u).clone(),
            net.node(v).clone(),
            PairEstimate { probability: ratio(s, a), successes: s, attempts: a },
        );
    }
    table
}

const EM_FLOOR: f64 = 1e-6;

/// Result of [`em_from_exposures`].
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub table: PairwiseTable,
    pub iterations: usize,
    /// Observed-data log-likelihood before the first and after every update.
    pub log_likelihood: Vec<f64>,
}

/// EM for independent-cascade edge probabilities.
pub fn em_estimator(log: &CascadeLog, net: &DiffusionNetwork, max_iters: usize, tol: f64) -> Result<PairwiseTable> {
    let (exposures, _) = extract_exposures(log, net);
    Ok(em_from_exposures(&exposures, max_iters, tol)?.table)
}

/// EM on pre-extracted exposures.
///
/// With `M⁺(u,v)` the forwards of `v` while `u` was active and `M⁻(u,v)` the
/// messages `v` ignored while `u` was active, each update is
/// `κ ← Σ_{M⁺} κ / P / (|M⁺| + |M⁻|)` where `P = 1 - Π_{u'} (1 - κ_{u'v})` over
/// the active set of that forward. Starts from the Bernoulli ratio, floored
/// at 1e-6 so no edge starts at the absorbing zero.
pub fn em_from_exposures(exposures: &ExposureTable, max_iters: usize, tol: f64) -> Result<EmOutcome> {
    if max_iters == 0 {
        return Err(Error::InvalidConfig("EM needs at least one iteration".into()));
    }
    let bd = bernoulli_estimator(exposures);
    let mut edge_ids: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (u, v, _) in bd.iter() {
        edge_ids.insert((u.clone(), v.clone()), edges.len());
        edges.push((u.clone(), v.clone()));
    }
    let mut plus = vec![0u64; edges.len()];
    let mut minus = vec![0u64; edges.len()];
    let mut success_groups: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut failure_groups: Vec<(Vec<usize>, f64)> = Vec::new();
    for (v, mode, c) in exposures.iter() {
        let ids: Vec<usize> = mode.members().iter().map(|u| edge_ids[&(u.clone(), v.clone())]).collect();
        for &e in &ids {
            plus[e] += c.successes;
            minus[e] += c.failures;
        }
        if c.successes > 0 {
            success_groups.push((ids.clone(), c.successes as f64));
        }
        if c.failures > 0 {
            failure_groups.push((ids, c.failures as f64));
        }
    }

    let mut kappa: Vec<f64> = bd.iter().map(|(_, _, e)| e.probability.max(EM_FLOOR)).collect();
    let ll = |kappa: &[f64]| -> f64 {
        let mut total = 0.0;
        for (ids, n) in &success_groups {
            let miss: f64 = ids.iter().map(|&e| 1.0 - kappa[e]).product();
            total += n * (1.0 - miss).ln();
        }
        for (ids, n) in &failure_groups {
            total += n * ids.iter().map(|&e| (1.0 - kappa[e]).ln()).sum::<f64>();
        }
        total
    };
    let mut trace = vec![ll(&kappa)];
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let mut acc = vec![0.0; edges.len()];
        for (ids, n) in &success_groups {
            let miss: f64 = ids.iter().map(|&e| 1.0 - kappa[e]).product();
            let p = 1.0 - miss;
            if p <= 0.0 {
                continue;
            }
            for &e in ids {
                acc[e] += n * kappa[e] / p;
            }
        }
        let mut delta: f64 = 0.0;
        for e in 0..edges.len() {
            let trials = (plus[e] + minus[e]) as f64;
            let next = if trials > 0.0 { (acc[e] / trials).min(1.0) } else { 0.0 };
            delta = delta.max((next - kappa[e]).abs());
            kappa[e] = next;
        }
        trace.push(ll(&kappa));
        if delta < tol {
            break;
        }
    }

    let mut table = PairwiseTable::new("EM");
    for (e, (u, v)) in edges.into_iter().enumerate() {
        table.insert(
            u,
            v,
            PairEstimate { probability: kappa[e], successes: plus[e], attempts: plus[e] + minus[e] },
        );
    }
    Ok(EmOutcome { table, iterations, log_likelihood: trace })
}
