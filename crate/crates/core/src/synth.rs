//! Synthetic ground truth: scale-free networks grown by preferential
//! attachment, random influence/susceptibility models, discrete-round
//! cascade simulation and degree-preserving rewiring.

use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascades::{CascadeEvent, CascadeLog, DiffusionNetwork};
use crate::error::{Error, Result};
use crate::im::{prob_from_score, IMModel};
use crate::node::NodeId;
use crate::seed;

/// Direction given to each preferential-attachment edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Existing node influences the newcomer.
    #[default]
    OldToNew,
    NewToOld,
}

/// How the simulator attributes a forward to one of the active influencers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParentChoice {
    /// Softmax over `I_u · S_v` among active in-neighbors.
    #[default]
    PlackettLuce,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_nodes: usize,
    /// Edges added per arriving node.
    pub edges_per_node: usize,
    pub k: usize,
    pub lambda: f64,
    pub influence_range: (f64, f64),
    pub susceptibility_range: (f64, f64),
    pub n_cascades: usize,
    pub n_sources: usize,
    pub seed: u64,
    /// Let an exposed node flip again when new in-neighbors become active.
    pub retry_exposures: bool,
    pub parent_choice: ParentChoice,
    pub orientation: Orientation,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_nodes: 1000,
            edges_per_node: 5,
            k: 20,
            lambda: 0.01,
            influence_range: (0.0, 0.5),
            susceptibility_range: (0.0, 1.5),
            n_cascades: 20_000,
            n_sources: 100,
            seed: 0,
            retry_exposures: true,
            parent_choice: ParentChoice::PlackettLuce,
            orientation: Orientation::OldToNew,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_nodes == 0 || self.edges_per_node == 0 || self.k == 0 || self.n_sources == 0 {
            return bad("node count, edges per node, k and source count must be positive");
        }
        if self.n_nodes <= self.edges_per_node {
            return bad("n_nodes must exceed edges_per_node");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        for (lo, hi) in [self.influence_range, self.susceptibility_range] {
            if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
                return bad("ranges must satisfy 0 <= lo <= hi");
            }
        }
        Ok(())
    }
}

/// `n0000`, `n0001`, ...: zero-padded so lexicographic order is numeric order.
pub fn node_names(n: usize) -> Vec<NodeId> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| NodeId::from(format!("n{i:0width$}"))).collect()
}

/// Directed Barabási–Albert graph.
///
/// Starts from a complete graph on `m + 1` nodes (edges from lower to higher
/// index), then each new node links to `m` distinct existing nodes chosen
/// with probability proportional to their total degree. Yields
/// `m (m + 1) / 2 + m (n - m - 1)` edges.
pub fn generate_ba_network(n: usize, m: usize, seed: u64, orientation: Orientation) -> Result<DiffusionNetwork> {
    if m == 0 || n <= m {
        return Err(Error::InvalidConfig(format!("preferential attachment needs n > m >= 1 (n={n}, m={m})")));
    }
    let names = node_names(n);
    let mut rng = seed::rng(seed, "ba-network");
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m * n);
    // each node appears once per incident edge
    let mut degree_pool: Vec<usize> = Vec::with_capacity(2 * m * n);
    for j in 0..=m {
        for i in 0..j {
            edges.push((i, j));
            degree_pool.push(i);
            degree_pool.push(j);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for new in (m + 1)..n {
        targets.clear();
        while targets.len() < m {
            let t = degree_pool[rng.gen_range(0..degree_pool.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &old in &targets {
            edges.push((old, new));
            degree_pool.push(old);
            degree_pool.push(new);
        }
    }
    let oriented = edges.into_iter().map(|(old, new)| match orientation {
        Orientation::OldToNew => (names[old].clone(), names[new].clone()),
        Orientation::NewToOld => (names[new].clone(), names[old].clone()),
    });
    Ok(DiffusionNetwork::from_edges(names.iter().cloned(), oriented))
}

/// Entries of `I` and `S` i.i.d. uniform on the configured ranges.
pub fn sample_ground_truth(cfg: &SynthConfig) -> Result<IMModel> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed, "ground-truth");
    let mut uniform = |(lo, hi): (f64, f64)| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let n = cfg.n_nodes;
    let influence = Array2::from_shape_fn((n, cfg.k), |_| uniform(cfg.influence_range));
    let susceptibility = Array2::from_shape_fn((n, cfg.k), |_| uniform(cfg.susceptibility_range));
    IMModel::new(node_names(n), influence, susceptibility, cfg.lambda)
}

/// The fixed pool of cascade sources for one run.
pub fn source_pool(net: &DiffusionNetwork, n_sources: usize, seed: u64) -> Vec<NodeId> {
    let mut rng = seed::rng(seed, "sources");
    let mut pool: Vec<NodeId> = net.nodes().choose_multiple(&mut rng, n_sources.min(net.node_count())).cloned().collect();
    pool.sort_unstable();
    pool
}

/// Simulates `cfg.n_cascades` cascades with sources drawn from
/// [`source_pool`] and per-cascade streams derived from `cfg.seed`.
pub fn simulate_cascades(net: &DiffusionNetwork, model: &IMModel, cfg: &SynthConfig) -> Result<CascadeLog> {
    let sources = source_pool(net, cfg.n_sources, cfg.seed);
    simulate_from_sources(net, model, cfg, &sources, cfg.seed)
}

/// Discrete synchronous rounds.
///
/// In round `t` every inactive node with newly active in-neighbors flips a
/// coin with probability `1 - exp(-λ Σ_new I_u·S_v)` over those new
/// neighbors; the product over its rounds makes the total activation chance
/// given the final active set exactly the closed-form propagation
/// probability. A node that activates takes time `t + 1` and credits one
/// in-neighbor active at time `≤ t`. Without retries a node only ever flips
/// at its first exposure, over all in-neighbors active at that point.
pub fn simulate_from_sources(
    net: &DiffusionNetwork,
    model: &IMModel,
    cfg: &SynthConfig,
    sources: &[NodeId],
    stream_seed: u64,
) -> Result<CascadeLog> {
    if net.nodes() != model.nodes() {
        return Err(Error::Domain("model nodes must equal network nodes".into()));
    }
    if sources.is_empty() && cfg.n_cascades > 0 {
        return Err(Error::InvalidConfig("no cascade sources".into()));
    }
    let source_rows = sources
        .iter()
        .map(|s| net.index_of(s).ok_or_else(|| Error::UnknownNode(s.clone())))
        .collect::<Result<Vec<_>>>()?;

    let width = cfg.n_cascades.saturating_sub(1).to_string().len();
    let cascades: Vec<(String, Vec<CascadeEvent>)> = (0..cfg.n_cascades)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng_indexed(stream_seed, "cascade", i as u64);
            let src = source_rows[rng.gen_range(0..source_rows.len())];
            (format!("c{i:0width$}"), simulate_one(net, model, cfg, src, &mut rng))
        })
        .collect();

    let mut log = CascadeLog::new();
    for (mid, events) in cascades {
        log.insert(mid, events);
    }
    Ok(log)
}

fn simulate_one(
    net: &DiffusionNetwork,
    model: &IMModel,
    cfg: &SynthConfig,
    source: usize,
    rng: &mut seed::Rng,
) -> Vec<CascadeEvent> {
    let lambda = model.lambda();
    let mut active_at: Vec<Option<u64>> = vec![None; net.node_count()];
    let mut flipped: HashSet<usize> = HashSet::new();
    active_at[source] = Some(0);
    let mut events = vec![CascadeEvent::root(net.node(source).clone(), 0)];
    let mut frontier = vec![source];
    let mut t: u64 = 0;

    while !frontier.is_empty() {
        // BTreeMap keeps the coin order independent of hashing
        let mut pending: BTreeMap<usize, f64> = BTreeMap::new();
        for &u in &frontier {
            for &v in net.out_indices(u) {
                if active_at[v].is_none() && (cfg.retry_exposures || !flipped.contains(&v)) {
                    *pending.entry(v).or_default() += model.score_idx(u, v);
                }
            }
        }
        let mut activated = Vec::new();
        for (v, score) in pending {
            if !cfg.retry_exposures && !flipped.insert(v) {
                continue;
            }
            if rng.gen::<f64>() < prob_from_score(lambda, score) {
                activated.push(v);
            }
        }
        for &v in &activated {
            let parent = choose_parent(net, model, cfg.parent_choice, &active_at, v, t, rng);
            events.push(CascadeEvent::forward(net.node(parent).clone(), net.node(v).clone(), t + 1));
        }
        for &v in &activated {
            active_at[v] = Some(t + 1);
        }
        frontier = activated;
        t += 1;
    }
    events
}

fn choose_parent(
    net: &DiffusionNetwork,
    model: &IMModel,
    rule: ParentChoice,
    active_at: &[Option<u64>],
    v: usize,
    t: u64,
    rng: &mut seed::Rng,
) -> usize {
    let candidates: Vec<usize> = net
        .in_indices(v)
        .iter()
        .copied()
        .filter(|&u| active_at[u].is_some_and(|tu| tu <= t))
        .collect();
    debug_assert!(!candidates.is_empty());
    match rule {
        ParentChoice::Uniform => candidates[rng.gen_range(0..candidates.len())],
        ParentChoice::PlackettLuce => {
            let scores: Vec<f64> = candidates.iter().map(|&u| model.score_idx(u, v)).collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let mut r = rng.gen::<f64>() * weights.iter().sum::<f64>();
            for (&u, w) in candidates.iter().zip(&weights) {
                if r < *w {
                    return u;
                }
                r -= w;
            }
            *candidates.last().expect("nonempty")
        }
    }
}

/// Rewires by `n_swaps` accepted double-edge swaps
/// `(a,b),(c,d) → (a,d),(c,b)`, rejecting self-loops and parallel edges.
/// In- and out-degree of every node is preserved.
pub fn shuffle_network(net: &DiffusionNetwork, seed: u64, n_swaps: usize) -> Result<DiffusionNetwork> {
    if n_swaps == 0 {
        return Ok(net.clone());
    }
    if net.edge_count() < 2 {
        return Err(Error::Domain("shuffling needs at least two edges".into()));
    }
    let mut rng = seed::rng(seed, "shuffle");
    let mut edges: Vec<(usize, usize)> = net.edge_indices().collect();
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let max_attempts = n_swaps.saturating_mul(100).max(10_000);
    let mut done = 0;
    let mut attempts = 0;
    while done < n_swaps {
        if attempts == max_attempts {
            return Err(Error::Domain(format!(
                "only {done} of {n_swaps} swaps possible after {attempts} attempts"
            )));
        }
        attempts += 1;
        let i = rng.gen_range(0..edges.len());
        let j = rng.gen_range(0..edges.len());
        let ((a, b), (c, d)) = (edges[i], edges[j]);
        if i == j || a == d || c == b || present.contains(&(a, d)) || present.contains(&(c, b)) {
            continue;
        }
        present.remove(&(a, b));
        present.remove(&(c, d));
        present.insert((a, d));
        present.insert((c, b));
        edges[i] = (a, d);
        edges[j] = (c, b);
        done += 1;
    }
    Ok(DiffusionNetwork::from_edges(
        net.nodes().iter().cloned(),
        edges.into_iter().map(|(u, v)| (net.node(u).clone(), net.node(v).clone())),
    ))
}
