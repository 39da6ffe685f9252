use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::log::{CascadeEvent, CascadeLog};
use super::network::DiffusionNetwork;
use crate::node::NodeId;

/// A nonempty set of influencers that were active when a node was exposed.
/// Members are kept sorted and unique so equal sets compare and hash equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssembleMode(Vec<NodeId>);

impl AssembleMode {
    /// Returns `None` for an empty member set.
    pub fn new(members: impl IntoIterator<Item = NodeId>) -> Option<Self> {
        let mut v: Vec<NodeId> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        (!v.is_empty()).then_some(AssembleMode(v))
    }

    pub fn singleton(u: NodeId) -> Self {
        AssembleMode(vec![u])
    }

    pub fn members(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, u: &NodeId) -> bool {
        self.0.binary_search(u).is_ok()
    }

    // Assumes `members` is already sorted and unique.
    fn from_sorted(members: Vec<NodeId>) -> Self {
        debug_assert!(!members.is_empty() && members.windows(2).all(|w| w[0] < w[1]));
        AssembleMode(members)
    }
}

impl fmt::Debug for AssembleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.0).finish()
    }
}

impl fmt::Display for AssembleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            f.write_str(m.as_str())?;
        }
        Ok(())
    }
}

/// Counts for one `(v, mode)` key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounts {
    /// Forwards by `v` under this mode.
    pub successes: u64,
    /// Messages `v` saw under this mode (at cascade end) and did not forward.
    pub failures: u64,
    /// Forwards split by recorded parent. Sums to `successes`.
    pub choices: BTreeMap<NodeId, u64>,
}

impl ModeCounts {
    pub fn trials(&self) -> u64 {
        self.successes + self.failures
    }

    fn merge(&mut self, other: &ModeCounts) {
        self.successes += other.successes;
        self.failures += other.failures;
        for (u, c) in &other.choices {
            *self.choices.entry(u.clone()).or_default() += c;
        }
    }
}

pub type ExposureKey = (NodeId, AssembleMode);

/// Aggregated training statistics keyed by `(v, assemble mode)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExposureTable {
    entries: BTreeMap<ExposureKey, ModeCounts>,
}

impl ExposureTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one forward by `v` under `mode`, crediting `parent`.
    ///
    /// # Panics
    /// If `parent` is not a member of `mode`.
    pub fn record_success(&mut self, v: NodeId, mode: AssembleMode, parent: NodeId) {
        self.add_successes(v, mode, parent, 1);
    }

    pub fn add_successes(&mut self, v: NodeId, mode: AssembleMode, parent: NodeId, count: u64) {
        assert!(mode.contains(&parent), "credited parent must belong to the mode");
        let e = self.entries.entry((v, mode)).or_default();
        e.successes += count;
        *e.choices.entry(parent).or_default() += count;
    }

    pub fn record_failure(&mut self, v: NodeId, mode: AssembleMode) {
        self.add_failures(v, mode, 1);
    }

    pub fn add_failures(&mut self, v: NodeId, mode: AssembleMode, count: u64) {
        self.entries.entry((v, mode)).or_default().failures += count;
    }

    pub fn merge(&mut self, other: &ExposureTable) {
        for (k, c) in &other.entries {
            match self.entries.get_mut(k) {
                Some(mine) => mine.merge(c),
                None => {
                    self.entries.insert(k.clone(), c.clone());
                }
            }
        }
    }

    pub fn get(&self, v: &NodeId, mode: &AssembleMode) -> Option<&ModeCounts> {
        self.entries.get(&(v.clone(), mode.clone()))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&NodeId, &AssembleMode, &ModeCounts)> + '_ {
        self.entries.iter().map(|((v, x), c)| (v, x, c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_successes(&self) -> u64 {
        self.entries.values().map(|c| c.successes).sum()
    }

    pub fn total_failures(&self) -> u64 {
        self.entries.values().map(|c| c.failures).sum()
    }

    /// Every node appearing as a target or as a mode member.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for (v, x) in self.entries.keys() {
            out.insert(v.clone());
            out.extend(x.members().iter().cloned());
        }
        out
    }
}

/// Events that could not be turned into exposure records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Later forwards of a node that already forwarded the same message.
    pub duplicate_events: u64,
    /// Forwards whose recorded parent is not an in-neighbor in the network.
    pub skipped_events: u64,
    /// Events mentioning a node absent from the network.
    pub unknown_node_events: u64,
}

impl Diagnostics {
    fn merge(&mut self, o: &Diagnostics) {
        self.duplicate_events += o.duplicate_events;
        self.skipped_events += o.skipped_events;
        self.unknown_node_events += o.unknown_node_events;
    }
}

/// Turns a log into per-`(v, mode)` success, failure and choice counts.
///
/// * A forward `(u, v, t_v)` is a success for `v` under the mode made of the
///   in-neighbors of `v` that forwarded strictly before `t_v`, plus `u`.
/// * A node that never forwarded a message but has at least one in-neighbor
///   that did records one failure under the set of all such in-neighbors.
/// * Roots contribute nothing.
pub fn extract_exposures(log: &CascadeLog, net: &DiffusionNetwork) -> (ExposureTable, Diagnostics) {
    let messages: Vec<&[CascadeEvent]> = log.messages().map(|(_, e)| e).collect();
    messages
        .par_iter()
        .map(|events| extract_message(events, net))
        .reduce(
            || (ExposureTable::new(), Diagnostics::default()),
            |(mut t, mut d), (t2, d2)| {
                t.merge(&t2);
                d.merge(&d2);
                (t, d)
            },
        )
}

fn extract_message(events: &[CascadeEvent], net: &DiffusionNetwork) -> (ExposureTable, Diagnostics) {
    let mut table = ExposureTable::new();
    let mut diag = Diagnostics::default();
    let (events, dropped) = CascadeLog::first_forwards(events);
    diag.duplicate_events += dropped as u64;

    // U^m restricted to nodes the network knows about
    let mut active: HashMap<usize, u64> = HashMap::with_capacity(events.len());
    for e in &events {
        match net.index_of(&e.child) {
            Some(v) => {
                active.insert(v, e.time);
            }
            None => diag.unknown_node_events += 1,
        }
    }

    for e in &events {
        let Some(parent) = &e.parent else { continue };
        let (Some(u), Some(v)) = (net.index_of(parent), net.index_of(&e.child)) else {
            if net.contains_node(&e.child) {
                diag.unknown_node_events += 1;
            }
            continue;
        };
        if !net.has_edge_idx(u, v) {
            diag.skipped_events += 1;
            continue;
        }
        let members: Vec<NodeId> = net
            .in_indices(v)
            .iter()
            .filter(|&&w| w == u || active.get(&w).is_some_and(|&tw| tw < e.time))
            .map(|&w| net.node(w).clone())
            .collect();
        table.record_success(e.child.clone(), AssembleMode::from_sorted(members), parent.clone());
    }

    let mut exposed: BTreeSet<usize> = BTreeSet::new();
    for &w in active.keys() {
        exposed.extend(net.out_indices(w).iter().copied().filter(|v| !active.contains_key(v)));
    }
    for v in exposed {
        let members: Vec<NodeId> = net
            .in_indices(v)
            .iter()
            .filter(|w| active.contains_key(w))
            .map(|&w| net.node(w).clone())
            .collect();
        table.record_failure(net.node(v).clone(), AssembleMode::from_sorted(members));
    }
    (table, diag)
}
