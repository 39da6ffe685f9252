use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::log::CascadeLog;
use crate::error::{Error, Result};
use crate::node::NodeId;

/// Directed graph of observed propagation links.
///
/// Nodes are stored sorted, so index order coincides with [`NodeId`] order.
/// `in_neighbors(v)` is the set of potential influencers of `v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffusionNetwork {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    in_adj: Vec<Vec<usize>>,
    out_adj: Vec<Vec<usize>>,
    edge_count: usize,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    nodes: Vec<NodeId>,
    edges: Vec<(NodeId, NodeId)>,
}

impl DiffusionNetwork {
    /// Builds a network from a node list and directed edges. Endpoints missing
    /// from `nodes` are added; duplicate edges collapse.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Self {
        let edges: BTreeSet<(NodeId, NodeId)> = edges.into_iter().collect();
        let mut all: BTreeSet<NodeId> = nodes.into_iter().collect();
        for (u, v) in &edges {
            all.insert(u.clone());
            all.insert(v.clone());
        }
        let nodes: Vec<NodeId> = all.into_iter().collect();
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let mut in_adj = vec![Vec::new(); nodes.len()];
        let mut out_adj = vec![Vec::new(); nodes.len()];
        for (u, v) in &edges {
            let (ui, vi) = (index[u], index[v]);
            out_adj[ui].push(vi);
            in_adj[vi].push(ui);
        }
        for list in in_adj.iter_mut().chain(out_adj.iter_mut()) {
            list.sort_unstable();
        }
        DiffusionNetwork { nodes, index, in_adj, out_adj, edge_count: edges.len() }
    }

    pub fn empty() -> Self {
        Self::from_edges([], [])
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn index_of(&self, id: &NodeId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node(&self, idx: usize) -> &NodeId {
        &self.nodes[idx]
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    pub fn in_indices(&self, idx: usize) -> &[usize] {
        &self.in_adj[idx]
    }

    pub fn out_indices(&self, idx: usize) -> &[usize] {
        &self.out_adj[idx]
    }

    pub fn has_edge_idx(&self, u: usize, v: usize) -> bool {
        self.in_adj[v].binary_search(&u).is_ok()
    }

    pub fn has_edge(&self, u: &NodeId, v: &NodeId) -> bool {
        match (self.index_of(u), self.index_of(v)) {
            (Some(u), Some(v)) => self.has_edge_idx(u, v),
            _ => false,
        }
    }

    pub fn in_neighbors<'a>(&'a self, v: &NodeId) -> impl Iterator<Item = &'a NodeId> + 'a {
        let list: &[usize] = self.index_of(v).map_or(&[], |i| &self.in_adj[i]);
        list.iter().map(move |&u| &self.nodes[u])
    }

    /// Edges in `(source, target)` order, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(move |(u, outs)| outs.iter().map(move |&v| (&self.nodes[u], &self.nodes[v])))
    }

    pub fn edge_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj.iter().enumerate().flat_map(|(u, outs)| outs.iter().map(move |&v| (u, v)))
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        self.in_adj.iter().map(Vec::len).collect()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        self.out_adj.iter().map(Vec::len).collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let doc = NetworkJson {
            nodes: self.nodes.clone(),
            edges: self.edges().map(|(u, v)| (u.clone(), v.clone())).collect(),
        };
        serde_json::to_writer(w, &doc)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: NetworkJson = serde_json::from_reader(r)?;
        if let Some((u, _)) = doc.edges.iter().find(|(u, v)| u == v) {
            return Err(Error::Domain(format!("self-loop on `{u}` in network file")));
        }
        Ok(Self::from_edges(doc.nodes, doc.edges))
    }
}

/// Nodes are every id seen as parent or child; edges are the distinct
/// `(parent, child)` pairs.
pub fn build_diffusion_network(log: &CascadeLog) -> DiffusionNetwork {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (_, events) in log.messages() {
        for e in events {
            nodes.push(e.child.clone());
            if let Some(p) = &e.parent {
                nodes.push(p.clone());
                edges.push((p.clone(), e.child.clone()));
            }
        }
    }
    DiffusionNetwork::from_edges(nodes, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascades::CascadeEvent;

    #[test]
    fn dedups_edges() {
        let mut log = CascadeLog::new();
        log.insert(
            "m",
            [CascadeEvent::root("a", 0), CascadeEvent::forward("a", "b", 1), CascadeEvent::forward("a", "b", 2)],
        );
        let net = build_diffusion_network(&log);
        assert_eq!(net.nodes(), &[NodeId::from("a"), NodeId::from("b")]);
        assert_eq!(net.edge_count(), 1);
        assert!(net.has_edge(&"a".into(), &"b".into()));
    }

    #[test]
    fn empty_log_empty_network() {
        let net = build_diffusion_network(&CascadeLog::new());
        assert_eq!(net.node_count(), 0);
        assert_eq!(net.edge_count(), 0);
    }

    #[test]
    fn direction_preserved() {
        let mut log = CascadeLog::new();
        log.insert("m1", [CascadeEvent::root("a", 0), CascadeEvent::forward("a", "b", 1)]);
        log.insert("m2", [CascadeEvent::root("b", 0), CascadeEvent::forward("b", "a", 1)]);
        let net = build_diffusion_network(&log);
        assert_eq!(net.edge_count(), 2);
        assert!(net.has_edge(&"a".into(), &"b".into()));
        assert!(net.has_edge(&"b".into(), &"a".into()));
        let ins: Vec<_> = net.in_neighbors(&"b".into()).cloned().collect();
        assert_eq!(ins, vec![NodeId::from("a")]);
    }

    #[test]
    fn json_round_trip() {
        let net = DiffusionNetwork::from_edges(
            ["z".into()],
            [("a".into(), "b".into()), ("b".into(), "c".into())],
        );
        let mut buf = Vec::new();
        net.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, r#"{"nodes":["a","b","c","z"],"edges":[["a","b"],["b","c"]]}"#);
        assert_eq!(DiffusionNetwork::read_json(buf.as_slice()).unwrap(), net);
    }
}
