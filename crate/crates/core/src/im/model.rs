use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::NodeId;

/// Per-individual influence and susceptibility vectors.
///
/// Row `r` of both matrices belongs to `nodes()[r]`. Entries are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct IMModel {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    influence: Array2<f64>,
    susceptibility: Array2<f64>,
    lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    lambda: f64,
    k: usize,
    nodes: Vec<NodeId>,
    #[serde(rename = "I")]
    influence: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    susceptibility: Vec<Vec<f64>>,
}

impl IMModel {
    pub fn new(
        nodes: Vec<NodeId>,
        influence: Array2<f64>,
        susceptibility: Array2<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n = nodes.len();
        if influence.nrows() != n || susceptibility.nrows() != n {
            return Err(Error::Domain(format!(
                "matrix rows ({}, {}) do not match node count {n}",
                influence.nrows(),
                susceptibility.nrows()
            )));
        }
        if influence.ncols() != susceptibility.ncols() {
            return Err(Error::Domain("influence and susceptibility widths differ".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
        }
        if influence.iter().chain(susceptibility.iter()).any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::Domain("model entries must be finite and nonnegative".into()));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, id) in nodes.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate node `{id}` in model")));
            }
        }
        Ok(IMModel { nodes, index, influence, susceptibility, lambda })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn k(&self) -> usize {
        self.influence.ncols()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn influence(&self) -> &Array2<f64> {
        &self.influence
    }

    pub fn susceptibility(&self) -> &Array2<f64> {
        &self.susceptibility
    }

    pub fn row(&self, id: &NodeId) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.clone()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.index.contains_key(id)
    }

    /// `I_u · S_v` by row index.
    pub fn score_idx(&self, u: usize, v: usize) -> f64 {
        dot(self.influence_row(u), self.susceptibility_row(v))
    }

    pub fn score(&self, u: &NodeId, v: &NodeId) -> Result<f64> {
        Ok(self.score_idx(self.row(u)?, self.row(v)?))
    }

    pub fn influence_row(&self, r: usize) -> &[f64] {
        let k = self.k();
        &self.influence.as_slice().expect("standard layout")[r * k..(r + 1) * k]
    }

    pub fn susceptibility_row(&self, r: usize) -> &[f64] {
        let k = self.k();
        &self.susceptibility.as_slice().expect("standard layout")[r * k..(r + 1) * k]
    }

    pub(crate) fn with_matrices(&self, influence: Array2<f64>, susceptibility: Array2<f64>) -> Self {
        debug_assert_eq!(influence.dim(), self.influence.dim());
        IMModel { influence, susceptibility, ..self.clone() }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let doc = ModelJson {
            lambda: self.lambda,
            k: self.k(),
            nodes: self.nodes.clone(),
            influence: self.influence.outer_iter().map(|r| r.to_vec()).collect(),
            susceptibility: self.susceptibility.outer_iter().map(|r| r.to_vec()).collect(),
        };
        serde_json::to_writer(w, &doc)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: ModelJson = serde_json::from_reader(r)?;
        let n = doc.nodes.len();
        let to_matrix = |rows: Vec<Vec<f64>>, what: &str| -> Result<Array2<f64>> {
            if rows.len() != n || rows.iter().any(|r| r.len() != doc.k) {
                return Err(Error::Domain(format!("{what} matrix is not {n}x{}", doc.k)));
            }
            Ok(Array2::from_shape_vec((n, doc.k), rows.into_iter().flatten().collect())
                .expect("shape checked"))
        };
        let influence = to_matrix(doc.influence, "I")?;
        let susceptibility = to_matrix(doc.susceptibility, "S")?;
        IMModel::new(doc.nodes, influence, susceptibility, doc.lambda)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 - exp(-lambda * total_score)`, computed without cancellation.
#[inline]
pub fn prob_from_score(lambda: f64, total_score: f64) -> f64 {
    -(-lambda * total_score).exp_m1()
}

/// Probability that `v` forwards when the nodes in `active` have forwarded.
/// An empty active set gives 0.
pub fn propagation_prob(model: &IMModel, v: &NodeId, active: &[NodeId]) -> Result<f64> {
    let vr = model.row(v)?;
    let mut total = 0.0;
    for u in active {
        total += model.score_idx(model.row(u)?, vr);
    }
    Ok(prob_from_score(model.lambda, total))
}

/// Softmax over `I_u · S_v` for the members of `active`, in input order.
pub fn choice_distribution(model: &IMModel, v: &NodeId, active: &[NodeId]) -> Result<Vec<(NodeId, f64)>> {
    if active.is_empty() {
        return Err(Error::Domain("choice distribution over an empty active set".into()));
    }
    let vr = model.row(v)?;
    let scores = active
        .iter()
        .map(|u| Ok(model.score_idx(model.row(u)?, vr)))
        .collect::<Result<Vec<f64>>>()?;
    let probs = softmax(&scores);
    Ok(active.iter().cloned().zip(probs).collect())
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Members of `active` ordered by `I_u · S_v` descending, ties by id.
pub fn rank_influencers(model: &IMModel, v: &NodeId, active: &[NodeId]) -> Result<Vec<NodeId>> {
    if active.is_empty() {
        return Err(Error::Domain("ranking an empty active set".into()));
    }
    let vr = model.row(v)?;
    let mut scored = active
        .iter()
        .map(|u| Ok((model.score_idx(model.row(u)?, vr), u.clone())))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Ok(scored.into_iter().map(|(_, u)| u).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn ids(v: &[&str]) -> Vec<NodeId> {
        v.iter().map(|&s| s.into()).collect()
    }

    /// Nodes a, b, c, v with scalar (k = 1) factors.
    fn toy(inf: [f64; 3], sus_v: f64, lambda: f64) -> IMModel {
        IMModel::new(
            ids(&["a", "b", "c", "v"]),
            array![[inf[0]], [inf[1]], [inf[2]], [0.0]],
            array![[0.0], [0.0], [0.0], [sus_v]],
            lambda,
        )
        .unwrap()
    }

    #[test]
    fn empty_active_set_is_zero() {
        let m = toy([1.0, 1.0, 1.0], 1.0, 0.01);
        assert_eq!(propagation_prob(&m, &"v".into(), &[]).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_single_influencer() {
        let m = toy([10.0, 0.0, 0.0], 10.0, 0.01);
        let p = propagation_prob(&m, &"v".into(), &ids(&["a"])).unwrap();
        assert_abs_diff_eq!(p, 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(p, 0.63212, epsilon = 1e-5);
    }

    #[test]
    fn exponent_is_additive() {
        let m = toy([1.5, 1.5, 3.0], 2.0, 0.1);
        let two = propagation_prob(&m, &"v".into(), &ids(&["a", "b"])).unwrap();
        let one = propagation_prob(&m, &"v".into(), &ids(&["c"])).unwrap();
        assert_abs_diff_eq!(two, one, epsilon = 1e-15);
    }

    #[test]
    fn unknown_node_is_an_error() {
        let m = toy([1.0, 1.0, 1.0], 1.0, 0.01);
        assert!(matches!(
            propagation_prob(&m, &"zz".into(), &[]),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn choice_examples() {
        let m = toy([1.0, 1.0, 0.0], 1.0, 0.01);
        let single = choice_distribution(&m, &"v".into(), &ids(&["a"])).unwrap();
        assert_eq!(single[0].1, 1.0);
        let even = choice_distribution(&m, &"v".into(), &ids(&["a", "b"])).unwrap();
        assert_abs_diff_eq!(even[0].1, 0.5, epsilon = 1e-15);
        let m = toy([std::f64::consts::LN_2, 0.0, 0.0], 1.0, 0.01);
        let d = choice_distribution(&m, &"v".into(), &ids(&["a", "b"])).unwrap();
        assert_abs_diff_eq!(d[0].1, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1].1, 1.0 / 3.0, epsilon = 1e-15);
        assert!(choice_distribution(&m, &"v".into(), &[]).is_err());
    }

    #[test]
    fn ranking_order_and_ties() {
        let m = toy([1.0, 3.0, 1.0], 1.0, 0.01);
        assert_eq!(rank_influencers(&m, &"v".into(), &ids(&["a", "b"])).unwrap(), ids(&["b", "a"]));
        assert_eq!(rank_influencers(&m, &"v".into(), &ids(&["c", "a"])).unwrap(), ids(&["a", "c"]));
    }

    #[test]
    fn json_round_trip() {
        let m = toy([0.25, 0.5, 1.0], 0.75, 0.02);
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"lambda":0.02,"k":1,"nodes":["a","b","c","v"],"I":[[0.25]"#));
        assert_eq!(IMModel::read_json(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn rejects_negative_entries() {
        let r = IMModel::new(ids(&["a"]), array![[-0.1]], array![[0.0]], 0.01);
        assert!(r.is_err());
    }
}
