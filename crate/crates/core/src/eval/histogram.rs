use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::im::IMModel;

/// How a node's k-dimensional vector is reduced to one scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl Norm {
    fn apply(self, row: &[f64]) -> f64 {
        match self {
            Norm::L1 => row.iter().map(|x| x.abs()).sum(),
            Norm::L2 => row.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

/// Joint distribution of scalar influence (x) and susceptibility (y).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts[[x_bin, y_bin]]`
    pub counts: Array2<u64>,
    pub max_influence: f64,
    pub max_susceptibility: f64,
}

#[derive(Serialize)]
struct Cell {
    x_bin: usize,
    y_bin: usize,
    count: u64,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn bins(&self) -> usize {
        self.counts.nrows()
    }

    /// Every cell, including empty ones, row-major in `(x_bin, y_bin)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for ((x_bin, y_bin), &count) in self.counts.indexed_iter() {
            wr.serialize(Cell { x_bin, y_bin, count })?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Equal-width `bins × bins` histogram over `[0, max]` on each axis; the
/// maximum itself falls in the last bin.
pub fn influence_susceptibility_histogram(model: &IMModel, bins: usize, norm: Norm) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin".into()));
    }
    let n = model.node_count();
    let xs: Vec<f64> = (0..n).map(|r| norm.apply(model.influence_row(r))).collect();
    let ys: Vec<f64> = (0..n).map(|r| norm.apply(model.susceptibility_row(r))).collect();
    let max_x = xs.iter().copied().fold(0.0, f64::max);
    let max_y = ys.iter().copied().fold(0.0, f64::max);
    let bin = |value: f64, max: f64| -> usize {
        if max <= 0.0 {
            0
        } else {
            ((value / max * bins as f64) as usize).min(bins - 1)
        }
    };
    let mut counts = Array2::zeros((bins, bins));
    for (x, y) in xs.iter().zip(&ys) {
        counts[[bin(*x, max_x), bin(*y, max_y)]] += 1;
    }
    Ok(Histogram { counts, max_influence: max_x, max_susceptibility: max_y })
}
