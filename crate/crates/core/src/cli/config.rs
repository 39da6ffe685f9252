use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::PmfConfig;
use crate::error::{Error, Result};
use crate::eval::Norm;
use crate::im::Hyperparams;
use crate::synth::SynthConfig;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_ENV: &str = "INFSUS_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Global seed; every random stream is derived from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub grid: GridConfig,
    pub train: Hyperparams,
    /// Replace `train.mu_i` / `train.mu_s` by the mean that reproduces the
    /// pooled forwarding rate of the training exposures.
    pub empirical_prior_mean: bool,
    pub baselines: BaselineConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            grid: GridConfig::default(),
            train: Hyperparams::default(),
            empirical_prior_mean: true,
            baselines: BaselineConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataConfig {
    Synthetic(SyntheticData),
    Cascades(CascadeData),
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic(SyntheticData::default())
    }
}

/// Which network the synthetic exposures are extracted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticNetwork {
    /// The network the cascades were simulated on.
    #[default]
    Generating,
    /// The diffusion network inferred from observed forwards, as for real data.
    Inferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticData {
    pub synth: SynthConfig,
    /// Held-out cascades simulated on each evaluation network.
    pub test_cascades: usize,
    /// Edge swaps per edge when shuffling the network.
    pub swaps_per_edge: usize,
    pub network: SyntheticNetwork,
}

impl Default for SyntheticData {
    fn default() -> Self {
        SyntheticData { synth: SynthConfig::default(), test_cascades: 100_000, swaps_per_edge: 10, network: SyntheticNetwork::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeData {
    /// JSONL cascade files, merged in order.
    pub files: Vec<PathBuf>,
    /// Window boundaries; window `i` is `[b_i, b_{i+1})`.
    pub boundaries: Vec<u64>,
    /// Drop pairs with fewer forwards than this over the whole log.
    pub prune_min_total: usize,
    /// Drop pairs with more forwards than this inside one message.
    pub prune_max_per_message: usize,
}

impl Default for CascadeData {
    fn default() -> Self {
        CascadeData { files: Vec::new(), boundaries: Vec::new(), prune_min_total: 50, prune_max_per_message: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub k: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            alpha: (0..=10).map(|i| i as f64 / 10.0).collect(),
            lambda: vec![0.001, 0.005, 0.01, 0.015, 0.02],
            k: vec![10, 20, 30, 40],
        }
    }
}

impl GridConfig {
    /// Every `(alpha, lambda, k)` cell.
    pub fn cells(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.alpha.len() * self.lambda.len() * self.k.len());
        for &a in &self.alpha {
            for &l in &self.lambda {
                for &k in &self.k {
                    out.push((a, l, k));
                }
            }
        }
        out
    }
}

/// A comparison method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "im")]
    Im,
    #[serde(rename = "em+mf")]
    EmMf,
    #[serde(rename = "bd+mf")]
    BdMf,
    #[serde(rename = "ji+mf")]
    JiMf,
    #[serde(rename = "em")]
    Em,
    #[serde(rename = "bd")]
    Bd,
    #[serde(rename = "ji")]
    Ji,
    /// One row per configured uniform probability.
    #[serde(rename = "un")]
    Un,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "im" => Method::Im,
            "em+mf" => Method::EmMf,
            "bd+mf" => Method::BdMf,
            "ji+mf" => Method::JiMf,
            "em" => Method::Em,
            "bd" => Method::Bd,
            "ji" => Method::Ji,
            "un" => Method::Un,
            other => return Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub methods: Vec<Method>,
    pub uniform_p: Vec<f64>,
    pub em_max_iters: usize,
    pub em_tol: f64,
    pub mf: PmfConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            methods: vec![Method::Im, Method::EmMf, Method::BdMf, Method::JiMf, Method::Un],
            uniform_p: vec![0.1, 0.01, 0.001],
            em_max_iters: 200,
            em_tol: 1e-8,
            mf: PmfConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Minimum observations for a ratio ground-truth entry (real data).
    pub min_support: u64,
    pub histogram_bins: usize,
    pub histogram_norm: Norm,
    /// Random-matrix pairs behind the restart-robustness reference.
    pub random_matrix_reps: usize,
    /// Random rankings behind the sampled random-guess R-MRR.
    pub random_guess_reps: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { min_support: 1, histogram_bins: 20, histogram_norm: Norm::L1, random_matrix_reps: 10, random_guess_reps: 100 }
    }
}

/// Named end-to-end synthetic setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 300 nodes, k = 10, 5000 training cascades.
    SyntheticSmall,
    /// 1000 nodes, k = 20, 20000 training cascades.
    SyntheticPaper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic-small" => Ok(Profile::SyntheticSmall),
            "synthetic-paper" => Ok(Profile::SyntheticPaper),
            other => Err(Error::InvalidConfig(format!("unknown profile `{other}`"))),
        }
    }
}

impl Profile {
    pub fn config(self) -> ExperimentConfig {
        let (n_nodes, k, n_cascades) = match self {
            Profile::SyntheticSmall => (300, 10, 5_000),
            Profile::SyntheticPaper => (1_000, 20, 20_000),
        };
        let mut cfg = ExperimentConfig::default();
        cfg.data = DataConfig::Synthetic(SyntheticData {
            synth: SynthConfig { n_nodes, k, n_cascades, ..SynthConfig::default() },
            ..SyntheticData::default()
        });
        cfg.train.k = k;
        cfg.baselines.mf.rank = k;
        cfg
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.grid.alpha.is_empty() || self.grid.lambda.is_empty() || self.grid.k.is_empty() {
            return bad("grid lists must be nonempty".into());
        }
        self.train.validate()?;
        for &a in &self.grid.alpha {
            Hyperparams { alpha: a, ..self.train.clone() }.validate()?;
        }
        for &l in &self.grid.lambda {
            Hyperparams { lambda: l, ..self.train.clone() }.validate()?;
        }
        for &k in &self.grid.k {
            Hyperparams { k, ..self.train.clone() }.validate()?;
        }
        if self.baselines.uniform_p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("uniform probabilities must lie in [0, 1]".into());
        }
        if self.eval.min_support == 0 || self.eval.histogram_bins == 0 {
            return bad("min_support and histogram_bins must be positive".into());
        }
        match &self.data {
            DataConfig::Synthetic(s) => s.synth.validate()?,
            DataConfig::Cascades(c) => {
                if c.files.is_empty() {
                    return bad("no cascade files configured".into());
                }
                if let Some(missing) = c.files.iter().find(|f| !f.exists()) {
                    return bad(format!("cascade file {} does not exist", missing.display()));
                }
                if c.boundaries.len() < 3 {
                    return bad("need at least two time windows (three boundaries)".into());
                }
            }
        }
        Ok(())
    }

    /// Output directory after applying [`OUTPUT_ENV`].
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn profiles_round_trip() {
        for p in [Profile::SyntheticSmall, Profile::SyntheticPaper] {
            let cfg = p.config();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        }
    }

    #[test]
    fn cascade_source_round_trips() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.data = DataConfig::Cascades(CascadeData {
            files: vec![file.path().to_path_buf()],
            boundaries: vec![0, 10, 20],
            ..CascadeData::default()
        });
        cfg.baselines.methods = vec![Method::Im, Method::Bd];
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 5\n[train]\nalpha = 0.5\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.train.alpha, 0.5);
        assert_eq!(cfg.grid, GridConfig::default());
    }

    #[test]
    fn grid_defaults() {
        let g = GridConfig::default();
        assert_eq!(g.alpha.len(), 11);
        assert_eq!(g.alpha[9], 0.9);
        assert_eq!(g.cells().len(), 11 * 5 * 4);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("[grid]\nalpha = []\n").is_err());
        assert!(ExperimentConfig::from_toml("[train]\nalpha = 2.0\n").is_err());
        let missing = "[data]\nsource = \"cascades\"\nfiles = [\"/definitely/missing.jsonl\"]\nboundaries = [0, 1, 2]\n";
        assert!(matches!(ExperimentConfig::from_toml(missing), Err(Error::InvalidConfig(_))));
        assert_eq!(ExperimentConfig::from_toml("seed = \"x\"").unwrap_err().exit_code(), 2);
    }
}
