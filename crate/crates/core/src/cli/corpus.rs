use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::cascades::{
    build_diffusion_network, extract_exposures, parse_cascades, prune, split_by_time, CascadeEvent, CascadeLog,
    Diagnostics, DiffusionNetwork, ExposureTable,
};
use crate::error::{Error, Result};
use crate::im::IMModel;
use crate::node::NodeId;
use crate::seed;
use crate::synth::{
    generate_ba_network, sample_ground_truth, shuffle_network, simulate_from_sources, source_pool, SynthConfig,
};

use super::config::{CascadeData, SyntheticData, SyntheticNetwork};

pub const NETWORK_FILE: &str = "network.json";
pub const TRUTH_FILE: &str = "truth_model.json";
pub const CASCADES_FILE: &str = "cascades.jsonl";
pub const TEST_CASCADES_FILE: &str = "test_cascades.jsonl";
pub const SHUFFLED_NETWORK_FILE: &str = "shuffled_network.json";
pub const SHUFFLED_CASCADES_FILE: &str = "shuffled_cascades.jsonl";

/// Everything one synthetic run needs: the generating network and model,
/// training cascades, and held-out cascades on the original and on a
/// degree-preserving shuffle of it.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub network: DiffusionNetwork,
    pub truth: IMModel,
    pub train_log: CascadeLog,
    pub test_log: CascadeLog,
    pub shuffled_network: DiffusionNetwork,
    pub shuffled_log: CascadeLog,
}

/// Builds the corpus; `seed` replaces `data.synth.seed`.
pub fn build_corpus(data: &SyntheticData, seed: u64) -> Result<SyntheticCorpus> {
    let cfg = SynthConfig { seed, ..data.synth.clone() };
    cfg.validate()?;
    let network = generate_ba_network(cfg.n_nodes, cfg.edges_per_node, seed, cfg.orientation)?;
    let truth = sample_ground_truth(&cfg)?;
    let sources = source_pool(&network, cfg.n_sources, seed);
    let train_log = simulate_from_sources(&network, &truth, &cfg, &sources, seed)?;
    let test_cfg = SynthConfig { n_cascades: data.test_cascades, ..cfg.clone() };
    let test_log = simulate_from_sources(&network, &truth, &test_cfg, &sources, seed::derive(seed, "test-cascades"))?;
    let swaps = data.swaps_per_edge * network.edge_count();
    let shuffled_network = shuffle_network(&network, seed::derive(seed, "shuffle"), swaps)?;
    let shuffled_log =
        simulate_from_sources(&shuffled_network, &truth, &test_cfg, &sources, seed::derive(seed, "shuffled-cascades"))?;
    Ok(SyntheticCorpus { network, truth, train_log, test_log, shuffled_network, shuffled_log })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    let f = File::open(&path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(BufReader::new(f))
}

pub(crate) fn write_log(dir: &Path, name: &str, log: &CascadeLog) -> Result<()> {
    let mut w = create(dir, name)?;
    log.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn read_log(dir: &Path, name: &str) -> Result<CascadeLog> {
    parse_cascades(open(dir, name)?)
}

impl SyntheticCorpus {
    /// Writes the network and generating model, and the cascade files unless
    /// `with_cascades` is false.
    pub fn write(&self, dir: &Path, with_cascades: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = create(dir, NETWORK_FILE)?;
        self.network.write_json(&mut w)?;
        w.flush()?;
        let mut w = create(dir, TRUTH_FILE)?;
        self.truth.write_json(&mut w)?;
        w.flush()?;
        if with_cascades {
            write_log(dir, CASCADES_FILE, &self.train_log)?;
            write_log(dir, TEST_CASCADES_FILE, &self.test_log)?;
            let mut w = create(dir, SHUFFLED_NETWORK_FILE)?;
            self.shuffled_network.write_json(&mut w)?;
            w.flush()?;
            write_log(dir, SHUFFLED_CASCADES_FILE, &self.shuffled_log)?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Ok(SyntheticCorpus {
            network: DiffusionNetwork::read_json(open(dir, NETWORK_FILE)?)?,
            truth: IMModel::read_json(open(dir, TRUTH_FILE)?)?,
            train_log: read_log(dir, CASCADES_FILE)?,
            test_log: read_log(dir, TEST_CASCADES_FILE)?,
            shuffled_network: DiffusionNetwork::read_json(open(dir, SHUFFLED_NETWORK_FILE)?)?,
            shuffled_log: read_log(dir, SHUFFLED_CASCADES_FILE)?,
        })
    }

    /// Training data, with exposures taken against the generating network or
    /// the inferred diffusion network.
    pub fn training(&self, choice: SyntheticNetwork) -> Dataset {
        Dataset::new(self.train_log.clone(), self.pick(choice, &self.network, &self.train_log))
    }

    /// The held-out scenarios: `trained` (original network) and `shuffled`.
    pub fn scenarios(&self, choice: SyntheticNetwork) -> Vec<Scenario> {
        vec![
            Scenario {
                name: "trained".into(),
                data: Dataset::new(self.test_log.clone(), self.pick(choice, &self.network, &self.test_log)),
                truth: TruthSource::Model(self.truth.clone()),
            },
            Scenario {
                name: "shuffled".into(),
                data: Dataset::new(self.shuffled_log.clone(), self.pick(choice, &self.shuffled_network, &self.shuffled_log)),
                truth: TruthSource::Model(self.truth.clone()),
            },
        ]
    }

    fn pick(&self, choice: SyntheticNetwork, generating: &DiffusionNetwork, log: &CascadeLog) -> DiffusionNetwork {
        match choice {
            SyntheticNetwork::Generating => generating.clone(),
            SyntheticNetwork::Inferred => build_diffusion_network(log),
        }
    }
}

/// A cascade log, the network its exposures are taken against, and the
/// resulting exposure table.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub log: CascadeLog,
    pub network: DiffusionNetwork,
    pub exposures: ExposureTable,
    pub diagnostics: Diagnostics,
}

impl Dataset {
    pub fn new(log: CascadeLog, network: DiffusionNetwork) -> Self {
        let (exposures, diagnostics) = extract_exposures(&log, &network);
        Dataset { log, network, exposures, diagnostics }
    }

    /// Uses the diffusion network inferred from the log itself.
    pub fn inferred(log: CascadeLog) -> Self {
        let network = build_diffusion_network(&log);
        Self::new(log, network)
    }
}

/// Where reference probabilities come from.
#[derive(Debug, Clone)]
pub enum TruthSource {
    /// Exact closed form under the generating model.
    Model(IMModel),
    /// Forward ratios of the test exposures.
    Ratio,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub data: Dataset,
    pub truth: TruthSource,
}

/// Reads, merges, prunes and windows the configured cascade files.
pub fn load_windows(data: &CascadeData) -> Result<Vec<CascadeLog>> {
    let mut log = CascadeLog::new();
    for path in &data.files {
        let f = File::open(path).map_err(|e| Error::InvalidConfig(format!("cannot open {}: {e}", path.display())))?;
        for (mid, events) in parse_cascades(BufReader::new(f))?.into_messages() {
            log.insert(mid, events);
        }
    }
    let pruned = prune(&log, data.prune_min_total, data.prune_max_per_message);
    let split = split_by_time(&pruned, &data.boundaries)?;
    if split.overflow.message_count() > 0 {
        log::info!("{} message(s) fall outside every window", split.overflow.message_count());
    }
    Ok(split.windows)
}

/// `(train, test)` window pairs: window `i` is tested on the next window,
/// the last one on the first.
pub fn round_pairs(windows: usize) -> Vec<(usize, usize)> {
    if windows < 2 {
        return Vec::new();
    }
    (0..windows).map(|i| (i, (i + 1) % windows)).collect()
}

/// Every node mentioned by any window, in order.
pub fn node_universe<'a>(logs: impl IntoIterator<Item = &'a CascadeLog>) -> Vec<NodeId> {
    let mut nodes = std::collections::BTreeSet::new();
    for log in logs {
        for (_, events) in log.messages() {
            for e in events {
                nodes.insert(e.child.clone());
                if let Some(p) = &e.parent {
                    nodes.insert(p.clone());
                }
            }
        }
    }
    nodes.into_iter().collect()
}

/// A timestamped log standing in for a crawled dataset: `windows` batches
/// of simulated cascades, batch `i` shifted to start at `i * span`.
/// Returns the log and the matching window boundaries.
pub fn stand_in_log(
    network: &DiffusionNetwork,
    truth: &IMModel,
    cfg: &SynthConfig,
    windows: usize,
    span: u64,
) -> Result<(CascadeLog, Vec<u64>)> {
    let sources = source_pool(network, cfg.n_sources, cfg.seed);
    let mut log = CascadeLog::new();
    for w in 0..windows {
        let batch = simulate_from_sources(network, truth, cfg, &sources, seed::derive_indexed(cfg.seed, "window", w as u64))?;
        let start = w as u64 * span;
        for (j, (mid, events)) in batch.messages().enumerate() {
            let offset = start + (j as u64 % (span / 2).max(1));
            let shifted = events.iter().map(|e| CascadeEvent { time: e.time + offset, ..e.clone() });
            log.insert(format!("w{w}-{mid}"), shifted);
        }
    }
    let boundaries = (0..=windows as u64).map(|w| w * span).collect();
    Ok((log, boundaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticData {
        SyntheticData {
            synth: SynthConfig { n_nodes: 40, edges_per_node: 2, k: 3, n_cascades: 60, n_sources: 5, ..SynthConfig::default() },
            test_cascades: 30,
            ..SyntheticData::default()
        }
    }

    #[test]
    fn corpus_is_deterministic_and_round_trips() {
        let a = build_corpus(&small(), 3).unwrap();
        let b = build_corpus(&small(), 3).unwrap();
        assert_eq!(a.train_log, b.train_log);
        assert_eq!(a.shuffled_network, b.shuffled_network);
        let dir = tempfile::tempdir().unwrap();
        a.write(dir.path(), true).unwrap();
        let back = SyntheticCorpus::read(dir.path()).unwrap();
        assert_eq!(back.network, a.network);
        assert_eq!(back.test_log, a.test_log);
        assert_eq!(back.truth.influence(), a.truth.influence());
        assert_eq!(a.shuffled_network.in_degrees(), a.network.in_degrees());
    }

    #[test]
    fn rounds_wrap() {
        assert_eq!(round_pairs(3), vec![(0, 1), (1, 2), (2, 0)]);
        assert!(round_pairs(1).is_empty());
    }

    #[test]
    fn stand_in_splits_into_windows() {
        let c = build_corpus(&small(), 1).unwrap();
        let cfg = SynthConfig { seed: 1, ..small().synth };
        let (log, bounds) = stand_in_log(&c.network, &c.truth, &cfg, 3, 1000).unwrap();
        let split = split_by_time(&log, &bounds).unwrap();
        assert_eq!(split.windows.len(), 3);
        assert!(split.windows.iter().all(|w| w.message_count() == 60));
        assert_eq!(split.overflow.message_count(), 0);
    }
}
