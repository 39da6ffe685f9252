//! Round-robin evaluation over time windows of a cascade file, as used for
//! crawled data: train on one window, score against forward ratios of the
//! next. A simulated timestamped log stands in for the real dump.
//!
//! cargo run --release --example real_data_rounds

use infsus::cli::{cmd_rounds, stand_in_log, CascadeData, DataConfig, ExperimentConfig};
use infsus::synth::{generate_ba_network, sample_ground_truth, SynthConfig};

fn main() -> infsus::Result<()> {
    let dir = std::env::temp_dir().join("infsus-rounds");
    std::fs::create_dir_all(&dir)?;

    let synth = SynthConfig { n_nodes: 200, k: 5, n_cascades: 20_000, ..SynthConfig::default() };
    let net = generate_ba_network(synth.n_nodes, synth.edges_per_node, synth.seed, synth.orientation)?;
    let truth = sample_ground_truth(&synth)?;
    let (log, boundaries) = stand_in_log(&net, &truth, &synth, 3, 1_000_000)?;
    let file = dir.join("cascades.jsonl");
    log.write_jsonl(std::io::BufWriter::new(std::fs::File::create(&file)?))?;

    let mut cfg = ExperimentConfig::default();
    cfg.output_dir = dir.clone();
    cfg.train.k = 5;
    cfg.baselines.mf.rank = 5;
    cfg.data = DataConfig::Cascades(CascadeData {
        files: vec![file],
        boundaries,
        prune_min_total: 2,
        ..CascadeData::default()
    });

    for (i, report) in cmd_rounds(&cfg)?.iter().enumerate() {
        println!("round {}", i + 1);
        print!("{}", report.to_markdown());
    }
    Ok(())
}
