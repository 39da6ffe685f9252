//! Build a preferential-attachment network, draw a ground-truth model and
//! simulate cascades on it, then degree-preservingly shuffle the network.
//!
//! cargo run --release --example synthetic_corpus

use infsus::cascades::extract_exposures;
use infsus::synth::{generate_ba_network, sample_ground_truth, shuffle_network, simulate_cascades, SynthConfig};

fn main() -> infsus::Result<()> {
    let cfg = SynthConfig { n_nodes: 200, k: 5, n_cascades: 2_000, seed: 7, ..SynthConfig::default() };
    let net = generate_ba_network(cfg.n_nodes, cfg.edges_per_node, cfg.seed, cfg.orientation)?;
    let truth = sample_ground_truth(&cfg)?;
    let log = simulate_cascades(&net, &truth, &cfg)?;

    let sizes: Vec<usize> = log.messages().map(|(_, e)| e.len()).collect();
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
    println!(
        "network {} nodes / {} edges; {} cascades, mean size {mean:.2}, largest {}",
        net.node_count(),
        net.edge_count(),
        log.message_count(),
        sizes.iter().max().unwrap_or(&0)
    );

    let (exposures, _) = extract_exposures(&log, &net);
    println!(
        "{} exposure groups, {} forwards, {} non-forwards",
        exposures.len(),
        exposures.total_successes(),
        exposures.total_failures()
    );

    let shuffled = shuffle_network(&net, 1, 10 * net.edge_count())?;
    assert_eq!(shuffled.in_degrees(), net.in_degrees());
    assert_eq!(shuffled.out_degrees(), net.out_degrees());
    let kept = net.edges().filter(|(u, v)| shuffled.has_edge(u, v)).count();
    println!("shuffled network keeps degrees; {kept} of {} edges survive", net.edge_count());
    Ok(())
}
