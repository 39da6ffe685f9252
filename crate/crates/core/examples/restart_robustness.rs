//! Train twice from different random starts and compare the two solutions
//! up to a column permutation, against random matrices of the same shape.
//!
//! cargo run --release --example restart_robustness

use infsus::cascades::extract_exposures;
use infsus::eval::matrix_difference;
use infsus::im::{empirical_prior_mean, train, Hyperparams};
use infsus::synth::{generate_ba_network, sample_ground_truth, simulate_cascades, SynthConfig};

fn main() -> infsus::Result<()> {
    let cfg = SynthConfig { n_nodes: 300, k: 10, n_cascades: 5_000, ..SynthConfig::default() };
    let net = generate_ba_network(cfg.n_nodes, cfg.edges_per_node, cfg.seed, cfg.orientation)?;
    let truth = sample_ground_truth(&cfg)?;
    let log = simulate_cascades(&net, &truth, &cfg)?;
    let (exposures, _) = extract_exposures(&log, &net);

    let mut hp = Hyperparams { k: 10, ..Hyperparams::default() };
    hp.mu_i = empirical_prior_mean(&exposures, hp.lambda, hp.k);
    hp.mu_s = hp.mu_i;
    let a = train(&exposures, &Hyperparams { init_seed: 1, ..hp.clone() })?.model;
    let b = train(&exposures, &Hyperparams { init_seed: 2, ..hp })?.model;

    let cells = (a.node_count() * a.k()) as f64;
    println!("influence difference per entry      {:.3e}", matrix_difference(a.influence(), b.influence())? / cells);
    println!("susceptibility difference per entry {:.3e}", matrix_difference(a.susceptibility(), b.susceptibility())? / cells);

    let r1 = sample_ground_truth(&SynthConfig { seed: 11, ..cfg.clone() })?;
    let r2 = sample_ground_truth(&SynthConfig { seed: 12, ..cfg })?;
    println!("random influence pair               {:.3e}", matrix_difference(r1.influence(), r2.influence())? / cells);
    Ok(())
}
