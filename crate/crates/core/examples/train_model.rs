//! Fit influence and susceptibility vectors to simulated cascades and
//! compare a few learned propagation probabilities with the truth.
//!
//! cargo run --release --example train_model

use infsus::cascades::extract_exposures;
use infsus::im::{empirical_prior_mean, propagation_prob, train, Hyperparams};
use infsus::synth::{generate_ba_network, sample_ground_truth, simulate_cascades, SynthConfig};

fn main() -> infsus::Result<()> {
    let cfg = SynthConfig { n_nodes: 300, k: 10, n_cascades: 5_000, ..SynthConfig::default() };
    let net = generate_ba_network(cfg.n_nodes, cfg.edges_per_node, cfg.seed, cfg.orientation)?;
    let truth = sample_ground_truth(&cfg)?;
    let log = simulate_cascades(&net, &truth, &cfg)?;
    let (exposures, _) = extract_exposures(&log, &net);

    let mut hp = Hyperparams { k: 10, lambda: cfg.lambda, ..Hyperparams::default() };
    let mu = empirical_prior_mean(&exposures, hp.lambda, hp.k);
    hp.mu_i = mu;
    hp.mu_s = mu;

    let out = train(&exposures, &hp)?;
    for row in out.trace.iter().step_by(10) {
        println!("epoch {:>3}  loss {:.4}  step {:.3e}", row.epoch, row.loss, row.step_size);
    }
    // Training ends early once the projected gradient vanishes.
    println!("final loss {:.4} after {} epochs", out.final_loss(), out.trace.len() - 1);

    let mut shown = 0;
    for (v, mode, c) in exposures.iter() {
        if mode.len() < 2 || c.trials() < 20 {
            continue;
        }
        let p_true = propagation_prob(&truth, v, mode.members())?;
        let p_fit = propagation_prob(&out.model, v, mode.members())?;
        println!("{v} with {} active: true {p_true:.4}  learned {p_fit:.4}  ({} trials)", mode.len(), c.trials());
        shown += 1;
        if shown == 5 {
            break;
        }
    }
    Ok(())
}
