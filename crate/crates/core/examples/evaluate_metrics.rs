//! Score a trained model and a uniform guess with MKL, the observed/hidden
//! split and R-MRR on held-out cascades.
//!
//! cargo run --release --example evaluate_metrics

use infsus::baselines::uniform_estimator;
use infsus::cascades::extract_exposures;
use infsus::eval::{evaluate, random_guess_rmrr, ranking_cases_model, synthetic_truth_for};
use infsus::im::{empirical_prior_mean, train_on, Hyperparams};
use infsus::synth::{generate_ba_network, sample_ground_truth, simulate_cascades, SynthConfig};

fn main() -> infsus::Result<()> {
    let cfg = SynthConfig { n_nodes: 300, k: 10, n_cascades: 5_000, ..SynthConfig::default() };
    let net = generate_ba_network(cfg.n_nodes, cfg.edges_per_node, cfg.seed, cfg.orientation)?;
    let truth = sample_ground_truth(&cfg)?;
    let train_log = simulate_cascades(&net, &truth, &cfg)?;
    let test_log = simulate_cascades(&net, &truth, &SynthConfig { seed: 99, n_cascades: 20_000, ..cfg.clone() })?;
    let (train_x, _) = extract_exposures(&train_log, &net);
    let (test_x, _) = extract_exposures(&test_log, &net);

    let mut hp = Hyperparams { k: 10, ..Hyperparams::default() };
    hp.mu_i = empirical_prior_mean(&train_x, hp.lambda, hp.k);
    hp.mu_s = hp.mu_i;
    // Every network node gets a row, so unseen test nodes fall back to the prior.
    let model = train_on(&train_x, net.nodes().to_vec(), &hp)?.model;

    let truth_probs = synthetic_truth_for(&truth, &test_x)?;
    let cases = ranking_cases_model(&test_x, &truth)?;
    println!("{} test pairs, {} ranking cases", truth_probs.len(), cases.len());
    if !cases.is_empty() {
        println!("random-guess R-MRR {:.3}", random_guess_rmrr(&cases)?);
    }

    let un = uniform_estimator(0.01)?;
    for (name, report) in [
        ("IM", evaluate(&model, &truth_probs, &net, &cases)?.0),
        ("UN", evaluate(&un, &truth_probs, &net, &cases)?.0),
    ] {
        println!(
            "{name}: MKL {:.3}e-4  compositive {:.3}e-4  R-MRR {}",
            report.mkl * 1e4,
            report.compositive * 1e4,
            report.r_mrr.map_or("-".into(), |r| format!("{r:.3}"))
        );
    }
    Ok(())
}
