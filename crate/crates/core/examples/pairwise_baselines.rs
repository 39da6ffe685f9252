//! Fit the Bernoulli, Jaccard and EM pairwise estimators and complete the
//! EM table with probabilistic matrix factorization.
//!
//! cargo run --release --example pairwise_baselines

use infsus::baselines::{
    bernoulli_estimator, em_from_exposures, jaccard_estimator, pmf_complete, PmfConfig, Predictor,
};
use infsus::cascades::extract_exposures;
use infsus::synth::{generate_ba_network, sample_ground_truth, simulate_cascades, SynthConfig};

fn main() -> infsus::Result<()> {
    let cfg = SynthConfig { n_nodes: 200, k: 5, n_cascades: 3_000, ..SynthConfig::default() };
    let net = generate_ba_network(cfg.n_nodes, cfg.edges_per_node, cfg.seed, cfg.orientation)?;
    let truth = sample_ground_truth(&cfg)?;
    let log = simulate_cascades(&net, &truth, &cfg)?;
    let (exposures, _) = extract_exposures(&log, &net);

    let bd = bernoulli_estimator(&exposures);
    let ji = jaccard_estimator(&log, &net);
    let em = em_from_exposures(&exposures, 200, 1e-8)?;
    println!("BD {} pairs, JI {} pairs, EM {} pairs after {} iterations", bd.len(), ji.len(), em.table.len(), em.iterations);
    println!(
        "EM log-likelihood {:.3} -> {:.3}",
        em.log_likelihood.first().unwrap(),
        em.log_likelihood.last().unwrap()
    );

    let mf = pmf_complete(&em.table, &PmfConfig { rank: 5, ..PmfConfig::default() })?;
    println!("{}: loss {:.4} -> {:.4}", mf.name(), mf.loss_trace()[0], mf.loss_trace().last().unwrap());

    for (u, v, est) in em.table.iter().take(5) {
        println!(
            "{u}->{v}: BD {:.3}  EM {:.3}  EM+MF {:.3}  true {:.3}",
            bd.get(u, v).map_or(0.0, |e| e.probability),
            est.probability,
            mf.pair_prob(u, v)?,
            infsus::im::propagation_prob(&truth, v, std::slice::from_ref(u))?
        );
    }
    Ok(())
}
