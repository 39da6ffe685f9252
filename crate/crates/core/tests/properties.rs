use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;

use infsus::baselines::{em_from_exposures, uniform_estimator};
use infsus::cascades::{build_diffusion_network, extract_exposures, prune, AssembleMode, CascadeEvent, CascadeLog};
use infsus::cli::ExperimentConfig;
use infsus::eval::{bernoulli_kl, matrix_difference, mkl, GroundTruth, TruthEntry, KL_EPS};
use infsus::im::{objective, objective_terms, Hyperparams, IMModel};
use infsus::NodeId;

fn node(i: usize) -> NodeId {
    NodeId::new(format!("u{i}"))
}

/// One message: a root, then forwards whose parent is any earlier child.
/// Children may repeat, as in raw crawled logs.
fn message(nodes: usize) -> impl Strategy<Value = Vec<CascadeEvent>> {
    (0..nodes, prop::collection::vec((0..nodes, any::<prop::sample::Index>(), 1u64..4), 0..6)).prop_map(
        move |(root, steps)| {
            let mut events = vec![CascadeEvent::root(node(root), 0)];
            let mut t = 0;
            for (child, parent_pick, dt) in steps {
                let parent = events[parent_pick.index(events.len())].child.clone();
                if parent == node(child) {
                    continue;
                }
                t += dt;
                events.push(CascadeEvent::forward(parent, node(child), t));
            }
            events
        },
    )
}

fn cascade_log() -> impl Strategy<Value = Vec<Vec<CascadeEvent>>> {
    prop::collection::vec(message(6), 1..12)
}

fn build(messages: &[Vec<CascadeEvent>], mid: impl Fn(usize) -> String) -> CascadeLog {
    let mut log = CascadeLog::new();
    for (i, m) in messages.iter().enumerate() {
        log.insert(mid(i), m.clone());
    }
    log
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0..2.0f64, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prune_is_idempotent(messages in cascade_log(), min_total in 1usize..4, max_per in 1usize..3) {
        let log = build(&messages, |i| format!("m{i}"));
        let once = prune(&log, min_total, max_per);
        prop_assert_eq!(prune(&once, min_total, max_per), once);
    }

    #[test]
    fn exposures_ignore_message_order_and_ids(messages in cascade_log()) {
        let a = build(&messages, |i| format!("m{i:03}"));
        let n = messages.len();
        let b = build(&messages, |i| format!("z{:03}", n - i));
        let net = build_diffusion_network(&a);
        prop_assert_eq!(&net, &build_diffusion_network(&b));
        prop_assert_eq!(extract_exposures(&a, &net), extract_exposures(&b, &net));
    }

    #[test]
    fn em_likelihood_never_decreases(messages in cascade_log()) {
        let log = build(&messages, |i| format!("m{i}"));
        let (table, _) = extract_exposures(&log, &build_diffusion_network(&log));
        prop_assume!(!table.is_empty());
        let out = em_from_exposures(&table, 100, 0.0).unwrap();
        for w in out.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        for (_, _, e) in out.table.iter() {
            prop_assert!((0.0..=1.0).contains(&e.probability));
        }
    }

    #[test]
    fn objective_is_the_weighted_sum_of_its_terms(
        messages in cascade_log(),
        inf in matrix(6, 2),
        sus in matrix(6, 2),
        alpha in 0.0..=1.0f64,
    ) {
        let log = build(&messages, |i| format!("m{i}"));
        let (table, _) = extract_exposures(&log, &build_diffusion_network(&log));
        prop_assume!(!table.is_empty());
        let model = IMModel::new((0..6).map(node).collect(), inf, sus, 0.5).unwrap();
        let hp = Hyperparams { alpha, k: 2, lambda: 0.5, mu_i: 0.2, mu_s: 0.3, ..Hyperparams::default() };
        let terms = objective_terms(&model, &table, &hp).unwrap();
        let total = objective(&model, &table, &hp).unwrap();
        prop_assert!(terms.cascade >= 0.0 && terms.choice >= 0.0 && terms.prior >= 0.0);
        prop_assert!((total - terms.total(alpha)).abs() <= 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn kl_is_nonnegative(p in 0.0..=1.0f64, q in 0.0..=1.0f64) {
        let kl = bernoulli_kl(p, q, KL_EPS);
        prop_assert!(kl >= -1e-15 && kl.is_finite());
        prop_assert_eq!(bernoulli_kl(p, p, KL_EPS), 0.0);
    }

    #[test]
    fn matrix_difference_is_a_pseudometric(a in matrix(5, 4), b in matrix(5, 4), c in matrix(5, 4)) {
        let d = |x: &Array2<f64>, y: &Array2<f64>| matrix_difference(x, y).unwrap();
        prop_assert!(d(&a, &a).abs() < 1e-12);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-9);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        let mut swapped = a.clone();
        for r in 0..5 {
            swapped.row_mut(r).as_slice_mut().unwrap().reverse();
        }
        prop_assert!(d(&a, &swapped).abs() < 1e-12);
    }

    #[test]
    fn mkl_ignores_insertion_order(probs in prop::collection::vec(0.0..=1.0f64, 1..30), p in 0.001..0.5f64) {
        let entries: Vec<(NodeId, AssembleMode, TruthEntry)> = probs
            .iter()
            .enumerate()
            .map(|(i, &p_true)| (node(i), AssembleMode::singleton(node(i + 100)), TruthEntry { p_true, support: 1 }))
            .collect();
        let mut forward = GroundTruth::default();
        let mut backward = GroundTruth::default();
        for (v, m, e) in entries.iter().cloned() {
            forward.insert(v, m, e);
        }
        for (v, m, e) in entries.iter().rev().cloned() {
            backward.insert(v, m, e);
        }
        let un = uniform_estimator(p).unwrap();
        let expected = probs.iter().map(|&t| bernoulli_kl(t, p, KL_EPS)).sum::<f64>() / probs.len() as f64;
        let got = mkl(&forward, &un).unwrap();
        prop_assert!((got - expected).abs() < 1e-12);
        prop_assert_eq!(got, mkl(&backward, &un).unwrap());
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), alpha in 0.0..=1.0f64, k in 1usize..50, reps in 1usize..20) {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = seed;
        cfg.train.alpha = alpha;
        cfg.train.k = k;
        cfg.eval.random_matrix_reps = reps;
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn duplicate_children_keep_only_the_first_forward() {
    let mut log = CascadeLog::new();
    log.insert(
        "m",
        vec![
            CascadeEvent::root("a", 0),
            CascadeEvent::forward("a", "b", 1),
            CascadeEvent::forward("a", "b", 2),
        ],
    );
    let net = build_diffusion_network(&log);
    let (table, diag) = extract_exposures(&log, &net);
    assert_eq!(diag.duplicate_events, 1);
    assert_eq!(table.total_successes(), 1);
    let members: BTreeSet<_> = table.iter().map(|(v, _, _)| v.as_str().to_string()).collect();
    assert_eq!(members, BTreeSet::from(["b".to_string()]));
}
