//! Parse a small cascade log, prune it, split it into time windows and
//! extract per-node exposure counts.
//!
//! cargo run --example ingest_cascades

use infsus::cascades::{build_diffusion_network, extract_exposures, parse_cascades, prune, split_by_time};

const LOG: &str = r#"
{"mid":"m1","events":[{"parent":null,"child":"alice","t":0},{"parent":"alice","child":"bob","t":3},{"parent":"alice","child":"carol","t":5},{"parent":"bob","child":"dave","t":9}]}
{"mid":"m2","events":[{"parent":null,"child":"bob","t":12},{"parent":"bob","child":"dave","t":15}]}
{"mid":"m3","events":[{"parent":null,"child":"alice","t":21},{"parent":"alice","child":"bob","t":22},{"parent":"alice","child":"carol","t":30}]}
"#;

fn main() -> infsus::Result<()> {
    let log = parse_cascades(LOG.trim().as_bytes())?;
    println!("{} messages, {} events", log.message_count(), log.event_count());

    // Keep every pair (min total 1), drop pairs repeated >50 times in a message.
    let log = prune(&log, 1, 50);

    let split = split_by_time(&log, &[0, 20, 40])?;
    for (i, w) in split.windows.iter().enumerate() {
        println!("window {i}: {} messages", w.message_count());
    }

    let net = build_diffusion_network(&log);
    println!("diffusion network: {} nodes, {} edges", net.node_count(), net.edge_count());

    let (exposures, diag) = extract_exposures(&log, &net);
    for (v, mode, c) in exposures.iter() {
        let members: Vec<&str> = mode.members().iter().map(|u| u.as_str()).collect();
        println!("{v:>6} <- {members:?}: {} forwarded, {} ignored", c.successes, c.failures);
    }
    println!("diagnostics: {diag:?}");
    Ok(())
}
