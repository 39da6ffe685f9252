//! The full synthetic comparison at the small profile: corpus, IM, all
//! baselines, both test networks, random-guess ranking and the restart
//! check. Artifacts go to a temporary directory unless one is given.
//!
//! cargo run --release --example reproduce_small [-- OUT_DIR]

use infsus::cli::{cmd_reproduce, Profile};

fn main() -> infsus::Result<()> {
    let mut cfg = Profile::SyntheticSmall.config();
    let tmp;
    cfg.output_dir = match std::env::args().nth(1) {
        Some(dir) => dir.into(),
        None => {
            tmp = std::env::temp_dir().join("infsus-reproduce-small");
            tmp.clone()
        }
    };
    let report = cmd_reproduce(&cfg)?;
    print!("{}", report.to_markdown());
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}
