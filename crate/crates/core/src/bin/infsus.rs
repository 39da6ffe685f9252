use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infsus::cli::{self, DataConfig, ExperimentConfig, Method, Profile};
use infsus::{Error, Result};

#[derive(Parser)]
#[command(name = "infsus", version, about = "Influence and susceptibility from information cascades")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and INFSUS_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a synthetic corpus.
    Generate {
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        cascades: Option<usize>,
        #[arg(long)]
        test_cascades: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Train the influence-susceptibility model.
    Train {
        #[command(flatten)]
        hp: HpFlags,
        /// Train one model per (alpha, lambda, k) grid cell.
        #[arg(long)]
        grid: bool,
        #[arg(long, default_value_t = 0)]
        window: usize,
    },
    /// Score a trained model or a baseline on held-out data.
    Evaluate {
        #[arg(long, default_value = "im")]
        method: Method,
        /// Uniform probability for `--method un` (replaces the configured list).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        window: usize,
    },
    /// Fit the pairwise baseline tables.
    Baselines {
        #[arg(long, default_value_t = 0)]
        window: usize,
    },
    /// End-to-end comparison on a synthetic profile, or round-robin over
    /// the windows of a cascade-file configuration.
    Reproduce {
        #[arg(long)]
        profile: Option<Profile>,
        #[arg(long)]
        rounds: bool,
        #[command(flatten)]
        hp: HpFlags,
    },
}

#[derive(Args)]
struct HpFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

impl HpFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let t = &mut cfg.train;
        t.alpha = self.alpha.unwrap_or(t.alpha);
        t.beta = self.beta.unwrap_or(t.beta);
        t.lambda = self.lambda.unwrap_or(t.lambda);
        t.k = self.k.unwrap_or(t.k);
        t.max_epochs = self.max_epochs.unwrap_or(t.max_epochs);
    }
}

fn base_config(common: &Common, profile: Option<Profile>) -> Result<ExperimentConfig> {
    let mut cfg = match (&common.config, profile) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(p)) => p.config(),
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        // flags win over the environment
        std::env::set_var(cli::OUTPUT_ENV, out);
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(args: Cli) -> Result<()> {
    match &args.command {
        Command::Generate { nodes, cascades, test_cascades, k, lambda } => {
            let mut cfg = base_config(&args.common, None)?;
            let DataConfig::Synthetic(data) = &mut cfg.data else {
                return Err(Error::InvalidConfig("generate needs a synthetic data source".into()));
            };
            let s = &mut data.synth;
            s.n_nodes = nodes.unwrap_or(s.n_nodes);
            s.n_cascades = cascades.unwrap_or(s.n_cascades);
            s.k = k.unwrap_or(s.k);
            s.lambda = lambda.unwrap_or(s.lambda);
            data.test_cascades = test_cascades.unwrap_or(data.test_cascades);
            cfg.validate()?;
            print_json(&cli::cmd_generate(&cfg)?)
        }
        Command::Train { hp, grid, window } => {
            let mut cfg = base_config(&args.common, None)?;
            hp.apply(&mut cfg);
            cfg.validate()?;
            print_json(&cli::cmd_train(&cfg, *grid, *window)?)
        }
        Command::Evaluate { method, p, model, window } => {
            let mut cfg = base_config(&args.common, None)?;
            if let Some(p) = p {
                cfg.baselines.uniform_p = vec![*p];
            }
            cfg.validate()?;
            print_json(&cli::cmd_evaluate(&cfg, *method, model.as_deref(), *window)?)
        }
        Command::Baselines { window } => {
            let cfg = base_config(&args.common, None)?;
            cfg.validate()?;
            let fits = cli::cmd_baselines(&cfg, *window)?;
            println!(
                "BD {} pairs, JI {} pairs, EM {} pairs ({} iterations)",
                fits.bd.len(),
                fits.ji.len(),
                fits.em.table.len(),
                fits.em.iterations
            );
            Ok(())
        }
        Command::Reproduce { profile, rounds, hp } => {
            let mut cfg = base_config(&args.common, *profile)?;
            hp.apply(&mut cfg);
            cfg.validate()?;
            if *rounds {
                for (i, report) in cli::cmd_rounds(&cfg)?.iter().enumerate() {
                    println!("round {}\n{}", i + 1, report.to_markdown());
                }
            } else {
                print!("{}", cli::cmd_reproduce(&cfg)?.to_markdown());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
