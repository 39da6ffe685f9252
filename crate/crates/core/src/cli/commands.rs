use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{PairwiseTable, Predictor};
use crate::error::{Error, Result};
use crate::eval::{influence_susceptibility_histogram, matrix_difference, write_pair_kl_csv, MetricsReport};
use crate::im::{train_on, write_trace_csv, Hyperparams, IMModel, TraceRow};
use crate::node::NodeId;
use crate::seed;

use super::config::{DataConfig, ExperimentConfig, Method};
use super::corpus::{
    build_corpus, load_windows, node_universe, round_pairs, Dataset, Scenario, SyntheticCorpus, TruthSource,
};
use super::methods::{
    build_predictors, check_domain, evaluate_prepared, fit_tables, im_hyperparams, prepare, train_im,
    PairwiseFits, PreparedScenario, RandomGuess,
};

pub const MODEL_FILE: &str = "model.json";
pub const TRACE_FILE: &str = "trace.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_model(dir: &Path, model: &IMModel, trace: &[TraceRow]) -> Result<()> {
    let mut w = create(&dir.join(MODEL_FILE))?;
    model.write_json(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(TRACE_FILE))?;
    write_trace_csv(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

fn file_tag(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub output_dir: PathBuf,
    pub nodes: usize,
    pub edges: usize,
    pub train_cascades: usize,
    pub test_cascades: usize,
}

/// Writes a synthetic corpus. With zero training cascades only the network
/// and the generating model are written.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<GenerateSummary> {
    let DataConfig::Synthetic(data) = &cfg.data else {
        return Err(Error::InvalidConfig("generate needs a synthetic data source".into()));
    };
    let dir = cfg.resolved_output_dir();
    let with_cascades = data.synth.n_cascades > 0;
    let corpus = build_corpus(data, cfg.seed)?;
    corpus.write(&dir, with_cascades)?;
    info!("wrote corpus to {}", dir.display());
    Ok(GenerateSummary {
        output_dir: dir,
        nodes: corpus.network.node_count(),
        edges: corpus.network.edge_count(),
        train_cascades: if with_cascades { corpus.train_log.message_count() } else { 0 },
        test_cascades: if with_cascades { corpus.test_log.message_count() } else { 0 },
    })
}

/// Training data, node universe and held-out scenarios of a configuration.
/// Synthetic data is read from the output directory (see [`cmd_generate`]);
/// cascade files are windowed and `window` selects the training window.
pub struct Workload {
    pub train: Dataset,
    pub universe: Vec<NodeId>,
    pub scenarios: Vec<Scenario>,
    pub corpus: Option<SyntheticCorpus>,
}

pub fn load_workload(cfg: &ExperimentConfig, window: usize) -> Result<Workload> {
    match &cfg.data {
        DataConfig::Synthetic(data) => {
            let corpus = SyntheticCorpus::read(&cfg.resolved_output_dir())?;
            Ok(workload_from_corpus(corpus, data.network))
        }
        DataConfig::Cascades(data) => {
            let windows = load_windows(data)?;
            let pairs = round_pairs(windows.len());
            let &(train, test) = pairs
                .get(window)
                .ok_or_else(|| Error::InvalidConfig(format!("window {window} out of range (have {})", windows.len())))?;
            let universe = node_universe(&windows);
            Ok(Workload {
                train: Dataset::inferred(windows[train].clone()),
                universe,
                scenarios: vec![Scenario {
                    name: format!("window{test}"),
                    data: Dataset::inferred(windows[test].clone()),
                    truth: TruthSource::Ratio,
                }],
                corpus: None,
            })
        }
    }
}

fn workload_from_corpus(corpus: SyntheticCorpus, choice: super::config::SyntheticNetwork) -> Workload {
    Workload {
        train: corpus.training(choice),
        universe: corpus.network.nodes().to_vec(),
        scenarios: corpus.scenarios(choice),
        corpus: Some(corpus),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub alpha: f64,
    pub lambda: f64,
    pub k: usize,
    pub epochs: usize,
    pub final_loss: f64,
    /// Metrics on the first held-out scenario, when there is one.
    pub validation: Option<MetricsReport>,
    pub model_dir: PathBuf,
}

/// Trains IM on the configured data; in grid mode trains one model per
/// `(alpha, lambda, k)` cell (in parallel) and writes `grid_summary.csv`.
pub fn cmd_train(cfg: &ExperimentConfig, grid: bool, window: usize) -> Result<Vec<TrainSummary>> {
    let work = load_workload(cfg, window)?;
    if work.train.exposures.is_empty() {
        return Err(Error::NothingToTrain);
    }
    let dir = cfg.resolved_output_dir();
    let validation = work.scenarios.first().map(|s| prepare(cfg, s)).transpose()?;
    let run_one = |cell_cfg: &ExperimentConfig, out_dir: PathBuf| -> Result<TrainSummary> {
        let (out, hp) = train_im(cell_cfg, &work.train, &work.universe)?;
        write_model(&out_dir, &out.model, &out.trace)?;
        let report = match &validation {
            Some(p) => {
                check_domain(&out.model, p)?;
                Some(evaluate_prepared(&out.model, p, &work.train.network)?.0)
            }
            None => None,
        };
        Ok(TrainSummary {
            alpha: hp.alpha,
            lambda: hp.lambda,
            k: hp.k,
            epochs: out.trace.len() - 1,
            final_loss: out.final_loss(),
            validation: report,
            model_dir: out_dir,
        })
    };
    if !grid {
        return Ok(vec![run_one(cfg, dir)?]);
    }
    let summaries = cfg
        .grid
        .cells()
        .into_par_iter()
        .map(|(alpha, lambda, k)| {
            let mut cell = cfg.clone();
            cell.train = Hyperparams { alpha, lambda, k, ..cfg.train.clone() };
            run_one(&cell, dir.join("grid").join(format!("a{alpha}_l{lambda}_k{k}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(create(&dir.join("grid_summary.csv"))?);
    w.write_record(["alpha", "lambda", "k", "epochs", "final_loss", "mkl", "compositive", "r_mrr"])?;
    for s in &summaries {
        let v = s.validation.as_ref();
        let opt = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            s.alpha.to_string(),
            s.lambda.to_string(),
            s.k.to_string(),
            s.epochs.to_string(),
            s.final_loss.to_string(),
            opt(v.map(|r| r.mkl)),
            opt(v.map(|r| r.compositive)),
            opt(v.and_then(|r| r.r_mrr)),
        ])?;
    }
    w.flush()?;
    Ok(summaries)
}

const TABLES: [(&str, &str); 3] = [("bd", "bd.csv"), ("ji", "ji.csv"), ("em", "em.csv")];

/// Fits the pairwise tables and writes `bd.csv`, `ji.csv`, `em.csv` and the
/// EM log-likelihood trace.
pub fn cmd_baselines(cfg: &ExperimentConfig, window: usize) -> Result<PairwiseFits> {
    let work = load_workload(cfg, window)?;
    let fits = fit_tables(cfg, &work.train)?;
    let dir = cfg.resolved_output_dir().join("baselines");
    for ((_, file), table) in TABLES.iter().zip([&fits.bd, &fits.ji, &fits.em.table]) {
        let mut w = create(&dir.join(file))?;
        table.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut w = csv::Writer::from_writer(create(&dir.join("em_trace.csv"))?);
    w.write_record(["iteration", "log_likelihood"])?;
    for (i, ll) in fits.em.log_likelihood.iter().enumerate() {
        w.write_record([i.to_string(), ll.to_string()])?;
    }
    w.flush()?;
    Ok(fits)
}

fn read_fits(dir: &Path) -> Result<PairwiseFits> {
    let read = |name: &str, file: &str| -> Result<PairwiseTable> {
        PairwiseTable::read_csv(name.to_uppercase(), BufReader::new(File::open(dir.join("baselines").join(file))?))
    };
    Ok(PairwiseFits {
        bd: read("bd", "bd.csv")?,
        ji: read("ji", "ji.csv")?,
        em: crate::baselines::EmOutcome { table: read("em", "em.csv")?, iterations: 0, log_likelihood: Vec::new() },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub scenario: String,
    #[serde(flatten)]
    pub report: MetricsReport,
}

/// Scores one method on every held-out scenario. IM is read from
/// `model` (default `<out>/model.json`); pairwise methods from the tables
/// written by [`cmd_baselines`]. Writes one report JSON and one per-pair KL
/// CSV per scenario and predictor, and the histogram for IM.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    method: Method,
    model: Option<&Path>,
    window: usize,
) -> Result<Vec<EvaluationRow>> {
    let dir = cfg.resolved_output_dir();
    let work = load_workload(cfg, window)?;
    let one = ExperimentConfig {
        baselines: super::config::BaselineConfig { methods: vec![method], ..cfg.baselines.clone() },
        ..cfg.clone()
    };
    let im = if method == Method::Im {
        let path = model.map(Path::to_path_buf).unwrap_or_else(|| dir.join(MODEL_FILE));
        Some(IMModel::read_json(BufReader::new(File::open(&path)?))?)
    } else {
        None
    };
    let fits = match method {
        Method::Im | Method::Un => None,
        _ => Some(read_fits(&dir)?),
    };
    let predictors = build_predictors(&one, im.as_ref(), fits.as_ref())?;
    let eval_dir = dir.join("evaluation");
    let mut rows = Vec::new();
    for scenario in &work.scenarios {
        let prepared = prepare(cfg, scenario)?;
        if let Some(m) = &im {
            check_domain(m, &prepared)?;
        }
        for p in &predictors {
            let (report, pairs) = evaluate_prepared(p.as_ref(), &prepared, &work.train.network)?;
            let tag = format!("{}_{}", file_tag(&report.method), scenario.name);
            write_json(&eval_dir.join(format!("{tag}.json")), &report)?;
            let mut w = create(&eval_dir.join(format!("{tag}_pairs.csv")))?;
            write_pair_kl_csv(&pairs, &mut w)?;
            w.flush()?;
            rows.push(EvaluationRow { scenario: scenario.name.clone(), report });
        }
    }
    if let Some(m) = &im {
        write_histogram(cfg, m, &eval_dir.join("histogram.csv"))?;
    }
    Ok(rows)
}

fn write_histogram(cfg: &ExperimentConfig, model: &IMModel, path: &Path) -> Result<()> {
    let h = influence_susceptibility_histogram(model, cfg.eval.histogram_bins, cfg.eval.histogram_norm)?;
    let mut w = create(path)?;
    h.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Evaluation network (`trained` / `shuffled`) or test window.
    pub network: String,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGuess {
    pub network: String,
    #[serde(flatten)]
    pub guess: RandomGuess,
}

/// Permutation-matched distance between two IM restarts against the same
/// distance between independently drawn random matrices, all per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartCheck {
    pub influence: f64,
    pub susceptibility: f64,
    pub random_influence_mean: f64,
    pub random_influence_sd: f64,
    pub random_susceptibility_mean: f64,
    pub random_susceptibility_sd: f64,
}

impl RestartCheck {
    pub fn influence_ratio(&self) -> f64 {
        self.influence / self.random_influence_mean
    }

    pub fn susceptibility_ratio(&self) -> f64 {
        self.susceptibility / self.random_susceptibility_mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceReport {
    /// Sorted by network, then compositive score ascending.
    pub rows: Vec<TableRow>,
    pub random_guess: Vec<ScenarioGuess>,
    pub restart: Option<RestartCheck>,
    pub im_trace: Vec<TraceRow>,
    pub hyperparams: Hyperparams,
}

impl ReproduceReport {
    pub fn row(&self, network: &str, method: &str) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.network == network && r.report.method == method).map(|r| &r.report)
    }

    pub fn rows_for<'a>(&'a self, network: &'a str) -> impl Iterator<Item = &'a MetricsReport> + 'a {
        self.rows.iter().filter(move |r| r.network == network).map(|r| &r.report)
    }

    /// Plain-text table in the layout of the comparison tables.
    pub fn to_markdown(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let mut s = String::from(
            "| network | method | MKL (1e-4) | observed (1e-4) | hidden (1e-4) | compositive (1e-4) | R-MRR |\n|---|---|---:|---:|---:|---:|---:|\n",
        );
        for r in &self.rows {
            let m = &r.report;
            s += &format!(
                "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {} |\n",
                r.network,
                m.method,
                m.mkl * 1e4,
                m.mkl_observed * 1e4,
                m.mkl_hidden * 1e4,
                m.compositive * 1e4,
                fmt(m.r_mrr)
            );
        }
        for g in &self.random_guess {
            s += &format!(
                "| {} | random guess | | | | | {:.3} (±{:.3}) |\n",
                g.network, g.guess.sampled_mean, g.guess.sampled_sd
            );
        }
        if let Some(r) = &self.restart {
            s += &format!(
                "\nrestart difference per entry: I {:.4} (random {:.4} ± {:.4}), S {:.4} (random {:.4} ± {:.4})\n",
                r.influence,
                r.random_influence_mean,
                r.random_influence_sd,
                r.susceptibility,
                r.random_susceptibility_mean,
                r.random_susceptibility_sd
            );
        }
        s
    }
}

fn sort_rows(rows: &mut [TableRow]) {
    rows.sort_by(|a, b| {
        a.network.cmp(&b.network).then(a.report.compositive.total_cmp(&b.report.compositive))
    });
}

fn score_all(
    predictors: &[Box<dyn Predictor + Send>],
    prepared: &PreparedScenario,
    train_network: &crate::cascades::DiffusionNetwork,
) -> Result<Vec<MetricsReport>> {
    predictors
        .par_iter()
        .map(|p| evaluate_prepared(p.as_ref(), prepared, train_network).map(|r| r.0))
        .collect()
}

/// Generates (and writes) a synthetic corpus, trains IM and every enabled
/// baseline on it, scores them on the trained and the shuffled network,
/// and repeats the IM training from a second initialization for the
/// restart-robustness comparison. Writes `reproduce/` under the output dir.
pub fn cmd_reproduce(cfg: &ExperimentConfig) -> Result<ReproduceReport> {
    let DataConfig::Synthetic(data) = &cfg.data else {
        return Err(Error::InvalidConfig("reproduce needs a synthetic data source; use rounds for cascade files".into()));
    };
    let dir = cfg.resolved_output_dir();
    let corpus = build_corpus(data, cfg.seed)?;
    corpus.write(&dir, true)?;
    let work = workload_from_corpus(corpus, data.network);
    let (mut out, im) = run_comparison(cfg, &work, &dir.join("reproduce"))?;
    if cfg.baselines.methods.contains(&Method::Im) {
        let hp = im_hyperparams(cfg, &work.train.exposures);
        let second_hp = Hyperparams { init_seed: seed::derive(hp.init_seed, "restart"), ..hp };
        let second = train_on(&work.train.exposures, work.universe.clone(), &second_hp)?;
        out.restart = Some(restart_check(cfg, &im, &second.model, &data.synth)?);
    }
    finish_report(&dir.join("reproduce"), &out)?;
    Ok(out)
}

fn restart_check(
    cfg: &ExperimentConfig,
    a: &IMModel,
    b: &IMModel,
    synth: &crate::synth::SynthConfig,
) -> Result<RestartCheck> {
    let (n, k) = (a.node_count(), a.k());
    let per_entry = (n * k) as f64;
    let influence = matrix_difference(a.influence(), b.influence())? / per_entry;
    let susceptibility = matrix_difference(a.susceptibility(), b.susceptibility())? / per_entry;
    let reps = cfg.eval.random_matrix_reps.max(1);
    let mut rng = seed::rng(cfg.seed, "random-matrices");
    let mut draw = |(lo, hi): (f64, f64)| -> Array2<f64> {
        Array2::from_shape_fn((n, k), |_| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
    };
    let mut ri = Vec::with_capacity(reps);
    let mut rs = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (x, y) = (draw(synth.influence_range), draw(synth.influence_range));
        ri.push(matrix_difference(&x, &y)? / per_entry);
        let (x, y) = (draw(synth.susceptibility_range), draw(synth.susceptibility_range));
        rs.push(matrix_difference(&x, &y)? / per_entry);
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt())
    };
    let (rim, risd) = stats(&ri);
    let (rsm, rssd) = stats(&rs);
    Ok(RestartCheck {
        influence,
        susceptibility,
        random_influence_mean: rim,
        random_influence_sd: risd,
        random_susceptibility_mean: rsm,
        random_susceptibility_sd: rssd,
    })
}

/// Trains every enabled method on `work.train` and scores it on every
/// scenario. Returns the report (without restart check) and the IM model.
fn run_comparison(cfg: &ExperimentConfig, work: &Workload, dir: &Path) -> Result<(ReproduceReport, IMModel)> {
    if work.train.exposures.is_empty() {
        return Err(Error::NothingToTrain);
    }
    let wants_tables = cfg.baselines.methods.iter().any(|m| !matches!(m, Method::Im | Method::Un));
    let (im, fits) = rayon::join(
        || train_im(cfg, &work.train, &work.universe),
        || wants_tables.then(|| fit_tables(cfg, &work.train)).transpose(),
    );
    let (im, hp) = im?;
    let fits = fits?;
    write_model(dir, &im.model, &im.trace)?;
    write_histogram(cfg, &im.model, &dir.join("histogram.csv"))?;
    let predictors = build_predictors(cfg, Some(&im.model), fits.as_ref())?;
    let mut rows = Vec::new();
    let mut guesses = Vec::new();
    for scenario in &work.scenarios {
        let prepared = prepare(cfg, scenario)?;
        if cfg.baselines.methods.contains(&Method::Im) {
            check_domain(&im.model, &prepared)?;
        }
        for report in score_all(&predictors, &prepared, &work.train.network)? {
            rows.push(TableRow { network: scenario.name.clone(), report });
        }
        if let Some(g) = prepared.random_guess {
            guesses.push(ScenarioGuess { network: scenario.name.clone(), guess: g });
        }
    }
    sort_rows(&mut rows);
    let report = ReproduceReport { rows, random_guess: guesses, restart: None, im_trace: im.trace, hyperparams: hp };
    Ok((report, im.model))
}

fn finish_report(dir: &Path, report: &ReproduceReport) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    let mut w = create(&dir.join("table.md"))?;
    w.write_all(report.to_markdown().as_bytes())?;
    w.flush()?;
    let mut w = csv::Writer::from_writer(create(&dir.join("table.csv"))?);
    w.write_record([
        "network", "method", "mkl", "mkl_observed", "mkl_hidden", "compositive", "mrr", "r_mrr", "pairs",
        "observed_pairs", "hidden_pairs", "rank_cases",
    ])?;
    let opt = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.rows {
        let m = &r.report;
        w.write_record([
            r.network.clone(),
            m.method.clone(),
            m.mkl.to_string(),
            m.mkl_observed.to_string(),
            m.mkl_hidden.to_string(),
            m.compositive.to_string(),
            opt(m.mrr),
            opt(m.r_mrr),
            m.pairs.to_string(),
            m.observed_pairs.to_string(),
            m.hidden_pairs.to_string(),
            m.rank_cases.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Round-robin over the windows of a cascade-file configuration: round `i`
/// trains on window `i` and tests on the next window. Writes
/// `rounds/round<i>/` under the output dir.
pub fn cmd_rounds(cfg: &ExperimentConfig) -> Result<Vec<ReproduceReport>> {
    let DataConfig::Cascades(data) = &cfg.data else {
        return Err(Error::InvalidConfig("rounds need a cascade-file data source".into()));
    };
    let windows = load_windows(data)?;
    let universe = node_universe(&windows);
    let dir = cfg.resolved_output_dir().join("rounds");
    let mut out = Vec::new();
    for (round, (train, test)) in round_pairs(windows.len()).into_iter().enumerate() {
        let work = Workload {
            train: Dataset::inferred(windows[train].clone()),
            universe: universe.clone(),
            scenarios: vec![Scenario {
                name: format!("window{test}"),
                data: Dataset::inferred(windows[test].clone()),
                truth: TruthSource::Ratio,
            }],
            corpus: None,
        };
        let round_dir = dir.join(format!("round{}", round + 1));
        let (report, _) = run_comparison(cfg, &work, &round_dir)?;
        finish_report(&round_dir, &report)?;
        out.push(report);
    }
    Ok(out)
}
