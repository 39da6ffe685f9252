//! Configuration, persistence and the end-to-end experiment runner behind
//! the `infsus` binary.

mod commands;
mod config;
mod corpus;
mod methods;

pub use commands::{
    cmd_baselines, cmd_evaluate, cmd_generate, cmd_reproduce, cmd_rounds, cmd_train, load_workload, EvaluationRow,
    GenerateSummary, ReproduceReport, RestartCheck, ScenarioGuess, TableRow, TrainSummary, Workload, MODEL_FILE,
    TRACE_FILE,
};
pub use config::{
    BaselineConfig, CascadeData, DataConfig, EvalConfig, ExperimentConfig, GridConfig, Method, Profile,
    SyntheticData, SyntheticNetwork, OUTPUT_ENV,
};
pub use corpus::{
    build_corpus, load_windows, node_universe, round_pairs, stand_in_log, Dataset, Scenario, SyntheticCorpus,
    TruthSource, CASCADES_FILE, NETWORK_FILE, SHUFFLED_CASCADES_FILE, SHUFFLED_NETWORK_FILE, TEST_CASCADES_FILE,
    TRUTH_FILE,
};
pub use methods::{
    build_predictors, check_domain, evaluate_prepared, fit_tables, im_hyperparams, missing_nodes, prepare, train_im,
    PairwiseFits, PreparedScenario, RandomGuess,
};
