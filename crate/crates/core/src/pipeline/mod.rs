//! End-to-end orchestration: seed models and tasks, corpus generation,
//! classifier training, evaluation and diagnosis.

pub mod config;
pub mod corpus;
pub mod experiment;
pub mod seeds;
pub mod split;
pub mod tasks;

pub use config::{ExperimentConfig, DEFAULT_SEED};
pub use corpus::{build_corpus, categories_present, featurize, target_data, Corpus, CorpusCounts, CorpusSummary, KillStat};
pub use experiment::{
    coverage_group, diagnose, majority_baseline, run_experiment, train_localizer, Report, StageScores,
    FULL_SCALE_REFERENCE,
};
pub use seeds::{bundled, SeedModel, SeedRef, BUNDLED};
pub use split::{stratified_split, SPLIT_NAMES};
pub use tasks::TaskSpec;
