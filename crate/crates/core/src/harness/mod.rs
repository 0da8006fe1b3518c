//! Config-driven experiment runner.

mod config;
mod report;
mod run;

pub use config::{
    architecture, AttackerConfig, DataConfig, EvaluationConfig, ExperimentConfig, Metric, ModelDims, ModelKind, Shard,
    SplitFractions, VictimConfig,
};
pub use report::{summarize, ExperimentReport, Meters, ModelRow, Role, SeedReport, Stat, SummaryRow, TvKind, CSV_HEADER};
pub use run::{
    attack_endpoints, attack_plan, attacker_train_config, load_domains, prepare_splits, run_experiment, run_seed,
    train_attacker, train_victims, victim_name, DataSplits,
};
