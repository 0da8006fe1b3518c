//! One experiment: data, victims, harvest, attackers, metrics.

use std::fs::File;
use std::path::Path;

use rust_decimal::Decimal;

use super::config::{architecture, DataConfig, ExperimentConfig, Metric};
use super::report::{summarize, ExperimentReport, Meters, ModelRow, Role, SeedReport, TvKind};
use crate::analysis::{
    cost_report, da_bound_report, defense_bound_report, disagreement_risk, ensemble_diversity, tv_discriminator,
    tv_exact, Domain, Paired, Source, TabularSupport, TotalVariation,
};
use crate::attacker::{assemble, harvest, imitate, HarvestResult, Strategy};
use crate::data::{
    featurize, generate_gaussian_pair, generate_tabular_pair, read_text_csv, split, FeaturizerConfig, LabeledDataset,
    Split,
};
use crate::error::{Error, Result};
use crate::models::{train, LabelMode, Model, TrainConfig};
use crate::rng::derive_seed;
use crate::victim::{ApiResponse, DefenseMode, VictimEndpoint};

// salts for derive_seed
const SALT_SOURCE_SPLIT: u64 = 1;
const SALT_TARGET_SPLIT: u64 = 2;
const SALT_VICTIM_TRAIN: u64 = 100;
const SALT_ENDPOINT: u64 = 200;
const SALT_ATTACKER: u64 = 300;
const SALT_IN_DOMAIN: u64 = 301;
const SALT_AUDIT: u64 = 400;
const SALT_TV: u64 = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplits {
    pub source: Split,
    pub target: Split,
}

fn read_text_domain(path: &Path, num_classes: usize, f: &FeaturizerConfig, tag: &str) -> Result<LabeledDataset> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let records = read_text_csv(file)?;
    let inputs = records
        .iter()
        .map(|r| featurize(&r.text, f))
        .collect::<Result<Vec<_>>>()?;
    let labels = records.iter().map(|r| r.label).collect();
    LabeledDataset::new(inputs, labels, f.dim, num_classes, tag)
}

/// Full source and target datasets for one seed (before splitting).
pub fn load_domains(data: &DataConfig, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    match data {
        DataConfig::Gaussian { spec, .. } => generate_gaussian_pair(spec, seed),
        DataConfig::Tabular { spec, .. } => generate_tabular_pair(spec, seed),
        DataConfig::Csv {
            source,
            target,
            num_classes,
            featurizer,
            ..
        } => Ok((
            read_text_domain(source, *num_classes, featurizer, "source")?,
            read_text_domain(target, *num_classes, featurizer, "target")?,
        )),
    }
}

pub fn prepare_splits(data: &DataConfig, seed: u64) -> Result<DataSplits> {
    let (src, tgt) = load_domains(data, seed)?;
    let fr = data.splits();
    Ok(DataSplits {
        source: split(&src, fr.source, derive_seed(seed, SALT_SOURCE_SPLIT))?,
        target: split(&tgt, fr.target, derive_seed(seed, SALT_TARGET_SPLIT))?,
    })
}

pub fn victim_name(k: usize, cfg: &ExperimentConfig) -> String {
    cfg.victims[k].name.clone().unwrap_or_else(|| format!("Victim{}", k + 1))
}

/// Train every configured victim on the source training split (or its shard).
pub fn train_victims(cfg: &ExperimentConfig, source_train: &LabeledDataset, seed: u64) -> Result<Vec<Model>> {
    cfg.victims
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let data = match v.shard {
                Some(s) => source_train.shard(s.index, s.count)?,
                None => source_train.clone(),
            };
            if data.is_empty() {
                return Err(Error::Empty("victim training data"));
            }
            let tc = TrainConfig {
                seed: derive_seed(seed, SALT_VICTIM_TRAIN + k as u64) ^ v.train.seed,
                label_mode: LabelMode::Hard,
                ..v.train
            };
            train(
                architecture(v.kind, v.dims)?,
                data.dim(),
                data.num_classes(),
                data.inputs(),
                &data.one_hot_targets(),
                &tc,
            )
        })
        .collect()
}

/// Wrap trained victims as metered endpoints. `salt` separates the attacker's
/// endpoints from audit copies so their defense noise is independent.
pub fn endpoints(cfg: &ExperimentConfig, models: &[Model], seed: u64, salt: u64) -> Result<Vec<VictimEndpoint>> {
    models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let v = &cfg.victims[k];
            VictimEndpoint::new(
                victim_name(k, cfg),
                m.clone(),
                v.defense,
                v.price_per_query,
                derive_seed(seed, salt + k as u64),
            )
        })
        .collect()
}

pub fn attack_endpoints(cfg: &ExperimentConfig, models: &[Model], seed: u64) -> Result<Vec<VictimEndpoint>> {
    endpoints(cfg, models, seed, SALT_ENDPOINT)
}

/// Attacker rows to produce: every single victim, then the ensemble if configured.
pub fn attack_plan(cfg: &ExperimentConfig) -> Vec<(String, Strategy)> {
    let k = cfg.victims.len();
    let mut plan: Vec<(String, Strategy)> = (0..k).map(|i| (format!("Attack_s{}", i + 1), Strategy::Single(i))).collect();
    if k >= 2 && matches!(cfg.attacker.strategy, Strategy::Concat | Strategy::Average) {
        plan.push(("Attack_m".into(), cfg.attacker.strategy));
    }
    plan
}

pub fn attacker_train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(seed, SALT_ATTACKER) ^ cfg.attacker.train.seed,
        ..cfg.attacker.train
    }
}

pub fn train_attacker(cfg: &ExperimentConfig, h: &HarvestResult, strategy: Strategy, seed: u64) -> Result<Model> {
    let ds = assemble(h, strategy, cfg.attacker.label_mode)?;
    imitate(&ds, architecture(cfg.attacker.kind, cfg.attacker.dims)?, &attacker_train_config(cfg, seed))
}

/// Source and target evaluation domains: exact supports for tabular data,
/// held-out test splits otherwise.
enum EvalDomains<'a> {
    Exact(&'a TabularSupport),
    Sample { source: &'a LabeledDataset, target: &'a LabeledDataset },
}

impl<'a> EvalDomains<'a> {
    fn source(&self) -> Domain<'a> {
        match self {
            EvalDomains::Exact(t) => t.source(),
            EvalDomains::Sample { source, .. } => Domain::from_dataset(source),
        }
    }

    fn target(&self) -> Domain<'a> {
        match self {
            EvalDomains::Exact(t) => t.target(),
            EvalDomains::Sample { target, .. } => Domain::from_dataset(target),
        }
    }
}

fn accuracy_on(domain: &Domain, f: &Source) -> Result<f64> {
    Ok(1.0 - disagreement_risk(&domain.oracle(), f, &domain.eval, LabelMode::Hard)?)
}

fn sum_prices(cfg: &ExperimentConfig, strategy: Strategy) -> Decimal {
    match strategy {
        Strategy::Single(k) => cfg.victims[k].price_per_query,
        Strategy::Concat | Strategy::Average => cfg.victims.iter().map(|v| v.price_per_query).sum(),
    }
}

/// Everything for one seed. Errors abort this seed only.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    let ev = &cfg.evaluation;
    let mode = ev.risk_mode;
    let splits = prepare_splits(&cfg.data, seed)?;
    let (src, tgt) = (&splits.source, &splits.target);
    if tgt.train.is_empty() {
        return Err(Error::Empty("attacker query set"));
    }

    let tabular = match &cfg.data {
        DataConfig::Tabular { spec, .. } => Some((TabularSupport::new(spec)?, tv_exact(spec)?)),
        _ => None,
    };
    let domains = match &tabular {
        Some((t, _)) => EvalDomains::Exact(t),
        None => {
            if src.test.is_empty() || tgt.test.is_empty() {
                return Err(Error::Empty("evaluation split"));
            }
            EvalDomains::Sample {
                source: &src.test,
                target: &tgt.test,
            }
        }
    };
    let (sd, td) = (domains.source(), domains.target());

    let tv = if ev.wants(Metric::Bound) || ev.wants(Metric::Risks) {
        Some(match &tabular {
            Some((_, d)) => TotalVariation::Exact(*d),
            None => {
                let tc = TrainConfig {
                    seed: derive_seed(seed, SALT_TV),
                    ..TrainConfig::default()
                };
                TotalVariation::Estimated(tv_discriminator(src.train.inputs(), tgt.train.inputs(), &tc)?)
            }
        })
    } else {
        None
    };

    let victims = train_victims(cfg, &src.train, seed)?;
    let mut attack_eps = attack_endpoints(cfg, &victims, seed)?;
    let h = harvest(&mut attack_eps, tgt.train.inputs())?;
    let meters = attack_eps
        .iter()
        .map(|e| Meters {
            victim: e.name().to_string(),
            query_count: e.usage().query_count,
            total_cost: e.usage().total_cost,
        })
        .collect();

    // Provider-side audit: what each endpoint serves on the evaluation inputs.
    let mut audit = endpoints(cfg, &victims, seed, SALT_AUDIT)?;
    let mut served_src: Vec<Vec<ApiResponse>> = Vec::new();
    let mut served_tgt: Vec<Vec<ApiResponse>> = Vec::new();
    for e in audit.iter_mut() {
        served_src.push(e.query_batch(sd.eval.inputs)?);
        served_tgt.push(e.query_batch(td.eval.inputs)?);
    }

    let risk_for = |victim: &Paired, attacker: &Paired| -> Result<_> {
        match tv {
            Some(tv) => da_bound_report(victim, attacker, &sd, &td, tv, mode).map(Some),
            None => Ok(None),
        }
    };

    let served = |k: usize| Paired {
        source: Source::Responses(&served_src[k]),
        target: Source::Responses(&served_tgt[k]),
    };

    let mut rows = Vec::new();
    for (k, model) in victims.iter().enumerate() {
        let served_t = Source::Responses(&served_tgt[k]);
        let defense_bound = if ev.wants(Metric::Bound) && cfg.victims[k].defense.mode != DefenseMode::None {
            Some(defense_bound_report(&sd, &Source::Model(model), &Source::Responses(&served_src[k]), mode)?)
        } else {
            None
        };
        rows.push(ModelRow {
            model: victim_name(k, cfg),
            role: Role::Victim,
            target_accuracy: accuracy_on(&td, &served_t)?,
            raw_target_accuracy: Some(accuracy_on(&td, &Source::Model(model))?),
            risk: risk_for(&served(k), &served(k))?,
            cost: None,
            defense_bound,
            mean_distortion: Some(audit[k].mean_distortion()),
            note: None,
        });
    }

    if ev.in_domain {
        let tc = TrainConfig {
            seed: derive_seed(seed, SALT_IN_DOMAIN) ^ cfg.attacker.train.seed,
            label_mode: LabelMode::Hard,
            ..cfg.attacker.train
        };
        let m = train(
            architecture(cfg.attacker.kind, cfg.attacker.dims)?,
            tgt.train.dim(),
            tgt.train.num_classes(),
            tgt.train.inputs(),
            &tgt.train.one_hot_targets(),
            &tc,
        )?;
        rows.push(ModelRow {
            model: "InDomain".into(),
            role: Role::InDomain,
            target_accuracy: accuracy_on(&td, &Source::Model(&m))?,
            raw_target_accuracy: None,
            risk: None,
            cost: None,
            defense_bound: None,
            mean_distortion: None,
            note: Some("uses target oracle labels".into()),
        });
    }

    for (name, strategy) in attack_plan(cfg) {
        let m = train_attacker(cfg, &h, strategy, seed)?;
        // the ensemble attacker is scored against the first victim
        let v = match strategy {
            Strategy::Single(k) => k,
            _ => 0,
        };
        let cost = if ev.wants(Metric::Cost) {
            Some(cost_report(
                h.num_inputs() as u64,
                sum_prices(cfg, strategy),
                cfg.human_price_per_label,
            )?)
        } else {
            None
        };
        rows.push(ModelRow {
            model: name,
            role: Role::Attacker,
            target_accuracy: accuracy_on(&td, &Source::Model(&m))?,
            raw_target_accuracy: None,
            risk: risk_for(&served(v), &Paired::same(Source::Model(&m)))?,
            cost,
            defense_bound: None,
            mean_distortion: None,
            note: None,
        });
    }

    let diversity = if ev.wants(Metric::Diversity) && h.num_victims() >= 2 {
        Some(ensemble_diversity(&h, mode)?)
    } else {
        None
    };

    Ok(SeedReport {
        seed,
        error: None,
        tv: tv.map(|t| t.value()),
        tv_kind: tv.map(|t| match t {
            TotalVariation::Exact(_) => TvKind::Exact,
            TotalVariation::Estimated(_) => TvKind::Estimated,
        }),
        diversity,
        meters,
        rows,
    })
}

/// Run every configured seed; a failing seed is recorded, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let one = |seed: u64| run_seed(cfg, seed).unwrap_or_else(|e| SeedReport::failed(seed, &e));
    let seeds: Vec<SeedReport> = if cfg.evaluation.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = cfg.evaluation.seeds.iter().map(|&seed| s.spawn(move || one(seed))).collect();
            handles
                .into_iter()
                .zip(&cfg.evaluation.seeds)
                .map(|(h, &seed)| {
                    h.join()
                        .unwrap_or_else(|_| SeedReport::failed(seed, &Error::InvalidArgument("seed worker panicked".into())))
                })
                .collect()
        })
    } else {
        cfg.evaluation.seeds.iter().map(|&s| one(s)).collect()
    };
    let summary = summarize(&seeds);
    let evaluated_on = match cfg.data {
        DataConfig::Tabular { .. } => "exact enumeration over the tabular support",
        _ => "held-out test splits (target test for accuracy)",
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        evaluated_on: evaluated_on.into(),
        seeds,
        summary,
    })
}
