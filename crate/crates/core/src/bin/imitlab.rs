//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use rust_decimal::Decimal;
use serde_json::{json, Value};

use imitlab::analysis::{
    cost_report, da_bound_report, defense_bound_report, tv_discriminator, tv_exact, Domain, Paired, Source,
    TabularSupport, TotalVariation,
};
use imitlab::attacker::{assemble, harvest, imitate};
use imitlab::data::{read_feature_csv, write_feature_csv, LabeledDataset};
use imitlab::harness::{
    architecture, attack_endpoints, attacker_train_config, prepare_splits, run_experiment, train_victims,
    victim_name, DataConfig, ExperimentConfig,
};
use imitlab::models::{accuracy, deserialize_model, serialize_model, Model, TrainConfig};
use imitlab::victim::DefenseMode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "imitlab", version, about = "Imitation attacks on metered classifier endpoints")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for single-seed steps; for `run`, replaces the first configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "imitlab-out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate (or load) source/target data and write the splits as feature CSVs.
    Gen,
    /// Train the configured victims on the source training split.
    TrainVictim,
    /// Query the victims with target inputs and train the configured attacker.
    Attack,
    /// Target-domain accuracy of saved victims and attacker.
    Evaluate,
    /// Domain-adaptation bound terms for the attacker, and defense bounds.
    Bound,
    /// Price of harvesting labels versus human annotation.
    Cost {
        #[arg(long)]
        queries: Option<u64>,
        #[arg(long)]
        price: Option<String>,
        #[arg(long)]
        human_price: Option<String>,
    },
    /// The whole pipeline over every configured seed.
    Run,
}

enum Failure {
    Config(String),
    Runtime(String),
}

type Outcome<T> = std::result::Result<T, Failure>;

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Rows for CSV output; JSON output is built separately.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn render(&self) -> Outcome<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(runtime)?;
        for r in &self.rows {
            w.write_record(r).map_err(runtime)?;
        }
        String::from_utf8(w.into_inner().map_err(runtime)?).map_err(runtime)
    }
}

struct Rendered {
    json: Value,
    csv: Table,
}

fn load_config(cli: &Cli) -> Outcome<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required for this command".into()))?;
    ExperimentConfig::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn seed_of(cli: &Cli, cfg: &ExperimentConfig) -> u64 {
    cli.seed.unwrap_or(cfg.evaluation.seeds[0])
}

fn data_dir(out: &Path) -> PathBuf {
    out.join("data")
}

fn victim_path(out: &Path, k: usize) -> PathBuf {
    out.join("victims").join(format!("victim{}.model", k + 1))
}

fn attacker_path(out: &Path) -> PathBuf {
    out.join("attack").join("attacker.model")
}

fn read_split(out: &Path, name: &str, num_classes: usize) -> Outcome<LabeledDataset> {
    let path = data_dir(out).join(format!("{name}.csv"));
    let file = File::open(&path).map_err(|e| Failure::Runtime(format!("{}: {e} (run `gen` first)", path.display())))?;
    read_feature_csv(file, num_classes, name).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn save_model(path: &Path, m: &Model) -> Outcome<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    fs::write(path, serialize_model(m)).map_err(runtime)
}

fn load_model(path: &Path) -> Outcome<Model> {
    let bytes = fs::read(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    deserialize_model(&bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_victims(out: &Path, cfg: &ExperimentConfig) -> Outcome<Vec<Model>> {
    (0..cfg.victims.len()).map(|k| load_model(&victim_path(out, k))).collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn cmd_gen(cli: &Cli, cfg: &ExperimentConfig) -> Outcome<Rendered> {
    let seed = seed_of(cli, cfg);
    let splits = prepare_splits(&cfg.data, seed).map_err(runtime)?;
    let dir = data_dir(&cli.out);
    fs::create_dir_all(&dir).map_err(runtime)?;
    let mut table = Table::new(&["split", "examples", "path"]);
    let mut items = Vec::new();
    for (domain, s) in [("source", &splits.source), ("target", &splits.target)] {
        for (part, ds) in [("train", &s.train), ("dev", &s.dev), ("test", &s.test)] {
            let name = format!("{domain}_{part}");
            let path = dir.join(format!("{name}.csv"));
            write_feature_csv(File::create(&path).map_err(runtime)?, ds).map_err(runtime)?;
            table.push(vec![name.clone(), ds.len().to_string(), path.display().to_string()]);
            items.push(json!({"split": name, "examples": ds.len(), "path": path.display().to_string()}));
        }
    }
    Ok(Rendered {
        json: json!({"seed": seed, "splits": items}),
        csv: table,
    })
}

fn cmd_train_victim(cli: &Cli, cfg: &ExperimentConfig) -> Outcome<Rendered> {
    let seed = seed_of(cli, cfg);
    let c = cfg.data.num_classes();
    let train = read_split(&cli.out, "source_train", c)?;
    let src_test = read_split(&cli.out, "source_test", c)?;
    let tgt_test = read_split(&cli.out, "target_test", c)?;
    let models = train_victims(cfg, &train, seed).map_err(runtime)?;
    let mut table = Table::new(&["victim", "source_test_accuracy", "target_test_accuracy", "path"]);
    let mut items = Vec::new();
    for (k, m) in models.iter().enumerate() {
        let path = victim_path(&cli.out, k);
        save_model(&path, m)?;
        let a_s = accuracy(m, &src_test).ok();
        let a_t = accuracy(m, &tgt_test).ok();
        table.push(vec![
            victim_name(k, cfg),
            a_s.map(fmt).unwrap_or_default(),
            a_t.map(fmt).unwrap_or_default(),
            path.display().to_string(),
        ]);
        items.push(json!({
            "victim": victim_name(k, cfg),
            "source_test_accuracy": a_s,
            "target_test_accuracy": a_t,
            "path": path.display().to_string(),
        }));
    }
    Ok(Rendered {
        json: json!({"seed": seed, "victims": items}),
        csv: table,
    })
}

fn cmd_attack(cli: &Cli, cfg: &ExperimentConfig) -> Outcome<Rendered> {
    let seed = seed_of(cli, cfg);
    let queries = read_split(&cli.out, "target_train", cfg.data.num_classes())?;
    let models = load_victims(&cli.out, cfg)?;
    let mut eps = attack_endpoints(cfg, &models, seed).map_err(runtime)?;
    let h = harvest(&mut eps, queries.inputs()).map_err(runtime)?;
    let ds = assemble(&h, cfg.attacker.strategy, cfg.attacker.label_mode).map_err(runtime)?;
    let dir = cli.out.join("attack");
    fs::create_dir_all(&dir).map_err(runtime)?;
    ds.write_csv(File::create(dir.join("imitation.csv")).map_err(runtime)?)
        .map_err(runtime)?;
    let arch = architecture(cfg.attacker.kind, cfg.attacker.dims).map_err(runtime)?;
    let m = imitate(&ds, arch, &attacker_train_config(cfg, seed)).map_err(runtime)?;
    save_model(&attacker_path(&cli.out), &m)?;

    let mut table = Table::new(&["victim", "query_count", "total_cost"]);
    let mut items = Vec::new();
    for e in &eps {
        let u = e.usage();
        table.push(vec![e.name().into(), u.query_count.to_string(), u.total_cost.to_string()]);
        items.push(json!({"victim": e.name(), "query_count": u.query_count, "total_cost": u.total_cost.to_string()}));
    }
    Ok(Rendered {
        json: json!({
            "seed": seed,
            "strategy": cfg.attacker.strategy.to_string(),
            "label_mode": cfg.attacker.label_mode.to_string(),
            "imitation_examples": ds.len(),
            "meters": items,
            "attacker": attacker_path(&cli.out).display().to_string(),
        }),
        csv: table,
    })
}

fn cmd_evaluate(cli: &Cli, cfg: &ExperimentConfig) -> Outcome<Rendered> {
    let test = read_split(&cli.out, "target_test", cfg.data.num_classes())?;
    let mut models: Vec<(String, Model)> = load_victims(&cli.out, cfg)?
        .into_iter()
        .enumerate()
        .map(|(k, m)| (victim_name(k, cfg), m))
        .collect();
    models.push(("Attacker".into(), load_model(&attacker_path(&cli.out))?));
    let mut table = Table::new(&["model", "target_accuracy"]);
    let mut items = Vec::new();
    for (name, m) in &models {
        let a = accuracy(m, &test).map_err(runtime)?;
        table.push(vec![name.clone(), fmt(a)]);
        items.push(json!({"model": name, "target_accuracy": a}));
    }
    Ok(Rendered {
        json: json!({"models": items}),
        csv: table,
    })
}

fn cmd_bound(cli: &Cli, cfg: &ExperimentConfig) -> Outcome<Rendered> {
    let seed = seed_of(cli, cfg);
    let c = cfg.data.num_classes();
    let mode = cfg.evaluation.risk_mode;
    let models = load_victims(&cli.out, cfg)?;
    let attacker = load_model(&attacker_path(&cli.out))?;
    let support;
    let (src_test, tgt_test);
    let (sd, td, tv) = match &cfg.data {
        DataConfig::Tabular { spec, .. } => {
            support = TabularSupport::new(spec).map_err(runtime)?;
            let tv = TotalVariation::Exact(tv_exact(spec).map_err(runtime)?);
            (support.source(), support.target(), tv)
        }
        _ => {
            src_test = read_split(&cli.out, "source_test", c)?;
            tgt_test = read_split(&cli.out, "target_test", c)?;
            let src_train = read_split(&cli.out, "source_train", c)?;
            let tgt_train = read_split(&cli.out, "target_train", c)?;
            let tc = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            let d = tv_discriminator(src_train.inputs(), tgt_train.inputs(), &tc).map_err(runtime)?;
            (Domain::from_dataset(&src_test), Domain::from_dataset(&tgt_test), TotalVariation::Estimated(d))
        }
    };
    let r = da_bound_report(
        &Paired::same(Source::Model(&models[0])),
        &Paired::same(Source::Model(&attacker)),
        &sd,
        &td,
        tv,
        mode,
    )
    .map_err(runtime)?;
    let holds = serde_json::to_value(r.bound_holds).map_err(runtime)?;
    let holds_text = match &holds {
        Value::String(s) => s.clone(),
        v => v.to_string(),
    };
    let mut table = Table::new(&["victim", "epsilon_v", "epsilon_a", "imitation_gap", "tv", "bound_rhs", "bound_holds"]);
    table.push(vec![
        victim_name(0, cfg),
        fmt(r.epsilon_v),
        fmt(r.epsilon_a),
        fmt(r.imitation_gap),
        fmt(r.tv),
        fmt(r.bound_rhs),
        holds_text,
    ]);

    let mut defenses = Vec::new();
    let mut eps = attack_endpoints(cfg, &models, seed).map_err(runtime)?;
    for (k, e) in eps.iter_mut().enumerate() {
        if e.policy().mode == DefenseMode::None {
            continue;
        }
        let served = e.query_batch(sd.eval.inputs).map_err(runtime)?;
        let d = defense_bound_report(&sd, &Source::Model(&models[k]), &Source::Responses(&served), mode)
            .map_err(runtime)?;
        defenses.push(json!({"victim": victim_name(k, cfg), "report": d}));
    }
    Ok(Rendered {
        json: json!({"victim": victim_name(0, cfg), "risk": r, "defense_bounds": defenses}),
        csv: table,
    })
}

fn parse_decimal(flag: &str, s: &str) -> Outcome<Decimal> {
    Decimal::from_str(s).map_err(|e| Failure::Config(format!("--{flag} {s}: {e}")))
}

fn cmd_cost(
    cli: &Cli,
    queries: Option<u64>,
    price: Option<&str>,
    human_price: Option<&str>,
) -> Outcome<Rendered> {
    // flags override the config; the config is only needed for what's missing
    let cfg = if queries.is_none() || price.is_none() || human_price.is_none() {
        Some(load_config(cli)?)
    } else {
        None
    };
    let n = match (queries, &cfg) {
        (Some(n), _) => n,
        (None, Some(cfg)) => prepare_splits(&cfg.data, seed_of(cli, cfg))
            .map_err(runtime)?
            .target
            .train
            .len() as u64,
        (None, None) => unreachable!(),
    };
    let p = match (price, &cfg) {
        (Some(p), _) => parse_decimal("price", p)?,
        (None, Some(cfg)) => cfg.victims.iter().map(|v| v.price_per_query).sum(),
        (None, None) => unreachable!(),
    };
    let hp = match (human_price, &cfg) {
        (Some(p), _) => parse_decimal("human-price", p)?,
        (None, Some(cfg)) => cfg.human_price_per_label,
        (None, None) => unreachable!(),
    };
    let r = cost_report(n, p, hp).map_err(|e| Failure::Config(e.to_string()))?;
    let ratio = serde_json::to_value(r.ratio).map_err(runtime)?;
    let mut table = Table::new(&["n_queries", "api_cost", "human_cost", "ratio"]);
    table.push(vec![
        n.to_string(),
        r.api_cost.to_string(),
        r.human_cost.to_string(),
        match &ratio {
            Value::String(s) => s.clone(),
            v => v.to_string(),
        },
    ]);
    Ok(Rendered {
        json: serde_json::to_value(r).map_err(runtime)?,
        csv: table,
    })
}

fn cmd_run(cli: &Cli, mut cfg: ExperimentConfig) -> Outcome<(String, bool)> {
    if let Some(s) = cli.seed {
        cfg.evaluation.seeds[0] = s;
    }
    let report = run_experiment(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
    fs::create_dir_all(&cli.out).map_err(runtime)?;
    let json = report.to_json().map_err(runtime)?;
    let csv = report.to_csv().map_err(runtime)?;
    fs::write(cli.out.join("report.json"), &json).map_err(runtime)?;
    fs::write(cli.out.join("report.csv"), &csv).map_err(runtime)?;
    fs::write(cli.out.join("summary.csv"), report.to_summary_csv().map_err(runtime)?).map_err(runtime)?;
    for s in report.seeds.iter().filter(|s| !s.ok()) {
        eprintln!("seed {} failed: {}", s.seed, s.error.as_deref().unwrap_or(""));
    }
    let text = match cli.format {
        Format::Json => json,
        Format::Csv => csv,
    };
    // partial failures are reported; only a run with no completed seed fails
    Ok((text, report.failed_seeds() < report.seeds.len()))
}

fn execute(cli: &Cli) -> Outcome<(String, bool)> {
    let render = |r: Rendered| -> Outcome<(String, bool)> {
        let text = match cli.format {
            Format::Json => serde_json::to_string_pretty(&r.json).map_err(runtime)? + "\n",
            Format::Csv => r.csv.render()?,
        };
        Ok((text, true))
    };
    match &cli.command {
        Command::Cost {
            queries,
            price,
            human_price,
        } => render(cmd_cost(cli, *queries, price.as_deref(), human_price.as_deref())?),
        Command::Run => cmd_run(cli, load_config(cli)?),
        cmd => {
            let cfg = load_config(cli)?;
            let r = match cmd {
                Command::Gen => cmd_gen(cli, &cfg)?,
                Command::TrainVictim => cmd_train_victim(cli, &cfg)?,
                Command::Attack => cmd_attack(cli, &cfg)?,
                Command::Evaluate => cmd_evaluate(cli, &cfg)?,
                Command::Bound => cmd_bound(cli, &cfg)?,
                Command::Cost { .. } | Command::Run => unreachable!(),
            };
            render(r)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok((text, complete)) => {
            print!("{text}");
            if complete {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
