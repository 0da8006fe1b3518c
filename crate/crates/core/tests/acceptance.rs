//! Acceptance checks, one PASS/FAIL line each. Run with `cargo test --test acceptance`.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

use imitlab::analysis::{
    cost_report, da_bound_report, defense_bound_report, tv_exact, CostRatio, Paired, Source, TabularSupport,
    TotalVariation, BOUND_TOL,
};
use imitlab::attacker::{assemble, harvest, imitate, HarvestResult, Strategy};
use imitlab::data::{generate_tabular_pair, FeatureVector, TabularDomainSpec};
use imitlab::harness::{run_experiment, DataConfig, ExperimentConfig, ExperimentReport, Metric, ModelDims};
use imitlab::models::{softmax, train, Architecture, LabelMode, Model, TrainConfig};
use imitlab::victim::{DefenseMode, DefensePolicy, VictimEndpoint};

struct Outcome {
    pass: bool,
    detail: String,
}

fn benchmark() -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/gaussian_shift.toml");
    ExperimentConfig::load(&path).expect("benchmark config loads")
}

fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let r = run_experiment(cfg).expect("config is valid");
    for s in &r.seeds {
        assert!(s.ok(), "seed {} failed: {:?}", s.seed, s.error);
    }
    r
}

fn acc(r: &ExperimentReport, model: &str) -> f64 {
    100.0 * r.summary_row(model).expect("row present").target_accuracy.mean
}

fn within(t: Instant, limit: u64) -> (bool, String) {
    let e = t.elapsed();
    (e <= Duration::from_secs(limit), format!("{:.1}s/{limit}s", e.as_secs_f64()))
}

fn c1_attack_gain() -> Outcome {
    let t = Instant::now();
    let r = run(&benchmark());
    let victims = (acc(&r, "Victim1") + acc(&r, "Victim2")) / 2.0;
    let attacker = acc(&r, "Attack_m");
    let gain = attacker - victims;
    let (fast, time) = within(t, 60);
    Outcome {
        pass: gain >= 1.0 && fast,
        detail: format!("attacker {attacker:.2} vs victims {victims:.2}: gain {gain:+.2} (need >= 1.00), {time}"),
    }
}

fn c2_ensemble_gain() -> Outcome {
    let t = Instant::now();
    let r = run(&benchmark());
    let (s1, s2, m) = (acc(&r, "Attack_s1"), acc(&r, "Attack_s2"), acc(&r, "Attack_m"));
    let (fast, time) = within(t, 90);
    Outcome {
        pass: m >= s1 - 0.5 && m >= s2 - 0.5 && m >= (s1 + s2) / 2.0 && fast,
        detail: format!("concat {m:.2}, singles {s1:.2} / {s2:.2} (avg {:.2}), {time}", (s1 + s2) / 2.0),
    }
}

fn attack_rows(r: &ExperimentReport) -> f64 {
    (acc(r, "Attack_s1") + acc(r, "Attack_s2") + acc(r, "Attack_m")) / 3.0
}

fn c3a_soft_vs_hard() -> Outcome {
    let mut soft = benchmark();
    soft.attacker.label_mode = LabelMode::Soft;
    let mut hard = soft.clone();
    hard.attacker.label_mode = LabelMode::Hard;
    let (rs, rh) = (run(&soft), run(&hard));
    let (ms, mh) = (acc(&rs, "Attack_m"), acc(&rh, "Attack_m"));
    let (as_, ah) = (attack_rows(&rs), attack_rows(&rh));
    Outcome {
        pass: ms >= mh && as_ >= ah,
        detail: format!("ensemble soft {ms:.2} vs hard {mh:.2}; all attack rows soft {as_:.2} vs hard {ah:.2}"),
    }
}

fn served_victim_accuracy(policy: DefensePolicy) -> f64 {
    let mut cfg = benchmark();
    for v in cfg.victims.iter_mut() {
        v.defense = policy;
    }
    let r = run(&cfg);
    (acc(&r, "Victim1") + acc(&r, "Victim2")) / 2.0
}

fn c3b_sigma_monotone() -> Outcome {
    let sigmas = [0.0, 0.1, 0.2, 0.5];
    let accs: Vec<f64> = sigmas
        .iter()
        .map(|&s| served_victim_accuracy(DefensePolicy::gaussian(s)))
        .collect();
    let ok = accs.windows(2).all(|w| w[1] <= w[0] + 0.5);
    let shown: Vec<String> = sigmas.iter().zip(&accs).map(|(s, a)| format!("σ={s}: {a:.2}")).collect();
    Outcome {
        pass: ok,
        detail: shown.join(", "),
    }
}

fn c3c_label_preserving() -> Outcome {
    let clean = served_victim_accuracy(DefensePolicy::none());
    let mut worst: f64 = 0.0;
    for s in [0.1, 0.5, 1.0] {
        let d = served_victim_accuracy(DefensePolicy::gaussian_label_preserving(s, 100));
        worst = worst.max((d - clean).abs());
    }
    Outcome {
        pass: worst == 0.0,
        detail: format!("undefended {clean:.4}, max change under label-preserving noise {worst}"),
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> TabularDomainSpec {
    let support = rng.random_range(2..=12);
    let classes = rng.random_range(2..=4);
    let mut simplex = |sparse: bool| {
        let mut w: Vec<f64> = (0..support)
            .map(|_| if sparse && rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
            .collect();
        if w.iter().sum::<f64>() == 0.0 {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        // absorb rounding so the masses sum to one within 1e-12
        let drift = 1.0 - w.iter().sum::<f64>();
        let i = w.iter().position(|&x| x > 0.0).unwrap();
        w[i] += drift;
        w
    };
    let p_source = simplex(true);
    let p_target = simplex(true);
    let oracle_rule = (0..support).map(|_| rng.random_range(0..classes)).collect();
    TabularDomainSpec {
        support_size: support,
        p_source,
        p_target,
        oracle_rule,
        n_source: rng.random_range(10..200),
        n_target: rng.random_range(10..200),
        num_classes: classes,
    }
}

struct Instance {
    spec: TabularDomainSpec,
    victim: Model,
    attacker: Model,
}

fn tabular_instance(i: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(9000 + i);
    let spec = random_spec(&mut rng);
    let (src, tgt) = generate_tabular_pair(&spec, i).unwrap();
    let cfg = TrainConfig {
        epochs: rng.random_range(1..20),
        seed: i,
        label_mode: LabelMode::Hard,
        ..TrainConfig::default()
    };
    let arch = if i % 2 == 0 {
        Architecture::Linear
    } else {
        Architecture::Mlp { hidden_dim: 4 }
    };
    let victim = train(arch, spec.support_size, spec.num_classes, src.inputs(), &src.one_hot_targets(), &cfg).unwrap();
    let mut ep = [VictimEndpoint::new("v", victim.clone(), DefensePolicy::none(), Decimal::ZERO, i).unwrap()];
    let h = harvest(&mut ep, tgt.inputs()).unwrap();
    let mode = if i % 3 == 0 { LabelMode::Hard } else { LabelMode::Soft };
    let attacker = imitate(&assemble(&h, Strategy::Single(0), mode).unwrap(), Architecture::Linear, &cfg).unwrap();
    Instance { spec, victim, attacker }
}

fn c4_da_bound() -> Outcome {
    let t = Instant::now();
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for i in 0..100 {
        let inst = tabular_instance(i);
        let support = TabularSupport::new(&inst.spec).unwrap();
        let tv = TotalVariation::Exact(tv_exact(&inst.spec).unwrap());
        for mode in [LabelMode::Hard, LabelMode::Soft] {
            let r = da_bound_report(
                &Paired::same(Source::Model(&inst.victim)),
                &Paired::same(Source::Model(&inst.attacker)),
                &support.source(),
                &support.target(),
                tv,
                mode,
            )
            .unwrap();
            tightest = tightest.min(r.bound_rhs - r.epsilon_a);
            if r.epsilon_a > r.bound_rhs + BOUND_TOL {
                violations += 1;
            }
        }
    }
    let (fast, time) = within(t, 30);
    Outcome {
        pass: violations == 0 && fast,
        detail: format!("100 instances x 2 modes, {violations} violations, smallest slack {tightest:.3e}, {time}"),
    }
}

fn c5_defense_bound() -> Outcome {
    let policies = [
        DefensePolicy::none(),
        DefensePolicy::hard_label(),
        DefensePolicy::gaussian(0.1),
        DefensePolicy::gaussian(0.5),
        DefensePolicy::gaussian(2.0),
        DefensePolicy::gaussian_label_preserving(0.5, 100),
    ];
    let mut violations = 0;
    let mut checks = 0;
    for i in 0..100 {
        let inst = tabular_instance(i);
        let support = TabularSupport::new(&inst.spec).unwrap();
        let sd = support.source();
        for (j, p) in policies.iter().enumerate() {
            let mut ep = VictimEndpoint::new("v", inst.victim.clone(), *p, Decimal::ZERO, i * 10 + j as u64).unwrap();
            let served = ep.query_batch(sd.eval.inputs).unwrap();
            for mode in [LabelMode::Hard, LabelMode::Soft] {
                let r = defense_bound_report(&sd, &Source::Model(&inst.victim), &Source::Responses(&served), mode).unwrap();
                checks += 1;
                if !r.holds || r.epsilon_v_defended > r.epsilon_v_raw + r.delta + BOUND_TOL {
                    violations += 1;
                }
            }
        }
    }
    let kinds: Vec<&str> = policies
        .iter()
        .map(|p| match p.mode {
            DefenseMode::None => "none",
            DefenseMode::HardLabel => "hard_label",
            DefenseMode::Gaussian => "gaussian",
            DefenseMode::GaussianLabelPreserving => "label_preserving",
        })
        .collect();
    Outcome {
        pass: violations == 0,
        detail: format!("{checks} checks over [{}], {violations} violations", kinds.join(", ")),
    }
}

fn finite_difference_error(model: &Model, xs: &[FeatureVector], ts: &[Vec<f64>]) -> f64 {
    let xr: Vec<&FeatureVector> = xs.iter().collect();
    let tr: Vec<&[f64]> = ts.iter().map(|t| t.as_slice()).collect();
    let (_, grad) = model.loss_and_gradient(&xr, &tr).unwrap();
    let h = 1e-5;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..grad.len() {
        let shifted = |d: f64| {
            let mut p = model.params().to_vec();
            p[j] += d;
            let m = Model::from_params(model.arch(), model.input_dim(), model.num_classes(), p).unwrap();
            m.loss_and_gradient(&xr, &tr).unwrap().0
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        num += (fd - grad[j]).powi(2);
        den += fd.powi(2).max(grad[j].powi(2));
    }
    (num / den.max(1e-300)).sqrt()
}

fn c6_numerical_core() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_grad: f64 = 0.0;
    for i in 0..20 {
        let (d, c) = (rng.random_range(2..6), rng.random_range(2..5));
        let arch = if i % 2 == 0 {
            Architecture::Linear
        } else {
            Architecture::Mlp { hidden_dim: rng.random_range(2..6) }
        };
        let n = Model::param_count(arch, d, c).unwrap();
        let params = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let model = Model::from_params(arch, d, c, params).unwrap();
        let xs: Vec<FeatureVector> = (0..5)
            .map(|_| FeatureVector::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
            .collect();
        let ts: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let raw: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
                softmax(&raw).unwrap()
            })
            .collect();
        worst_grad = worst_grad.max(finite_difference_error(&model, &xs, &ts));
    }

    let mut worst_simplex: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..10);
        let z: Vec<f64> = (0..k).map(|_| rng.random_range(-50.0..50.0)).collect();
        let p = softmax(&z).unwrap();
        worst_simplex = worst_simplex.max((p.iter().sum::<f64>() - 1.0).abs());
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    // concat over K victims versus training on the averaged targets
    let mut worst_identity: f64 = 0.0;
    for trial in 0..10 {
        let (d, c, k, n) = (4, 3, 3, 7);
        let inputs: Vec<FeatureVector> = (0..n)
            .map(|_| FeatureVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let mut eps: Vec<VictimEndpoint> = (0..k)
            .map(|v| {
                let p = (0..Model::param_count(Architecture::Linear, d, c).unwrap())
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect();
                let m = Model::from_params(Architecture::Linear, d, c, p).unwrap();
                VictimEndpoint::new(format!("v{v}"), m, DefensePolicy::none(), Decimal::ZERO, trial).unwrap()
            })
            .collect();
        let h: HarvestResult = harvest(&mut eps, &inputs).unwrap();
        let concat = assemble(&h, Strategy::Concat, LabelMode::Soft).unwrap();
        let avg = assemble(&h, Strategy::Average, LabelMode::Soft).unwrap();
        let p = (0..Model::param_count(Architecture::Mlp { hidden_dim: 3 }, d, c).unwrap())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let student = Model::from_params(Architecture::Mlp { hidden_dim: 3 }, d, c, p).unwrap();
        let loss = |ds: &imitlab::attacker::ImitationDataset| {
            let xr: Vec<&FeatureVector> = ds.inputs.iter().collect();
            let tr: Vec<&[f64]> = ds.targets.iter().map(|t| t.as_slice()).collect();
            student.loss_and_gradient(&xr, &tr).unwrap()
        };
        let (lc, gc) = loss(&concat);
        let (la, ga) = loss(&avg);
        worst_identity = worst_identity.max((lc - la).abs());
        for (a, b) in gc.iter().zip(&ga) {
            worst_identity = worst_identity.max((a - b).abs());
        }
    }

    Outcome {
        pass: worst_grad <= 1e-4 && worst_simplex <= 1e-12 && worst_identity <= 1e-10,
        detail: format!(
            "gradient rel. err {worst_grad:.2e} (<=1e-4), simplex err {worst_simplex:.1e} (<=1e-12), concat/average loss gap {worst_identity:.1e} (<=1e-10)"
        ),
    }
}

fn c7_cost() -> Outcome {
    let d = |s: &str| Decimal::from_str(s).unwrap();
    let human = cost_report(9613, d("5") / d("9613"), d("0.05")).unwrap();
    let ratio = match human.ratio {
        CostRatio::Finite(r) => r,
        CostRatio::Infinite => Decimal::ZERO,
    };
    let exact = human.human_cost == d("480.65") && human.api_cost == d("5") && ratio == d("96.13");
    let in_band = ratio >= d("20") && ratio <= d("150");
    Outcome {
        pass: exact && in_band,
        detail: format!(
            "human {} / api {} = {} (band 20..150)",
            human.human_cost, human.api_cost, ratio
        ),
    }
}

fn c8_no_gain_control() -> Outcome {
    let mut cfg = benchmark();
    if let DataConfig::Gaussian { spec, .. } = &mut cfg.data {
        spec.class_means_target = spec.class_means_source.clone();
    }
    cfg.victims.truncate(1);
    cfg.victims[0].shard = None;
    cfg.attacker.kind = cfg.victims[0].kind;
    cfg.attacker.dims = ModelDims {
        hidden_dim: cfg.victims[0].dims.hidden_dim,
    };
    cfg.attacker.strategy = Strategy::Single(0);
    cfg.evaluation.in_domain = false;
    let r = run(&cfg);
    let (v, a) = (acc(&r, "Victim1"), acc(&r, "Attack_s1"));
    Outcome {
        pass: (a - v).abs() <= 2.0,
        detail: format!("same domain, {:?}-{} both sides: victim {v:.2}, attacker {a:.2}, |diff| {:.2} (<=2)", cfg.attacker.kind, cfg.attacker.dims.hidden_dim, (a - v).abs()),
    }
}

fn c9_determinism() -> Outcome {
    let mut cfg = benchmark();
    cfg.evaluation.metrics = vec![Metric::Accuracy, Metric::Risks, Metric::Bound, Metric::Diversity, Metric::Cost];
    let a = run(&cfg);
    let b = run(&cfg);
    cfg.evaluation.parallel = true;
    let c = run(&cfg);
    let mut tab = cfg.clone();
    tab.data = DataConfig::Tabular {
        spec: tabular_instance(3).spec,
        splits: Default::default(),
    };
    tab.victims.iter_mut().for_each(|v| v.defense = DefensePolicy::gaussian(0.3));
    tab.evaluation.parallel = false;
    let (t1, t2) = (run(&tab), run(&tab));
    let same = |x: &ExperimentReport, y: &ExperimentReport| {
        x.to_json().unwrap() == y.to_json().unwrap() && x.to_csv().unwrap() == y.to_csv().unwrap()
    };
    let seq_par = a.seeds == c.seeds && a.to_csv().unwrap() == c.to_csv().unwrap();
    Outcome {
        pass: same(&a, &b) && same(&t1, &t2) && seq_par,
        detail: format!(
            "gaussian repeat {}, tabular+noise repeat {}, sequential vs parallel seeds {}",
            same(&a, &b),
            same(&t1, &t2),
            seq_par
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 attack gain over victims", c1_attack_gain),
        ("2 ensemble vs single attackers", c2_ensemble_gain),
        ("3a soft >= hard labels", c3a_soft_vs_hard),
        ("3b victim accuracy vs sigma", c3b_sigma_monotone),
        ("3c label-preserving noise", c3c_label_preserving),
        ("4 domain-adaptation bound", c4_da_bound),
        ("5 defense distortion bound", c5_defense_bound),
        ("6 numerical core", c6_numerical_core),
        ("7 cost arithmetic", c7_cost),
        ("8 same-domain control", c8_no_gain_control),
        ("9 determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
