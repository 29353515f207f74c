use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::json;

use super::methods::{Method, ScoringContext, ALIEN_DIR, GAUSSIAN_DIR};
use super::output::Staged;
use super::{Cli, Command, EnsembleArgs, EvalArgs, FitArgs, ReportArgs, ScoreArgs, SourceArgs, SynthArgs};
use crate::alien::{grid_search, write_alien, AlienGrid, TrainConfig};
use crate::baselines::{
    fit_gaussian_stats, fit_probe, select_probe, write_gaussian_stats, write_probe, ProbeKind,
    SequenceData, DEFAULT_RIDGE, PROBE_LEARNING_RATES,
};
use crate::bundle::binio::write_json;
use crate::bundle::synth::accuracy;
use crate::bundle::{generate_synthetic, read_any, write_bundle, AnyBundle, SplitRole, SynthConfig};
use crate::ensemble::{correlate_components, decompose, read_members, write_members, EnsembleProbs};
use crate::metrics::{bootstrap_eval, EvalConfig};
use crate::report::{aggregate, read_reports, write_report, MethodReport};

pub const RUN_FILE: &str = "run.json";

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Fit(a) => fit(&a, false),
        Command::Grid(a) => fit(&a, true),
        Command::Score(a) => score(&a),
        Command::Eval(a) => eval(&a),
        Command::Ensemble(a) => ensemble(&a),
        Command::Report(a) => report(&a),
    }
}

/// Echo of the command and its effective arguments.
fn write_run<A: Serialize>(dir: &Path, command: &str, args: &A) -> anyhow::Result<()> {
    write_json(
        &dir.join(RUN_FILE),
        &json!({ "command": command, "version": env!("CARGO_PKG_VERSION"), "args": args }),
    )?;
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<AnyBundle> {
    read_any(path).with_context(|| format!("reading bundle {}", path.display()))
}

fn synth(a: &SynthArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        n_train: a.n_train,
        n_val: a.n_val,
        n_test: a.n_test,
        d: a.d,
        c: a.c,
        class_separation: a.separation,
        noise_scale: a.noise,
        epistemic_fraction: a.rho,
        seed: a.seed,
    };
    cfg.validate()?;
    if a.members == 1 {
        bail!("an ensemble needs at least 2 members (use 0 to skip it)");
    }
    let data = generate_synthetic(&cfg)?;
    let stage = Staged::new(&a.out.out, a.out.overwrite)?;
    let mut acc = serde_json::Map::new();
    let mut pocket = serde_json::Map::new();
    for role in SplitRole::ALL {
        let b = data.split(role);
        write_bundle(b, &stage.path().join(role.as_str()))?;
        acc.insert(role.as_str().into(), json!(accuracy(b)));
        let mask = data.pocket_mask(role);
        pocket.insert(role.as_str().into(), json!(mask.iter().filter(|&&p| p).count()));
    }
    if a.members > 0 {
        let models = data.ensemble_members(a.members, cfg.seed, a.member_init_std);
        let probs =
            EnsembleProbs::new(models.iter().map(|m| m.predict_bundle(&data.test)).collect())?;
        write_members(&probs, &stage.path().join("ensemble"))?;
    }
    write_json(
        &stage.path().join("generation_log.json"),
        &json!({
            "config": cfg,
            "members": a.members,
            "member_init_std": a.member_init_std,
            "ensemble_split": "test",
            "accuracy": acc,
            "pocket_rows": pocket,
            "decoy_class": data.decoy_class,
        }),
    )?;
    write_run(stage.path(), "synth", a)?;
    stage.commit()?;
    Ok(())
}

fn fit(a: &FitArgs, force_grid: bool) -> anyhow::Result<()> {
    let t = &a.train_args;
    let grid = force_grid || t.grid;
    let cfg = TrainConfig {
        learning_rate: t.lr,
        epochs: t.epochs,
        batch_size: t.batch_size,
        seed: t.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let train = load(&a.train)?;
    let val = match (&a.val, grid) {
        (Some(v), _) => Some(load(v)?),
        (None, true) => bail!("grid search needs --val"),
        (None, false) => None,
    };
    let stage = Staged::new(&a.out.out, a.out.overwrite)?;
    let mut summary = serde_json::Map::new();
    let train_emb = train.embedding();
    let train_err = train_emb.error_labels();

    for &method in &a.methods {
        match method {
            Method::Alien => {
                let outcome = if grid {
                    let val = val.as_ref().expect("checked above").embedding();
                    grid_search::<f64>(&train_emb, &val, t.variant, &cfg, &AlienGrid::default())?
                } else {
                    let v = val.as_ref().map(|v| v.embedding()).unwrap_or_else(|| train_emb.clone());
                    let single = AlienGrid::single(t.alpha, t.beta, t.lr);
                    grid_search::<f64>(&train_emb, &v, t.variant, &cfg, &single)?
                };
                write_alien(&outcome.fitted, &stage.path().join(ALIEN_DIR))?;
                summary.insert(
                    "alien".into(),
                    json!({
                        "variant": t.variant,
                        "selected": outcome.best,
                        "evaluations": outcome.evaluations,
                    }),
                );
            }
            Method::LinearProbe | Method::AttnProbe => {
                let kind = if method == Method::LinearProbe {
                    ProbeKind::Linear
                } else {
                    ProbeKind::AttentionPooling
                };
                let seqs = |b: &AnyBundle| probe_inputs(kind, b);
                let train_seq = seqs(&train);
                let (mut probe, lr) = if grid {
                    let v = val.as_ref().expect("checked above");
                    let v_err = v.embedding().error_labels();
                    select_probe(
                        kind,
                        (&train_seq, &train_err),
                        (&seqs(v), &v_err),
                        &cfg,
                        &PROBE_LEARNING_RATES,
                    )?
                } else {
                    let pc = TrainConfig {
                        learning_rate: t.probe_lr,
                        ..cfg
                    };
                    (fit_probe(kind, &train_seq, &train_err, &pc)?, t.probe_lr)
                };
                if kind == ProbeKind::AttentionPooling {
                    probe.depth_tag = train.depth();
                }
                let pc = TrainConfig {
                    learning_rate: lr,
                    ..cfg
                };
                write_probe(&probe, &pc, &stage.path().join(method.as_str()))?;
                summary.insert(method.as_str().into(), json!({ "learning_rate": lr }));
            }
            Method::Md | Method::Mdr | Method::Mdm => {
                let dir = stage.path().join(GAUSSIAN_DIR);
                if !dir.exists() {
                    write_gaussian_stats(&fit_gaussian_stats(&train_emb, DEFAULT_RIDGE)?, &dir)?;
                    summary.insert(GAUSSIAN_DIR.into(), json!({ "ridge": DEFAULT_RIDGE }));
                }
            }
            Method::Sr | Method::Entropy | Method::Rde => {
                summary.insert(method.as_str().into(), json!("nothing to fit"));
            }
        }
    }
    write_json(&stage.path().join("fit.json"), &summary)?;
    write_run(stage.path(), if force_grid { "grid" } else { "fit" }, a)?;
    stage.commit()?;
    Ok(())
}

fn probe_inputs(kind: ProbeKind, b: &AnyBundle) -> SequenceData<f64> {
    match kind {
        ProbeKind::Linear => SequenceData::from_features(&b.embedding().features_as()),
        ProbeKind::AttentionPooling => SequenceData::from_bundle(&b.sequences()),
    }
}

struct Loaded {
    target: AnyBundle,
    train: Option<AnyBundle>,
}

impl Loaded {
    fn new(s: &SourceArgs) -> anyhow::Result<Self> {
        Ok(Loaded {
            target: load(&s.test)?,
            train: s.train.as_deref().map(load).transpose()?,
        })
    }

    fn context<'a>(&'a self, s: &'a SourceArgs) -> ScoringContext<'a> {
        ScoringContext {
            target: &self.target,
            train: self.train.as_ref(),
            fits: s.fits.as_deref(),
        }
    }
}

fn unique(methods: &[Method]) -> Vec<Method> {
    let mut out = Vec::new();
    for &m in methods {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

fn score(a: &ScoreArgs) -> anyhow::Result<()> {
    let loaded = Loaded::new(&a.source)?;
    let ctx = loaded.context(&a.source);
    let scores = unique(&a.source.methods)
        .into_iter()
        .map(|m| ctx.score(m))
        .collect::<Result<Vec<_>, _>>()?;
    let stage = Staged::new(&a.out.out, a.out.overwrite)?;
    for s in &scores {
        write_json(&stage.path().join(format!("{}.scores.json", s.method_tag)), s)?;
    }
    write_run(stage.path(), "score", a)?;
    stage.commit()?;
    Ok(())
}

fn dataset_name(a: &EvalArgs) -> String {
    a.dataset.clone().unwrap_or_else(|| {
        a.source
            .test
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    })
}

fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let loaded = Loaded::new(&a.source)?;
    let ctx = loaded.context(&a.source);
    let target = loaded.target.embedding();
    let errors = target.error_labels();
    let dataset = dataset_name(a);
    let depth = loaded.target.depth().map(|d| d.as_str().to_string());
    let config = serde_json::to_value(a)?;
    let mut reports = Vec::new();
    for m in unique(&a.source.methods) {
        let scores = ctx.score(m)?;
        let cfg = EvalConfig {
            n_boot: a.n_boot,
            seed: a.seed,
            ece_bins: a.ece_bins,
            mapping: m.mapping(),
        };
        let eval = bootstrap_eval(&scores.scores, &errors, &cfg)
            .with_context(|| format!("evaluating `{m}`"))?;
        reports.push(MethodReport::new(
            m.as_str(),
            &dataset,
            depth.clone(),
            target.split_role.as_str(),
            eval,
            config.clone(),
        ));
    }
    let agg = aggregate(&reports)?;
    let stage = Staged::new(&a.out.out, a.out.overwrite)?;
    for r in &reports {
        write_report(r, stage.path())?;
    }
    write_json(&stage.path().join("summary.json"), &agg)?;
    std::fs::write(stage.path().join("table.md"), agg.to_markdown())
        .with_context(|| "writing table.md")?;
    write_run(stage.path(), "eval", a)?;
    stage.commit()?;
    Ok(())
}

fn ensemble(a: &EnsembleArgs) -> anyhow::Result<()> {
    let probs = read_members(&a.members)?;
    let loaded = Loaded::new(&a.source)?;
    let target = loaded.target.embedding();
    if probs.len() != target.len() {
        bail!(
            "ensemble has {} rows, bundle {} has {}",
            probs.len(),
            a.source.test.display(),
            target.len()
        );
    }
    let decomp = decompose(&probs);
    let ctx = loaded.context(&a.source);
    let scores = unique(&a.source.methods)
        .into_iter()
        .map(|m| ctx.score(m))
        .collect::<Result<Vec<_>, _>>()?;
    let table = correlate_components(&decomp, &scores)?;
    let stage = Staged::new(&a.out.out, a.out.overwrite)?;
    write_json(&stage.path().join("decomposition.json"), &decomp)?;
    write_json(
        &stage.path().join("correlations.json"),
        &json!({
            "split": target.split_role.as_str(),
            "members": probs.members().len(),
            "table": table,
        }),
    )?;
    std::fs::write(stage.path().join("correlations.md"), table.to_markdown())
        .with_context(|| "writing correlations.md")?;
    write_run(stage.path(), "ensemble", a)?;
    stage.commit()?;
    Ok(())
}

fn report(a: &ReportArgs) -> anyhow::Result<()> {
    let mut reports = Vec::new();
    for dir in &a.inputs {
        reports.extend(read_reports(dir).with_context(|| format!("reading {}", dir.display()))?);
    }
    let agg = aggregate(&reports)?;
    let stage = Staged::new(&a.out.out, a.out.overwrite)?;
    write_json(&stage.path().join("aggregate.json"), &agg)?;
    std::fs::write(stage.path().join("tables.md"), agg.to_markdown())
        .with_context(|| "writing tables.md")?;
    write_run(stage.path(), "report", a)?;
    stage.commit()?;
    Ok(())
}
