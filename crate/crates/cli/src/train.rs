//! Member training, blending and evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bellnet_core::dataset::{Dataset, TaskKind};
use bellnet_core::{Error, Result};
use bellnet_learn::ensemble::EnsembleModel;
use bellnet_learn::io::{load_ensemble, load_mlp, save_ensemble, save_mlp};
use bellnet_learn::metrics::Metrics;
use bellnet_learn::mlp::{Head, Mlp, MlpConfig};
use bellnet_learn::pipeline::{blend_members, prepare, run_pipeline, to_xy, train_members, PipelineOptions};
use bellnet_learn::trees::{BoostParams, ForestParams};

use crate::config::{write_sidecar, RunConfig};
use crate::data::load_partitions;
use crate::Outcome;

pub fn pipeline_options(cfg: &mut RunConfig) -> Result<PipelineOptions> {
    let d = PipelineOptions::default();
    let seed = cfg.get_or("seed", 0u64)?;
    let base = MlpConfig {
        learning_rate: cfg.get_or("lr", d.base.learning_rate)?,
        batch_size: cfg.get_or("batch", d.base.batch_size)?,
        max_epochs: cfg.get_or("epochs", d.base.max_epochs)?,
        patience: cfg.get_or("patience", d.base.patience)?,
        seed,
        ..d.base
    };
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let layers = match cfg.list("layers")? {
        Some(l) => l,
        None => {
            cfg.set("layers", list(&d.layers))?;
            d.layers.clone()
        }
    };
    let widths = match cfg.list("widths")? {
        Some(w) => w,
        None => {
            cfg.set("widths", list(&d.widths))?;
            d.widths.clone()
        }
    };
    Ok(PipelineOptions {
        base,
        layers,
        widths,
        blend_fraction: cfg.get_or("blend_fraction", d.blend_fraction)?,
        val_fraction: cfg.get_or("val_fraction", d.val_fraction)?,
        poly2: true,
        baseline_degree: cfg.get_or("baseline_degree", d.baseline_degree)?,
        mae_ratio: cfg.get_or("mae_ratio", d.mae_ratio)?,
        accuracy_floor: cfg.get_or("accuracy_floor", d.accuracy_floor)?,
        boost: BoostParams {
            trees: cfg.get_or("boost_trees", d.boost.trees)?,
            max_depth: cfg.get_or("boost_depth", d.boost.max_depth)?,
            shrinkage: cfg.get_or("shrinkage", d.boost.shrinkage)?,
        },
        forest: ForestParams {
            trees: cfg.get_or("forest_trees", d.forest.trees)?,
            min_samples_leaf: cfg.get_or("min_leaf", d.forest.min_samples_leaf)?,
            seed,
            ..d.forest
        },
        seed,
    })
}

fn member_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Schema(format!("no member models in {}", dir.display())));
    }
    Ok(files)
}

/// Records the dataset's scenario so later commands can rebuild features.
fn note_scenario(cfg: &mut RunConfig, train: &Dataset) -> Result<()> {
    if cfg.raw("scenario").is_none() {
        cfg.set("scenario", train.meta.scenario)?;
    }
    if train.meta.kind == TaskKind::Classification {
        cfg.set("task", "classification")?;
    }
    Ok(())
}

pub fn cmd_train(cfg: &mut RunConfig) -> Result<Outcome> {
    let opts = pipeline_options(cfg)?;
    let out = cfg.path("out")?;
    let (train, _) = load_partitions(cfg)?;
    note_scenario(cfg, &train)?;
    let prepared = prepare(&train, &opts)?;
    let grid = train_members(&prepared, &opts)?;
    fs::create_dir_all(&out)?;
    let mut csv = cfg.as_comments();
    csv += "member,layers,width,seed,epochs,best_val_loss\n";
    for (i, m) in grid.models.iter().enumerate() {
        let c = &m.config;
        save_mlp(m, &out.join(format!("member_{i:02}_{}x{}.model", c.layers, c.width)))?;
        let best = m.history.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
        csv += &format!("{i},{},{},{},{},{best:.10e}\n", c.layers, c.width, c.seed, m.history.len());
    }
    fs::write(out.join("grid.csv"), csv)?;
    write_sidecar(&out, cfg)?;
    let mut report = format!("trained {} members into {}\n", grid.models.len(), out.display());
    for (c, e) in &grid.failures {
        report += &format!("member {}x{} (seed {}) failed: {e}\n", c.layers, c.width, c.seed);
    }
    if let Some(b) = prepared.baseline_mae {
        report += &format!("degree-{} polynomial baseline MAE on the blend fold: {b:.4e}\n", opts.baseline_degree);
    }
    Ok(Outcome::ok(report, cfg.clone()))
}

pub fn cmd_blend(cfg: &mut RunConfig) -> Result<Outcome> {
    let opts = pipeline_options(cfg)?;
    let dir = cfg.path("members")?;
    let out = cfg.path("out")?;
    let (train, _) = load_partitions(cfg)?;
    note_scenario(cfg, &train)?;
    let prepared = prepare(&train, &opts)?;
    let models = member_files(&dir)?
        .iter()
        .map(|p| load_mlp(p))
        .collect::<Result<Vec<Mlp>>>()?;
    if models.iter().any(|m| m.head != prepared.head || m.inputs() != prepared.fit.width()) {
        return Err(Error::Schema("member models do not match the dataset".into()));
    }
    let e = blend_members(&prepared, models, &opts)?;
    save_ensemble(&e, &out)?;
    write_sidecar(&out, cfg)?;
    let mut report = format!("blended {} of {} members into {}\n", e.members.len(), e.ledger.len(), out.display());
    if let Some(b) = prepared.baseline_mae {
        report += &format!(
            "filter: keep blend-fold MAE < {} x {b:.4e} (degree-{} baseline)\n",
            opts.mae_ratio, opts.baseline_degree
        );
    } else {
        report += &format!("filter: keep blend-fold accuracy >= {}\n", opts.accuracy_floor);
    }
    report += &ledger_table(&e);
    Ok(Outcome::ok(report, cfg.clone()))
}

fn ledger_table(e: &EnsembleModel) -> String {
    let mut s = format!("{:>7} {:>6} {:>6} {:>5} {:>14}\n", "layers", "width", "seed", "kept", "blend metric");
    for m in &e.ledger {
        let v = m.metrics.mae.or(m.metrics.accuracy).unwrap_or(f64::NAN);
        let _ = writeln!(s, "{:>7} {:>6} {:>6} {:>5} {:>14.6e}", m.layers, m.width, m.seed, m.kept, v);
    }
    s
}

/// Test metrics of every member and of the blend, printed in the layout of a
/// results table, plus the written CSV artifacts.
pub struct Evaluation {
    pub members: Vec<(usize, usize, Metrics)>,
    pub ensemble: Metrics,
    /// `(exact, predicted)` for each probe row.
    pub probes: Vec<(f64, f64)>,
}

impl Evaluation {
    pub fn typical_member_mae(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.members.iter().filter_map(|m| m.2.mae).collect();
        v.sort_by(f64::total_cmp);
        v.get(v.len() / 2).copied()
    }

    pub fn best_member_mae(&self) -> Option<f64> {
        self.members.iter().filter_map(|m| m.2.mae).reduce(f64::min)
    }
}

pub fn evaluate(e: &EnsembleModel, test: &Dataset) -> Result<Evaluation> {
    if test.width() != e.raw_width() {
        return Err(Error::Schema(format!(
            "model expects {} features, dataset has {}",
            e.raw_width(),
            test.width()
        )));
    }
    let xy = to_xy(test, e.expand_poly2)?;
    let members = e
        .members
        .iter()
        .map(|m| Ok((m.config.layers, m.config.width, bellnet_learn::ensemble::evaluate_member(m, &xy)?)))
        .collect::<Result<Vec<_>>>()?;
    let ensemble = e.evaluate(&xy)?;
    let probes = test
        .meta
        .probes
        .iter()
        .map(|&i| {
            let r = &test.records[i];
            Ok((r.target, e.predict_one(&r.features)?[0]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        members,
        ensemble,
        probes,
    })
}

fn evaluation_report(ev: &Evaluation, head: Head) -> String {
    let mut s = String::new();
    match head {
        Head::Regression { .. } => {
            s += &format!("{:<22} {:>12}\n", "model", "test MAE");
            for (l, w, m) in &ev.members {
                s += &format!("{:<22} {:>12.4e}\n", format!("MLP {l}x{w}"), m.mae.unwrap_or(f64::NAN));
            }
            if let Some(t) = ev.typical_member_mae() {
                s += &format!("{:<22} {:>12.4e}\n", "Typical MLP (median)", t);
            }
            s += &format!("{:<22} {:>12.4e}\n", "Blending", ev.ensemble.mae.unwrap_or(f64::NAN));
        }
        Head::Classification { .. } => {
            for (l, w, m) in &ev.members {
                s += &format!("MLP {l}x{w}: accuracy {:.5}\n", m.accuracy.unwrap_or(f64::NAN));
            }
            s += &format!("Blending:\n{}", ev.ensemble);
            if let Some(c) = ev.ensemble.local_postquantum_confusions() {
                s += &format!("local <-> post-quantum confusions: {c}\n");
            }
        }
    }
    if !ev.probes.is_empty() {
        s += "probe rows (exact, predicted):\n";
        for (t, p) in &ev.probes {
            s += &format!("  {t:.6} {p:.6}\n");
        }
    }
    s
}

fn write_eval_files(dir: &Path, e: &EnsembleModel, test: &Dataset, ev: &Evaluation, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), cfg.as_comments() + &ev.ensemble.to_csv())?;
    let mut members = cfg.as_comments() + "layers,width,mae,accuracy\n";
    for (l, w, m) in &ev.members {
        let f = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10e}"));
        members += &format!("{l},{w},{},{}\n", f(m.mae), f(m.accuracy));
    }
    fs::write(dir.join("members.csv"), members)?;
    let preds = e.predict_raw(&test.features())?;
    let width = test.width();
    let mut csv = cfg.as_comments();
    csv += &(0..width).map(|i| format!("f{i},")).collect::<String>();
    csv += "target,predicted,probe\n";
    for (i, r) in test.records.iter().enumerate() {
        for v in &r.features {
            csv += &format!("{v:.10e},");
        }
        let p = match e.head {
            Head::Regression { .. } => preds[(i, 0)],
            Head::Classification { .. } => bellnet_learn::trees::argmax(&preds.row(i).to_vec()) as f64,
        };
        csv += &format!("{:.10e},{p:.10e},{}\n", r.target, test.is_probe(i));
    }
    fs::write(dir.join("predictions.csv"), csv)?;
    Ok(())
}

pub fn cmd_eval(cfg: &mut RunConfig) -> Result<Outcome> {
    let model = cfg.path("model")?;
    let e = load_ensemble(&model)?;
    let (_, test) = load_partitions(cfg)?;
    let ev = evaluate(&e, &test)?;
    if let Some(dir) = cfg.get::<String>("out")? {
        write_eval_files(Path::new(&dir), &e, &test, &ev, cfg)?;
        write_sidecar(Path::new(&dir), cfg)?;
    }
    Ok(Outcome::ok(evaluation_report(&ev, e.head), cfg.clone()))
}

/// Train, blend and evaluate in one process.
pub fn cmd_run(cfg: &mut RunConfig) -> Result<Outcome> {
    let opts = pipeline_options(cfg)?;
    let out = cfg.path("out")?;
    let (train, test) = load_partitions(cfg)?;
    note_scenario(cfg, &train)?;
    let r = run_pipeline(&train, &test, &opts)?;
    fs::create_dir_all(&out)?;
    let model = out.join("ensemble.model");
    save_ensemble(&r.ensemble, &model)?;
    write_sidecar(&model, cfg)?;
    fs::write(out.join("table.csv"), cfg.as_comments() + &r.table_csv())?;
    let ev = evaluate(&r.ensemble, &test)?;
    write_eval_files(&out, &r.ensemble, &test, &ev, cfg)?;
    write_sidecar(&out, cfg)?;
    let mut report = format!("ensemble written to {}\n", model.display());
    if let Some(b) = r.baseline_mae {
        report += &format!("degree-{} polynomial baseline MAE (blend fold): {b:.4e}\n", opts.baseline_degree);
    }
    for f in &r.failures {
        report += &format!("failed member: {f}\n");
    }
    report += &ledger_table(&r.ensemble);
    report += &evaluation_report(&ev, r.ensemble.head);
    Ok(Outcome::ok(report, cfg.clone()))
}
