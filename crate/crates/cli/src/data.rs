//! Dataset generation and the helpers shared by data-consuming commands.

use std::path::Path;
use std::time::Instant;

use bellnet_core::dataset::{self, gen_classification, gen_regression, split, Dataset, GenOptions, SplitSpec, TaskKind};
use bellnet_core::lp::DEFAULT_GRID;
use bellnet_core::sampler::{ScenarioTag, DEFAULT_REJECTION_CAP};
use bellnet_core::{Error, Result};

use crate::config::{write_sidecar, RunConfig};
use crate::Outcome;

/// Scenario named by `scenario` (plus `m` for the bare word `bipartite`).
pub fn scenario(cfg: &mut RunConfig) -> Result<ScenarioTag> {
    let name: String = cfg.get_or("scenario", "bipartite".to_string())?;
    if name == "bipartite" {
        let m = cfg.get_or("m", 2usize)?;
        let tag = ScenarioTag::Bipartite { m };
        tag.validate()?;
        return Ok(tag);
    }
    name.parse()
}

pub fn task(cfg: &mut RunConfig) -> Result<TaskKind> {
    cfg.get_or("task", "regression".to_string())?.parse()
}

pub fn split_spec(cfg: &mut RunConfig) -> Result<SplitSpec> {
    Ok(SplitSpec {
        train_fraction: cfg.get_or("train_fraction", SplitSpec::default().train_fraction)?,
        seed: cfg.get_or("seed", 0u64)?,
    })
}

/// Training and test partitions: the split of `data`, or all of `data` for
/// training and the file `test` for testing when given.
pub fn load_partitions(cfg: &mut RunConfig) -> Result<(Dataset, Dataset)> {
    let data = dataset::load(&cfg.path("data")?)?;
    let spec = split_spec(cfg)?;
    match cfg.get::<String>("test")? {
        Some(t) => {
            let test = dataset::load(Path::new(&t))?;
            if test.meta.kind != data.meta.kind || test.width() != data.width() {
                return Err(Error::Schema(format!("test file {t} does not match the training schema")));
            }
            Ok((data.without_probes(), test))
        }
        None => split(&data, spec),
    }
}

/// Writes `d` with its effective configuration recorded in the metadata and
/// in a `.run` sidecar.
pub fn save_with_config(mut d: Dataset, path: &Path, cfg: &RunConfig) -> Result<Dataset> {
    for (k, v) in cfg.entries() {
        d.meta.extra.insert(format!("run.{k}"), v.to_string());
    }
    dataset::save(&d, path)?;
    write_sidecar(path, cfg)?;
    Ok(d)
}

pub fn cmd_gen(cfg: &mut RunConfig) -> Result<Outcome> {
    let kind = task(cfg)?;
    let n: usize = cfg.require("n")?;
    let seed = cfg.get_or("seed", 0u64)?;
    let out = cfg.path("out")?;
    let start = Instant::now();
    let d = match kind {
        TaskKind::Classification => {
            cfg.set("scenario", "bipartite2")?;
            gen_classification(n, seed)?
        }
        TaskKind::Regression => {
            let tag = scenario(cfg)?;
            let opts = GenOptions {
                nu_grid: cfg.get_or("grid", DEFAULT_GRID)?,
                rejection_cap: cfg.get_or("rejection_cap", DEFAULT_REJECTION_CAP)?,
                probes: cfg.get_or("probes", true)?,
            };
            gen_regression(tag, n, seed, opts)?
        }
    };
    let secs = start.elapsed().as_secs_f64();
    let workers = rayon::current_num_threads();
    let d = save_with_config(d, &out, cfg)?;
    let mut report = format!(
        "wrote {} records ({} features, {} probes) to {}\n",
        d.len(),
        d.width(),
        d.meta.probes.len(),
        out.display()
    );
    report += &format!(
        "oracle time: {secs:.3} s total, {:.3e} s per record ({:.3e} s per record per worker, {workers} workers)\n",
        secs / n as f64,
        secs * workers as f64 / n as f64
    );
    if let Some(r) = d.meta.extra.get("acceptance_rate") {
        report += &format!("rejection-sampling acceptance rate: {r}\n");
    }
    if kind == TaskKind::Classification {
        report += &format!("class counts: {:?}\n", d.class_histogram());
    }
    Ok(Outcome::ok(report, cfg.clone()))
}
