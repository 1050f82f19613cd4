//! Exact-oracle versus model latency.

use std::path::Path;
use std::time::Instant;

use bellnet_core::lp::{BilocalInput, NblOracle, NlOracle, DEFAULT_GRID};
use bellnet_core::sampler::{
    sample_bilocal4, sample_bipartite, sample_tripartite, stream_rng, ScenarioTag, DEFAULT_REJECTION_CAP,
};
use bellnet_core::scenario::{CorrelatorVector, TripartiteCorrelators};
use bellnet_core::{Error, Result};
use bellnet_learn::ensemble::EnsembleModel;
use bellnet_learn::io::load_ensemble;

use crate::config::{run_path, RunConfig};
use crate::Outcome;

const PREDICT_REPEATS: usize = 50;

/// Scenario a model was trained on: the `scenario` setting, else the one
/// recorded next to the model file, else inferred from a 10-feature input.
pub fn model_scenario(cfg: &mut RunConfig, path: &Path, model: &EnsembleModel) -> Result<ScenarioTag> {
    if cfg.raw("scenario").is_some() {
        return crate::data::scenario(cfg);
    }
    let side = run_path(path);
    if side.exists() {
        if let Some(s) = RunConfig::load(&side)?.get::<String>("scenario")? {
            let mut probe = RunConfig::new();
            probe.set("scenario", &s)?;
            if let Some(m) = RunConfig::load(&side)?.raw("m") {
                probe.set("m", m)?;
            }
            let tag = crate::data::scenario(&mut probe)?;
            cfg.set("scenario", tag)?;
            return Ok(tag);
        }
    }
    match model.raw_width() {
        10 => {
            cfg.set("scenario", ScenarioTag::Bilocal10)?;
            Ok(ScenarioTag::Bilocal10)
        }
        w => Err(Error::Usage(format!(
            "cannot tell the scenario of a {w}-feature model; pass --scenario"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub exact: f64,
    pub predicted: f64,
    pub oracle_secs: f64,
    pub predict_secs: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub oracle_median: f64,
    pub predict_median: f64,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.oracle_median / self.predict_median
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn bench(model: &EnsembleModel, scenario: ScenarioTag, points: usize, seed: u64, grid: usize) -> Result<BenchReport> {
    if points == 0 {
        return Err(Error::Usage("benchmark needs at least one point".into()));
    }
    if model.raw_width() != scenario.feature_width() {
        return Err(Error::Schema(format!(
            "model takes {} features but {scenario} has {}",
            model.raw_width(),
            scenario.feature_width()
        )));
    }
    let nl = match scenario {
        ScenarioTag::Bipartite { m } => Some(NlOracle::new(m)?),
        _ => None,
    };
    let nbl = NblOracle::with_grid(grid);
    let mut rows = Vec::with_capacity(points);
    let mut k = 0u64;
    while rows.len() < points {
        let mut rng = stream_rng(seed, k);
        k += 1;
        let features = match scenario {
            ScenarioTag::Bipartite { m } => sample_bipartite(m, &mut rng)?.into_values(),
            ScenarioTag::Bilocal10 => sample_tripartite(&mut rng, DEFAULT_REJECTION_CAP)?.value.features(),
            ScenarioTag::Bilocal4 => sample_bilocal4(&mut rng, DEFAULT_REJECTION_CAP)?.value.to_vec(),
        };
        let start = Instant::now();
        let exact = match (&nl, scenario) {
            (Some(o), ScenarioTag::Bipartite { m }) => o.distance(&CorrelatorVector::new(m, features.clone())?).map(|r| r.nl),
            (_, ScenarioTag::Bilocal10) => nbl
                .distance(&BilocalInput::Full(TripartiteCorrelators::from_features(&features)?))
                .map(|r| r.nbl),
            _ => nbl
                .distance(&BilocalInput::aggregate([features[0], features[1], features[2], features[3]]))
                .map(|r| r.nbl),
        };
        let oracle_secs = start.elapsed().as_secs_f64();
        let exact = match exact {
            Ok(v) => v,
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        };
        let start = Instant::now();
        let mut predicted = 0.0;
        for _ in 0..PREDICT_REPEATS {
            predicted = model.predict_one(std::hint::black_box(&features))?[0];
        }
        let predict_secs = start.elapsed().as_secs_f64() / PREDICT_REPEATS as f64;
        rows.push(BenchRow {
            exact,
            predicted,
            oracle_secs,
            predict_secs,
        });
    }
    Ok(BenchReport {
        oracle_median: median(rows.iter().map(|r| r.oracle_secs).collect()),
        predict_median: median(rows.iter().map(|r| r.predict_secs).collect()),
        rows,
    })
}

pub fn cmd_bench(cfg: &mut RunConfig) -> Result<Outcome> {
    let points = cfg.get_or("points", 20usize)?;
    if points == 0 {
        return Err(Error::Usage("benchmark needs at least one point".into()));
    }
    let path = cfg.path("model")?;
    let model = load_ensemble(&path)?;
    let scenario = model_scenario(cfg, &path, &model)?;
    let seed = cfg.get_or("seed", 0u64)?;
    let grid = cfg.get_or("grid", DEFAULT_GRID)?;
    let r = bench(&model, scenario, points, seed, grid)?;
    let mut report = format!("{:>5} {:>12} {:>12} {:>12} {:>12}\n", "point", "exact", "predicted", "oracle s", "predict s");
    for (i, row) in r.rows.iter().enumerate() {
        report += &format!(
            "{i:>5} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}\n",
            row.exact, row.predicted, row.oracle_secs, row.predict_secs
        );
    }
    report += &format!(
        "median oracle time {:.4e} s, median prediction time {:.4e} s, speedup {:.3e}\n",
        r.oracle_median,
        r.predict_median,
        r.speedup()
    );
    Ok(Outcome::ok(report, cfg.clone()))
}
