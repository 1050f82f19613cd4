//! Curve data as CSV: exact versus predicted values and learning curves.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::Path;

use bellnet_core::lp::{BilocalInput, NblOracle, NlOracle, DEFAULT_GRID};
use bellnet_core::sampler::{
    chsh_optimal_settings, quantum_bipartite_correlators, quantum_swap_correlators, ScenarioTag, SwapSettings,
};
use bellnet_core::scenario::max_chsh;
use bellnet_core::{Error, Result};
use bellnet_learn::ensemble::EnsembleModel;
use bellnet_learn::io::load_ensemble;
use bellnet_learn::mlp::MlpConfig;
use bellnet_learn::pipeline::{learning_curve, plateau_index};

use crate::bench::model_scenario;
use crate::config::{write_sidecar, RunConfig};
use crate::data::load_partitions;
use crate::search::model_features;
use crate::Outcome;

/// One row per curve point: parameter, exact value, prediction (if a model
/// was supplied) and an auxiliary column.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub x: f64,
    pub exact: f64,
    pub predicted: Option<f64>,
    pub aux: f64,
}

pub fn curve_mae(points: &[CurvePoint]) -> Option<f64> {
    let d: Vec<f64> = points
        .iter()
        .filter_map(|p| p.predicted.map(|q| (q - p.exact).abs()))
        .collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// NL along the CHSH-optimal settings of `cos θ|00> + sin θ|11>` for
/// `θ = k π / (4 n)`, `k = 1..=n`; `aux` is the CHSH value.
pub fn chsh_curve(model: Option<&EnsembleModel>, n: usize) -> Result<Vec<CurvePoint>> {
    let oracle = NlOracle::new(2)?;
    (1..=n)
        .map(|k| {
            let theta = FRAC_PI_4 * k as f64 / n as f64;
            let c = quantum_bipartite_correlators(&chsh_optimal_settings(theta)?, 2)?;
            let predicted = model.map(|m| m.predict_one(c.values())).transpose()?.map(|v| v[0]);
            Ok(CurvePoint {
                x: theta,
                exact: oracle.distance(&c)?.nl,
                predicted,
                aux: max_chsh(&c)?,
            })
        })
        .collect()
}

/// NBL of the Werner swap network at `v = k / (n - 1)`, `k = 0..n`, under
/// the standard settings; `aux` is `max(0, v^2 - 1/2)`.
pub fn werner_curve(model: Option<(&EnsembleModel, ScenarioTag)>, n: usize, grid: usize) -> Result<Vec<CurvePoint>> {
    if n < 2 {
        return Err(Error::Usage("a curve needs at least 2 points".into()));
    }
    let oracle = NblOracle::with_grid(grid);
    let s = SwapSettings::standard();
    (0..n)
        .map(|k| {
            let v = k as f64 / (n - 1) as f64;
            let t = quantum_swap_correlators(v, &s)?;
            let predicted = match model {
                Some((m, tag)) => Some(m.predict_one(&model_features(tag, &t)?)?[0]),
                None => None,
            };
            Ok(CurvePoint {
                x: v,
                exact: oracle.distance(&BilocalInput::Full(t))?.nbl,
                predicted,
                aux: (v * v - 0.5).max(0.0),
            })
        })
        .collect()
}

fn curve_csv(header: &str, points: &[CurvePoint]) -> String {
    let mut s = format!("{header}\n");
    for p in points {
        let pred = p.predicted.map_or(String::new(), |v| format!("{v:.10e}"));
        s += &format!("{:.10},{:.10e},{pred},{:.10e}\n", p.x, p.exact, p.aux);
    }
    s
}

pub fn cmd_curve(cfg: &mut RunConfig) -> Result<Outcome> {
    let mode: String = cfg.require("mode")?;
    let out = cfg.get::<String>("out")?;
    let model = match cfg.get::<String>("model")? {
        Some(p) => Some((load_ensemble(Path::new(&p))?, p)),
        None => None,
    };
    let (csv, report) = match mode.as_str() {
        "chsh" => {
            let n = cfg.get_or("points", 50usize)?;
            let pts = chsh_curve(model.as_ref().map(|m| &m.0), n)?;
            let report = match curve_mae(&pts) {
                Some(mae) => format!("{n} CHSH-optimal quantum points, model MAE {mae:.4e}\n"),
                None => format!("{n} CHSH-optimal quantum points\n"),
            };
            (curve_csv("theta,exact_nl,predicted_nl,chsh", &pts), report)
        }
        "werner" => {
            let n = cfg.get_or("points", 21usize)?;
            let grid = cfg.get_or("grid", DEFAULT_GRID)?;
            let tagged = match &model {
                Some((m, p)) => Some((m, model_scenario(cfg, Path::new(p), m)?)),
                None => None,
            };
            let pts = werner_curve(tagged, n, grid)?;
            let worst = pts.iter().map(|p| (p.exact - p.aux).abs()).fold(0.0, f64::max);
            let mut report = format!("{n} Werner visibilities, max |exact - (v^2 - 1/2)+| = {worst:.3e}\n");
            if let Some(mae) = curve_mae(&pts) {
                report += &format!("model MAE {mae:.4e}\n");
            }
            (curve_csv("v,exact_nbl,predicted_nbl,v2_minus_half", &pts), report)
        }
        "learning" => {
            let sizes: Vec<usize> = cfg
                .list("sizes")?
                .ok_or_else(|| Error::Usage("learning curves need --sizes n1,n2,...".into()))?;
            let (train, test) = load_partitions(cfg)?;
            let c = MlpConfig {
                layers: cfg.get_or("layers", MlpConfig::default().layers)?,
                width: cfg.get_or("widths", MlpConfig::default().width)?,
                learning_rate: cfg.get_or("lr", MlpConfig::default().learning_rate)?,
                max_epochs: cfg.get_or("epochs", MlpConfig::default().max_epochs)?,
                patience: cfg.get_or("patience", MlpConfig::default().patience)?,
                batch_size: cfg.get_or("batch", MlpConfig::default().batch_size)?,
                seed: cfg.get_or("seed", 0u64)?,
            };
            c.validate()?;
            let curve = learning_curve(&train, &test, &sizes, &c, true)?;
            let mut csv = String::from("n,mae\n");
            for (n, mae) in &curve {
                csv += &format!("{n},{mae:.10e}\n");
            }
            let report = match plateau_index(&curve, 0.05) {
                Some(i) => format!("MAE stops improving by 5% at n = {}\n", curve[i].0),
                None => "MAE still improving at the largest size\n".to_string(),
            };
            (csv, report)
        }
        other => return Err(Error::Usage(format!("curve must be chsh, werner or learning, got '{other}'"))),
    };
    if let Some(out) = out {
        fs::write(&out, cfg.as_comments() + &csv)?;
        write_sidecar(Path::new(&out), cfg)?;
    }
    Ok(Outcome::ok(report + &csv, cfg.clone()))
}
