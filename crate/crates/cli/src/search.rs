//! Search for quantum swap-network correlations that a trained NBL regressor
//! flags as non-bilocal while they satisfy `sqrt|I| + sqrt|J| <= 1`.

use std::f64::consts::{FRAC_PI_4, TAU};
use std::fmt;
use std::fs;

use rand::Rng;

use bellnet_core::lp::{BilocalInput, NblOracle, DEFAULT_GRID};
use bellnet_core::optimize::{minimize_multistart, NelderMeadOptions};
use bellnet_core::sampler::{quantum_swap_nonmax, stream_rng, ScenarioTag, SwapSettings};
use bellnet_core::scenario::{bilocal_inequality_value, ij_functionals, TripartiteCorrelators};
use bellnet_core::{Error, Result};
use bellnet_learn::ensemble::EnsembleModel;
use bellnet_learn::io::load_ensemble;
use bellnet_learn::mlp::Head;

use crate::config::{write_sidecar, RunConfig};
use crate::{Exit, Outcome};

pub const DEFAULT_RESTARTS: usize = 50;
/// Exact NBL a point must exceed to count as a discovery.
pub const DISCOVERY_THRESHOLD: f64 = 1e-3;
const PENALTY_WEIGHT: f64 = 10.0;
const THETA_FLOOR: f64 = 1e-6;

/// `p = (φ, 8 X-Z angles)`; the source state uses `θ = (π/4) sin²φ`.
fn decode(p: &[f64]) -> (f64, SwapSettings) {
    let theta = (FRAC_PI_4 * p[0].sin().powi(2)).max(THETA_FLOOR);
    (theta, SwapSettings::from_xz_angles(&p[1..9]))
}

/// Raw model input for correlators `t` under `scenario`.
pub fn model_features(scenario: ScenarioTag, t: &TripartiteCorrelators) -> Result<Vec<f64>> {
    match scenario {
        ScenarioTag::Bilocal10 => Ok(t.features()),
        ScenarioTag::Bilocal4 => Ok(t.ij_features().to_vec()),
        other => Err(Error::Usage(format!("the search needs a bilocal model, got {other}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Predicted and exact NBL above the threshold with the inequality
    /// satisfied.
    Certified,
    /// The optimum sits where the inequality penalty is active.
    Boundary,
    /// The model predicted non-bilocality the exact oracle does not confirm.
    Refuted,
    /// The model sees no non-bilocality at its own optimum.
    Null,
    /// The correlators admit no joint distribution.
    NoJoint,
}

impl Status {
    pub fn of(exact: Option<f64>, inequality: f64, predicted: f64) -> Self {
        match exact {
            None => Status::NoJoint,
            Some(_) if inequality > 1.0 => Status::Boundary,
            Some(_) if predicted <= DISCOVERY_THRESHOLD => Status::Null,
            Some(e) if e > DISCOVERY_THRESHOLD => Status::Certified,
            Some(_) => Status::Refuted,
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Certified => "certified",
            Status::Boundary => "boundary",
            Status::Refuted => "refuted",
            Status::Null => "null",
            Status::NoJoint => "no-joint",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub theta: f64,
    pub angles: Vec<f64>,
    pub i: f64,
    pub j: f64,
    pub inequality: f64,
    pub predicted: f64,
    pub exact: Option<f64>,
    pub status: Status,
}

pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    pub grid: usize,
    pub nelder_mead: NelderMeadOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            grid: DEFAULT_GRID,
            nelder_mead: NelderMeadOptions {
                step: 0.4,
                max_iters: 3000,
                tolerance: 1e-10,
            },
        }
    }
}

/// Maximizes the predicted NBL from `restarts` random starts and certifies
/// every optimum with the exact oracle.
pub fn search(model: &EnsembleModel, scenario: ScenarioTag, opts: &SearchOptions) -> Result<Vec<Candidate>> {
    if !matches!(model.head, Head::Regression { .. }) {
        return Err(Error::Usage("the search needs a regression model".into()));
    }
    if model.raw_width() != scenario.feature_width() {
        return Err(Error::Schema(format!(
            "model takes {} features but {scenario} has {}",
            model.raw_width(),
            scenario.feature_width()
        )));
    }
    let objective = |p: &[f64]| -> f64 {
        let (theta, s) = decode(p);
        let Ok(t) = quantum_swap_nonmax(theta, &s) else {
            return f64::MAX;
        };
        let (i, j) = ij_functionals(&t);
        let excess = (bilocal_inequality_value(i, j) - 1.0).max(0.0);
        let pred = model_features(scenario, &t)
            .and_then(|f| model.predict_one(&f))
            .map_or(0.0, |v| v[0]);
        -pred + PENALTY_WEIGHT * excess
    };
    let oracle = NblOracle::with_grid(opts.grid);
    let mut out = Vec::with_capacity(opts.restarts);
    for k in 0..opts.restarts {
        let mut rng = stream_rng(opts.seed, k as u64);
        let start: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..TAU)).collect();
        let (p, _) = minimize_multistart(objective, &[start], opts.nelder_mead)?;
        let (theta, s) = decode(&p);
        let t = quantum_swap_nonmax(theta, &s)?;
        let (i, j) = ij_functionals(&t);
        let inequality = bilocal_inequality_value(i, j);
        let predicted = model.predict_one(&model_features(scenario, &t)?)?[0];
        let exact = match oracle.distance(&BilocalInput::Full(t)) {
            Ok(r) => Some(r.nbl),
            Err(Error::Domain(_)) => None,
            Err(e) => return Err(e),
        };
        let status = Status::of(exact, inequality, predicted);
        log::info!("restart {k}: predicted {predicted:.4e}, exact {exact:?}, inequality {inequality:.6}, {status}");
        out.push(Candidate {
            theta,
            angles: p[1..9].to_vec(),
            i,
            j,
            inequality,
            predicted,
            exact,
            status,
        });
    }
    Ok(out)
}

pub fn candidates_csv(c: &[Candidate]) -> String {
    let mut s = String::from("restart,theta,");
    s += &(0..8).map(|i| format!("angle{i},")).collect::<String>();
    s += "I,J,sqrtI_plus_sqrtJ,predicted_nbl,exact_nbl,status\n";
    for (k, c) in c.iter().enumerate() {
        s += &format!("{k},{:.12},", c.theta);
        for a in &c.angles {
            s += &format!("{:.12},", a.rem_euclid(TAU));
        }
        let exact = c.exact.map_or(String::new(), |e| format!("{e:.10e}"));
        s += &format!(
            "{:.12},{:.12},{:.12},{:.10e},{exact},{}\n",
            c.i, c.j, c.inequality, c.predicted, c.status
        );
    }
    s
}

pub fn cmd_search(cfg: &mut RunConfig) -> Result<Outcome> {
    let path = cfg.path("model")?;
    let model = load_ensemble(&path)?;
    let scenario = crate::bench::model_scenario(cfg, &path, &model)?;
    let opts = SearchOptions {
        restarts: cfg.get_or("restarts", DEFAULT_RESTARTS)?,
        seed: cfg.get_or("seed", 0u64)?,
        grid: cfg.get_or("grid", DEFAULT_GRID)?,
        ..SearchOptions::default()
    };
    if opts.restarts == 0 {
        return Err(Error::Usage("restarts must be at least 1".into()));
    }
    let found = search(&model, scenario, &opts)?;
    if let Some(out) = cfg.get::<String>("out")? {
        fs::write(&out, cfg.as_comments() + &candidates_csv(&found))?;
        write_sidecar(std::path::Path::new(&out), cfg)?;
    }
    let count = |s: Status| found.iter().filter(|c| c.status == s).count();
    let mut report = format!(
        "{} restarts: {} certified, {} boundary, {} refuted, {} null, {} without joint distribution\n",
        found.len(),
        count(Status::Certified),
        count(Status::Boundary),
        count(Status::Refuted),
        count(Status::Null),
        count(Status::NoJoint)
    );
    let best = found
        .iter()
        .filter(|c| c.status == Status::Certified)
        .max_by(|a, b| a.exact.partial_cmp(&b.exact).unwrap());
    let exit = match best {
        Some(c) => {
            report += &format!(
                "best certified point: theta = {:.6}, sqrt|I|+sqrt|J| = {:.6}, predicted NBL = {:.4e}, exact NBL = {:.4e}\n",
                c.theta,
                c.inequality,
                c.predicted,
                c.exact.unwrap_or(f64::NAN)
            );
            Exit::Ok
        }
        None => {
            report += if count(Status::Refuted) > 0 {
                "no certified point: the oracle refutes every non-bilocal prediction of the model\n"
            } else {
                "no certified point: the model predicts no non-bilocality inside the inequality\n"
            };
            Exit::Refuted
        }
    };
    Ok(Outcome {
        exit,
        report,
        config: cfg.clone(),
    })
}
