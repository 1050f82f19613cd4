//! Exact quantifiers for a single user-supplied point.

use bellnet_core::classify::{arcsin_symmetries, classify};
use bellnet_core::lp::{BilocalInput, NblOracle, NlOracle, DEFAULT_GRID};
use bellnet_core::sampler::{quantum_swap_correlators, SwapSettings};
use bellnet_core::scenario::{bilocal_inequality_value, max_chsh, CorrelatorVector, TripartiteCorrelators};
use bellnet_core::{Error, Result};

use crate::config::RunConfig;
use crate::Outcome;

fn point(cfg: &RunConfig) -> Result<Vec<f64>> {
    cfg.list("point")?
        .ok_or_else(|| Error::Usage("pass the correlators with --point v1,v2,...".into()))
}

fn bipartite_point(cfg: &mut RunConfig) -> Result<CorrelatorVector> {
    let p = point(cfg)?;
    match cfg.get::<usize>("m")? {
        Some(m) => CorrelatorVector::new(m, p),
        None => {
            let c = CorrelatorVector::from_values(p)?;
            cfg.set("m", c.m())?;
            Ok(c)
        }
    }
}

fn nl_report(cfg: &mut RunConfig) -> Result<String> {
    let c = bipartite_point(cfg)?;
    let r = NlOracle::new(c.m())?.distance(&c)?;
    let support = r.weights.iter().filter(|w| **w > 1e-12).count();
    let mut s = format!("NL = {:.16}\n", r.nl);
    s += &format!(
        "closest local behavior mixes {support} of {} deterministic strategies ({} simplex pivots)\n",
        r.weights.len(),
        r.iterations
    );
    if c.m() == 2 {
        s += &format!("max CHSH = {:.12}\n", max_chsh(&c)?);
    }
    Ok(s)
}

fn class_report(cfg: &mut RunConfig) -> Result<String> {
    let c = bipartite_point(cfg)?;
    let class = classify(&c)?;
    let arcsin = arcsin_symmetries(&c)?.into_iter().fold(0.0, f64::max);
    Ok(format!(
        "class = {class}\nmax CHSH = {:.12} (local bound 2)\nmax arcsin sum = {arcsin:.12} (quantum bound pi)\n",
        max_chsh(&c)?
    ))
}

fn nbl_report(cfg: &mut RunConfig) -> Result<String> {
    let grid = cfg.get_or("grid", DEFAULT_GRID)?;
    let oracle = NblOracle::with_grid(grid);
    let (input, header) = match cfg.get::<f64>("werner")? {
        Some(v) => {
            let t = quantum_swap_correlators(v, &SwapSettings::standard())?;
            let reference = (v * v - 0.5).max(0.0);
            (
                BilocalInput::Full(t),
                format!("Werner visibility {v}: reference max(0, v^2 - 1/2) = {reference:.6}\n"),
            )
        }
        None => {
            let p = point(cfg)?;
            match p.len() {
                10 => (BilocalInput::Full(TripartiteCorrelators::from_features(&p)?), String::new()),
                4 => (BilocalInput::aggregate([p[0], p[1], p[2], p[3]]), String::new()),
                k => {
                    return Err(Error::Usage(format!(
                        "a bilocal point has 10 values (<AxByCz>, <A0>, <A1>) or 4 (I, J, <A0>, <A1>), got {k}"
                    )))
                }
            }
        }
    };
    let (i, j) = match &input {
        BilocalInput::Full(t) => bellnet_core::scenario::ij_functionals(t),
        BilocalInput::Aggregate { i, j, .. } => (*i, *j),
    };
    let r = oracle.distance(&input).map_err(|e| match e {
        Error::Domain(msg) => Error::Domain(format!("infeasible bilocal point: {msg}")),
        other => other,
    })?;
    let mut s = header;
    s += &format!("NBL = {:.16}\n", r.nbl);
    s += &format!(
        "nu range [{:.6}, {:.6}], grid {}, {} programs solved, minimum at nu = {:.6}\n",
        r.nu_min, r.nu_max, r.nu_grid_size, r.solves, r.argmin_nu
    );
    s += &format!("sqrt|I| + sqrt|J| = {:.12} (bilocal bound 1)\n", bilocal_inequality_value(i, j));
    Ok(s)
}

pub fn cmd_oracle(cfg: &mut RunConfig) -> Result<Outcome> {
    let mode: String = cfg.require("mode")?;
    let report = match mode.as_str() {
        "nl" => nl_report(cfg)?,
        "nbl" => nbl_report(cfg)?,
        "class" => class_report(cfg)?,
        other => return Err(Error::Usage(format!("oracle mode must be nl, nbl or class, got '{other}'"))),
    };
    Ok(Outcome::ok(report, cfg.clone()))
}
