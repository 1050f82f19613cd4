//! Exact local / quantum / post-quantum labels for 2×2 correlator points.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenario::{max_chsh, CorrelatorVector};

pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorrelationClass {
    Local,
    Quantum,
    PostQuantum,
}

impl CorrelationClass {
    pub const ALL: [CorrelationClass; 3] = [Self::Local, Self::Quantum, Self::PostQuantum];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Domain(format!("class index {i} outside 0..3")))
    }
}

impl fmt::Display for CorrelationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Local => "local",
            Self::Quantum => "quantum",
            Self::PostQuantum => "post-quantum",
        })
    }
}

impl FromStr for CorrelationClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "local" => Ok(Self::Local),
            "quantum" => Ok(Self::Quantum),
            "post-quantum" | "postquantum" => Ok(Self::PostQuantum),
            other => Err(Error::Domain(format!("unknown class '{other}'"))),
        }
    }
}

fn require_m2(c: &CorrelatorVector) -> Result<()> {
    if c.m() != 2 {
        return Err(Error::Usage(format!("classification needs m = 2, got m = {}", c.m())));
    }
    Ok(())
}

/// The four arcsin combinations with the minus sign on each correlator in turn.
pub fn arcsin_symmetries(c: &CorrelatorVector) -> Result<[f64; 4]> {
    require_m2(c)?;
    let s: Vec<f64> = c.values().iter().map(|v| v.clamp(-1.0, 1.0).asin()).collect();
    let total: f64 = s.iter().sum();
    Ok([0, 1, 2, 3].map(|k| (total - 2.0 * s[k]).abs()))
}

pub fn quantum_realizable(c: &CorrelatorVector) -> Result<bool> {
    Ok(arcsin_symmetries(c)?.iter().all(|v| *v <= PI + BOUNDARY_TOL))
}

pub fn local_member(c: &CorrelatorVector) -> Result<bool> {
    Ok(max_chsh(c)? <= 2.0 + BOUNDARY_TOL)
}

pub fn classify(c: &CorrelatorVector) -> Result<CorrelationClass> {
    Ok(if local_member(c)? {
        CorrelationClass::Local
    } else if quantum_realizable(c)? {
        CorrelationClass::Quantum
    } else {
        CorrelationClass::PostQuantum
    })
}
