//! Uniform non-signaling correlator draws and quantum generators.
//!
//! Randomness comes from ChaCha8 (a counter-based stream cipher). A run is
//! fully described by a 64-bit seed; record `k` of a dataset reads the
//! independent stream `k` of that seed, so records can be produced in any
//! order or in parallel with identical results.

pub mod quantum;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lp::{nbl_feasibility, BilocalInput};
use crate::scenario::{CorrelatorVector, TripartiteCorrelators, MIN_SETTINGS};

pub use quantum::{
    chsh_closed_form, chsh_optimal_settings, quantum_bipartite_correlators, quantum_marginals,
    quantum_swap_correlators, quantum_swap_nonmax, swap_correlators, werner_state, Bloch,
    QuantumSettings, SwapSettings,
};

pub type SampleRng = ChaCha8Rng;

pub const RNG_NAME: &str = "chacha8";
pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioTag {
    Bipartite { m: usize },
    /// Features `(I, J, <A_0>, <A_1>)`.
    Bilocal4,
    /// Features `<A_x B_y C_z>` (8) then `<A_0>, <A_1>`.
    Bilocal10,
}

impl ScenarioTag {
    pub fn feature_width(&self) -> usize {
        match self {
            ScenarioTag::Bipartite { m } => m * m,
            ScenarioTag::Bilocal4 => 4,
            ScenarioTag::Bilocal10 => 10,
        }
    }

    pub fn is_bilocal(&self) -> bool {
        !matches!(self, ScenarioTag::Bipartite { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScenarioTag::Bipartite { m } if *m < MIN_SETTINGS => {
                Err(Error::Config(format!("bipartite scenario needs m >= 2, got {m}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioTag::Bipartite { m } => write!(f, "bipartite{m}"),
            ScenarioTag::Bilocal4 => f.write_str("bilocal4"),
            ScenarioTag::Bilocal10 => f.write_str("bilocal10"),
        }
    }
}

impl FromStr for ScenarioTag {
    type Err = Error;

    /// Accepts `bipartite<m>`, `bipartite:<m>`, `bilocal4`, `bilocal10`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let tag = match s.as_str() {
            "bilocal4" => ScenarioTag::Bilocal4,
            "bilocal10" => ScenarioTag::Bilocal10,
            _ => {
                let m = s
                    .strip_prefix("bipartite")
                    .map(|r| r.trim_start_matches(':'))
                    .and_then(|r| r.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))?;
                ScenarioTag::Bipartite { m }
            }
        };
        tag.validate()?;
        Ok(tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub scenario: ScenarioTag,
    pub seed: u64,
    pub count: usize,
    pub rejection_cap: u64,
}

impl SamplerConfig {
    pub fn new(scenario: ScenarioTag, seed: u64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        scenario.validate()?;
        Ok(Self {
            scenario,
            seed,
            count,
            rejection_cap: DEFAULT_REJECTION_CAP,
        })
    }
}

fn uniform(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

/// `m²` independent uniform draws on `[-1, 1]`.
pub fn sample_bipartite(m: usize, rng: &mut impl Rng) -> Result<CorrelatorVector> {
    if m < MIN_SETTINGS {
        return Err(Error::Config(format!("m must be at least 2, got {m}")));
    }
    CorrelatorVector::new(m, (0..m * m).map(|_| uniform(rng)).collect())
}

/// Accepted draw together with the number of attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Accepted<T> {
    pub value: T,
    pub attempts: u64,
}

fn reject_until<T>(
    cap: u64,
    rng: &mut impl Rng,
    mut draw: impl FnMut(&mut dyn FnMut() -> f64) -> Result<T>,
    feasible: impl Fn(&T) -> Result<bool>,
) -> Result<Accepted<T>> {
    for attempt in 1..=cap {
        let mut next = || uniform(rng);
        let value = draw(&mut next)?;
        if feasible(&value)? {
            return Ok(Accepted { value, attempts: attempt });
        }
    }
    Err(Error::Sampling(format!("no feasible draw within {cap} attempts")))
}

/// Ten uniform draws (eight correlators, then `<A_0>, <A_1>`), redrawn until
/// some joint distribution reproduces them.
pub fn sample_tripartite(rng: &mut impl Rng, cap: u64) -> Result<Accepted<TripartiteCorrelators>> {
    reject_until(
        cap,
        rng,
        |next| {
            let f: Vec<f64> = (0..10).map(|_| next()).collect();
            TripartiteCorrelators::from_features(&f)
        },
        |t| nbl_feasibility(&BilocalInput::Full(t.clone())),
    )
}

/// Four uniform draws `(I, J, <A_0>, <A_1>)`, redrawn until some joint
/// distribution reproduces them.
pub fn sample_bilocal4(rng: &mut impl Rng, cap: u64) -> Result<Accepted<[f64; 4]>> {
    reject_until(
        cap,
        rng,
        |next| Ok([next(), next(), next(), next()]),
        |f| nbl_feasibility(&BilocalInput::aggregate(*f)),
    )
}

/// Fraction of raw draws accepted over `attempts` tries.
pub fn tripartite_acceptance_rate(scenario: ScenarioTag, attempts: u64, rng: &mut impl Rng) -> Result<f64> {
    if attempts == 0 {
        return Err(Error::Usage("need at least one attempt".into()));
    }
    let mut accepted = 0u64;
    for _ in 0..attempts {
        let ok = match scenario {
            ScenarioTag::Bilocal10 => {
                let f: Vec<f64> = (0..10).map(|_| uniform(rng)).collect();
                nbl_feasibility(&BilocalInput::Full(TripartiteCorrelators::from_features(&f)?))?
            }
            ScenarioTag::Bilocal4 => {
                let f = [uniform(rng), uniform(rng), uniform(rng), uniform(rng)];
                nbl_feasibility(&BilocalInput::aggregate(f))?
            }
            ScenarioTag::Bipartite { .. } => true,
        };
        accepted += ok as u64;
    }
    Ok(accepted as f64 / attempts as f64)
}
