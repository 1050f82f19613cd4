//! Labeled corpora: generation, degree-2 feature expansion, splitting and
//! CSV persistence.
//!
//! A dataset lives in two files. `<path>` is a CSV with header
//! `f0,...,f{k-1},target` and one record per row, every number written with
//! 17 significant digits. `<path>.meta` holds the metadata as `key=value`
//! lines.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::classify::{classify, CorrelationClass, BOUNDARY_TOL};
use crate::error::{Error, Result};
use crate::lp::{BilocalInput, NblOracle, NlOracle, DEFAULT_GRID};
use crate::sampler::{
    quantum_swap_correlators, sample_bilocal4, sample_bipartite, sample_tripartite, stream_rng, SampleRng,
    ScenarioTag, SwapSettings, DEFAULT_REJECTION_CAP, RNG_NAME,
};
use crate::scenario::{CorrelatorVector, TripartiteCorrelators};

pub const GENERATOR_VERSION: &str = concat!("bellnet-core ", env!("CARGO_PKG_VERSION"));
pub const LABEL_CONVENTION: &str = "boundary points take the weaker class (local if CHSH <= 2 + 1e-9, quantum if arcsin sums <= pi + 1e-9)";

/// Stream offset reserved for shuffling so it never collides with record streams.
const SHUFFLE_STREAM: u64 = u64::MAX;
/// Attempts an individual record may spend on oracle domain errors.
const MAX_RESAMPLES: u64 = 1000;
/// Visibilities of the Werner probe rows added to bilocal corpora.
pub const WERNER_PROBES: [f64; 2] = [1.0, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub features: Vec<f64>,
    /// Distance for regression; class index for classification.
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    Classification,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Regression => "regression",
            TaskKind::Classification => "classification",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(TaskKind::Regression),
            "classification" => Ok(TaskKind::Classification),
            _ => Err(Error::Config(format!("unknown task kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSchema {
    Raw,
    Poly2,
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSchema::Raw => "raw",
            FeatureSchema::Poly2 => "poly2",
        })
    }
}

impl FromStr for FeatureSchema {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(FeatureSchema::Raw),
            "poly2" => Ok(FeatureSchema::Poly2),
            _ => Err(Error::Config(format!("unknown feature schema '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub kind: TaskKind,
    pub scenario: ScenarioTag,
    pub schema: FeatureSchema,
    pub width: usize,
    pub seed: u64,
    pub generator: String,
    pub rng: String,
    pub label_convention: String,
    pub nu_grid: Option<usize>,
    /// Records redrawn after an oracle domain error.
    pub resamples: u64,
    /// Raw draws consumed, including rejected ones.
    pub draws: u64,
    /// Row indices of known-answer probe records.
    pub probes: Vec<usize>,
    pub extra: BTreeMap<String, String>,
}

impl Metadata {
    pub fn new(kind: TaskKind, scenario: ScenarioTag, seed: u64) -> Self {
        Self {
            kind,
            scenario,
            schema: FeatureSchema::Raw,
            width: scenario.feature_width(),
            seed,
            generator: GENERATOR_VERSION.to_string(),
            rng: RNG_NAME.to_string(),
            label_convention: LABEL_CONVENTION.to_string(),
            nu_grid: None,
            resamples: 0,
            draws: 0,
            probes: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("kind={}", self.kind),
            format!("scenario={}", self.scenario),
            format!("schema={}", self.schema),
            format!("width={}", self.width),
            format!("seed={}", self.seed),
            format!("generator={}", self.generator),
            format!("rng={}", self.rng),
            format!("label_convention={}", self.label_convention),
            format!("nu_grid={}", self.nu_grid.map_or("none".to_string(), |g| g.to_string())),
            format!("resamples={}", self.resamples),
            format!("draws={}", self.draws),
            format!(
                "probes={}",
                self.probes.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
            ),
        ];
        lines.extend(self.extra.iter().map(|(k, v)| format!("x.{k}={v}")));
        lines.join("\n") + "\n"
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n as u64 + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |k: &str| {
            kv.remove(k)
                .ok_or_else(|| Error::Schema(format!("metadata is missing '{k}'")))
        };
        let num = |k: &str, v: String| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::Schema(format!("metadata '{k}' is not an integer: '{v}'")))
        };
        let kind = take("kind")?.parse()?;
        let scenario = take("scenario")?.parse()?;
        let schema = take("schema")?.parse()?;
        let width = num("width", take("width")?)? as usize;
        let seed = num("seed", take("seed")?)?;
        let generator = take("generator")?;
        let rng = take("rng")?;
        let label_convention = take("label_convention")?;
        let nu_grid = match take("nu_grid")?.as_str() {
            "none" => None,
            g => Some(num("nu_grid", g.to_string())? as usize),
        };
        let resamples = num("resamples", take("resamples")?)?;
        let draws = num("draws", take("draws")?)?;
        let probes = take("probes")?
            .split_whitespace()
            .map(|p| num("probes", p.to_string()).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut extra = BTreeMap::new();
        for (k, v) in kv {
            match k.strip_prefix("x.") {
                Some(name) => extra.insert(name.to_string(), v),
                None => return Err(Error::Schema(format!("unknown metadata key '{k}'"))),
            };
        }
        Ok(Self {
            kind,
            scenario,
            schema,
            width,
            seed,
            generator,
            rng,
            label_convention,
            nu_grid,
            resamples,
            draws,
            probes,
            extra,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: Metadata,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(meta: Metadata, records: Vec<Record>) -> Result<Self> {
        let d = Self { meta, records };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.meta.width
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.features.len() != self.meta.width {
                return Err(Error::Schema(format!(
                    "record {i} has {} features, schema says {}",
                    r.features.len(),
                    self.meta.width
                )));
            }
            if self.meta.kind == TaskKind::Regression && !(r.target >= 0.0) {
                return Err(Error::Schema(format!("record {i} has negative target {}", r.target)));
            }
        }
        if let Some(p) = self.meta.probes.iter().find(|&&p| p >= self.records.len()) {
            return Err(Error::Schema(format!("probe index {p} beyond {} records", self.records.len())));
        }
        Ok(())
    }

    pub fn is_probe(&self, i: usize) -> bool {
        self.meta.probes.contains(&i)
    }

    /// Copy without the probe records.
    pub fn without_probes(&self) -> Dataset {
        let records = self
            .records
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.is_probe(*i))
            .map(|(_, r)| r.clone())
            .collect();
        Dataset {
            meta: Metadata {
                probes: Vec::new(),
                ..self.meta.clone()
            },
            records,
        }
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features.clone()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.target).collect()
    }

    pub fn class_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for r in &self.records {
            if let Some(slot) = h.get_mut(r.target as usize) {
                *slot += 1;
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    pub nu_grid: usize,
    pub rejection_cap: u64,
    /// Append known-answer rows (tagged in metadata).
    pub probes: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            nu_grid: DEFAULT_GRID,
            rejection_cap: DEFAULT_REJECTION_CAP,
            probes: true,
        }
    }
}

enum Oracle {
    Nl(NlOracle),
    Nbl(NblOracle),
}

impl Oracle {
    fn new(scenario: ScenarioTag, grid: usize) -> Result<Self> {
        Ok(match scenario {
            ScenarioTag::Bipartite { m } => Oracle::Nl(NlOracle::new(m)?),
            _ => Oracle::Nbl(NblOracle::with_grid(grid)),
        })
    }

    fn target(&self, scenario: ScenarioTag, features: &[f64]) -> Result<f64> {
        match (self, scenario) {
            (Oracle::Nl(o), ScenarioTag::Bipartite { m }) => {
                Ok(o.distance(&CorrelatorVector::new(m, features.to_vec())?)?.nl)
            }
            (Oracle::Nbl(o), ScenarioTag::Bilocal10) => {
                Ok(o.distance(&BilocalInput::Full(TripartiteCorrelators::from_features(features)?))?.nbl)
            }
            (Oracle::Nbl(o), ScenarioTag::Bilocal4) => {
                let f: [f64; 4] = features
                    .try_into()
                    .map_err(|_| Error::Usage("4-feature input needs 4 values".into()))?;
                Ok(o.distance(&BilocalInput::aggregate(f))?.nbl)
            }
            _ => Err(Error::Usage("oracle does not match scenario".into())),
        }
    }
}

fn draw(scenario: ScenarioTag, rng: &mut SampleRng, cap: u64) -> Result<(Vec<f64>, u64)> {
    Ok(match scenario {
        ScenarioTag::Bipartite { m } => (sample_bipartite(m, rng)?.into_values(), 1),
        ScenarioTag::Bilocal10 => {
            let a = sample_tripartite(rng, cap)?;
            (a.value.features(), a.attempts)
        }
        ScenarioTag::Bilocal4 => {
            let a = sample_bilocal4(rng, cap)?;
            (a.value.to_vec(), a.attempts)
        }
    })
}

/// Known-answer feature rows for a scenario.
pub fn probe_features(scenario: ScenarioTag) -> Result<Vec<Vec<f64>>> {
    let s = SwapSettings::standard();
    Ok(match scenario {
        ScenarioTag::Bipartite { m } => {
            let mut pr = vec![0.0; m * m];
            pr[..4].copy_from_slice(&[1.0, 1.0, 1.0, -1.0]);
            if m > 2 {
                // embed the PR box in the leading 2x2 block
                pr = vec![0.0; m * m];
                pr[0] = 1.0;
                pr[1] = 1.0;
                pr[m] = 1.0;
                pr[m + 1] = -1.0;
            }
            vec![vec![0.0; m * m], pr]
        }
        ScenarioTag::Bilocal10 => WERNER_PROBES
            .iter()
            .map(|&v| quantum_swap_correlators(v, &s).map(|t| t.features()))
            .collect::<Result<_>>()?,
        ScenarioTag::Bilocal4 => WERNER_PROBES
            .iter()
            .map(|&v| quantum_swap_correlators(v, &s).map(|t| t.ij_features().to_vec()))
            .collect::<Result<_>>()?,
    })
}

/// `n` sampled records labeled by the exact oracle of `scenario`, followed by
/// probe rows when requested. Record `k` draws from stream `k` of `seed`.
pub fn gen_regression(scenario: ScenarioTag, n: usize, seed: u64, opts: GenOptions) -> Result<Dataset> {
    scenario.validate()?;
    let start = Instant::now();
    let rows: Vec<Result<(Record, u64, u64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || Oracle::new(scenario, opts.nu_grid),
            |oracle, k| {
                let oracle = oracle.as_ref().map_err(|e| Error::Config(e.to_string()))?;
                let mut rng = stream_rng(seed, k as u64);
                let (mut draws, mut resamples) = (0u64, 0u64);
                loop {
                    let (features, used) = draw(scenario, &mut rng, opts.rejection_cap)?;
                    draws += used;
                    match oracle.target(scenario, &features) {
                        Ok(target) => return Ok((Record { features, target }, draws, resamples)),
                        Err(Error::Domain(msg)) if resamples < MAX_RESAMPLES => {
                            log::debug!("record {k}: resampling after domain error: {msg}");
                            resamples += 1;
                        }
                        Err(e) => return Err(e),
                    }
                }
            },
        )
        .collect();

    let mut meta = Metadata::new(TaskKind::Regression, scenario, seed);
    if scenario.is_bilocal() {
        meta.nu_grid = Some(opts.nu_grid);
    }
    let mut records = Vec::with_capacity(n);
    for row in rows {
        let (r, draws, resamples) = row?;
        meta.draws += draws;
        meta.resamples += resamples;
        records.push(r);
    }
    if scenario.is_bilocal() && meta.draws > 0 {
        meta.extra
            .insert("acceptance_rate".into(), format!("{:.6}", n as f64 / meta.draws as f64));
    }
    if opts.probes {
        let oracle = Oracle::new(scenario, opts.nu_grid)?;
        for features in probe_features(scenario)? {
            let target = oracle.target(scenario, &features)?;
            meta.probes.push(records.len());
            records.push(Record { features, target });
        }
    }
    let secs = start.elapsed().as_secs_f64();
    log::info!(
        "generated {n} {scenario} records in {secs:.2} s ({:.1} records/s)",
        n as f64 / secs.max(1e-12)
    );
    meta.extra.insert("records_per_second".into(), format!("{:.3}", n as f64 / secs.max(1e-12)));
    Dataset::new(meta, records)
}

/// Balanced three-class corpus of 2×2 correlators: uniform draws are bucketed
/// by [`classify`] until every class holds `n / 3` points, then shuffled.
pub fn gen_classification(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || n % 3 != 0 {
        return Err(Error::Config(format!("class-balanced size must be a positive multiple of 3, got {n}")));
    }
    let per = n / 3;
    let mut rng = stream_rng(seed, 0);
    let mut buckets: [Vec<Record>; 3] = Default::default();
    let mut seen = [0u64; 3];
    let mut draws = 0u64;
    while buckets.iter().any(|b| b.len() < per) {
        let c = sample_bipartite(2, &mut rng)?;
        draws += 1;
        let class = classify(&c)?;
        seen[class.index()] += 1;
        let b = &mut buckets[class.index()];
        if b.len() < per {
            b.push(Record {
                features: c.into_values(),
                target: class.index() as f64,
            });
        }
    }
    let mut records: Vec<Record> = buckets.into_iter().flatten().collect();
    records.shuffle(&mut stream_rng(seed, SHUFFLE_STREAM));

    let mut meta = Metadata::new(TaskKind::Classification, ScenarioTag::Bipartite { m: 2 }, seed);
    meta.draws = draws;
    meta.extra.insert("boundary_tol".into(), format!("{BOUNDARY_TOL:e}"));
    for class in CorrelationClass::ALL {
        let k = class.index();
        let fraction = seen[k] as f64 / draws as f64;
        let rejected = seen[k] - per as u64;
        meta.extra.insert(format!("volume_fraction.{class}"), format!("{fraction:.6}"));
        meta.extra.insert(
            format!("rejection_ratio.{class}"),
            format!("{:.6}", rejected as f64 / seen[k] as f64),
        );
    }
    Dataset::new(meta, records)
}

/// All monomials of degree 1 and 2 without the constant: `[a, b]` becomes
/// `[a, b, a², ab, b²]`.
pub fn expand_poly2(x: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut out = Vec::with_capacity(k + k * (k + 1) / 2);
    out.extend_from_slice(x);
    for i in 0..k {
        for j in i..k {
            out.push(x[i] * x[j]);
        }
    }
    out
}

pub fn poly_width(k: usize) -> usize {
    k + k * (k + 1) / 2
}

pub fn poly_features(d: &Dataset, degree: usize) -> Result<Dataset> {
    if degree != 2 {
        return Err(Error::Config(format!("only degree 2 expansion is supported, got {degree}")));
    }
    if d.meta.schema != FeatureSchema::Raw {
        return Err(Error::Config("features are already expanded".into()));
    }
    let records = d
        .records
        .iter()
        .map(|r| Record {
            features: expand_poly2(&r.features),
            target: r.target,
        })
        .collect();
    let meta = Metadata {
        schema: FeatureSchema::Poly2,
        width: poly_width(d.meta.width),
        ..d.meta.clone()
    };
    Dataset::new(meta, records)
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.75,
            seed: 0,
        }
    }
}

/// Seeded shuffled partition. Probe records never enter the training part;
/// they are appended to the test part and stay tagged there.
pub fn split(d: &Dataset, s: SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {} outside (0, 1)", s.train_fraction)));
    }
    if d.len() < 4 {
        return Err(Error::Config(format!("need at least 4 records to split, got {}", d.len())));
    }
    let mut idx: Vec<usize> = (0..d.len()).filter(|i| !d.is_probe(*i)).collect();
    idx.shuffle(&mut stream_rng(s.seed, SHUFFLE_STREAM));
    let n_train = (s.train_fraction * idx.len() as f64).round() as usize;
    let take = |ids: &[usize]| ids.iter().map(|&i| d.records[i].clone()).collect::<Vec<_>>();
    let train = Dataset::new(
        Metadata {
            probes: Vec::new(),
            ..d.meta.clone()
        },
        take(&idx[..n_train]),
    )?;
    let mut test_records = take(&idx[n_train..]);
    let mut probes = Vec::new();
    for &p in &d.meta.probes {
        probes.push(test_records.len());
        test_records.push(d.records[p].clone());
    }
    let test = Dataset::new(
        Metadata {
            probes,
            ..d.meta.clone()
        },
        test_records,
    )?;
    Ok((train, test))
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

pub fn save(d: &Dataset, path: &Path) -> Result<()> {
    d.validate()?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (0..d.width()).map(|i| format!("f{i}")).collect();
    header.push("target".into());
    w.write_record(&header).map_err(csv_err)?;
    for r in &d.records {
        let row = r
            .features
            .iter()
            .chain(std::iter::once(&r.target))
            .map(|v| format!("{v:.16e}"));
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    fs::write(meta_path(path), d.meta.to_text())?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset> {
    let meta = Metadata::from_text(&fs::read_to_string(meta_path(path))?)?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    let cols = meta.width + 1;
    let expected: Vec<String> = (0..meta.width).map(|i| format!("f{i}")).chain(["target".into()]).collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header does not match {cols} columns f0..f{},target", meta.width.saturating_sub(1)),
        });
    }
    let mut records = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != cols {
            return Err(Error::Parse {
                line,
                msg: format!("row has {} columns, expected {cols}", row.len()),
            });
        }
        let values = row
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("'{v}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        records.push(Record {
            target: values[meta.width],
            features: values[..meta.width].to_vec(),
        });
    }
    Dataset::new(meta, records)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::nl_distance;

    #[test]
    fn regression_targets_match_oracle() {
        let d = gen_regression(ScenarioTag::Bipartite { m: 2 }, 10, 5, GenOptions::default()).unwrap();
        assert_eq!(d.len(), 12);
        assert_eq!(d.meta.probes, vec![10, 11]);
        for r in &d.records {
            let c = CorrelatorVector::new(2, r.features.clone()).unwrap();
            assert_eq!(r.target, nl_distance(&c, 2).unwrap().nl);
            assert!((0.0..=1.0).contains(&r.target));
        }
        assert!((d.records[11].target - 0.25).abs() < 1e-9);
        assert!(d.records[10].target < 1e-12);
    }

    #[test]
    fn regression_is_bit_reproducible() {
        let opts = GenOptions {
            probes: false,
            ..GenOptions::default()
        };
        let a = gen_regression(ScenarioTag::Bipartite { m: 3 }, 8, 99, opts).unwrap();
        let b = gen_regression(ScenarioTag::Bipartite { m: 3 }, 8, 99, opts).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn bilocal4_werner_probe() {
        let opts = GenOptions {
            nu_grid: 200,
            ..GenOptions::default()
        };
        let d = gen_regression(ScenarioTag::Bilocal4, 2, 1, opts).unwrap();
        let p = d.meta.probes[0];
        assert!((d.records[p].target - 0.5).abs() < 2e-3, "{}", d.records[p].target);
        assert!(d.records.iter().all(|r| (0.0..=0.5).contains(&r.target)));
        assert!(d.meta.extra.contains_key("acceptance_rate"));
    }

    #[test]
    fn classification_balanced_and_consistent() {
        let d = gen_classification(3000, 4).unwrap();
        assert_eq!(d.class_histogram(), [1000, 1000, 1000]);
        for r in &d.records {
            let c = CorrelatorVector::new(2, r.features.clone()).unwrap();
            assert_eq!(classify(&c).unwrap().index() as f64, r.target);
        }
        // the eight CHSH facets each cut a corner simplex of volume 2^4/4!
        // from the cube [-1,1]^4, so the local fraction is 1 - 8/24 = 2/3
        let local: f64 = d.meta.extra["volume_fraction.local"].parse().unwrap();
        assert!((local - 2.0 / 3.0).abs() < 0.02, "{local}");
        assert!(gen_classification(10, 4).is_err());
    }

    #[test]
    fn poly_expansion() {
        assert_eq!(expand_poly2(&[2.0, 3.0]), vec![2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(expand_poly2(&[0.0; 4]), vec![0.0; 14]);
        for k in 1..=25 {
            assert_eq!(expand_poly2(&vec![1.0; k]).len(), poly_width(k));
        }
        let d = gen_classification(30, 1).unwrap();
        let e = poly_features(&d, 2).unwrap();
        assert_eq!(e.width(), 14);
        assert_eq!(e.targets(), d.targets());
        assert!(poly_features(&d, 3).is_err());
        assert!(poly_features(&e, 2).is_err());
    }

    fn toy(n: usize) -> Dataset {
        let meta = Metadata::new(TaskKind::Regression, ScenarioTag::Bipartite { m: 2 }, 0);
        let records = (0..n)
            .map(|i| Record {
                features: vec![i as f64 / n as f64, 0.1, -0.3, 1.0 / 3.0],
                target: i as f64,
            })
            .collect();
        Dataset::new(meta, records).unwrap()
    }

    #[test]
    fn split_partition() {
        let d = toy(100);
        let s = SplitSpec {
            train_fraction: 0.75,
            seed: 3,
        };
        let (tr, te) = split(&d, s).unwrap();
        assert_eq!((tr.len(), te.len()), (75, 25));
        let (tr2, _) = split(&d, s).unwrap();
        assert_eq!(tr.records, tr2.records);
        let mut all: Vec<f64> = tr.targets().into_iter().chain(te.targets()).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.targets());
        assert!(split(&toy(3), s).is_err());
    }

    #[test]
    fn probes_stay_out_of_training() {
        let mut d = toy(20);
        d.meta.probes = vec![0, 7];
        let (tr, te) = split(&d, SplitSpec::default()).unwrap();
        assert!(tr.records.iter().all(|r| r.target != 0.0 && r.target != 7.0));
        assert_eq!(te.meta.probes.len(), 2);
        for &p in &te.meta.probes {
            assert!(te.records[p].target == 0.0 || te.records[p].target == 7.0);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut d = toy(17);
        d.meta.probes = vec![3];
        d.meta.extra.insert("note".into(), "x".into());
        save(&d, &path).unwrap();
        assert_eq!(load(&path).unwrap(), d);

        let empty = Dataset::new(d.meta.clone(), Vec::new());
        assert!(empty.is_err());
        let mut e = toy(0);
        e.meta.probes.clear();
        save(&e, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim(), "f0,f1,f2,f3,target");
        assert_eq!(load(&path).unwrap(), e);
    }

    #[test]
    fn wrong_column_count_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save(&toy(3), &path).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("0.1,0.2,0.3\n");
        fs::write(&path, text).unwrap();
        match load(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }
}
