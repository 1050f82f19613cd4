//! Flat `key=value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bellnet_core::{Error, Result};

/// Every key a run configuration may carry.
pub const KEYS: &[&str] = &[
    "command",
    "task",
    "scenario",
    "m",
    "n",
    "seed",
    "grid",
    "rejection_cap",
    "probes",
    "data",
    "test",
    "out",
    "model",
    "members",
    "train_fraction",
    "blend_fraction",
    "val_fraction",
    "layers",
    "widths",
    "lr",
    "batch",
    "epochs",
    "patience",
    "mae_ratio",
    "accuracy_floor",
    "baseline_degree",
    "boost_trees",
    "boost_depth",
    "shrinkage",
    "forest_trees",
    "min_leaf",
    "restarts",
    "points",
    "mode",
    "point",
    "werner",
    "sizes",
    "workers",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i as u64 + 1,
                msg: format!("expected key=value, found '{line}'"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i as u64 + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("unknown configuration key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Sets `key` only when `value` is present.
    pub fn set_opt<T: ToString>(&mut self, key: &str, value: Option<T>) -> Result<()> {
        match value {
            Some(v) => self.set(key, v),
            None => Ok(()),
        }
    }

    /// Overlays every entry of `other`.
    pub fn merge(&mut self, other: &RunConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'"))),
        }
    }

    /// Value of `key`, recording `default` in the effective configuration
    /// when the key is absent.
    pub fn get_or<T: FromStr + ToString>(&mut self, key: &str, default: T) -> Result<T> {
        match self.get(key)? {
            Some(v) => Ok(v),
            None => {
                self.set(key, default.to_string())?;
                Ok(default)
            }
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Usage(format!("missing required setting '{key}'")))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.require::<String>(key).map(PathBuf::from)
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| Error::Config(format!("invalid list entry '{s}' for '{key}'")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// The configuration as `# key=value` comment lines for CSV outputs.
    pub fn as_comments(&self) -> String {
        self.entries().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Sidecar holding the effective configuration of the run that wrote `path`.
pub fn run_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run");
    PathBuf::from(s)
}

pub fn write_sidecar(path: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(run_path(path), cfg.to_string())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_comments() {
        let cfg = RunConfig::parse("# demo\nscenario = bilocal4\nn=100\n\nseed=7\n").unwrap();
        assert_eq!(cfg.get::<usize>("n").unwrap(), Some(100));
        assert_eq!(RunConfig::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        match RunConfig::parse("n=1\nbogus=2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::parse("no equals sign").is_err());
        assert!(RunConfig::new().set("nope", 1).is_err());
    }

    #[test]
    fn defaults_are_recorded() {
        let mut cfg = RunConfig::new();
        assert_eq!(cfg.get_or("grid", 1000usize).unwrap(), 1000);
        assert_eq!(cfg.raw("grid"), Some("1000"));
        cfg.set("layers", "2, 3").unwrap();
        assert_eq!(cfg.list::<usize>("layers").unwrap(), Some(vec![2, 3]));
        assert!(cfg.get::<usize>("layers").is_err());
        assert!(cfg.require::<String>("data").is_err());
    }

    #[test]
    fn merge_overrides() {
        let mut a = RunConfig::parse("n=1\nseed=2").unwrap();
        a.merge(&RunConfig::parse("n=5").unwrap());
        assert_eq!(a.raw("n"), Some("5"));
        assert_eq!(a.raw("seed"), Some("2"));
    }
}
