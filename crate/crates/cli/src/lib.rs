//! Command implementations behind the `bellnet` binary.
//!
//! Every command takes a [`RunConfig`] and returns an [`Outcome`]; the binary
//! only parses flags, prints the outcome and maps errors to exit codes.

pub mod bench;
pub mod config;
pub mod curves;
pub mod data;
pub mod oracle;
pub mod search;
pub mod train;

use bellnet_core::{Error, Result};

pub use config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 2,
    Data = 3,
    Numeric = 4,
    Refuted = 5,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub fn exit_for(e: &Error) -> Exit {
    match e {
        Error::Config(_) | Error::Usage(_) => Exit::Usage,
        Error::Schema(_) | Error::Parse { .. } | Error::Io(_) => Exit::Data,
        Error::Domain(_) | Error::Numeric(_) | Error::Sampling(_) | Error::Training { .. } => Exit::Numeric,
    }
}

/// What a command printed and how the process should exit.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit: Exit,
    pub report: String,
    /// Effective configuration after defaults were filled in.
    pub config: RunConfig,
}

impl Outcome {
    pub fn ok(report: String, config: RunConfig) -> Self {
        Self {
            exit: Exit::Ok,
            report,
            config,
        }
    }
}

pub const COMMANDS: &[&str] = &[
    "gen", "oracle", "train", "blend", "eval", "run", "search", "bench", "curve",
];

pub fn dispatch(mut cfg: RunConfig) -> Result<Outcome> {
    let command: String = cfg.require("command")?;
    if let Some(w) = cfg.get::<usize>("workers")? {
        // a pool may already exist when several commands share one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
    match command.as_str() {
        "gen" => data::cmd_gen(&mut cfg),
        "oracle" => oracle::cmd_oracle(&mut cfg),
        "train" => train::cmd_train(&mut cfg),
        "blend" => train::cmd_blend(&mut cfg),
        "eval" => train::cmd_eval(&mut cfg),
        "run" => train::cmd_run(&mut cfg),
        "search" => search::cmd_search(&mut cfg),
        "bench" => bench::cmd_bench(&mut cfg),
        "curve" => curves::cmd_curve(&mut cfg),
        other => Err(Error::Usage(format!("unknown command '{other}'"))),
    }
}
