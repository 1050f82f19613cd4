use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bellnet_cli::config::RunConfig;
use bellnet_cli::{dispatch, exit_for, Exit};
use bellnet_core::Result;

#[derive(Parser)]
#[command(name = "bellnet", version, about = "Learned nonlocality and non-bilocality quantifiers")]
struct Cli {
    /// Flat key=value file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Extra key=value settings, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Data {
    /// bipartite, bipartite<m>, bilocal4 or bilocal10
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    /// regression or classification
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Points in the ν grid of the bilocal oracle.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args, Default)]
struct Grid {
    /// Hidden-layer counts, e.g. 2,3,4,5
    #[arg(long)]
    layers: Option<String>,
    /// Layer widths, e.g. 100,200
    #[arg(long)]
    widths: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    mae_ratio: Option<f64>,
    #[arg(long)]
    accuracy_floor: Option<f64>,
    #[arg(long)]
    min_leaf: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample correlators, label them with the exact oracle, write CSV.
    Gen {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the known-answer probe rows.
        #[arg(long)]
        no_probes: bool,
    },
    /// Exact NL, NBL or class of one point.
    Oracle {
        /// nl, nbl or class
        mode: String,
        #[command(flatten)]
        data: Data,
        /// Comma-separated correlators.
        #[arg(long, allow_hyphen_values = true)]
        point: Option<String>,
        /// Werner visibility of both swap-network sources.
        #[arg(long)]
        werner: Option<f64>,
    },
    /// Train the member grid.
    Train {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter trained members and fit the blender.
    Blend {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        members: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an ensemble on the test partition.
    Eval {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Separate test file instead of the split of --dataset.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Directory for metric and prediction CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train, blend and evaluate in one go.
    Run {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Look for quantum points the model flags but the inequality misses.
    Search {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Median oracle time against median prediction time.
    Bench {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Curve data: chsh, werner or learning.
    Curve {
        mode: String,
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        points: Option<usize>,
        /// Training-set sizes for learning curves.
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl Data {
    fn apply(&self, c: &mut RunConfig) -> Result<()> {
        c.set_opt("scenario", self.scenario.clone())?;
        c.set_opt("m", self.m)?;
        c.set_opt("task", self.task.clone())?;
        c.set_opt("seed", self.seed)?;
        c.set_opt("grid", self.grid)
    }
}

impl Grid {
    fn apply(&self, c: &mut RunConfig) -> Result<()> {
        c.set_opt("layers", self.layers.clone())?;
        c.set_opt("widths", self.widths.clone())?;
        c.set_opt("lr", self.lr)?;
        c.set_opt("epochs", self.epochs)?;
        c.set_opt("patience", self.patience)?;
        c.set_opt("batch", self.batch)?;
        c.set_opt("train_fraction", self.train_fraction)?;
        c.set_opt("mae_ratio", self.mae_ratio)?;
        c.set_opt("accuracy_floor", self.accuracy_floor)?;
        c.set_opt("min_leaf", self.min_leaf)
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| bellnet_core::Error::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        c.set(k.trim(), v.trim())?;
    }
    c.set_opt("workers", cli.workers)?;
    let name = match &cli.command {
        Command::Gen { data, n, out, no_probes } => {
            data.apply(&mut c)?;
            c.set_opt("n", *n)?;
            c.set_opt("out", path(out))?;
            if *no_probes {
                c.set("probes", false)?;
            }
            "gen"
        }
        Command::Oracle { mode, data, point, werner } => {
            data.apply(&mut c)?;
            c.set("mode", mode)?;
            c.set_opt("point", point.clone())?;
            c.set_opt("werner", *werner)?;
            "oracle"
        }
        Command::Train { data, grid, dataset, out } => {
            data.apply(&mut c)?;
            grid.apply(&mut c)?;
            c.set_opt("data", path(dataset))?;
            c.set_opt("out", path(out))?;
            "train"
        }
        Command::Blend { data, grid, dataset, members, out } => {
            data.apply(&mut c)?;
            grid.apply(&mut c)?;
            c.set_opt("data", path(dataset))?;
            c.set_opt("members", path(members))?;
            c.set_opt("out", path(out))?;
            "blend"
        }
        Command::Eval { data, train_fraction, model, dataset, test, out } => {
            data.apply(&mut c)?;
            c.set_opt("train_fraction", *train_fraction)?;
            c.set_opt("model", path(model))?;
            c.set_opt("data", path(dataset))?;
            c.set_opt("test", path(test))?;
            c.set_opt("out", path(out))?;
            "eval"
        }
        Command::Run { data, grid, dataset, test, out } => {
            data.apply(&mut c)?;
            grid.apply(&mut c)?;
            c.set_opt("data", path(dataset))?;
            c.set_opt("test", path(test))?;
            c.set_opt("out", path(out))?;
            "run"
        }
        Command::Search { data, model, restarts, out } => {
            data.apply(&mut c)?;
            c.set_opt("model", path(model))?;
            c.set_opt("restarts", *restarts)?;
            c.set_opt("out", path(out))?;
            "search"
        }
        Command::Bench { data, model, n } => {
            data.apply(&mut c)?;
            c.set_opt("model", path(model))?;
            c.set_opt("points", *n)?;
            "bench"
        }
        Command::Curve { mode, data, grid, model, dataset, points, sizes, out } => {
            data.apply(&mut c)?;
            grid.apply(&mut c)?;
            c.set("mode", mode)?;
            c.set_opt("model", path(model))?;
            c.set_opt("data", path(dataset))?;
            c.set_opt("points", *points)?;
            c.set_opt("sizes", sizes.clone())?;
            c.set_opt("out", path(out))?;
            "curve"
        }
    };
    c.set("command", name)?;
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage.code() as u8 } else { 0 });
        }
    };
    match build_config(&cli).and_then(dispatch) {
        Ok(out) => {
            print!("{}", out.report);
            ExitCode::from(out.exit.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e).code() as u8)
        }
    }
}
