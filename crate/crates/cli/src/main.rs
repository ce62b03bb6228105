//! `topg`: target-specific proposals, ranking, tracking and evaluation
//! from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, KEYS};

#[derive(Debug, Parser)]
#[command(
    name = "topg",
    version,
    about = "Target-specific object proposals, ranking and tracking",
    after_help = "Every configuration key can also be given as a flag, e.g. `--kappa 10` or \
                  `--nms-iou=0.7`; flags override the config file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key=value configuration file (`#` starts a comment).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for multi-sequence commands (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate fused proposals for every frame of a sequence.
    Propose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seq: PathBuf,
        /// Initial target `x,y,w,h` (0-based); defaults to the first ground-truth box.
        #[arg(long)]
        init: Option<String>,
        /// Output CSV (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write each frame's response map as PGM into this directory.
        #[arg(long)]
        dump_response: Option<PathBuf>,
        /// Write each frame's search-window edge magnitudes as PGM into this directory.
        #[arg(long)]
        dump_edges: Option<PathBuf>,
    },
    /// Rank a proposal CSV by affinity to the target.
    Rank {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seq: PathBuf,
        /// CSV written by `propose`.
        #[arg(long)]
        proposals: PathBuf,
        /// Target `x,y,w,h` on the first frame; defaults to the first ground-truth box.
        #[arg(long)]
        target: Option<String>,
        /// Target contour score; measured on the first frame when absent.
        #[arg(long)]
        rho_t: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track a target through a sequence.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seq: PathBuf,
        /// Initial box `x,y,w,h` (0-based); defaults to the first ground-truth box.
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every frame with the chosen box drawn on it as PPM.
        #[arg(long)]
        dump_overlays: Option<PathBuf>,
    },
    /// Proposal recall against ground truth, averaged over sequences.
    EvalRecall {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        seq: Vec<PathBuf>,
        /// Comma-separated proposal budgets.
        #[arg(long, default_value = "50,100,200,500,1000")]
        budgets: String,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Output CSV `budget,recall` (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-sequence recall as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Track every sequence from its first ground-truth box and score it.
    EvalTracking {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        seq: Vec<PathBuf>,
        /// Lines of `sequence: attr1, attr2` for per-attribute summaries.
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// Also run the twelve perturbed initializations.
        #[arg(long)]
        sre: bool,
        /// JSON summary (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic sequence (or the degradation suite) in OTB layout.
    Synth {
        #[command(flatten)]
        common: Common,
        /// plain, low-contrast, blur, noise, occlusion or suite.
        #[arg(long, default_value = "plain")]
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        length: Option<usize>,
    },
    /// Check the split-budget hit-probability inequality on random instances.
    AppendixCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Print the effective configuration as config-file text.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

/// A failure with its exit code.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub trait ExitClass<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitClass<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })
    }

    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 2,
            error: e.into(),
        })
    }
}

type Overrides = Vec<(String, String)>;

/// Pull `--<key> value` / `--<key>=value` pairs for configuration keys out
/// of the argument list.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        let key = name.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("--{name} needs a value"))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Propose { common, .. }
        | Command::Rank { common, .. }
        | Command::Track { common, .. }
        | Command::EvalRecall { common, .. }
        | Command::EvalTracking { common, .. }
        | Command::Synth { common, .. }
        | Command::AppendixCheck { common, .. }
        | Command::Config { common } => common,
    };
    let config = RunConfig::load(common.config.as_deref(), overrides).usage()?;
    let jobs = commands::worker_count(common.jobs);
    match cli.command {
        Command::Propose {
            seq,
            init,
            out,
            dump_response,
            dump_edges,
            ..
        } => commands::propose(
            &config,
            &seq,
            init.as_deref(),
            out.as_deref(),
            dump_response.as_deref(),
            dump_edges.as_deref(),
        ),
        Command::Rank {
            seq,
            proposals,
            target,
            rho_t,
            out,
            ..
        } => commands::rank(&config, &seq, &proposals, target.as_deref(), rho_t, out.as_deref()),
        Command::Track {
            seq,
            init,
            out,
            dump_overlays,
            ..
        } => commands::track(&config, &seq, init.as_deref(), out.as_deref(), dump_overlays.as_deref()),
        Command::EvalRecall {
            seq,
            budgets,
            iou,
            out,
            json,
            ..
        } => commands::eval_recall(&config, &seq, &budgets, iou, out.as_deref(), json.as_deref(), jobs),
        Command::EvalTracking {
            seq,
            attributes,
            sre,
            out,
            ..
        } => commands::eval_tracking(&config, &seq, attributes.as_deref(), sre, out.as_deref(), jobs),
        Command::Synth {
            kind, out, length, ..
        } => commands::synth(&config, &kind, &out, length),
        Command::AppendixCheck { trials, .. } => commands::appendix_check(&config, trials),
        Command::Config { .. } => output::emit(None, &config.describe()).data(),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let (args, overrides) = match split_overrides(args) {
        Ok(split) => split,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
