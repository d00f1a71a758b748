//! Command-line driver: runs the netzm pipeline over a cross-product of
//! inputs, window sizes and quantities, and writes reports, plot data and
//! synthetic streams.

pub mod engine;
pub mod plot;
pub mod report;
pub mod synth_cmd;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use netzm::ingest::{OnParseError, Protocol, ValidityPolicy};
use netzm::matrix::Quantity;
use netzm::topology::DEFAULT_SUPERNODE_K;
use netzm::zm_fit::AlphaGrid;

pub use engine::RunConfig;
pub use report::Format;

#[derive(Debug, Parser)]
#[command(
    name = "netzm",
    version,
    about = "Traffic-matrix degree distributions and Zipf-Mandelbrot fits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pooled distributions, fits and per-window topology for every cell.
    Analyze(RunArgs),
    /// Data/model series and the leaf-parameter scatter from an analyze run.
    Plotdata(PlotArgs),
    /// Per-window binned fractions over time.
    Timeseries(RunArgs),
    /// Write a planted synthetic stream.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Record file; repeat for several inputs.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Valid packets per window; repeatable.
    #[arg(long = "nv", required = true)]
    pub window_sizes: Vec<usize>,
    /// Quantity to analyze; repeatable. Defaults to all five.
    #[arg(long = "quantity")]
    pub quantities: Vec<Quantity>,
    #[arg(long, default_value_t = DEFAULT_SUPERNODE_K)]
    pub supernode_k: usize,
    #[arg(long, default_value_t = 0.10)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 4.00)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub alpha_step: f64,
    /// Exact-sum cutoff for the integral tail in the normalizer sums.
    #[arg(long)]
    pub dsum: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated accepted protocol tags.
    #[arg(long, default_value = "tcp4", value_delimiter = ',')]
    pub protocols: Vec<String>,
    #[arg(long, default_value = "skip")]
    pub on_parse_error: OnParseError,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Output directory of a previous `analyze` run.
    #[arg(long)]
    pub from: PathBuf,
    /// Defaults to `<from>/plot`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Planted topology mix with per-link labels.
    Mix(MixArgs),
    /// Sources with Zipf-Mandelbrot fan-out.
    Zm(ZmArgs),
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub nv: usize,
    #[arg(long, default_value_t = 1)]
    pub windows: usize,
    /// Distinct links per window; defaults to nv / 4.
    #[arg(long)]
    pub links: Option<usize>,
    #[arg(long, default_value_t = 0.4)]
    pub star: f64,
    #[arg(long, default_value_t = 0.3)]
    pub isolated: f64,
    #[arg(long, default_value_t = 0.2)]
    pub core: f64,
    #[arg(long, default_value_t = 0.1)]
    pub core_leaf: f64,
    #[arg(long, default_value_t = 1_000)]
    pub core_size: usize,
    #[arg(long, default_value_t = DEFAULT_SUPERNODE_K - 1)]
    pub decoy_hubs: usize,
}

#[derive(Debug, Args)]
pub struct ZmArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.8)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 10_000)]
    pub d_max: u64,
    #[arg(long, default_value_t = 100_000)]
    pub sources: usize,
}

/// How a completed command went.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some cells failed; their errors are in the manifest.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::Partial => 1,
        }
    }
}

/// Exit code for errors that stop a command outright.
pub const FATAL: i32 = 2;

fn parse_protocols(tags: &[String]) -> Result<ValidityPolicy> {
    let mut out = Vec::new();
    for t in tags {
        let t = t.trim();
        match t {
            "tcp4" | "udp4" | "other" => out.push(Protocol::from_tag(t)),
            _ => bail!("unknown protocol {t:?} (expected tcp4, udp4 or other)"),
        }
    }
    Ok(ValidityPolicy::new(out, true)?)
}

impl RunArgs {
    pub fn into_config(self) -> Result<RunConfig> {
        let quantities = if self.quantities.is_empty() {
            Quantity::ALL.to_vec()
        } else {
            self.quantities
        };
        let cfg = RunConfig {
            inputs: self.inputs,
            window_sizes: self.window_sizes,
            quantities,
            supernode_k: self.supernode_k,
            grid: AlphaGrid {
                min: self.alpha_min,
                max: self.alpha_max,
                step: self.alpha_step,
            },
            dsum: self.dsum,
            format: self.format,
            out: self.out,
            policy: parse_protocols(&self.protocols)?,
            on_parse_error: self.on_parse_error,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Analyze(a) => engine::analyze(&a.into_config()?),
        Command::Timeseries(a) => engine::timeseries(&a.into_config()?),
        Command::Plotdata(p) => {
            let out = p.out.unwrap_or_else(|| p.from.join("plot"));
            plot::plotdata(&p.from, &out)
        }
        Command::Synth(SynthCommand::Mix(m)) => synth_cmd::mix(&m),
        Command::Synth(SynthCommand::Zm(z)) => synth_cmd::zm(&z),
    }
}
