//! `semalign` command-line driver.

mod config;
mod pipeline;
mod record;
mod stages;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Config, SplitConfig};
use stages::Run;

/// A configuration or invocation problem (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "semalign", version, about = "Semi-supervised alignment of two labeled domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Split one dataset into two domains with a known correspondence.
    Split,
    /// Couple the two domains and build the joint affinity graph.
    Align,
    /// Embed the joint graph and draw it.
    Embed,
    /// Score the embedding.
    Evaluate,
    /// Split (when configured), align, embed and evaluate; or run the batch-effect grid.
    Pipeline,
}

/// Flags override the config file.
#[derive(Args)]
struct Flags {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated seeds for a batch run (pipeline only).
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Solve the transport exactly instead of hierarchically.
    #[arg(long, global = true)]
    exact: bool,
    /// Subsample the larger domain when sizes differ.
    #[arg(long, global = true)]
    subsample: bool,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Fraction of target labels hidden from the method.
    #[arg(long, global = true)]
    mask_fraction: Option<f64>,
    /// Metric selection: names or the groups all, alignment, bio, batch.
    #[arg(long, global = true)]
    metrics: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Re-use stage outputs whose records match the current configuration.
    #[arg(long, global = true)]
    resume: bool,
    /// Also write the per-domain and cross affinities and the profiles.
    #[arg(long, global = true)]
    dump_affinities: bool,
    /// Dataset CSV to split.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[arg(long, global = true)]
    source: Option<PathBuf>,
    #[arg(long, global = true)]
    target: Option<PathBuf>,
    #[arg(long, global = true)]
    label_column: Option<String>,
    /// Split kind with default parameters.
    #[arg(long, global = true)]
    split: Option<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Flags {
    fn apply(&self, cfg: &mut Config) {
        if let Some(s) = self.seed {
            cfg.seed = Some(s);
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        cfg.exact |= self.exact;
        cfg.subsample |= self.subsample;
        cfg.resume |= self.resume;
        cfg.dump_affinities |= self.dump_affinities;
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(m) = self.mask_fraction {
            cfg.mask_fraction = m;
        }
        if let Some(m) = &self.metrics {
            cfg.metrics = m.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(p) = &self.data {
            cfg.input.data = Some(p.clone());
        }
        if let Some(p) = &self.source {
            cfg.input.source = Some(p.clone());
        }
        if let Some(p) = &self.target {
            cfg.input.target = Some(p.clone());
        }
        if let Some(l) = &self.label_column {
            cfg.input.label_column = l.clone();
        }
        if let Some(k) = &self.split {
            cfg.split = Some(SplitConfig {
                kind: k.clone(),
                noise_ratio: None,
                sigma: None,
            });
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.flags.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cli.flags.apply(&mut cfg);
    cfg.validate()?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the thread pool")?;
    }
    if let Command::Pipeline = cli.command {
        return pipeline::pipeline(&cfg);
    }
    let seed = cfg.seed()?;
    if !cfg.seeds.is_empty() {
        return Err(UsageError("--seeds is only supported by the pipeline command".into()).into());
    }
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let run = Run {
        cfg: &cfg,
        seed,
        dir: cfg.out_dir.clone(),
    };
    match cli.command {
        Command::Split => stages::split(&run),
        Command::Align => stages::align(&run),
        Command::Embed => stages::embed(&run),
        Command::Evaluate => stages::evaluate(&run).map(|_| ()),
        Command::Pipeline => unreachable!("handled above"),
    }
}

/// 1 usage, 2 data validation, 3 numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<semalign::Error>() {
            return match e {
                semalign::Error::InvalidParameter(_) => 1,
                semalign::Error::Numerical(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.flags.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
