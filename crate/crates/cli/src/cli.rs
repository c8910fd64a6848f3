//! Command-line surface. Flags override the JSON config, which overrides defaults.

use crate::commands;
use crate::config::{parse_list, OutputFormat, RunConfig, ThetaMode};
use crate::plot::{cmd_plot, PlotKind};
use crate::table::{emit, Table};
use crate::validate::{cmd_validate, Context, Fault, Oracles, Suite};
use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "lpproj", version, about = "Monte Carlo lab for hyperplane projections of l_p^n balls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sampler moments against their closed forms.
    Moments(Common),
    /// Variance ratio and four-term decomposition per (p, n, direction).
    Ratio(Common),
    /// Khintchine weight against the Orlicz norm of the direction.
    Orlicz(Common),
    /// Variance of the isotropic ball against its Steiner symmetral.
    Steiner(Common),
    /// Brute-force permutation averages against the rearrangement functional.
    Permavg(Common),
    /// Runs the acceptance battery and exits nonzero on any failure.
    Validate(ValidateArgs),
    /// Draws an SVG from a CSV written by `ratio` or `orlicz`.
    Plot(PlotArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON config file; flags given here take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated exponents.
    #[arg(long)]
    pub p: Option<String>,
    /// Comma-separated dimensions.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long, value_enum)]
    pub theta: Option<ThetaMode>,
    /// Direction file for `--theta file`.
    #[arg(long)]
    pub theta_file: Option<PathBuf>,
    /// Haar directions per cell.
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Exponent of the permutation average.
    #[arg(long)]
    pub q: Option<f64>,
    /// Random matrices per size for `permavg`.
    #[arg(long)]
    pub cases: Option<usize>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &self.p {
            cfg.p = parse_list(s).context("--p")?;
        }
        if let Some(s) = &self.n {
            cfg.n = parse_list(s).context("--n")?;
        }
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })* };
        }
        take!(theta, directions, samples, seed, threads, format, q, cases);
        if self.theta_file.is_some() {
            cfg.theta_file = self.theta_file.clone();
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "quick")]
    pub suite: Suite,
    /// JSON config; only `seed`, `threads` and `windows` are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Where to write the JSON report (stdout by default).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, hide = true)]
    pub fault: Option<Fault>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub csv: PathBuf,
    #[arg(long, value_enum, default_value = "ratio")]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
}

fn init_threads(k: usize) {
    // fails only when a pool already exists, e.g. in tests
    let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
}

fn write_table(cfg: &RunConfig, t: Table) -> Result<()> {
    let text = match cfg.format {
        OutputFormat::Csv => t.to_csv(),
        OutputFormat::Json => t.to_json(),
    };
    emit(&text, cfg.out.as_deref())
}

/// Runs a parsed command; `Ok(false)` means validation failed.
pub fn run(cli: Cli) -> Result<bool> {
    let table_cmd = |c: &Common, f: fn(&RunConfig) -> Result<Table>| -> Result<bool> {
        let cfg = c.resolve()?;
        init_threads(cfg.threads);
        write_table(&cfg, f(&cfg)?)?;
        Ok(true)
    };
    match &cli.command {
        Command::Moments(c) => table_cmd(c, commands::cmd_moments),
        Command::Ratio(c) => table_cmd(c, commands::cmd_ratio),
        Command::Orlicz(c) => table_cmd(c, commands::cmd_orlicz),
        Command::Steiner(c) => table_cmd(c, commands::cmd_steiner),
        Command::Permavg(c) => table_cmd(c, commands::cmd_permavg),
        Command::Validate(v) => {
            let base = match &v.config {
                Some(path) => RunConfig::load(path)?,
                None => RunConfig::default(),
            };
            let threads = v.threads.unwrap_or(base.threads);
            anyhow::ensure!(threads >= 1, "threads must be >= 1");
            init_threads(threads);
            let ctx = Context { seed: v.seed.unwrap_or(base.seed), windows: base.windows, oracles: Oracles::with_fault(v.fault) };
            cmd_validate(&ctx, v.suite, v.out.as_deref())
        }
        Command::Plot(a) => {
            cmd_plot(&a.csv, a.kind, &a.out)?;
            Ok(true)
        }
    }
}
