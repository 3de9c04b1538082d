//! Command-line front end for `eaqec`.

pub mod commands;
pub mod setup;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eaqec::optimizer::Domain;

use crate::commands::{OptimizeRequest, OracleRequest};
use crate::setup::{
    check_probability, optimizer_config, parse_grid, parse_layout, parse_switch, parse_target,
    ChannelSource,
};
use crate::sweep::{Scenario, SweepSpec};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InputError = 1,
    NotConverged = 2,
    VerificationFailed = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "eaqec",
    version,
    about = "Entanglement-assisted quantum error correction by alternating optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize encoding and recovery for one channel.
    Optimize(OptimizeArgs),
    /// Optimize over a grid of noise levels for each protection scenario.
    Sweep(SweepArgs),
    /// Build and verify the teleportation protocol for a two-unitary channel.
    Teleport(TeleportArgs),
    /// Check matrix-derivative identities and the Γ-solver against brute force.
    Oracle(OracleArgs),
    /// Check a channel JSON file.
    Validate(ValidateArgs),
}

/// Flags that select the channel and the optimizer settings.
#[derive(Debug, Args)]
pub struct Common {
    /// Preset (identity, bit-flip, bit-phase-flip, depolarizing) or a channel JSON file.
    #[arg(long, default_value = "bit-flip")]
    pub channel: String,
    /// Noise parameter of a preset channel.
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// `d_dat,d_enc,d_rec`.
    #[arg(long, default_value = "2,2,2")]
    pub layout: String,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Outer-loop tolerance on the decrease of δ.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Cap on outer iterations per restart.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Optimizer settings file (.json or .toml); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Inputs the distance is measured on: prepared or full.
    #[arg(long, default_value = "prepared")]
    pub domain: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// identity, swap, or a JSON matrix file.
    #[arg(long, default_value = "identity")]
    pub target: String,
    /// on or off; defaults to on for the swap target.
    #[arg(long)]
    pub entangle: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// `start:stop:step`; overrides --p.
    #[arg(long)]
    pub p_grid: Option<String>,
    /// Comma-separated subset of unprotected, standard, ea.
    #[arg(long, default_value = "unprotected,standard,ea")]
    pub scenarios: String,
    /// on or off: start one ea restart from the teleportation encoding when
    /// the channel allows it.
    #[arg(long, default_value = "on")]
    pub teleport_seed: String,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TeleportArgs {
    /// Preset, two-unitary JSON (`dim`, `p`, `v1`, `v2`) or channel JSON.
    #[arg(long, default_value = "bit-flip")]
    pub channel: String,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long, default_value = "2,2,2")]
    pub layout: String,
    /// Print the gate list of the protocol.
    #[arg(long)]
    pub dump_circuit: bool,
    /// Write a JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Random draws per identity and matrix size.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Channel for the Γ cross-check.
    #[arg(long, default_value = "bit-flip")]
    pub channel: String,
    #[arg(long, default_value_t = 0.19)]
    pub p: f64,
    /// Spacing of the Bloch-ball grid.
    #[arg(long, default_value_t = 0.01)]
    pub grid_resolution: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Channel JSON file.
    pub path: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
/// Diagnostics go to stderr; the return value is the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                ExitStatus::InputError.code()
            } else {
                0
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitStatus::InputError.code()
        }
    }
}

fn config_from(common: &Common) -> anyhow::Result<eaqec::optimizer::OptimizerConfig> {
    optimizer_config(
        common.config.as_deref(),
        common.restarts,
        common.seed,
        common.tol,
        common.max_iters,
    )
}

fn domain_from(common: &Common) -> anyhow::Result<Domain> {
    common
        .domain
        .parse::<Domain>()
        .map_err(|e| anyhow::anyhow!("domain: {e}"))
}

pub fn dispatch(command: Command) -> anyhow::Result<ExitStatus> {
    match command {
        Command::Optimize(a) => {
            let c = &a.common;
            let target = parse_target(&a.target)?;
            let entangle = match &a.entangle {
                Some(s) => parse_switch("entangle", s)?,
                None => matches!(target, eaqec::TargetSpec::SwapDataToRecovery),
            };
            let req = OptimizeRequest {
                channel: ChannelSource::resolve(&c.channel)?,
                p: check_probability(c.p)?,
                layout: parse_layout(&c.layout)?,
                target,
                entangle,
                domain: domain_from(c)?,
                config: config_from(c)?,
                format: c.format.unwrap_or(Format::Json),
            };
            commands::optimize(&req, c.out.as_deref())
        }
        Command::Sweep(a) => {
            let c = &a.common;
            let p_values = match &a.p_grid {
                Some(g) => parse_grid(g)?,
                None => vec![check_probability(c.p)?],
            };
            let mut spec = SweepSpec::new(ChannelSource::resolve(&c.channel)?, p_values);
            spec.scenarios = a
                .scenarios
                .split(',')
                .map(|s| Scenario::parse(s.trim()))
                .collect::<anyhow::Result<_>>()?;
            spec.layout = parse_layout(&c.layout)?;
            spec.domain = domain_from(c)?;
            spec.config = config_from(c)?;
            spec.teleport_seed = parse_switch("teleport-seed", &a.teleport_seed)?;
            spec.jobs = a.jobs;
            commands::sweep(&spec, c.format.unwrap_or(Format::Csv), c.out.as_deref())
        }
        Command::Teleport(a) => {
            let layout = parse_layout(&a.layout)?;
            commands::teleport(
                &a.channel,
                check_probability(a.p)?,
                &layout,
                a.dump_circuit,
                a.out.as_deref(),
            )
        }
        Command::Oracle(a) => {
            if a.trials == 0 {
                anyhow::bail!("trials: must be at least 1");
            }
            if !(a.grid_resolution > 0.0 && a.grid_resolution <= 1.0) {
                anyhow::bail!("grid-resolution: must lie in (0, 1]");
            }
            let req = OracleRequest {
                trials: a.trials,
                seed: a.seed,
                channel: ChannelSource::resolve(&a.channel)?,
                p: check_probability(a.p)?,
                resolution: a.grid_resolution,
                config: eaqec::optimizer::OptimizerConfig::default(),
            };
            commands::oracle(&req, a.out.as_deref())
        }
        Command::Validate(a) => commands::validate(&a.path),
    }
}
