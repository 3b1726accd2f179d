//! `portrait` command-line tool: runs one simulation, filter or fit per
//! invocation and writes CSV, JSON and SVG artifacts.
//!
//! Exit codes: 0 on success, 1 for bad arguments or configuration, 2 when
//! the numerics fail.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod demo;
pub mod output;
pub mod svg;

use commands::filter::FilterCmd;
use commands::fit::{FitCmd, FitPortraitCmd};
use commands::simulate::{AnalyticPortraitArgs, AnalyticTraceArgs, KernelCheckArgs, LindbladRunArgs, WwPortraitArgs};
use demo::DemoArgs;
use output::{ExportKind, Output};
use svg::ColorScale;

/// Failure classes, mapped to exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<portrait_core::Error> for CliError {
    fn from(e: portrait_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "portrait", version, about = "Single-photon emission portraits: simulation, filtering and fitting")]
pub struct Cli {
    #[arg(
        long,
        global = true,
        env = "PORTRAIT_OUT_DIR",
        default_value = ".",
        value_name = "DIR",
        help = "[path] directory for the output files"
    )]
    pub out_dir: PathBuf,

    #[arg(long, global = true, default_value_t = 0, help = "[-] worker threads; 0 uses every core")]
    pub threads: usize,

    #[arg(
        long,
        global = true,
        value_enum,
        value_delimiter = ',',
        default_value = "csv,json,svg",
        help = "[-] artifact kinds to write"
    )]
    pub export: Vec<ExportKind>,

    #[arg(long, global = true, value_enum, default_value_t = ColorScale::Viridis, help = "[-] heatmap color scale")]
    pub colormap: ColorScale,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ideal emission portrait |f_k(t)|, optionally seen through the amplifier.
    WwPortrait(WwPortraitArgs),
    /// Filtered output field around the end of a long drive (closed form).
    AnalyticTrace(AnalyticTraceArgs),
    /// Closed-form filtered traces over a sweep of amplifier detunings.
    AnalyticPortrait(AnalyticPortraitArgs),
    /// Master-equation run for one to three emitters.
    LindbladRun(LindbladRunArgs),
    /// Pass a trace through the amplifier filter, optionally via a heterodyne record.
    Filter(FilterCmd),
    /// Fit the closed form to a trace.
    Fit(FitCmd),
    /// Fit every row of a portrait and map the emitter-drive detuning.
    FitPortrait(FitPortraitCmd),
    /// Emitter decay from the waveguide memory kernel, near and far from cutoff.
    KernelCheck(KernelCheckArgs),
    /// Regenerate the figure analogs from built-in presets.
    Demo(DemoArgs),
}

/// Settings shared by every subcommand.
#[derive(Debug)]
pub struct Context {
    pub output: Output,
    pub colormap: ColorScale,
}

/// Parses `argv` (program name first), runs one subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", cli.threads)))?;
    let mut ctx = Context { output: Output::new(&cli.out_dir, &cli.export)?, colormap: cli.colormap };
    pool.install(|| match &cli.command {
        Command::WwPortrait(a) => commands::simulate::ww_portrait(&a.resolve()?, &mut ctx, "ww_portrait"),
        Command::AnalyticTrace(a) => commands::simulate::analytic_trace(&a.resolve()?, &mut ctx, "analytic_trace"),
        Command::AnalyticPortrait(a) => {
            commands::simulate::analytic_portrait(&a.resolve()?, &mut ctx, "analytic_portrait")
        }
        Command::LindbladRun(a) => commands::simulate::lindblad_run(&a.resolve()?, &mut ctx, "lindblad"),
        Command::Filter(c) => commands::filter::filter(c, &mut ctx),
        Command::Fit(c) => commands::fit::fit(c, &mut ctx),
        Command::FitPortrait(c) => commands::fit::fit_portrait(c, &mut ctx),
        Command::KernelCheck(a) => commands::simulate::kernel_check(&a.resolve()?, &mut ctx, "kernel"),
        Command::Demo(a) => demo::demo(a, &mut ctx),
    })
}
