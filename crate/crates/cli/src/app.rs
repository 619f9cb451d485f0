//! Argument parsing and exit-code mapping for the `panostage` binary.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use panostage_core::{Error, ErrorKind, Result};
use serde::{Deserialize, Serialize};

use crate::commands::{
    run_calibrate, run_merge, run_project, run_stage, run_stats, CalibrateArgs, MergeArgs, ProjectArgs, StageArgs,
    StatsArgs,
};
use crate::config::{check_sections, load_config, merge_with_config, require};
use crate::server::{serve, Workspace, DEFAULT_TIMEOUT_S};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

const SECTIONS: [&str; 6] = ["calibrate", "merge", "project", "stage", "stats", "serve"];

#[derive(Debug, Parser)]
#[command(name = "panostage", version, about = "Calibrated HDR panoramas and virtual kitchen staging")]
pub struct Cli {
    /// TOML or JSON file whose [subcommand] tables supply defaults for flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scale an indoor/outdoor panorama pair to absolute luminance.
    Calibrate(CalibrateArgs),
    /// Merge an exposure bracket into a linear HDR panorama.
    Merge(MergeArgs),
    /// Extract a fisheye or perspective image from a panorama.
    Project(ProjectArgs),
    /// Place kitchen components, export the scene and render a preview.
    Stage(StageArgs),
    /// Per-scene and aggregate luminance errors for a dataset.
    Stats(StatsArgs),
    /// Serve a workspace over HTTP under /v1/.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    /// Directory holding layout.json, environment.exr and an optional workspace.json.
    #[arg(long)]
    pub workspace: Option<PathBuf>,
    /// Seconds a preview request may block before it becomes a pollable job (0: always a job).
    #[arg(long)]
    pub timeout_s: Option<f64>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Numeric => EXIT_NUMERIC,
    }
}

fn run_serve(args: &ServeArgs) -> Result<()> {
    let workspace = Workspace::load(&require(&args.workspace, "workspace")?)?;
    let timeout = args.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S);
    if !(timeout.is_finite() && timeout >= 0.0) {
        return Err(Error::invalid(format!("timeout must be ≥ 0 s, got {timeout}")));
    }
    let port = args.port.unwrap_or(8080);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("<runtime>", e))?;
    runtime
        .block_on(serve(workspace, port, Duration::from_secs_f64(timeout)))
        .map_err(|e| Error::io(format!("127.0.0.1:{port}"), e))
}

pub fn execute(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => {
            let c = load_config(p)?;
            check_sections(&c, &SECTIONS)?;
            Some(c)
        }
        None => None,
    };
    let c = config.as_ref();
    match &cli.command {
        Command::Calibrate(a) => run_calibrate(&merge_with_config(a, c, "calibrate")?),
        Command::Merge(a) => run_merge(&merge_with_config(a, c, "merge")?),
        Command::Project(a) => run_project(&merge_with_config(a, c, "project")?),
        Command::Stage(a) => {
            let out = run_stage(&merge_with_config(a, c, "stage")?)?;
            for f in &out.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Stats(a) => run_stats(&merge_with_config(a, c, "stats")?),
        Command::Serve(a) => run_serve(&merge_with_config(a, c, "serve")?),
    }
}

/// Parses `args` (including the program name) and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
