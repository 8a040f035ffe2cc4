//! `fxq` command line: argument definitions, exit codes and dispatch.

mod commands;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fxq::{Error, QFormat};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_FORMAT: u8 = 4;
pub const EXIT_VALIDATION: u8 = 5;
pub const EXIT_PRECONDITION: u8 = 6;

#[derive(Debug, Parser)]
#[command(name = "fxq", version, about = "Fixed-point ECG rhythm classifier toolchain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

/// Options shared by every command that windows raw recordings.
#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    /// Seed for the random window offsets.
    #[arg(long, env = "FXQ_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Centre the windows instead of drawing a random offset.
    #[arg(long)]
    pub deterministic_offset: bool,
    /// Forward-backward filtering instead of the causal filter.
    #[arg(long)]
    pub zero_phase: bool,
    /// Sequential processing (same results, one thread).
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, resample, normalize and window the recordings of a manifest.
    Preprocess {
        /// JSON-lines manifest of recordings.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for the window files and summary.json.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
    /// Quantize a float model file into a fixed-point model.
    Quantize {
        /// Float model (FXF1).
        #[arg(long)]
        model: PathBuf,
        /// Output fixed-point model (.fxq).
        #[arg(long)]
        out: PathBuf,
        /// Manifest of calibration recordings. Without it activation formats
        /// fall back to the producing layer's weight format.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Force one format, e.g. Q2.5, on every weight tensor and activation.
        #[arg(long)]
        uniform: Option<QFormat>,
        /// Word size of weight tensors.
        #[arg(long, default_value_t = 8)]
        weight_bits: u8,
        /// Word size of calibrated activations.
        #[arg(long, default_value_t = 8)]
        activation_bits: u8,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
    /// Classify recordings (manifest) or a window file.
    Infer {
        /// Fixed-point model (.fxq).
        #[arg(long)]
        model: PathBuf,
        /// JSON-lines manifest of recordings.
        #[arg(long, conflicts_with = "windows", required_unless_present = "windows")]
        manifest: Option<PathBuf>,
        /// Window file written by `preprocess`.
        #[arg(long)]
        windows: Option<PathBuf>,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
    /// Per-class sensitivity, specificity and F1 over a labelled manifest.
    Evaluate {
        /// Fixed-point model (.fxq).
        #[arg(long)]
        model: PathBuf,
        /// JSON-lines manifest; every record needs a label.
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
    /// Operation counts, memory plan and throughput/power arithmetic.
    Profile {
        /// Fixed-point model; the canonical architecture when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Measured execution time of one window, e.g. 94.8ms.
        #[arg(long, value_parser = units::seconds)]
        exec_time: Option<f64>,
        /// Core clock, e.g. 64MHz.
        #[arg(long, value_parser = units::hertz)]
        clock: Option<f64>,
        /// Voltage across the shunt resistor, e.g. 136.25mV.
        #[arg(long, value_parser = units::volts)]
        vdrop: Option<f64>,
        /// Shunt resistance in ohms.
        #[arg(long, value_parser = units::ohms)]
        shunt: Option<f64>,
        /// Supply voltage.
        #[arg(long, value_parser = units::volts)]
        supply: Option<f64>,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    Lib(Error),
    Validation(String),
    Precondition(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Precondition(_) => EXIT_PRECONDITION,
            CliError::Lib(e) => match e {
                Error::Io(_) | Error::MissingFile { .. } => EXIT_IO,
                Error::Format(_)
                | Error::BadMagic { .. }
                | Error::VersionMismatch { .. }
                | Error::Truncated { .. }
                | Error::Checksum { .. }
                | Error::Malformed(_)
                | Error::Json(_)
                | Error::ManifestHeader { .. }
                | Error::UnknownLabel(_)
                | Error::EmptyManifest
                | Error::NonFinite => EXIT_FORMAT,
                Error::IncompatibleFormatChain(_) | Error::IncompleteScheme(_) | Error::Shape(_) => EXIT_VALIDATION,
                Error::EmptyTensor
                | Error::InvalidArgument(_)
                | Error::Nyquist { .. }
                | Error::UnsupportedDirection { .. }
                | Error::RecordTooShort { .. }
                | Error::ZeroPower => EXIT_PRECONDITION,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Precondition(m) => write!(f, "{m}"),
        }
    }
}

/// Parse the process arguments, then run.
pub fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if usage { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS }
        }
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Preprocess { manifest, out, window, format } => commands::preprocess(&manifest, &out, &window, format),
        Command::Quantize { model, out, calibration, uniform, weight_bits, activation_bits, window, format } => {
            let opts = commands::QuantizeOptions { uniform, weight_bits, activation_bits };
            commands::quantize(&model, &out, calibration.as_deref(), &opts, &window, format)
        }
        Command::Infer { model, manifest, windows, window, format } => {
            commands::infer(&model, manifest.as_deref(), windows.as_deref(), &window, format)
        }
        Command::Evaluate { model, manifest, window, format } => commands::evaluate(&model, &manifest, &window, format),
        Command::Profile { model, exec_time, clock, vdrop, shunt, supply, format } => {
            let m = fxq::profile::Measurements {
                exec_time_s: exec_time,
                clock_hz: clock,
                v_drop: vdrop,
                r_shunt: shunt,
                v_supply: supply,
            };
            commands::profile(model.as_deref(), &m, format)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
