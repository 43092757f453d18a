//! Command-line front end: graph generation, sparsification, verification and benchmarking.

pub mod commands;
pub mod generators;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::{cmd_bench, cmd_gen, cmd_sdp_selftest, cmd_sparsify, cmd_verify};
pub use generators::Family;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(sparsekit::Error),
    #[error("{0}")]
    Internal(sparsekit::Error),
    #[error("certification failed: eps_actual = {eps_actual} > {tolerance}")]
    Certification { eps_actual: f64, tolerance: f64 },
    #[error("{failed} of {trials} self-test instances missed the target")]
    Selftest { failed: usize, trials: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<sparsekit::Error> for CliError {
    fn from(e: sparsekit::Error) -> Self {
        use sparsekit::Error as E;
        match e {
            E::Io(_)
            | E::Parse { .. }
            | E::Validation(_)
            | E::Disconnected
            | E::IllConditioned { .. }
            | E::Config(_)
            | E::DimensionMismatch { .. }
            | E::MissingProvenance => CliError::Input(e),
            other => CliError::Internal(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => EXIT_INPUT,
            CliError::Certification { .. } | CliError::Selftest { .. } => EXIT_CERTIFICATION,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) | CliError::Io { .. } => "input",
            CliError::Certification { .. } | CliError::Selftest { .. } => "certification",
            CliError::Internal(_) => "internal",
        }
    }

    /// `{"error": kind, "message": ..., "exit_code": n}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Payload {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("error payload serializes")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "sparsekit", version, about = "Spectral graph sparsification")]
pub struct Cli {
    /// Emit machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated graph as an edge list.
    Gen(GenArgs),
    /// Sparsify a graph and certify the result.
    Sparsify(SparsifyArgs),
    /// Compare a sparsifier against its original graph.
    Verify(VerifyArgs),
    /// Run a corpus of graphs and write a CSV table.
    Bench(BenchArgs),
    /// Check the packing-SDP solver against analytic optima.
    SdpSelftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Vertex count (side length for `grid`).
    #[arg(long)]
    pub n: usize,
    /// Edge probability for `random-gnp`.
    #[arg(long, default_value_t = 0.25)]
    pub p: f64,
    /// Hamiltonian cycles for `expander-like`.
    #[arg(long, default_value_t = 3)]
    pub cycles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SparsifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.15)]
    pub epsilon: f64,
    #[arg(long, default_value = "sampling")]
    pub oracle: sparsekit::OracleKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Packing-SDP accuracy for the sdp oracle (default ε/ln²d).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long, default_value_t = sparsekit::sparsify::DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Evaluate barrier kernels by Taylor polynomials with this absolute tolerance.
    #[arg(long)]
    pub taylor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub sparsifier: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also build the effective-resistance baseline at this ε and report its size.
    #[arg(long)]
    pub baseline_epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of edge-list files.
    #[arg(long)]
    pub input: PathBuf,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.15")]
    pub epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "sampling")]
    pub oracle: Vec<sparsekit::OracleKind>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seed: Vec<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Worker threads (0 = available cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let json = cli.json;
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(&args, json),
        Command::Sparsify(args) => cmd_sparsify(&args, json),
        Command::Verify(args) => cmd_verify(&args, json),
        Command::Bench(args) => cmd_bench(&args),
        Command::SdpSelftest(args) => cmd_sdp_selftest(&args, json),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
