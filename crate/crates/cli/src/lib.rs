//! Command-line driver for `misoic`: scenario files, experiment commands and
//! CSV output.
//!
//! Every command reads a TOML scenario (see [`scenario`]) and writes plain CSV
//! with `#` metadata lines. Floats are written with 12 significant digits.
//! Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
//! 3 solver non-convergence.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod scenario;

pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] misoic::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(misoic::Error::NonConvergence { .. } | misoic::Error::DegenerateDual { .. }) => 3,
            _ => 2,
        }
    }
}

/// How a command finished when it did not error out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerifyFailed,
    NonConvergence,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::VerifyFailed => 1,
            Status::NonConvergence => 3,
        }
    }
}

/// CSV body plus `#` metadata lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_to(&self, w: &mut dyn Write) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("cannot write CSV: {e}"));
        for m in &self.meta {
            writeln!(w, "# {m}").map_err(io)?;
        }
        let mut csv = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::Io(format!("cannot write CSV: {e}"));
        csv.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            csv.write_record(r).map_err(io)?;
        }
        csv.flush().map_err(|e| CliError::Io(format!("cannot write CSV: {e}")))
    }

    pub fn write_file(&self, path: &Path) -> Result<(), CliError> {
        let mut f =
            std::fs::File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        self.write_to(&mut f)
    }
}

/// 12 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Debug, Parser)]
#[command(name = "misoic", version, about = "Pareto-optimal MISO interference channel beamforming")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the IT-constrained rate problem of one cell (or every cell).
    Solve(SolveArgs),
    /// Sweep the two-user IT box and mark the Pareto-filtered boundary.
    Sweep(SweepArgs),
    /// Run the pairwise IT-update protocol and write its trajectory.
    Decentralized(DecentralizedArgs),
    /// Brute-force achievable rate region cloud.
    Oracle(OracleArgs),
    /// Rates of the MRT, ZF and interference-free reference schemes.
    Baselines(BaselinesArgs),
    /// Run the property battery; exit 0 iff every check passes.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file (TOML).
    pub scenario: PathBuf,
    /// Replace the channel generation seed of the scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Duality-gap tolerance of the per-cell solver, in bits.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Cell to solve (1-based); all cells when omitted.
    #[arg(long)]
    pub cell: Option<usize>,
    /// IT level `from:to:value` (1-based, repeatable). Unlisted levels are 0.
    #[arg(long = "it", value_name = "I:J:VALUE")]
    pub it: Vec<ItEntry>,
    /// Write the CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Grid levels per IT axis.
    #[arg(long, default_value_t = 60)]
    pub grid: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Zf,
    Mrt,
    File,
}

#[derive(Debug, Args)]
pub struct DecentralizedArgs {
    #[command(flatten)]
    pub common: Common,
    /// Starting IT levels.
    #[arg(long, value_enum, default_value_t = InitKind::Zf)]
    pub init: InitKind,
    /// IT file for `--init file`: a TOML list of `[[it]]` tables with
    /// `from`, `to` (1-based) and `value`. Unlisted levels are 0.
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Rate weighting: `VALUE` for every pair or `i:j:VALUE` for one ordered
    /// pair (repeatable). Default 1.
    #[arg(long, value_name = "[I:J:]VALUE")]
    pub alpha: Vec<AlphaSpec>,
    /// Initial step length in power units (default 0.1 · smallest MRT bound).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Maximum number of sweeps over all pairs.
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Visit (i, j) and (j, i) separately in each sweep.
    #[arg(long)]
    pub ordered_pairs: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Two-user clouds: ZF/MRT mixing weights per user.
    #[arg(long, default_value_t = 60)]
    pub grid: usize,
    /// Two-user clouds: phase levels of the ZF component.
    #[arg(long, default_value_t = 1)]
    pub phases: usize,
    /// Two-user clouds: power levels.
    #[arg(long, default_value_t = 1)]
    pub powers: usize,
    /// Random states drawn when the grid cloud does not apply.
    #[arg(long, default_value_t = 20000)]
    pub samples: usize,
    /// Seed of the random states.
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
    /// Write every cloud point, not only the Pareto-filtered ones.
    #[arg(long)]
    pub all: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[command(flatten)]
    pub common: Common,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Random IT vectors to test.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    /// Seed of the random IT vectors.
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
}

/// `from:to:value` with 1-based cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItEntry {
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

fn parse_triple(s: &str) -> Result<(usize, usize, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [i, j, v] = parts.as_slice() else {
        return Err(format!("expected I:J:VALUE, got `{s}`"));
    };
    let cell = |x: &str| match x.parse::<usize>() {
        Ok(c) if c >= 1 => Ok(c),
        _ => Err(format!("cell numbers are 1-based integers, got `{x}`")),
    };
    let (i, j) = (cell(i)?, cell(j)?);
    if i == j {
        return Err(format!("`{s}` names the same cell twice"));
    }
    let v: f64 = v.parse().map_err(|_| format!("invalid number `{v}`"))?;
    Ok((i, j, v))
}

impl FromStr for ItEntry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (from, to, value) = parse_triple(s)?;
        Ok(Self { from, to, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Default(f64),
    Pair { i: usize, j: usize, value: f64 },
}

impl FromStr for AlphaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.contains(':') {
            let (i, j, value) = parse_triple(s)?;
            Ok(Self::Pair { i, j, value })
        } else {
            s.parse().map(Self::Default).map_err(|_| format!("invalid number `{s}`"))
        }
    }
}

/// Runs a parsed command. CSV goes to `--out` when given, else to `out`;
/// summaries go to `log` (to `out` for `solve` and `verify`).
pub fn run(cli: Cli, out: &mut dyn Write, log: &mut dyn Write) -> Result<Status, CliError> {
    let report = match cli.command {
        Command::Solve(a) => commands::solve(&a)?,
        Command::Sweep(a) => commands::sweep(&a)?,
        Command::Decentralized(a) => commands::decentralized(&a)?,
        Command::Oracle(a) => commands::oracle(&a)?,
        Command::Baselines(a) => commands::baselines(&a)?,
        Command::Verify(a) => commands::verify(&a)?,
    };
    let io = |e: std::io::Error| CliError::Io(format!("cannot write output: {e}"));
    if let Some(t) = &report.table {
        match &report.out {
            Some(p) => t.write_file(p)?,
            None if !report.summary_on_stdout => t.write_to(out)?,
            None => {}
        }
    }
    let sink: &mut dyn Write = if report.summary_on_stdout { out } else { log };
    sink.write_all(report.summary.as_bytes()).map_err(io)?;
    Ok(report.status)
}
