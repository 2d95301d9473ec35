// Copyright 2026 The ballot-noise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `ballot-noise`: ingest ballot data, count it, and measure how digit
//! recognition errors change the result.

mod commands;
mod config;
mod manifest;
mod meta;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::process::ExitCode;

/// Usage errors: bad flags, bad configuration, or arguments that contradict
/// the election.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(
    name = "ballot-noise",
    version,
    about = "Preferential ballot counting under simulated digit errors"
)]
struct Cli {
    /// TOML file with one table per command; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a preference CSV plus a meta file into an election file.
    Ingest(IngestArgs),
    /// Count an election and write its transcript.
    Count(CountArgs),
    /// Sweep an error model over a grid of rates.
    Simulate(SimulateArgs),
    /// Tables and histograms over the original ballots.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Point estimate and exact 95% interval for an observed error rate.
    EstimateRate(EstimateArgs),
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Which of two candidates each formal ballot prefers, by style.
    Partition(PartitionArgs),
    /// Repeated and skipped preference numbers.
    Forensics(ForensicsArgs),
    /// Preference positions at which a candidate appears.
    Histogram(HistogramArgs),
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct IngestArgs {
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Parse-error report (default: OUT.errors.csv).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Preference column name, or a 0-based index.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long)]
    pub no_headers: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurplusArg {
    Weighted,
    Unweighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundingArg {
    Truncate,
    Exact,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CountArgs {
    #[arg(long)]
    pub election: Option<PathBuf>,
    /// Override the number of seats.
    #[arg(long)]
    pub seats: Option<u32>,
    #[arg(long, value_enum)]
    pub surplus: Option<SurplusArg>,
    #[arg(long, value_enum)]
    pub rounding: Option<RoundingArg>,
    /// BTL preferences required for a formal ballot.
    #[arg(long)]
    pub btl_required: Option<u32>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Truncation,
    Digit,
    Confusion,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long)]
    pub election: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Digit confusion table for the confusion model (default: shipped table).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Comma-separated error rates; 0 is always added.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated BTL preference requirements, one variant each.
    #[arg(long, value_delimiter = ',')]
    pub btl_required: Option<Vec<u32>>,
    /// Candidates to report preference-position histograms for.
    #[arg(long, value_delimiter = ',')]
    pub histogram: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub surplus: Option<SurplusArg>,
    #[arg(long, value_enum)]
    pub rounding: Option<RoundingArg>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PartitionArgs {
    #[arg(long)]
    pub election: Option<PathBuf>,
    /// First candidate: code, full name or surname.
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long)]
    pub btl_required: Option<u32>,
    /// CSV output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StyleArg {
    Atl,
    Btl,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ForensicsArgs {
    #[arg(long)]
    pub election: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub style: Option<StyleArg>,
    /// Highest preference number to tabulate (default: boxes in the section).
    #[arg(long)]
    pub max_pref: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct HistogramArgs {
    #[arg(long)]
    pub election: Option<PathBuf>,
    #[arg(long)]
    pub candidate: Option<String>,
    #[arg(long)]
    pub btl_required: Option<u32>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EstimateArgs {
    #[arg(long)]
    pub errors: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Decimal places in the percentages.
    #[arg(long)]
    pub decimals: Option<usize>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use ballot_noise::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) => 2,
                E::Invariant { .. } => 4,
                E::Io(_) => 1,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let file = config::ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(file.resolve("ingest", &a)?),
        Command::Count(a) => commands::count(file.resolve("count", &a)?),
        Command::Simulate(a) => commands::simulate(file.resolve("simulate", &a)?),
        Command::Analyze(AnalyzeCommand::Partition(a)) => commands::partition(file.resolve("partition", &a)?),
        Command::Analyze(AnalyzeCommand::Forensics(a)) => commands::forensics(file.resolve("forensics", &a)?),
        Command::Analyze(AnalyzeCommand::Histogram(a)) => commands::histogram(file.resolve("histogram", &a)?),
        Command::EstimateRate(a) => commands::estimate_rate(file.resolve("estimate-rate", &a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
