use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "sor-audit", version, about = "Audit DSA transparency reports and Statements of Reasons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Declarative config file (TOML).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Category taxonomy JSON; the built-in reference taxonomy otherwise.
    #[arg(long, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    /// Parent directory of run directories, or the output location.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Report format: json, csv or markdown.
    #[arg(long)]
    pub format: Option<String>,
    /// Lowest severity that makes the exit code 1: info, warn or critical.
    #[arg(long)]
    pub severity_threshold: Option<String>,
    /// Worker threads for corpus ingestion; output does not depend on it.
    #[arg(long, value_name = "N")]
    pub parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a SoR corpus (or platform export) and report quarantine stats.
    Validate {
        #[arg(long, value_name = "DIR")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        export: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Fill rates of optional SoR attributes.
    Profile {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Replicate report claims from a SoR corpus.
    Replicate {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        claims: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-check report claims against a SoR corpus.
    Crosscheck {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        claims: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Verify filed SoRs against a platform moderation export.
    Verify {
        #[arg(long, value_name = "FILE")]
        export: PathBuf,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Half-open window START..END on the moderation date; defaults to
        /// the span of the export.
        #[arg(long, value_name = "START..END")]
        window: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic scenario with known faults.
    Synth {
        /// Scenario config (JSON or TOML).
        #[arg(long, value_name = "FILE")]
        scenario: Option<PathBuf>,
        /// Seed; overrides the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Export events for the built-in clean scenario.
        #[arg(long, default_value_t = 1000)]
        volume: u64,
        /// Write a dump-only corpus of this many SoRs plus exact claims.
        #[arg(long, value_name = "N", conflicts_with = "scenario")]
        bulk_rows: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Render a findings JSON file as JSON, CSV or Markdown.
    Report {
        #[arg(long, value_name = "FILE")]
        findings: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Extract claims from an HTML transparency report table.
    Extract {
        #[arg(long, value_name = "FILE")]
        html: PathBuf,
        #[arg(long, value_name = "FILE")]
        mapping: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Profile { .. } => "profile",
            Command::Replicate { .. } => "replicate",
            Command::Crosscheck { .. } => "crosscheck",
            Command::Verify { .. } => "verify",
            Command::Synth { .. } => "synth",
            Command::Report { .. } => "report",
            Command::Extract { .. } => "extract",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Validate { common, .. }
            | Command::Profile { common, .. }
            | Command::Replicate { common, .. }
            | Command::Crosscheck { common, .. }
            | Command::Verify { common, .. }
            | Command::Synth { common, .. }
            | Command::Report { common, .. }
            | Command::Extract { common, .. } => common,
        }
    }
}
