//! Finding severities and report rendering shared by both pipelines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Info,
    Warn,
    Critical,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Info, Severity::Warn, Severity::Critical];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "INFO",
            Severity::Warn => "WARN",
            Severity::Critical => "CRITICAL",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Severity::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown severity `{s}` (expected info, warn or critical)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown format `{s}` (expected json, csv or markdown)")),
        }
    }
}

/// A finding type that can be rendered by [`render`].
pub trait ReportRow: Serialize {
    /// Heading of the Markdown document.
    const TITLE: &'static str;
    const COLUMNS: &'static [&'static str];

    fn severity(&self) -> Severity;
    fn kind(&self) -> &'static str;
    /// One cell per entry of `COLUMNS`.
    fn cells(&self) -> Vec<String>;
    /// Extra paragraphs appended to the Markdown summary.
    fn notes() -> Vec<String> {
        Vec::new()
    }
}

/// Renders `findings` in the requested format. Output depends only on the
/// findings, never on the environment.
pub fn render<F: ReportRow>(findings: &[F], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(findings).expect("findings serialize");
            text.push('\n');
            text
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(F::COLUMNS).expect("in-memory write");
            for f in findings {
                w.write_record(f.cells()).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
        }
        ReportFormat::Markdown => markdown(findings),
    }
}

fn md_escape(cell: &str) -> String {
    cell.replace('|', "\\|").replace('\n', " ")
}

fn markdown<F: ReportRow>(findings: &[F]) -> String {
    let mut out = format!("# {}\n\n", F::TITLE);
    out += &format!("{} finding(s).\n\n", findings.len());
    out += "| severity | count |\n|---|---|\n";
    for sev in Severity::ALL.iter().rev() {
        let n = findings.iter().filter(|f| f.severity() == *sev).count();
        out += &format!("| {sev} | {n} |\n");
    }
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    for f in findings {
        *kinds.entry(f.kind()).or_default() += 1;
    }
    if !kinds.is_empty() {
        out += "\n| kind | count |\n|---|---|\n";
        for (k, n) in kinds {
            out += &format!("| {k} | {n} |\n");
        }
    }
    for note in F::notes() {
        out += &format!("\n{note}\n");
    }
    if !findings.is_empty() {
        out += "\n## Findings\n\n";
        out += &format!("| {} |\n", F::COLUMNS.join(" | "));
        out += &format!("|{}\n", "---|".repeat(F::COLUMNS.len()));
        for f in findings {
            let cells: Vec<String> = f.cells().iter().map(|c| md_escape(c)).collect();
            out += &format!("| {} |\n", cells.join(" | "));
        }
    }
    out
}

/// Number of findings per severity, every severity present.
pub fn severity_counts<F: ReportRow>(findings: &[F]) -> BTreeMap<Severity, usize> {
    let mut counts: BTreeMap<Severity, usize> = Severity::ALL.into_iter().map(|s| (s, 0)).collect();
    for f in findings {
        *counts.entry(f.severity()).or_default() += 1;
    }
    counts
}

/// Renders an optional float the way report cells show it.
pub(crate) fn cell_f64(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
