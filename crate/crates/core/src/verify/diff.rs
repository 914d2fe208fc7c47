use chrono::Duration;
use serde::{Deserialize, Serialize};

use super::link::{LinkedPair, Linkage};
use crate::report::{render, ReportFormat, ReportRow, Severity};
use crate::timefmt;

/// Default filing deadline, in days after the moderation action.
pub const DEFAULT_DEADLINE_DAYS: i64 = 7;

/// SoR fields an export cannot populate; they are never compared.
pub const NON_DERIVABLE_FIELDS: [&str; 5] = [
    "source_type",
    "decision_ground_reference_url",
    "illegal_content_explanation",
    "decision_type_other",
    "content_type_other",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerificationKind {
    Consistent,
    OmittedSor,
    PhantomSor,
    FieldMismatch,
    LateSubmission,
}

impl VerificationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerificationKind::Consistent => "CONSISTENT",
            VerificationKind::OmittedSor => "OMITTED_SOR",
            VerificationKind::PhantomSor => "PHANTOM_SOR",
            VerificationKind::FieldMismatch => "FIELD_MISMATCH",
            VerificationKind::LateSubmission => "LATE_SUBMISSION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FieldDiff {
    pub field: String,
    /// Value reconstructed from the platform export.
    pub expected: String,
    pub filed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationFinding {
    pub kind: VerificationKind,
    pub content_id: Option<String>,
    pub sor_uuid: Option<String>,
    #[serde(default)]
    pub mismatched_fields: Vec<FieldDiff>,
    pub severity: Severity,
    pub evidence: String,
}

type SortKey<'a> = (std::cmp::Reverse<Severity>, VerificationKind, Option<&'a str>, Option<&'a str>);

impl VerificationFinding {
    fn sort_key(&self) -> SortKey<'_> {
        (std::cmp::Reverse(self.severity), self.kind, self.content_id.as_deref(), self.sor_uuid.as_deref())
    }
}

pub fn sort_verification_findings(findings: &mut [VerificationFinding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

fn field_diffs(pair: &LinkedPair) -> Vec<FieldDiff> {
    let (r, f) = (&pair.reconstructed, &pair.filed);
    let mut out = Vec::new();
    let mut cmp = |field: &str, expected: String, filed: String| {
        if expected != filed {
            out.push(FieldDiff { field: field.to_string(), expected, filed });
        }
    };
    cmp("category", r.category.to_string(), f.category.to_string());
    cmp("decision_type", r.decision_type.to_string(), f.decision_type.to_string());
    cmp("decision_ground", r.decision_ground.to_string(), f.decision_ground.to_string());
    cmp("content_type", r.content_type.to_string(), f.content_type.to_string());
    cmp("automated_detection", r.automated_detection.to_string(), f.automated_detection.to_string());
    cmp("automated_decision", r.automated_decision.to_string(), f.automated_decision.to_string());
    cmp("content_date", timefmt::format_date(r.content_date), timefmt::format_date(f.content_date));
    out
}

fn pair_findings(pair: &LinkedPair, deadline_days: i64) -> Vec<VerificationFinding> {
    let ids = |kind, severity, mismatched_fields, evidence| VerificationFinding {
        kind,
        content_id: Some(pair.reconstructed.content_id.clone()),
        sor_uuid: Some(pair.filed.uuid.clone()),
        mismatched_fields,
        severity,
        evidence,
    };
    let link = format!(
        "content {} linked to SoR {} by {}",
        pair.reconstructed.content_id,
        pair.filed.uuid,
        match pair.method {
            super::LinkMethod::Puid => "puid".to_string(),
            super::LinkMethod::Scored => format!("score {:.3}", pair.score),
        }
    );
    let mut out = Vec::new();
    let diffs = field_diffs(pair);
    if !diffs.is_empty() {
        let severity = if diffs.iter().any(|d| d.field == "automated_decision") {
            Severity::Critical
        } else {
            Severity::Warn
        };
        let listed: Vec<String> =
            diffs.iter().map(|d| format!("{} expected {} but filed {}", d.field, d.expected, d.filed)).collect();
        out.push(ids(
            VerificationKind::FieldMismatch,
            severity,
            diffs,
            format!("{link}: filed fields diverge from the platform export ({})", listed.join("; ")),
        ));
    }
    let lag = pair.filed.created_at - pair.reconstructed.moderated_at;
    if lag > Duration::days(deadline_days) {
        out.push(ids(
            VerificationKind::LateSubmission,
            Severity::Warn,
            Vec::new(),
            format!(
                "{link}: filed at {}, {} day(s) after the action at {}, beyond the {deadline_days}-day deadline",
                timefmt::format_timestamp(pair.filed.created_at),
                lag.num_days(),
                timefmt::format_timestamp(pair.reconstructed.moderated_at)
            ),
        ));
    }
    if out.is_empty() {
        out.push(ids(
            VerificationKind::Consistent,
            Severity::Info,
            Vec::new(),
            format!("{link}: compared fields agree and filing was timely"),
        ));
    }
    out
}

/// Turns a linkage into findings, ordered by severity (highest first),
/// kind, content id and SoR uuid.
pub fn verify_diff(linkage: &Linkage, deadline_days: i64) -> Vec<VerificationFinding> {
    let mut findings: Vec<VerificationFinding> =
        linkage.pairs.iter().flat_map(|p| pair_findings(p, deadline_days)).collect();
    findings.extend(linkage.unmatched_reconstructed.iter().map(|r| VerificationFinding {
        kind: VerificationKind::OmittedSor,
        content_id: Some(r.content_id.clone()),
        sor_uuid: None,
        mismatched_fields: Vec::new(),
        severity: Severity::Critical,
        evidence: format!(
            "content {} was moderated at {} ({}) but no filed SoR corresponds to it",
            r.content_id,
            timefmt::format_timestamp(r.moderated_at),
            r.decision_type
        ),
    }));
    findings.extend(linkage.unmatched_filed.iter().map(|f| VerificationFinding {
        kind: VerificationKind::PhantomSor,
        content_id: None,
        sor_uuid: Some(f.uuid.clone()),
        mismatched_fields: Vec::new(),
        severity: Severity::Critical,
        evidence: format!(
            "SoR {} ({}, {}, applied {}) has no moderated counterpart in the platform export",
            f.uuid,
            f.decision_type,
            f.category,
            timefmt::format_date(f.application_date)
        ),
    }));
    sort_verification_findings(&mut findings);
    findings
}

impl ReportRow for VerificationFinding {
    const TITLE: &'static str = "Verification findings";
    const COLUMNS: &'static [&'static str] =
        &["severity", "kind", "content_id", "sor_uuid", "mismatched_fields", "evidence"];

    fn severity(&self) -> Severity {
        self.severity
    }

    fn kind(&self) -> &'static str {
        self.kind.as_str()
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.severity.to_string(),
            self.kind.as_str().to_string(),
            self.content_id.clone().unwrap_or_default(),
            self.sor_uuid.clone().unwrap_or_default(),
            self.mismatched_fields
                .iter()
                .map(|d| format!("{}: {} -> {}", d.field, d.expected, d.filed))
                .collect::<Vec<_>>()
                .join("; "),
            self.evidence.clone(),
        ]
    }

    fn notes() -> Vec<String> {
        vec![format!(
            "Fields not derivable from the platform export and therefore not compared: {}.",
            NON_DERIVABLE_FIELDS.join(", ")
        )]
    }
}

pub fn emit_verification_report(findings: &[VerificationFinding], format: ReportFormat) -> String {
    render(findings, format)
}
