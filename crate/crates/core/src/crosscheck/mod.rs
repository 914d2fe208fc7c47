//! Transparency-report cross-checking.
//!
//! Each claim's reported value is compared with the value replicated from
//! the platform's filed SoRs. The comparison tests internal coherence
//! only: a finding says the two sides are inconsistent, not which is right.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::aggregate::{ActivityCell, AggregateResult, Replication, ResultStatus};
use crate::claims::{Claim, ClaimSet, ExactValue, Metric, ValuePrecision};
use crate::report::{cell_f64, render, ReportFormat, ReportRow, Severity};
use crate::sor_model::{CategoryCode, DecisionType};

/// How far a reported value may sit from the computed one and still match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    pub absolute_floor: f64,
    pub relative: f64,
    pub rounding_aware: bool,
    /// Replaces `relative` for values written as approximate.
    pub approximate_relative: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec { absolute_floor: 0.0, relative: 0.0, rounding_aware: true, approximate_relative: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrossCheckError {
    #[error("invalid tolerance spec: {0}")]
    Tolerance(String),
    #[error("results do not cover the claim set: missing {missing:?}, unexpected {unexpected:?}")]
    ResultMismatch { missing: Vec<String>, unexpected: Vec<String> },
}

impl ToleranceSpec {
    pub fn validate(&self) -> Result<(), CrossCheckError> {
        let fields = [
            ("absolute_floor", self.absolute_floor),
            ("relative", self.relative),
            ("approximate_relative", self.approximate_relative),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(CrossCheckError::Tolerance(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if self.approximate_relative < self.relative {
            return Err(CrossCheckError::Tolerance("approximate_relative must not be below relative".into()));
        }
        Ok(())
    }
}

/// Exact tolerance for a reported `value` of the given precision.
pub fn tolerance_bound_exact(value: &ExactValue, precision: ValuePrecision, spec: &ToleranceSpec) -> ExactValue {
    let exact = |x: f64| ExactValue::from_decimal_f64(x).unwrap_or_else(ExactValue::zero);
    let floor = exact(spec.absolute_floor);
    let relative = match precision {
        ValuePrecision::Approximate => spec.approximate_relative,
        _ => spec.relative,
    };
    let proportional = exact(relative).mul(value);
    let half_ulp = match (precision, spec.rounding_aware, value.decimal_exponent()) {
        (ValuePrecision::Rounded { significant_digits }, true, Some(e)) => {
            ExactValue::ratio(1, 2).mul(&ExactValue::pow10(e - significant_digits as i32 + 1))
        }
        _ => ExactValue::zero(),
    };
    floor.max(proportional).max(half_ulp)
}

/// `max(absolute_floor, relative·value, half-ULP)` for `value ≥ 0`.
pub fn tolerance_bound(value: f64, precision: ValuePrecision, spec: &ToleranceSpec) -> f64 {
    match ExactValue::from_decimal_f64(value) {
        Some(v) => tolerance_bound_exact(&v, precision, spec).to_f64(),
        None => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossCheckConfig {
    pub tolerance: ToleranceSpec,
    /// Relative deviation above which a mismatch is CRITICAL.
    pub critical_relative: f64,
}

impl Default for CrossCheckConfig {
    fn default() -> Self {
        CrossCheckConfig { tolerance: ToleranceSpec::default(), critical_relative: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingKind {
    Match,
    Mismatch,
    MissingInDb,
    MissingInReport,
    Unreplicable,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::Match => "MATCH",
            FindingKind::Mismatch => "MISMATCH",
            FindingKind::MissingInDb => "MISSING_IN_DB",
            FindingKind::MissingInReport => "MISSING_IN_REPORT",
            FindingKind::Unreplicable => "UNREPLICABLE",
        }
    }
}

/// A (category, decision type) slice of filed activity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellRef {
    pub category: CategoryCode,
    pub decision_type: DecisionType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finding {
    pub kind: FindingKind,
    pub claim_id: Option<String>,
    pub reported_value: Option<f64>,
    /// The reported number exactly as written.
    pub reported_text: Option<String>,
    pub computed_value: Option<f64>,
    /// Exact computed value, `n` or `n/d`.
    pub computed_exact: Option<ExactValue>,
    pub deviation: Option<f64>,
    /// Deviation relative to the reported value.
    pub relative_deviation: Option<f64>,
    pub tolerance: Option<f64>,
    pub severity: Severity,
    pub evidence: String,
    pub source_locator: Option<String>,
    pub cell: Option<CellRef>,
}

impl Finding {
    fn sort_key(&self) -> (std::cmp::Reverse<Severity>, FindingKind, Option<&str>, Option<&CellRef>) {
        (std::cmp::Reverse(self.severity), self.kind, self.claim_id.as_deref(), self.cell.as_ref())
    }
}

/// Sorts by severity (highest first), kind, claim id, cell.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

fn finding(kind: FindingKind, severity: Severity, claim: &Claim, evidence: String) -> Finding {
    Finding {
        kind,
        claim_id: Some(claim.claim_id.clone()),
        reported_value: Some(claim.reported.value.to_f64()),
        reported_text: Some(claim.reported.text.clone()),
        computed_value: None,
        computed_exact: None,
        deviation: None,
        relative_deviation: None,
        tolerance: None,
        severity,
        evidence,
        source_locator: Some(claim.source_locator.clone()),
        cell: None,
    }
}

fn describe(claim: &Claim) -> String {
    format!(
        "{} claim `{}` ({}, {}) at {}",
        claim.metric, claim.claim_id, claim.predicate.to_json(), claim.period, claim.source_locator
    )
}

fn check_claim(claim: &Claim, result: &AggregateResult, replication: &Replication, config: &CrossCheckConfig) -> Finding {
    if result.status != ResultStatus::Computed {
        let note = result.note.clone().unwrap_or_else(|| "no computed value".into());
        return finding(
            FindingKind::Unreplicable,
            Severity::Warn,
            claim,
            format!("{} could not be replicated: {note}", describe(claim)),
        );
    }
    if let Some(range) = replication.coverage.get(&claim.period.field()) {
        if claim.period.end() <= range.min || claim.period.start() > range.max {
            return finding(
                FindingKind::Unreplicable,
                Severity::Warn,
                claim,
                format!(
                    "{} could not be replicated: period gap, the filed SoRs only cover {} to {}",
                    describe(claim),
                    range.min,
                    range.max
                ),
            );
        }
    }
    let computed = result.computed_value.clone().expect("computed result carries a value");
    let reported = &claim.reported.value;
    let deviation = reported.abs_diff(&computed);
    let bound = tolerance_bound_exact(reported, claim.reported.precision, &config.tolerance);
    let relative = deviation.div(reported);
    let mut f = finding(FindingKind::Match, Severity::Info, claim, String::new());
    f.computed_value = Some(computed.to_f64());
    f.computed_exact = Some(computed.clone());
    f.deviation = Some(deviation.to_f64());
    f.relative_deviation = relative.as_ref().map(ExactValue::to_f64);
    f.tolerance = Some(bound.to_f64());
    let values = format!(
        "reported `{}` ({}, {}) vs computed {} from filed SoRs",
        claim.reported.text,
        reported,
        claim.reported.precision,
        computed
    );
    if deviation <= bound {
        f.evidence = format!("{}: {values} are consistent, deviation {} within tolerance {}", describe(claim), deviation, bound);
        return f;
    }
    let zero_vs_nonzero = computed.is_zero() != reported.is_zero();
    let critical_rel = ExactValue::from_decimal_f64(config.critical_relative).unwrap_or_else(ExactValue::zero);
    let critical = zero_vs_nonzero || relative.as_ref().is_none_or(|r| *r > critical_rel);
    f.severity = if critical { Severity::Critical } else { Severity::Warn };
    if claim.metric == Metric::Count && computed.is_zero() {
        f.kind = FindingKind::MissingInDb;
        f.evidence = format!("{}: {values} are inconsistent, no matching SoR was filed", describe(claim));
    } else {
        f.kind = FindingKind::Mismatch;
        f.evidence = format!(
            "{}: {values} are inconsistent, deviation {} exceeds tolerance {}",
            describe(claim),
            deviation,
            bound
        );
    }
    f
}

fn missing_in_report(cell: &ActivityCell) -> Finding {
    Finding {
        kind: FindingKind::MissingInReport,
        claim_id: None,
        reported_value: None,
        reported_text: None,
        computed_value: Some(cell.count as f64),
        computed_exact: Some(ExactValue::from_integer(cell.count)),
        deviation: None,
        relative_deviation: None,
        tolerance: None,
        severity: Severity::Warn,
        evidence: format!(
            "{} filed SoRs with category {} and decision type {} fall inside the report periods, \
             but no claim of the exhaustive report covers them",
            cell.count, cell.category, cell.decision_type
        ),
        source_locator: None,
        cell: Some(CellRef { category: cell.category.clone(), decision_type: cell.decision_type }),
    }
}

/// Compares every claim with its replicated result.
pub fn cross_check(
    claims: &ClaimSet,
    replication: &Replication,
    config: &CrossCheckConfig,
) -> Result<Vec<Finding>, CrossCheckError> {
    config.tolerance.validate()?;
    if !config.critical_relative.is_finite() || config.critical_relative < 0.0 {
        return Err(CrossCheckError::Tolerance("critical_relative must be non-negative".into()));
    }
    let claim_ids: BTreeSet<&str> = claims.claims.iter().map(|c| c.claim_id.as_str()).collect();
    let result_ids: BTreeSet<&str> = replication.results.iter().map(|r| r.claim_id.as_str()).collect();
    if claim_ids != result_ids || replication.results.len() != claims.claims.len() {
        return Err(CrossCheckError::ResultMismatch {
            missing: claim_ids.difference(&result_ids).map(|s| s.to_string()).collect(),
            unexpected: result_ids.difference(&claim_ids).map(|s| s.to_string()).collect(),
        });
    }
    let mut findings: Vec<Finding> = replication
        .results
        .iter()
        .map(|r| {
            let claim = claims.get(&r.claim_id).expect("ids checked above");
            check_claim(claim, r, replication, config)
        })
        .collect();
    if claims.exhaustive {
        findings.extend(replication.activity.iter().filter(|c| !c.covered && c.count > 0).map(missing_in_report));
    }
    sort_findings(&mut findings);
    Ok(findings)
}

impl ReportRow for Finding {
    const TITLE: &'static str = "Cross-check findings";
    const COLUMNS: &'static [&'static str] = &[
        "severity",
        "kind",
        "claim_id",
        "reported_value",
        "computed_value",
        "deviation",
        "relative_deviation",
        "tolerance",
        "source_locator",
        "cell",
        "evidence",
    ];

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
            self.claim_id.clone().unwrap_or_default(),
            self.reported_text.clone().unwrap_or_default(),
            self.computed_exact.as_ref().map(ToString::to_string).unwrap_or_default(),
            cell_f64(self.deviation),
            cell_f64(self.relative_deviation),
            cell_f64(self.tolerance),
            self.source_locator.clone().unwrap_or_default(),
            self.cell.as_ref().map(|c| format!("{}/{}", c.category, c.decision_type)).unwrap_or_default(),
            self.evidence.clone(),
        ]
    }
}

/// Renders cross-check findings.
pub fn emit_report(findings: &[Finding], format: ReportFormat) -> String {
    render(findings, format)
}
