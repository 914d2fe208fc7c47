//! Transparency-report aggregates as machine-checkable claims.
//!
//! A [`Claim`] says "the number of records matching this predicate in this
//! period is N" (`COUNT`) or "this fraction of those records matches"
//! (`SHARE`). Claims are read from the normalized claims JSON format or
//! extracted from HTML report tables.

mod html;
mod number;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aggregate::{Period, Predicate};

pub use html::{extract_html_claims, ColumnRef, ExtractError, ExtractionMapping, TableSelector};
pub use number::{parse_reported_value, ExactValue, NumberError, ReportedValue, ValuePrecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    Count,
    Share,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Count => "COUNT",
            Metric::Share => "SHARE",
        })
    }
}

/// One aggregate assertion taken from a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub claim_id: String,
    pub platform_name: String,
    pub metric: Metric,
    pub predicate: Predicate,
    /// Population a `SHARE` is taken over; absent for `COUNT`.
    pub denominator_predicate: Option<Predicate>,
    pub period: Period,
    pub reported: ReportedValue,
    /// Where in the source report the number was found.
    pub source_locator: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ClaimsError {
    #[error("cannot read claims {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed claims file {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("claim `{claim_id}`, field `{field}`: {message}")]
    Invalid { claim_id: String, field: String, message: String },
    #[error("duplicate claim_id `{0}`")]
    DuplicateId(String),
}

fn invalid(claim_id: &str, field: &str, message: impl fmt::Display) -> ClaimsError {
    ClaimsError::Invalid {
        claim_id: claim_id.to_string(),
        field: field.to_string(),
        message: message.to_string(),
    }
}

impl Claim {
    /// Checks the cross-field rules a claim must satisfy before replication.
    pub fn validate(&self) -> Result<(), ClaimsError> {
        let id = self.claim_id.as_str();
        if id.is_empty() {
            return Err(invalid(id, "claim_id", "must not be empty"));
        }
        if self.source_locator.is_empty() {
            return Err(invalid(id, "source_locator", "must not be empty"));
        }
        match (self.metric, &self.denominator_predicate) {
            (Metric::Share, None) => {
                return Err(invalid(id, "denominator_predicate", "required for SHARE claims"))
            }
            (Metric::Count, Some(_)) => {
                return Err(invalid(id, "denominator_predicate", "only allowed for SHARE claims"))
            }
            _ => {}
        }
        let reparsed = parse_reported_value(&self.reported.text, self.metric)
            .map_err(|e| invalid(id, "value", e))?;
        if reparsed != self.reported {
            return Err(invalid(id, "value", "normalized value does not match its text"));
        }
        Ok(())
    }

    pub fn reported_value(&self) -> &ExactValue {
        &self.reported.value
    }

    pub fn precision(&self) -> ValuePrecision {
        self.reported.precision
    }
}

/// The claims extracted from one report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimSet {
    pub platform: String,
    /// The report purports to cover every moderation action in its span.
    pub exhaustive: bool,
    pub claims: Vec<Claim>,
}

impl ClaimSet {
    pub fn validate(&self) -> Result<(), ClaimsError> {
        let mut ids = BTreeSet::new();
        for claim in &self.claims {
            if !ids.insert(claim.claim_id.as_str()) {
                return Err(ClaimsError::DuplicateId(claim.claim_id.clone()));
            }
            claim.validate()?;
        }
        Ok(())
    }

    pub fn get(&self, claim_id: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.claim_id == claim_id)
    }

    /// Parses and validates the claims JSON format.
    pub fn from_json_str(text: &str) -> Result<Self, ClaimsError> {
        let file: ClaimsFile = serde_json::from_str(text)
            .map_err(|source| ClaimsError::Json { path: "<input>".to_string(), source })?;
        file.into_claim_set()
    }

    pub fn to_json_string(&self) -> String {
        let file = ClaimsFile {
            platform: self.platform.clone(),
            exhaustive: self.exhaustive,
            claims: self
                .claims
                .iter()
                .map(|c| ClaimRepr {
                    claim_id: c.claim_id.clone(),
                    metric: c.metric,
                    predicate: c.predicate.to_json(),
                    denominator_predicate: c.denominator_predicate.as_ref().map(Predicate::to_json),
                    period: serde_json::to_value(c.period).expect("period serializes"),
                    value: Value::String(c.reported.text.clone()),
                    source_locator: c.source_locator.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("claims serialize");
        text.push('\n');
        text
    }
}

/// Reads a claims JSON file.
pub fn load_claims(path: &Path) -> Result<ClaimSet, ClaimsError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ClaimsError::Io { path: display.clone(), source })?;
    ClaimSet::from_json_str(&text).map_err(|e| match e {
        ClaimsError::Json { source, .. } => ClaimsError::Json { path: display, source },
        other => other,
    })
}

pub fn save_claims(path: &Path, claims: &ClaimSet) -> Result<(), ClaimsError> {
    std::fs::write(path, claims.to_json_string())
        .map_err(|source| ClaimsError::Io { path: path.display().to_string(), source })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimsFile {
    platform: String,
    #[serde(default)]
    exhaustive: bool,
    claims: Vec<ClaimRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClaimRepr {
    claim_id: String,
    metric: Metric,
    #[serde(default = "empty_object")]
    predicate: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    denominator_predicate: Option<Value>,
    period: Value,
    value: Value,
    source_locator: String,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

impl ClaimsFile {
    fn into_claim_set(self) -> Result<ClaimSet, ClaimsError> {
        if self.platform.is_empty() {
            return Err(invalid("", "platform", "must not be empty"));
        }
        let mut claims = Vec::with_capacity(self.claims.len());
        for repr in self.claims {
            let id = repr.claim_id.as_str();
            let predicate = Predicate::from_json(&repr.predicate).map_err(|e| invalid(id, "predicate", e))?;
            let denominator_predicate = repr
                .denominator_predicate
                .as_ref()
                .map(Predicate::from_json)
                .transpose()
                .map_err(|e| invalid(id, "denominator_predicate", e))?;
            let period: Period =
                serde_json::from_value(repr.period.clone()).map_err(|e| invalid(id, "period", e))?;
            let text = match &repr.value {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                other => return Err(invalid(id, "value", format!("expected a string or number, found {other}"))),
            };
            let reported = parse_reported_value(&text, repr.metric).map_err(|e| invalid(id, "value", e))?;
            claims.push(Claim {
                claim_id: repr.claim_id,
                platform_name: self.platform.clone(),
                metric: repr.metric,
                predicate,
                denominator_predicate,
                period,
                reported,
                source_locator: repr.source_locator,
            });
        }
        let set = ClaimSet { platform: self.platform, exhaustive: self.exhaustive, claims };
        set.validate()?;
        Ok(set)
    }
}
