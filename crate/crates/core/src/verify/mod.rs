//! Verification of filed SoRs against a platform's moderation export.
//!
//! Moderated events are reconstructed into the SoRs the platform should
//! have filed ([`reconstruct`]), linked to the SoRs actually filed
//! ([`link`]) and diffed ([`verify_diff`]).

mod classify;
mod diff;
pub mod event;
mod link;
mod reconstruct;

use serde::{Deserialize, Serialize};

use crate::aggregate::Period;
use crate::sor_model::SorRecord;

pub use classify::{classify, marker_token, Classification, ClassifierVerdict, ContentClassifier, KeywordClassifier, KeywordRule};
pub use diff::{
    emit_verification_report, sort_verification_findings, verify_diff, FieldDiff, VerificationFinding,
    VerificationKind, DEFAULT_DEADLINE_DAYS, NON_DERIVABLE_FIELDS,
};
pub use event::{
    validate_event, ModerationEvent, VisibilityStatus, ANNOTATION_ACCOUNT_SUSPENSION, ANNOTATION_ACCOUNT_TERMINATION,
    EXPORT_COLUMNS,
};
pub use link::{link, LinkError, LinkMethod, Linkage, LinkageConfig, LinkedPair};
pub use reconstruct::{reconstruct, reconstruct_event, CategorySource, ReconstructedSor, CLASSIFIER_MIN_CONFIDENCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub linkage: LinkageConfig,
    pub deadline_days: i64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { linkage: LinkageConfig::default(), deadline_days: DEFAULT_DEADLINE_DAYS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutcome {
    pub linkage: Linkage,
    pub findings: Vec<VerificationFinding>,
}

/// Runs reconstruction, linkage and diffing over one window. Filed SoRs
/// whose application date lies outside the window are ignored.
pub fn verify_window<E, F>(
    events: E,
    filed: F,
    classifier: &dyn ContentClassifier,
    window: &Period,
    config: &VerifyConfig,
) -> Result<VerificationOutcome, LinkError>
where
    E: IntoIterator<Item = ModerationEvent>,
    F: IntoIterator<Item = SorRecord>,
{
    if config.deadline_days < 0 {
        return Err(LinkError::Config("deadline_days must not be negative".into()));
    }
    let reconstructed = reconstruct(events, classifier, window);
    let filed: Vec<SorRecord> = filed.into_iter().filter(|f| window.contains_date(f.application_date)).collect();
    let linkage = link(reconstructed, filed, &config.linkage)?;
    let findings = verify_diff(&linkage, config.deadline_days);
    Ok(VerificationOutcome { linkage, findings })
}
