use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{Classification, ClassifierVerdict, ContentClassifier};
use super::event::{ModerationEvent, VisibilityStatus, ANNOTATION_ACCOUNT_TERMINATION};
use crate::aggregate::Period;
use crate::sor_model::{AutomatedDecision, CategoryCode, ContentType, DecisionGround, DecisionType, SorRecord, SourceType};

/// Minimum classifier confidence for its verdict to set the category.
pub const CLASSIFIER_MIN_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CategorySource {
    Classifier,
    PlatformCategory,
    Default,
}

/// The SoR a platform would be expected to file for one moderated event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedSor {
    pub content_id: String,
    pub puid: Option<String>,
    pub decision_type: DecisionType,
    pub decision_ground: DecisionGround,
    pub category: CategoryCode,
    pub content_type: ContentType,
    pub automated_detection: bool,
    pub automated_decision: AutomatedDecision,
    pub content_date: NaiveDate,
    pub application_date: NaiveDate,
    pub moderated_at: DateTime<Utc>,
    pub classification: Classification,
    pub category_source: CategorySource,
}

impl ReconstructedSor {
    /// The SoR a faithful filing of this action would contain.
    pub fn to_filed(&self, uuid: String, platform_name: String, created_at: DateTime<Utc>, source_type: SourceType) -> SorRecord {
        let other = |is_other: bool| is_other.then(|| "unspecified".to_string());
        SorRecord {
            uuid,
            platform_name,
            decision_type: self.decision_type,
            decision_type_other: other(self.decision_type == DecisionType::Other),
            decision_ground: self.decision_ground,
            decision_ground_reference_url: None,
            illegal_content_explanation: None,
            category: self.category.clone(),
            content_type: self.content_type,
            content_type_other: other(self.content_type == ContentType::Other),
            automated_detection: self.automated_detection,
            automated_decision: self.automated_decision,
            source_type,
            content_date: self.content_date,
            application_date: self.application_date,
            created_at,
            puid: self.puid.clone(),
        }
    }
}

fn decision_type(event: &ModerationEvent) -> Option<DecisionType> {
    match event.visibility_status {
        VisibilityStatus::Removed => Some(DecisionType::VisibilityRemoval),
        VisibilityStatus::Disabled => Some(DecisionType::VisibilityDisable),
        VisibilityStatus::Demoted => Some(DecisionType::VisibilityDemotion),
        VisibilityStatus::Visible => event.account_action().map(|a| {
            if a == ANNOTATION_ACCOUNT_TERMINATION {
                DecisionType::AccountTermination
            } else {
                DecisionType::AccountSuspension
            }
        }),
    }
}

/// Reconstructs one event, or `None` if it was not moderated.
pub fn reconstruct_event(event: &ModerationEvent, classifier: &dyn ContentClassifier) -> Option<ReconstructedSor> {
    let decision_type = decision_type(event)?;
    let classification = classifier.classify(event);
    let (category, category_source) = match &classification {
        Classification::Verdict(ClassifierVerdict { category, confidence }) if *confidence >= CLASSIFIER_MIN_CONFIDENCE => {
            (category.clone(), CategorySource::Classifier)
        }
        _ => match event.platform_categories.first() {
            Some(c) => (c.clone(), CategorySource::PlatformCategory),
            None => (CategoryCode::other(), CategorySource::Default),
        },
    };
    Some(ReconstructedSor {
        content_id: event.content_id.clone(),
        puid: event.puid.clone(),
        decision_type,
        decision_ground: DecisionGround::IncompatibleWithTerms,
        category,
        content_type: event.content_type,
        automated_detection: event.automated_detection,
        automated_decision: event.automated_decision,
        content_date: event.content_created,
        application_date: event.moderated_at.date_naive(),
        moderated_at: event.moderated_at,
        classification,
        category_source,
    })
}

/// Expected SoRs for the moderated events whose `moderated_at` falls in
/// `window`, in input order.
pub fn reconstruct<I>(events: I, classifier: &dyn ContentClassifier, window: &Period) -> Vec<ReconstructedSor>
where
    I: IntoIterator<Item = ModerationEvent>,
{
    let in_window: Vec<ModerationEvent> =
        events.into_iter().filter(|e| window.contains_date(e.moderated_at.date_naive())).collect();
    in_window.par_iter().filter_map(|e| reconstruct_event(e, classifier)).collect()
}
