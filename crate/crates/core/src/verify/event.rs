use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::sor_model::{
    vocabulary, AutomatedDecision, CategoryCode, CategoryTaxonomy, ContentType, QuarantineEntry,
    QuarantineReason, RawRow, RowCursor,
};
use crate::timefmt;

/// Column names of the platform export format, in file order.
pub const EXPORT_COLUMNS: [&str; 11] = [
    "content_id",
    "puid",
    "content_type",
    "content_created",
    "moderated_at",
    "visibility_status",
    "platform_categories",
    "automated_detection",
    "automated_decision",
    "annotations",
    "payload",
];

/// Annotation marking an account suspension.
pub const ANNOTATION_ACCOUNT_SUSPENSION: &str = "ACCOUNT_SUSPENSION";
/// Annotation marking an account termination.
pub const ANNOTATION_ACCOUNT_TERMINATION: &str = "ACCOUNT_TERMINATION";

vocabulary! {
    VisibilityStatus: "visibility_status" {
        Visible => "VISIBLE",
        Removed => "REMOVED",
        Disabled => "DISABLED",
        Demoted => "DEMOTED",
    }
}

/// Platform-side record of one enforcement action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModerationEvent {
    pub content_id: String,
    pub puid: Option<String>,
    pub content_type: ContentType,
    pub content_created: NaiveDate,
    pub moderated_at: DateTime<Utc>,
    pub visibility_status: VisibilityStatus,
    pub platform_categories: Vec<CategoryCode>,
    pub automated_detection: bool,
    pub automated_decision: AutomatedDecision,
    pub annotations: Vec<String>,
    pub payload: Option<String>,
}

impl ModerationEvent {
    /// The account-level action named by the annotations, if any.
    pub fn account_action(&self) -> Option<&'static str> {
        self.annotations.iter().find_map(|a| {
            if a.eq_ignore_ascii_case(ANNOTATION_ACCOUNT_TERMINATION) {
                Some(ANNOTATION_ACCOUNT_TERMINATION)
            } else if a.eq_ignore_ascii_case(ANNOTATION_ACCOUNT_SUSPENSION) {
                Some(ANNOTATION_ACCOUNT_SUSPENSION)
            } else {
                None
            }
        })
    }

    /// Content counts as moderated when it is no longer plainly visible or
    /// its account was actioned.
    pub fn is_moderated(&self) -> bool {
        self.visibility_status != VisibilityStatus::Visible || self.account_action().is_some()
    }

    pub fn to_row(&self) -> [String; 11] {
        [
            self.content_id.clone(),
            self.puid.clone().unwrap_or_default(),
            self.content_type.to_string(),
            timefmt::format_date(self.content_created),
            timefmt::format_timestamp(self.moderated_at),
            self.visibility_status.to_string(),
            self.platform_categories.iter().map(CategoryCode::as_str).collect::<Vec<_>>().join(";"),
            self.automated_detection.to_string(),
            self.automated_decision.to_string(),
            self.annotations.join(";"),
            self.payload.clone().unwrap_or_default(),
        ]
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').map(str::trim).filter(|p| !p.is_empty())
}

/// Types and checks one export row; platform category labels resolve
/// through the taxonomy.
pub fn validate_event<R: RawRow + ?Sized>(
    raw: &R,
    taxonomy: &CategoryTaxonomy,
) -> Result<ModerationEvent, QuarantineEntry> {
    let cols = &EXPORT_COLUMNS[..];
    let row = RowCursor::new(raw);

    let content_id = row.required(cols, "content_id")?;
    let puid = row.optional(cols, "puid")?;
    let content_type: ContentType = row.parsed(cols, "content_type")?;
    let content_created = row.date(cols, "content_created")?;
    let moderated_at = row.timestamp(cols, "moderated_at")?;
    let visibility_status: VisibilityStatus = row.parsed(cols, "visibility_status")?;
    let platform_categories = split_list(row.raw(cols, "platform_categories")?)
        .map(|label| {
            taxonomy.resolve(label).cloned().map_err(|_| {
                row.fail(
                    QuarantineReason::UnknownCategory,
                    "platform_categories",
                    format!("`{label}` is not in the category taxonomy"),
                )
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let automated_detection = row.boolean(cols, "automated_detection")?;
    let automated_decision: AutomatedDecision = row.parsed(cols, "automated_decision")?;
    let annotations = split_list(row.raw(cols, "annotations")?).map(str::to_string).collect();
    let payload = row.optional(cols, "payload")?;

    if content_created > moderated_at.date_naive() {
        return Err(row.fail(
            QuarantineReason::DateOrder,
            "moderated_at",
            format!(
                "moderated_at {} precedes content_created {content_created}",
                timefmt::format_timestamp(moderated_at)
            ),
        ));
    }

    Ok(ModerationEvent {
        content_id: content_id.to_string(),
        puid: puid.map(str::to_string),
        content_type,
        content_created,
        moderated_at,
        visibility_status,
        platform_categories,
        automated_detection,
        automated_decision,
        annotations,
        payload: payload.map(str::to_string),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::collections::BTreeMap;

    pub(crate) fn event_row(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        let base = [
            "c1",
            "puid-1",
            "TEXT",
            "2024-01-02",
            "2024-01-05T10:00:00Z",
            "REMOVED",
            "spam;Hate speech",
            "true",
            "FULLY",
            "",
            "buy now",
        ];
        let mut row: BTreeMap<String, String> =
            EXPORT_COLUMNS.iter().zip(base).map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in pairs {
            row.insert(k.to_string(), v.to_string());
        }
        row
    }

    #[test]
    fn parses_lists_and_resolves_labels() {
        let ev = validate_event(&event_row(&[]), &CategoryTaxonomy::reference()).unwrap();
        let cats: Vec<_> = ev.platform_categories.iter().map(|c| c.as_str()).collect();
        assert_eq!(cats, ["spam", "hate_speech"]);
        assert!(ev.is_moderated());
    }

    #[test]
    fn moderated_before_creation_is_date_order() {
        let row = event_row(&[("moderated_at", "2024-01-01T23:59:59Z")]);
        let q = validate_event(&row, &CategoryTaxonomy::reference()).unwrap_err();
        assert_eq!(q.reason, QuarantineReason::DateOrder);
    }

    #[test]
    fn account_annotation_marks_visible_content_moderated() {
        let row = event_row(&[("visibility_status", "VISIBLE"), ("annotations", "note; account_termination")]);
        let ev = validate_event(&row, &CategoryTaxonomy::reference()).unwrap();
        assert_eq!(ev.account_action(), Some(ANNOTATION_ACCOUNT_TERMINATION));
        assert!(ev.is_moderated());
        let row = event_row(&[("visibility_status", "VISIBLE")]);
        assert!(!validate_event(&row, &CategoryTaxonomy::reference()).unwrap().is_moderated());
    }

    #[test]
    fn unknown_platform_category_is_quarantined() {
        let row = event_row(&[("platform_categories", "spam;recipes")]);
        let q = validate_event(&row, &CategoryTaxonomy::reference()).unwrap_err();
        assert_eq!(q.reason, QuarantineReason::UnknownCategory);
    }
}
