use std::collections::{BTreeMap, HashMap};
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::enums::{
    parse_bool, AutomatedDecision, ContentType, DecisionGround, DecisionType, SourceType,
};
use super::taxonomy::{CategoryCode, CategoryTaxonomy};
use crate::timefmt;

/// Column names of the SoR dump format, in file order.
pub const SOR_COLUMNS: [&str; 17] = [
    "uuid",
    "platform_name",
    "decision_type",
    "decision_type_other",
    "decision_ground",
    "decision_ground_reference_url",
    "illegal_content_explanation",
    "category",
    "content_type",
    "content_type_other",
    "automated_detection",
    "automated_decision",
    "source_type",
    "content_date",
    "application_date",
    "created_at",
    "puid",
];

/// One moderation action as filed to the transparency database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SorRecord {
    pub uuid: String,
    pub platform_name: String,
    pub decision_type: DecisionType,
    /// Set iff `decision_type` is `OTHER`.
    pub decision_type_other: Option<String>,
    pub decision_ground: DecisionGround,
    pub decision_ground_reference_url: Option<String>,
    pub illegal_content_explanation: Option<String>,
    pub category: CategoryCode,
    pub content_type: ContentType,
    /// Set iff `content_type` is `OTHER`.
    pub content_type_other: Option<String>,
    pub automated_detection: bool,
    pub automated_decision: AutomatedDecision,
    pub source_type: SourceType,
    pub content_date: NaiveDate,
    pub application_date: NaiveDate,
    pub created_at: DateTime<Utc>,
    pub puid: Option<String>,
}

impl SorRecord {
    /// Renders the record as a dump row, columns in [`SOR_COLUMNS`] order.
    pub fn to_row(&self) -> [String; 17] {
        let opt = |o: &Option<String>| o.clone().unwrap_or_default();
        [
            self.uuid.clone(),
            self.platform_name.clone(),
            self.decision_type.to_string(),
            opt(&self.decision_type_other),
            self.decision_ground.to_string(),
            opt(&self.decision_ground_reference_url),
            opt(&self.illegal_content_explanation),
            self.category.to_string(),
            self.content_type.to_string(),
            opt(&self.content_type_other),
            self.automated_detection.to_string(),
            self.automated_decision.to_string(),
            self.source_type.to_string(),
            timefmt::format_date(self.content_date),
            timefmt::format_date(self.application_date),
            timefmt::format_timestamp(self.created_at),
            opt(&self.puid),
        ]
    }

    /// `true` for illegal-content decisions that give no explanation.
    pub fn has_informativeness_gap(&self) -> bool {
        self.decision_ground == DecisionGround::IllegalContent
            && self.illegal_content_explanation.is_none()
    }
}

/// Machine-readable reason a row was routed to quarantine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuarantineReason {
    MissingField,
    BadEnum,
    BadDate,
    DateOrder,
    /// The free-text companion of an `OTHER` value is empty, or is set
    /// while the value is not `OTHER`.
    EmptyOtherText,
    UnknownCategory,
    /// The row could not be decoded at all (invalid UTF-8, CSV framing).
    MalformedRow,
}

impl QuarantineReason {
    pub fn as_str(self) -> &'static str {
        match self {
            QuarantineReason::MissingField => "MISSING_FIELD",
            QuarantineReason::BadEnum => "BAD_ENUM",
            QuarantineReason::BadDate => "BAD_DATE",
            QuarantineReason::DateOrder => "DATE_ORDER",
            QuarantineReason::EmptyOtherText => "EMPTY_OTHER_TEXT",
            QuarantineReason::UnknownCategory => "UNKNOWN_CATEGORY",
            QuarantineReason::MalformedRow => "MALFORMED_ROW",
        }
    }
}

impl fmt::Display for QuarantineReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rejected input row together with why it was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    pub reason: QuarantineReason,
    /// Offending column, when one can be named.
    pub field: Option<String>,
    pub detail: String,
    pub raw_row: Vec<String>,
}

/// Access to one untyped input row.
///
/// `column` is the canonical column name and `index` its position in the
/// canonical header, so positional rows can skip the name lookup.
pub trait RawRow {
    fn field(&self, column: &str, index: usize) -> Option<&str>;

    /// The row's cells as read, for quarantine evidence.
    fn cells(&self) -> Vec<String>;
}

impl RawRow for BTreeMap<String, String> {
    fn field(&self, column: &str, _index: usize) -> Option<&str> {
        self.get(column).map(String::as_str)
    }

    fn cells(&self) -> Vec<String> {
        self.iter().map(|(k, v)| format!("{k}={v}")).collect()
    }
}

impl RawRow for HashMap<String, String> {
    fn field(&self, column: &str, _index: usize) -> Option<&str> {
        self.get(column).map(String::as_str)
    }

    fn cells(&self) -> Vec<String> {
        let mut cells: Vec<_> = self.iter().map(|(k, v)| format!("{k}={v}")).collect();
        cells.sort();
        cells
    }
}

/// A row whose cells are already in canonical column order.
impl RawRow for csv::StringRecord {
    fn field(&self, _column: &str, index: usize) -> Option<&str> {
        self.get(index)
    }

    fn cells(&self) -> Vec<String> {
        self.iter().map(str::to_string).collect()
    }
}

pub(crate) struct RowCursor<'r, R: RawRow + ?Sized> {
    row: &'r R,
}

impl<'r, R: RawRow + ?Sized> RowCursor<'r, R> {
    pub(crate) fn new(row: &'r R) -> Self {
        RowCursor { row }
    }

    fn reject(&self, reason: QuarantineReason, field: &str, detail: String) -> QuarantineEntry {
        QuarantineEntry {
            reason,
            field: Some(field.to_string()),
            detail,
            raw_row: self.row.cells(),
        }
    }

    pub(crate) fn raw(&self, columns: &[&str], column: &str) -> Result<&'r str, QuarantineEntry> {
        let index = columns.iter().position(|c| *c == column).unwrap_or(usize::MAX);
        self.row.field(column, index).ok_or_else(|| {
            self.reject(QuarantineReason::MissingField, column, format!("column `{column}` is absent"))
        })
    }

    pub(crate) fn required(&self, columns: &[&str], column: &str) -> Result<&'r str, QuarantineEntry> {
        let value = self.raw(columns, column)?;
        if value.is_empty() {
            return Err(self.reject(
                QuarantineReason::MissingField,
                column,
                format!("required column `{column}` is empty"),
            ));
        }
        Ok(value)
    }

    pub(crate) fn optional(&self, columns: &[&str], column: &str) -> Result<Option<&'r str>, QuarantineEntry> {
        let value = self.raw(columns, column)?;
        Ok((!value.is_empty()).then_some(value))
    }

    pub(crate) fn parsed<T: std::str::FromStr>(
        &self,
        columns: &[&str],
        column: &str,
    ) -> Result<T, QuarantineEntry>
    where
        T::Err: fmt::Display,
    {
        let value = self.required(columns, column)?;
        value
            .parse()
            .map_err(|e: T::Err| self.reject(QuarantineReason::BadEnum, column, e.to_string()))
    }

    pub(crate) fn boolean(&self, columns: &[&str], column: &str) -> Result<bool, QuarantineEntry> {
        let value = self.required(columns, column)?;
        parse_bool(value).map_err(|e| self.reject(QuarantineReason::BadEnum, column, e.to_string()))
    }

    pub(crate) fn date(&self, columns: &[&str], column: &str) -> Result<NaiveDate, QuarantineEntry> {
        let value = self.required(columns, column)?;
        timefmt::parse_date(value).ok_or_else(|| {
            self.reject(QuarantineReason::BadDate, column, format!("`{value}` is not a YYYY-MM-DD date"))
        })
    }

    pub(crate) fn timestamp(&self, columns: &[&str], column: &str) -> Result<DateTime<Utc>, QuarantineEntry> {
        let value = self.required(columns, column)?;
        timefmt::parse_timestamp(value).ok_or_else(|| {
            self.reject(
                QuarantineReason::BadDate,
                column,
                format!("`{value}` is not a YYYY-MM-DDThh:mm:ssZ timestamp"),
            )
        })
    }

    pub(crate) fn fail(&self, reason: QuarantineReason, column: &str, detail: String) -> QuarantineEntry {
        self.reject(reason, column, detail)
    }
}

/// Types and checks one dump row. Never panics; every failure comes back
/// as a [`QuarantineEntry`].
pub fn validate_record<R: RawRow + ?Sized>(
    raw: &R,
    taxonomy: &CategoryTaxonomy,
) -> Result<SorRecord, QuarantineEntry> {
    let cols = &SOR_COLUMNS[..];
    let row = RowCursor::new(raw);

    let uuid = row.required(cols, "uuid")?;
    let platform_name = row.required(cols, "platform_name")?;
    let decision_type: DecisionType = row.parsed(cols, "decision_type")?;
    let decision_type_other = other_text(&row, decision_type == DecisionType::Other, "decision_type_other")?;
    let decision_ground: DecisionGround = row.parsed(cols, "decision_ground")?;
    let decision_ground_reference_url = row.optional(cols, "decision_ground_reference_url")?;
    let illegal_content_explanation = row.optional(cols, "illegal_content_explanation")?;
    let category_label = row.required(cols, "category")?;
    let category = taxonomy.resolve(category_label).map_err(|_| {
        row.fail(
            QuarantineReason::UnknownCategory,
            "category",
            format!("`{category_label}` is not in the category taxonomy"),
        )
    })?;
    let content_type: ContentType = row.parsed(cols, "content_type")?;
    let content_type_other = other_text(&row, content_type == ContentType::Other, "content_type_other")?;
    let automated_detection = row.boolean(cols, "automated_detection")?;
    let automated_decision: AutomatedDecision = row.parsed(cols, "automated_decision")?;
    let source_type: SourceType = row.parsed(cols, "source_type")?;
    let content_date = row.date(cols, "content_date")?;
    let application_date = row.date(cols, "application_date")?;
    let created_at = row.timestamp(cols, "created_at")?;
    let puid = row.optional(cols, "puid")?;

    if content_date > application_date {
        return Err(row.fail(
            QuarantineReason::DateOrder,
            "application_date",
            format!("application_date {application_date} precedes content_date {content_date}"),
        ));
    }
    if application_date > created_at.date_naive() {
        return Err(row.fail(
            QuarantineReason::DateOrder,
            "created_at",
            format!(
                "created_at {} precedes application_date {application_date}",
                timefmt::format_timestamp(created_at)
            ),
        ));
    }

    Ok(SorRecord {
        uuid: uuid.to_string(),
        platform_name: platform_name.to_string(),
        decision_type,
        decision_type_other: decision_type_other.map(str::to_string),
        decision_ground,
        decision_ground_reference_url: decision_ground_reference_url.map(str::to_string),
        illegal_content_explanation: illegal_content_explanation.map(str::to_string),
        category: category.clone(),
        content_type,
        content_type_other: content_type_other.map(str::to_string),
        automated_detection,
        automated_decision,
        source_type,
        content_date,
        application_date,
        created_at,
        puid: puid.map(str::to_string),
    })
}

fn other_text<'r, R: RawRow + ?Sized>(
    row: &RowCursor<'r, R>,
    is_other: bool,
    column: &str,
) -> Result<Option<&'r str>, QuarantineEntry> {
    let text = row.optional(&SOR_COLUMNS, column)?;
    match (is_other, text) {
        (true, None) => Err(row.fail(
            QuarantineReason::EmptyOtherText,
            column,
            format!("`{column}` must describe an OTHER value"),
        )),
        (false, Some(_)) => Err(row.fail(
            QuarantineReason::EmptyOtherText,
            column,
            format!("`{column}` is only allowed alongside an OTHER value"),
        )),
        (_, text) => Ok(text),
    }
}
