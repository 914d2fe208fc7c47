//! Claim extraction from HTML report tables.
//!
//! A mapping names the table, the column holding the category label and the
//! column holding the number. Every data row becomes one claim.

use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse_reported_value, Claim, ClaimSet, Metric};
use crate::aggregate::{Attribute, Condition, Period, Predicate};
use crate::sor_model::CategoryTaxonomy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSelector {
    /// `id` attribute of the `<table>`.
    Id(String),
    /// Text of the table's `<caption>`, compared after whitespace collapse.
    Caption(String),
    /// Zero-based position among the document's tables.
    Index(usize),
}

/// A header text or a 1-based column position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Position(usize),
    Header(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionMapping {
    pub table_selector: TableSelector,
    pub category_column: ColumnRef,
    pub value_column: ColumnRef,
    pub metric: Metric,
    pub period: Period,
    pub platform: String,
    /// Extra conjuncts added to every row's predicate.
    #[serde(default)]
    pub predicate: Option<Value>,
    #[serde(default)]
    pub denominator_predicate: Option<Value>,
    #[serde(default)]
    pub exhaustive: bool,
    #[serde(default)]
    pub claim_id_prefix: Option<String>,
    /// Document name used in source locators.
    #[serde(default)]
    pub source: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("no table matches {0:?}")]
    TableNotFound(TableSelector),
    #[error("column {column:?} not found in table header {header:?}")]
    MissingColumn { column: ColumnRef, header: Vec<String> },
    #[error("row {row}, column {column}: cannot parse `{text}`: {reason}")]
    UnparseableCell { row: usize, column: usize, text: String, reason: String },
    #[error("invalid mapping: {0}")]
    Mapping(String),
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn cell_text(cell: ElementRef<'_>) -> String {
    collapse(&cell.text().collect::<String>())
}

fn cells(row: ElementRef<'_>) -> Vec<String> {
    row.children()
        .filter_map(ElementRef::wrap)
        .filter(|e| matches!(e.value().name(), "td" | "th"))
        .map(cell_text)
        .collect()
}

fn sel(s: &str) -> Selector {
    Selector::parse(s).expect("static selector")
}

/// Rows of `table` that do not belong to a nested table.
fn rows<'a>(table: ElementRef<'a>) -> Vec<ElementRef<'a>> {
    let tr = sel("tr");
    table
        .select(&tr)
        .filter(|row| {
            row.ancestors()
                .filter_map(ElementRef::wrap)
                .find(|a| a.value().name() == "table")
                .is_some_and(|owner| owner.id() == table.id())
        })
        .collect()
}

fn find_table<'a>(doc: &'a Html, selector: &TableSelector) -> Option<(usize, ElementRef<'a>)> {
    let tables = sel("table");
    let caption = sel("caption");
    doc.select(&tables).enumerate().find(|(i, t)| match selector {
        TableSelector::Id(id) => t.value().id() == Some(id.as_str()),
        TableSelector::Caption(text) => t.select(&caption).next().is_some_and(|c| cell_text(c) == collapse(text)),
        TableSelector::Index(n) => i == n,
    })
}

fn resolve_column(column: &ColumnRef, header: &[String]) -> Result<usize, ExtractError> {
    let missing = || ExtractError::MissingColumn { column: column.clone(), header: header.to_vec() };
    match column {
        ColumnRef::Position(p) if *p >= 1 && *p <= header.len() => Ok(p - 1),
        ColumnRef::Position(_) => Err(missing()),
        ColumnRef::Header(name) => {
            let want = collapse(name).to_lowercase();
            header.iter().position(|h| h.to_lowercase() == want).ok_or_else(missing)
        }
    }
}

/// Extracts one claim per data row of the mapped table.
///
/// Category labels are normalized through `taxonomy` where they resolve;
/// labels that do not are kept verbatim so the claim surfaces as
/// unreplicable rather than being dropped.
pub fn extract_html_claims(
    document: &str,
    mapping: &ExtractionMapping,
    taxonomy: &CategoryTaxonomy,
) -> Result<ClaimSet, ExtractError> {
    let base = match &mapping.predicate {
        Some(v) => Predicate::from_json(v).map_err(|e| ExtractError::Mapping(e.to_string()))?,
        None => Predicate::always(),
    };
    if base.condition(Attribute::Category).is_some() {
        return Err(ExtractError::Mapping("predicate must not constrain category".into()));
    }
    let denominator = mapping
        .denominator_predicate
        .as_ref()
        .map(Predicate::from_json)
        .transpose()
        .map_err(|e| ExtractError::Mapping(e.to_string()))?;
    match (mapping.metric, &denominator) {
        (Metric::Share, None) => return Err(ExtractError::Mapping("SHARE needs denominator_predicate".into())),
        (Metric::Count, Some(_)) => {
            return Err(ExtractError::Mapping("denominator_predicate only applies to SHARE".into()))
        }
        _ => {}
    }

    let doc = Html::parse_document(document);
    let (table_index, table) =
        find_table(&doc, &mapping.table_selector).ok_or_else(|| ExtractError::TableNotFound(mapping.table_selector.clone()))?;
    let all_rows = rows(table);
    let th = sel("th");
    let header_at = all_rows.iter().position(|r| r.select(&th).next().is_some()).unwrap_or(0);
    let header = all_rows.get(header_at).map(|r| cells(*r)).unwrap_or_default();
    let cat_col = resolve_column(&mapping.category_column, &header)?;
    let val_col = resolve_column(&mapping.value_column, &header)?;

    let prefix = mapping.claim_id_prefix.as_deref().unwrap_or("html");
    let source = mapping.source.as_deref().unwrap_or("report.html");
    let mut claims = Vec::new();
    let data_rows = all_rows.iter().skip(header_at + 1).map(|r| cells(*r)).filter(|c| c.iter().any(|t| !t.is_empty()));
    for (i, row) in data_rows.enumerate() {
        let n = i + 1;
        let cell = |col: usize| row.get(col).cloned().unwrap_or_default();
        let label = cell(cat_col);
        if label.is_empty() {
            return Err(ExtractError::UnparseableCell {
                row: n,
                column: cat_col + 1,
                text: label,
                reason: "empty category label".into(),
            });
        }
        let category = taxonomy.resolve(&label).map(|c| c.as_str().to_string()).unwrap_or(label);
        let raw_value = cell(val_col);
        let reported = parse_reported_value(&raw_value, mapping.metric).map_err(|e| ExtractError::UnparseableCell {
            row: n,
            column: val_col + 1,
            text: raw_value.clone(),
            reason: e.reason,
        })?;
        let mut conjuncts = base.conjuncts().to_vec();
        conjuncts.push(Condition::Category(vec![category]));
        let predicate = Predicate::new(conjuncts).map_err(|e| ExtractError::Mapping(e.to_string()))?;
        claims.push(Claim {
            claim_id: format!("{prefix}-{n:03}"),
            platform_name: mapping.platform.clone(),
            metric: mapping.metric,
            predicate,
            denominator_predicate: denominator.clone(),
            period: mapping.period,
            reported,
            source_locator: format!("{source}#table[{table_index}]/row[{n}]"),
        });
    }
    Ok(ClaimSet { platform: mapping.platform.clone(), exhaustive: mapping.exhaustive, claims })
}
