use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::sor_model::{
    AutomatedDecision, CategoryCode, CategoryTaxonomy, ContentType, DecisionGround, DecisionType,
    SorRecord, SourceType,
};
use crate::timefmt;

/// SorRecord attributes a predicate may constrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    PlatformName,
    DecisionType,
    DecisionGround,
    Category,
    ContentType,
    AutomatedDetection,
    AutomatedDecision,
    SourceType,
}

impl Attribute {
    pub const ALL: [Attribute; 8] = [
        Attribute::PlatformName,
        Attribute::DecisionType,
        Attribute::DecisionGround,
        Attribute::Category,
        Attribute::ContentType,
        Attribute::AutomatedDetection,
        Attribute::AutomatedDecision,
        Attribute::SourceType,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::PlatformName => "platform_name",
            Attribute::DecisionType => "decision_type",
            Attribute::DecisionGround => "decision_ground",
            Attribute::Category => "category",
            Attribute::ContentType => "content_type",
            Attribute::AutomatedDetection => "automated_detection",
            Attribute::AutomatedDecision => "automated_decision",
            Attribute::SourceType => "source_type",
        }
    }

    pub fn from_name(name: &str) -> Option<Attribute> {
        Attribute::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One conjunct: the attribute's value must be one of the listed values.
///
/// Category values are report labels; they are resolved against a
/// taxonomy only when the predicate is compiled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    PlatformName(Vec<String>),
    DecisionType(Vec<DecisionType>),
    DecisionGround(Vec<DecisionGround>),
    Category(Vec<String>),
    ContentType(Vec<ContentType>),
    AutomatedDetection(Vec<bool>),
    AutomatedDecision(Vec<AutomatedDecision>),
    SourceType(Vec<SourceType>),
}

impl Condition {
    pub fn attribute(&self) -> Attribute {
        match self {
            Condition::PlatformName(_) => Attribute::PlatformName,
            Condition::DecisionType(_) => Attribute::DecisionType,
            Condition::DecisionGround(_) => Attribute::DecisionGround,
            Condition::Category(_) => Attribute::Category,
            Condition::ContentType(_) => Attribute::ContentType,
            Condition::AutomatedDetection(_) => Attribute::AutomatedDetection,
            Condition::AutomatedDecision(_) => Attribute::AutomatedDecision,
            Condition::SourceType(_) => Attribute::SourceType,
        }
    }

    fn len(&self) -> usize {
        match self {
            Condition::PlatformName(v) | Condition::Category(v) => v.len(),
            Condition::DecisionType(v) => v.len(),
            Condition::DecisionGround(v) => v.len(),
            Condition::ContentType(v) => v.len(),
            Condition::AutomatedDetection(v) => v.len(),
            Condition::AutomatedDecision(v) => v.len(),
            Condition::SourceType(v) => v.len(),
        }
    }

    fn literals(&self) -> Vec<Value> {
        fn strs<T: ToString>(v: &[T]) -> Vec<Value> {
            v.iter().map(|x| Value::String(x.to_string())).collect()
        }
        match self {
            Condition::PlatformName(v) | Condition::Category(v) => strs(v),
            Condition::DecisionType(v) => strs(v),
            Condition::DecisionGround(v) => strs(v),
            Condition::ContentType(v) => strs(v),
            Condition::AutomatedDetection(v) => v.iter().map(|b| Value::Bool(*b)).collect(),
            Condition::AutomatedDecision(v) => strs(v),
            Condition::SourceType(v) => strs(v),
        }
    }

    /// Parses the literal list for `attribute`.
    pub fn parse(attribute: Attribute, literals: &[Value]) -> Result<Condition, PredicateError> {
        let err = |message: String| PredicateError { attribute: attribute.name().to_string(), message };
        let text = |v: &Value| -> Result<String, PredicateError> {
            match v {
                Value::String(s) => Ok(s.clone()),
                other => Err(err(format!("expected a string literal, found {other}"))),
            }
        };
        fn typed<T: std::str::FromStr>(
            literals: &[Value],
            text: impl Fn(&Value) -> Result<String, PredicateError>,
            err: impl Fn(String) -> PredicateError,
        ) -> Result<Vec<T>, PredicateError>
        where
            T::Err: fmt::Display,
        {
            literals
                .iter()
                .map(|v| text(v)?.parse::<T>().map_err(|e| err(e.to_string())))
                .collect()
        }
        let cond = match attribute {
            Attribute::PlatformName => {
                Condition::PlatformName(literals.iter().map(text).collect::<Result<_, _>>()?)
            }
            Attribute::Category => {
                Condition::Category(literals.iter().map(text).collect::<Result<_, _>>()?)
            }
            Attribute::DecisionType => Condition::DecisionType(typed(literals, text, err)?),
            Attribute::DecisionGround => Condition::DecisionGround(typed(literals, text, err)?),
            Attribute::ContentType => Condition::ContentType(typed(literals, text, err)?),
            Attribute::AutomatedDecision => Condition::AutomatedDecision(typed(literals, text, err)?),
            Attribute::SourceType => Condition::SourceType(typed(literals, text, err)?),
            Attribute::AutomatedDetection => Condition::AutomatedDetection(
                literals
                    .iter()
                    .map(|v| match v {
                        Value::Bool(b) => Ok(*b),
                        Value::String(s) => {
                            crate::sor_model::parse_bool(s).map_err(|e| err(e.to_string()))
                        }
                        other => Err(err(format!("expected a boolean, found {other}"))),
                    })
                    .collect::<Result<_, _>>()?,
            ),
        };
        if cond.len() == 0 {
            return Err(err("value set is empty".to_string()));
        }
        Ok(cond)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("predicate attribute `{attribute}`: {message}")]
pub struct PredicateError {
    pub attribute: String,
    pub message: String,
}

/// A conjunction of [`Condition`]s, at most one per attribute. The empty
/// predicate matches every record.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Predicate {
    conjuncts: Vec<Condition>,
}

impl Predicate {
    pub fn always() -> Self {
        Predicate::default()
    }

    pub fn new(conjuncts: Vec<Condition>) -> Result<Self, PredicateError> {
        let mut conjuncts = conjuncts;
        conjuncts.sort_by_key(Condition::attribute);
        for pair in conjuncts.windows(2) {
            if pair[0].attribute() == pair[1].attribute() {
                return Err(PredicateError {
                    attribute: pair[0].attribute().name().to_string(),
                    message: "attribute constrained twice".to_string(),
                });
            }
        }
        if let Some(c) = conjuncts.iter().find(|c| c.len() == 0) {
            return Err(PredicateError {
                attribute: c.attribute().name().to_string(),
                message: "value set is empty".to_string(),
            });
        }
        Ok(Predicate { conjuncts })
    }

    pub fn conjuncts(&self) -> &[Condition] {
        &self.conjuncts
    }

    pub fn condition(&self, attribute: Attribute) -> Option<&Condition> {
        self.conjuncts.iter().find(|c| c.attribute() == attribute)
    }

    pub fn is_always(&self) -> bool {
        self.conjuncts.is_empty()
    }

    /// Parses `{attribute: literal | [literals], ...}`.
    pub fn from_json(value: &Value) -> Result<Self, PredicateError> {
        let Value::Object(map) = value else {
            return Err(PredicateError {
                attribute: String::new(),
                message: format!("predicate must be an object, found {value}"),
            });
        };
        let mut conjuncts = Vec::with_capacity(map.len());
        for (name, literal) in map {
            let attribute = Attribute::from_name(name).ok_or_else(|| PredicateError {
                attribute: name.clone(),
                message: "not a filterable SoR attribute".to_string(),
            })?;
            let literals = match literal {
                Value::Array(items) => items.clone(),
                single => vec![single.clone()],
            };
            conjuncts.push(Condition::parse(attribute, &literals)?);
        }
        Predicate::new(conjuncts)
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for c in &self.conjuncts {
            let mut literals = c.literals();
            let value = if literals.len() == 1 { literals.remove(0) } else { Value::Array(literals) };
            map.insert(c.attribute().name().to_string(), value);
        }
        Value::Object(map)
    }

    /// Category labels that do not resolve through `taxonomy`.
    pub fn unresolved_categories(&self, taxonomy: &CategoryTaxonomy) -> Vec<String> {
        match self.condition(Attribute::Category) {
            Some(Condition::Category(labels)) => labels
                .iter()
                .filter(|l| taxonomy.resolve(l).is_err())
                .cloned()
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Resolves category labels and lowers every condition to a bitmask.
    pub fn compile(&self, taxonomy: &CategoryTaxonomy) -> Result<CompiledPredicate, Vec<String>> {
        let unresolved = self.unresolved_categories(taxonomy);
        if !unresolved.is_empty() {
            return Err(unresolved);
        }
        let mut out = CompiledPredicate::default();
        fn mask<T: Copy>(values: &[T], ordinal: impl Fn(T) -> u32) -> u32 {
            values.iter().fold(0, |m, v| m | 1 << ordinal(*v))
        }
        for c in &self.conjuncts {
            match c {
                Condition::PlatformName(v) => out.platform = Some(v.clone()),
                Condition::Category(v) => {
                    let mut codes: Vec<CategoryCode> =
                        v.iter().map(|l| taxonomy.resolve(l).expect("checked above").clone()).collect();
                    codes.sort();
                    codes.dedup();
                    out.category = Some(codes);
                }
                Condition::DecisionType(v) => out.decision_type = mask(v, DecisionType::ordinal),
                Condition::DecisionGround(v) => out.decision_ground = mask(v, DecisionGround::ordinal),
                Condition::ContentType(v) => out.content_type = mask(v, ContentType::ordinal),
                Condition::AutomatedDetection(v) => out.automated_detection = mask(v, u32::from),
                Condition::AutomatedDecision(v) => out.automated_decision = mask(v, AutomatedDecision::ordinal),
                Condition::SourceType(v) => out.source_type = mask(v, SourceType::ordinal),
            }
        }
        Ok(out)
    }
}

impl Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        Predicate::from_json(&value).map_err(serde::de::Error::custom)
    }
}

/// Predicate lowered for per-record evaluation. A mask of all ones means
/// the attribute is unconstrained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledPredicate {
    platform: Option<Vec<String>>,
    category: Option<Vec<CategoryCode>>,
    decision_type: u32,
    decision_ground: u32,
    content_type: u32,
    automated_detection: u32,
    automated_decision: u32,
    source_type: u32,
}

impl Default for CompiledPredicate {
    fn default() -> Self {
        CompiledPredicate {
            platform: None,
            category: None,
            decision_type: u32::MAX,
            decision_ground: u32::MAX,
            content_type: u32::MAX,
            automated_detection: u32::MAX,
            automated_decision: u32::MAX,
            source_type: u32::MAX,
        }
    }
}

impl CompiledPredicate {
    #[inline]
    pub fn matches(&self, rec: &SorRecord) -> bool {
        fn hit(mask: u32, ordinal: u32) -> bool {
            mask & (1 << ordinal) != 0
        }
        hit(self.decision_type, rec.decision_type.ordinal())
            && hit(self.decision_ground, rec.decision_ground.ordinal())
            && hit(self.content_type, rec.content_type.ordinal())
            && hit(self.automated_detection, u32::from(rec.automated_detection))
            && hit(self.automated_decision, rec.automated_decision.ordinal())
            && hit(self.source_type, rec.source_type.ordinal())
            && self.category.as_ref().is_none_or(|cs| cs.contains(&rec.category))
            && self.platform.as_ref().is_none_or(|ps| ps.iter().any(|p| *p == rec.platform_name))
    }

    /// Whether a record in this (category, decision type) cell could match,
    /// judging by those two attributes alone.
    pub fn admits_cell(&self, category: &CategoryCode, decision_type: DecisionType) -> bool {
        self.decision_type & (1 << decision_type.ordinal()) != 0
            && self.category.as_ref().is_none_or(|cs| cs.contains(category))
    }
}

/// Which record date a [`Period`] filters on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodField {
    #[default]
    ApplicationDate,
    ContentDate,
    /// The calendar date of `created_at`.
    CreatedAt,
}

impl PeriodField {
    pub const ALL: [PeriodField; 3] = [PeriodField::ApplicationDate, PeriodField::ContentDate, PeriodField::CreatedAt];

    #[inline]
    pub fn date_of(self, rec: &SorRecord) -> NaiveDate {
        match self {
            PeriodField::ApplicationDate => rec.application_date,
            PeriodField::ContentDate => rec.content_date,
            PeriodField::CreatedAt => rec.created_at.date_naive(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("period start {start} is not before end {end}")]
pub struct PeriodError {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

/// Half-open date interval `[start, end)` over one record date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PeriodRepr", into = "PeriodRepr")]
pub struct Period {
    start: NaiveDate,
    end: NaiveDate,
    field: PeriodField,
}

impl Period {
    pub fn new(start: NaiveDate, end: NaiveDate, field: PeriodField) -> Result<Self, PeriodError> {
        if start < end {
            Ok(Period { start, end, field })
        } else {
            Err(PeriodError { start, end })
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn field(&self) -> PeriodField {
        self.field
    }

    #[inline]
    pub fn contains_date(&self, date: NaiveDate) -> bool {
        self.start <= date && date < self.end
    }

    #[inline]
    pub fn contains(&self, rec: &SorRecord) -> bool {
        self.contains_date(self.field.date_of(rec))
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}) on {}",
            timefmt::format_date(self.start),
            timefmt::format_date(self.end),
            serde_json::to_value(self.field).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodRepr {
    #[serde(with = "crate::timefmt::serde_date")]
    start: NaiveDate,
    #[serde(with = "crate::timefmt::serde_date")]
    end: NaiveDate,
    #[serde(default)]
    field: PeriodField,
}

impl TryFrom<PeriodRepr> for Period {
    type Error = PeriodError;

    fn try_from(r: PeriodRepr) -> Result<Self, Self::Error> {
        Period::new(r.start, r.end, r.field)
    }
}

impl From<Period> for PeriodRepr {
    fn from(p: Period) -> Self {
        PeriodRepr { start: p.start, end: p.end, field: p.field }
    }
}
