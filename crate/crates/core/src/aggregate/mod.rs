//! Claim replication over SoR streams.
//!
//! A [`ReplicationPlan`] compiles every claim of a set once; its
//! [`ReplicationCounters`] advance all claims per record in a single pass
//! and merge by addition, so any partitioning of the stream yields the
//! same [`Replication`].

mod predicate;

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::claims::{Claim, ClaimSet, ClaimsError, ExactValue, Metric};
use crate::ingest::DateRange;
use crate::sor_model::{CategoryCode, CategoryTaxonomy, DecisionType, SorRecord};

pub use predicate::{
    Attribute, CompiledPredicate, Condition, Period, PeriodError, PeriodField, Predicate, PredicateError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResultStatus {
    Computed,
    /// A SHARE whose denominator population is empty.
    Undefined,
    /// The claim cannot be evaluated against this corpus, e.g. its
    /// category label has no counterpart in the taxonomy.
    Unreplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub claim_id: String,
    pub metric: Metric,
    pub status: ResultStatus,
    pub matched_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator_count: Option<u64>,
    pub computed_value: Option<ExactValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Records of the platform inside at least one claim period, by
/// (category, decision type).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityCell {
    pub category: CategoryCode,
    pub decision_type: DecisionType,
    pub count: u64,
    /// Some replicable claim's predicate admits this cell.
    pub covered: bool,
}

/// Everything one pass over a corpus yields for a claim set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replication {
    /// One result per claim, ordered by `claim_id`.
    pub results: Vec<AggregateResult>,
    pub activity: Vec<ActivityCell>,
    /// Observed date range of the platform's records, per period field.
    pub coverage: BTreeMap<PeriodField, DateRange>,
}

#[derive(Debug, thiserror::Error)]
pub enum AggregateError {
    #[error("claim `{claim_id}` is invalid: {source}")]
    InvalidClaim {
        claim_id: String,
        #[source]
        source: ClaimsError,
    },
}

struct CompiledClaim {
    period: Period,
    numerator: CompiledPredicate,
    denominator: Option<CompiledPredicate>,
}

struct PlannedClaim {
    claim_id: String,
    metric: Metric,
    platform: String,
    compiled: Result<CompiledClaim, String>,
}

/// Compiled form of a claim set, shared read-only by all counter shards.
pub struct ReplicationPlan {
    claims: Vec<PlannedClaim>,
    periods: Vec<Period>,
}

/// Per-shard counters for a [`ReplicationPlan`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplicationCounters {
    matched: Vec<u64>,
    denominator: Vec<u64>,
    cells: HashMap<CategoryCode, [u64; DecisionType::ALL.len()]>,
    coverage: [Option<DateRange>; 3],
}

fn compile_claim(claim: &Claim, taxonomy: &CategoryTaxonomy) -> Result<CompiledClaim, String> {
    let unresolved = |labels: Vec<String>| {
        format!("category label(s) {} do not resolve in the taxonomy", labels.join(", "))
    };
    let numerator = claim.predicate.compile(taxonomy).map_err(unresolved)?;
    let denominator = claim.denominator_predicate.as_ref().map(|p| p.compile(taxonomy)).transpose().map_err(unresolved)?;
    Ok(CompiledClaim { period: claim.period, numerator, denominator })
}

impl ReplicationPlan {
    /// Validates and compiles `claims`. Claims whose category labels do
    /// not resolve are kept and reported as unreplicable.
    pub fn new<'c>(
        claims: impl IntoIterator<Item = &'c Claim>,
        taxonomy: &CategoryTaxonomy,
    ) -> Result<Self, AggregateError> {
        let mut planned = Vec::new();
        for claim in claims {
            claim
                .validate()
                .map_err(|source| AggregateError::InvalidClaim { claim_id: claim.claim_id.clone(), source })?;
            planned.push(PlannedClaim {
                claim_id: claim.claim_id.clone(),
                metric: claim.metric,
                platform: claim.platform_name.clone(),
                compiled: compile_claim(claim, taxonomy),
            });
        }
        planned.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
        let periods = planned.iter().filter_map(|c| c.compiled.as_ref().ok().map(|c| c.period)).collect();
        Ok(ReplicationPlan { claims: planned, periods })
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn counters(&self) -> ReplicationCounters {
        ReplicationCounters {
            matched: vec![0; self.claims.len()],
            denominator: vec![0; self.claims.len()],
            cells: HashMap::new(),
            coverage: [None; 3],
        }
    }

    /// Advances every claim's counters by one record.
    pub fn observe(&self, counters: &mut ReplicationCounters, rec: &SorRecord) {
        let mut platform_seen = false;
        for (i, claim) in self.claims.iter().enumerate() {
            let Ok(c) = &claim.compiled else { continue };
            if rec.platform_name != claim.platform {
                continue;
            }
            platform_seen = true;
            if !c.period.contains(rec) {
                continue;
            }
            if c.numerator.matches(rec) {
                counters.matched[i] += 1;
            }
            if c.denominator.as_ref().is_some_and(|d| d.matches(rec)) {
                counters.denominator[i] += 1;
            }
        }
        if !platform_seen {
            return;
        }
        for (slot, field) in counters.coverage.iter_mut().zip(PeriodField::ALL) {
            DateRange::include(slot, field.date_of(rec));
        }
        if self.periods.iter().any(|p| p.contains(rec)) {
            let row = counters.cells.entry(rec.category.clone()).or_insert([0; DecisionType::ALL.len()]);
            row[rec.decision_type.ordinal() as usize] += 1;
        }
    }

    /// Adds `other` into `into`. Associative and commutative.
    pub fn merge(&self, into: &mut ReplicationCounters, other: ReplicationCounters) {
        for (a, b) in into.matched.iter_mut().zip(other.matched) {
            *a += b;
        }
        for (a, b) in into.denominator.iter_mut().zip(other.denominator) {
            *a += b;
        }
        for (category, row) in other.cells {
            let mine = into.cells.entry(category).or_insert([0; DecisionType::ALL.len()]);
            for (a, b) in mine.iter_mut().zip(row) {
                *a += b;
            }
        }
        for (slot, range) in into.coverage.iter_mut().zip(other.coverage) {
            if let Some(r) = range {
                DateRange::include(slot, r.min);
                DateRange::include(slot, r.max);
            }
        }
    }

    pub fn finish(&self, counters: ReplicationCounters) -> Replication {
        let results = self
            .claims
            .iter()
            .enumerate()
            .map(|(i, claim)| {
                let base = AggregateResult {
                    claim_id: claim.claim_id.clone(),
                    metric: claim.metric,
                    status: ResultStatus::Computed,
                    matched_count: 0,
                    denominator_count: None,
                    computed_value: None,
                    note: None,
                };
                match &claim.compiled {
                    Err(note) => AggregateResult { status: ResultStatus::Unreplicable, note: Some(note.clone()), ..base },
                    Ok(_) => {
                        let matched = counters.matched[i];
                        match claim.metric {
                            Metric::Count => AggregateResult {
                                matched_count: matched,
                                computed_value: Some(ExactValue::from_integer(matched)),
                                ..base
                            },
                            Metric::Share => {
                                let denominator = counters.denominator[i];
                                match ExactValue::from_integer(matched).div(&ExactValue::from_integer(denominator)) {
                                    Some(v) => AggregateResult {
                                        matched_count: matched,
                                        denominator_count: Some(denominator),
                                        computed_value: Some(v),
                                        ..base
                                    },
                                    None => AggregateResult {
                                        status: ResultStatus::Undefined,
                                        matched_count: matched,
                                        denominator_count: Some(0),
                                        note: Some("denominator population is empty".into()),
                                        ..base
                                    },
                                }
                            }
                        }
                    }
                }
            })
            .collect();

        let compiled: Vec<&CompiledClaim> = self.claims.iter().filter_map(|c| c.compiled.as_ref().ok()).collect();
        let mut activity = Vec::new();
        for (category, row) in counters.cells {
            for (dt, &count) in DecisionType::ALL.iter().zip(row.iter()) {
                if count > 0 {
                    activity.push(ActivityCell {
                        covered: compiled.iter().any(|c| c.numerator.admits_cell(&category, *dt)),
                        category: category.clone(),
                        decision_type: *dt,
                        count,
                    });
                }
            }
        }
        activity.sort_by(|a, b| (&a.category, a.decision_type).cmp(&(&b.category, b.decision_type)));

        let coverage = PeriodField::ALL
            .into_iter()
            .zip(counters.coverage)
            .filter_map(|(f, r)| r.map(|r| (f, r)))
            .collect();
        Replication { results, activity, coverage }
    }
}

/// Replicates every claim of `claims` in one pass over `records`. With no
/// claims the stream is not read.
pub fn replicate_all<I>(claims: &ClaimSet, records: I, taxonomy: &CategoryTaxonomy) -> Result<Replication, AggregateError>
where
    I: IntoIterator,
    I::Item: Borrow<SorRecord>,
{
    let plan = ReplicationPlan::new(&claims.claims, taxonomy)?;
    let mut counters = plan.counters();
    if !plan.is_empty() {
        for rec in records {
            plan.observe(&mut counters, rec.borrow());
        }
    }
    Ok(plan.finish(counters))
}

/// Replicates a single claim.
pub fn replicate_claim<I>(claim: &Claim, records: I, taxonomy: &CategoryTaxonomy) -> Result<AggregateResult, AggregateError>
where
    I: IntoIterator,
    I::Item: Borrow<SorRecord>,
{
    let plan = ReplicationPlan::new([claim], taxonomy)?;
    let mut counters = plan.counters();
    for rec in records {
        plan.observe(&mut counters, rec.borrow());
    }
    Ok(plan.finish(counters).results.remove(0))
}
