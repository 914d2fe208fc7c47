use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::reconstruct::ReconstructedSor;
use crate::sor_model::{ContentType, SorRecord};

/// Weights and cut-offs of the scored linkage stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkageConfig {
    pub category_weight: f64,
    pub decision_type_weight: f64,
    pub date_weight: f64,
    /// Day distance at which the date term reaches zero.
    pub max_day_distance: u32,
    pub threshold: f64,
}

impl Default for LinkageConfig {
    fn default() -> Self {
        LinkageConfig {
            category_weight: 0.5,
            decision_type_weight: 0.3,
            date_weight: 0.2,
            max_day_distance: 3,
            threshold: 0.7,
        }
    }
}

impl LinkageConfig {
    pub fn validate(&self) -> Result<(), LinkError> {
        let weights = [self.category_weight, self.decision_type_weight, self.date_weight, self.threshold];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LinkError::Config("weights and threshold must be non-negative numbers".into()));
        }
        if self.max_day_distance == 0 {
            return Err(LinkError::Config("max_day_distance must be at least 1".into()));
        }
        Ok(())
    }

    /// Score of a candidate pair from the same block.
    pub fn score(&self, r: &ReconstructedSor, f: &SorRecord) -> f64 {
        let days = (f.created_at.date_naive() - r.application_date).num_days().unsigned_abs();
        let clamped = days.min(u64::from(self.max_day_distance)) as f64;
        let indicator = |b: bool| if b { 1.0 } else { 0.0 };
        self.category_weight * indicator(r.category == f.category)
            + self.decision_type_weight * indicator(r.decision_type == f.decision_type)
            + self.date_weight * (1.0 - clamped / f64::from(self.max_day_distance))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("duplicate puid `{puid}` among {side} items")]
    DuplicatePuid { side: &'static str, puid: String },
    #[error("duplicate SoR uuid `{0}`")]
    DuplicateUuid(String),
    #[error("duplicate content_id `{0}` among reconstructed SoRs")]
    DuplicateContentId(String),
    #[error("invalid linkage config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkMethod {
    Puid,
    Scored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedPair {
    pub reconstructed: ReconstructedSor,
    pub filed: SorRecord,
    pub method: LinkMethod,
    /// Linkage score; 1 for puid links.
    pub score: f64,
}

/// One-to-one linkage of reconstructed and filed SoRs. All lists are
/// sorted by identifier, so equal inputs in any order give equal output.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Linkage {
    pub pairs: Vec<LinkedPair>,
    pub unmatched_reconstructed: Vec<ReconstructedSor>,
    pub unmatched_filed: Vec<SorRecord>,
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>, err: impl Fn(&str) -> LinkError) -> Result<(), LinkError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(err(id));
        }
    }
    Ok(())
}

type Block = (ContentType, NaiveDate);

/// Links `reconstructed` to `filed`: exact puid matches first, then greedy
/// scored matching within (content type, application date) blocks.
pub fn link(
    reconstructed: Vec<ReconstructedSor>,
    filed: Vec<SorRecord>,
    config: &LinkageConfig,
) -> Result<Linkage, LinkError> {
    config.validate()?;
    check_unique(reconstructed.iter().map(|r| r.content_id.as_str()), |id| LinkError::DuplicateContentId(id.into()))?;
    check_unique(filed.iter().map(|f| f.uuid.as_str()), |id| LinkError::DuplicateUuid(id.into()))?;
    check_unique(reconstructed.iter().filter_map(|r| r.puid.as_deref()), |p| LinkError::DuplicatePuid {
        side: "reconstructed",
        puid: p.into(),
    })?;
    check_unique(filed.iter().filter_map(|f| f.puid.as_deref()), |p| LinkError::DuplicatePuid {
        side: "filed",
        puid: p.into(),
    })?;

    let mut filed_slots: Vec<Option<SorRecord>> = filed.into_iter().map(Some).collect();
    let by_puid: HashMap<String, usize> = filed_slots
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.as_ref()?.puid.clone().map(|p| (p, i)))
        .collect();

    let mut linkage = Linkage::default();
    let mut rest = Vec::new();
    for r in reconstructed {
        match r.puid.as_deref().and_then(|p| by_puid.get(p)) {
            Some(&i) => {
                let filed = filed_slots[i].take().expect("puids are unique");
                linkage.pairs.push(LinkedPair { reconstructed: r, filed, method: LinkMethod::Puid, score: 1.0 });
            }
            None => rest.push(r),
        }
    }

    // Items carrying a puid on both sides name different content; only
    // pairs with at least one side lacking a puid are scored.
    let mut blocks: BTreeMap<Block, (Vec<ReconstructedSor>, Vec<SorRecord>)> = BTreeMap::new();
    for r in rest {
        blocks.entry((r.content_type, r.application_date)).or_default().0.push(r);
    }
    for f in filed_slots.into_iter().flatten() {
        blocks.entry((f.content_type, f.application_date)).or_default().1.push(f);
    }
    for (_, (recs, files)) in blocks {
        let mut candidates = Vec::new();
        for (ri, r) in recs.iter().enumerate() {
            for (fi, f) in files.iter().enumerate() {
                if r.puid.is_some() && f.puid.is_some() {
                    continue;
                }
                let score = config.score(r, f);
                if score >= config.threshold {
                    candidates.push((score, fi, ri));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| files[a.1].uuid.cmp(&files[b.1].uuid))
                .then_with(|| recs[a.2].content_id.cmp(&recs[b.2].content_id))
        });
        let mut rec_slots: Vec<Option<ReconstructedSor>> = recs.into_iter().map(Some).collect();
        let mut file_slots: Vec<Option<SorRecord>> = files.into_iter().map(Some).collect();
        for (score, fi, ri) in candidates {
            if rec_slots[ri].is_some() && file_slots[fi].is_some() {
                linkage.pairs.push(LinkedPair {
                    reconstructed: rec_slots[ri].take().expect("checked"),
                    filed: file_slots[fi].take().expect("checked"),
                    method: LinkMethod::Scored,
                    score,
                });
            }
        }
        linkage.unmatched_reconstructed.extend(rec_slots.into_iter().flatten());
        linkage.unmatched_filed.extend(file_slots.into_iter().flatten());
    }

    linkage.pairs.sort_by(|a, b| pair_order(a, b));
    linkage.unmatched_reconstructed.sort_by(|a, b| a.content_id.cmp(&b.content_id));
    linkage.unmatched_filed.sort_by(|a, b| a.uuid.cmp(&b.uuid));
    Ok(linkage)
}

fn pair_order(a: &LinkedPair, b: &LinkedPair) -> Ordering {
    a.filed.uuid.cmp(&b.filed.uuid).then_with(|| a.reconstructed.content_id.cmp(&b.reconstructed.content_id))
}
