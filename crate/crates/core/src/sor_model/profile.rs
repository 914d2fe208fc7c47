//! Fill-rate profiling of the optional and conditionally required SoR
//! attributes.

use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::enums::{ContentType, DecisionGround, DecisionType};
use super::record::SorRecord;

/// Attributes whose presence is not forced by the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfiledAttribute {
    DecisionGroundReferenceUrl,
    /// Applicable to `ILLEGAL_CONTENT` decisions only.
    IllegalContentExplanation,
    Puid,
    /// Applicable to `decision_type = OTHER` only.
    DecisionTypeOther,
    /// Applicable to `content_type = OTHER` only.
    ContentTypeOther,
}

impl ProfiledAttribute {
    pub const ALL: [ProfiledAttribute; 5] = [
        ProfiledAttribute::DecisionGroundReferenceUrl,
        ProfiledAttribute::IllegalContentExplanation,
        ProfiledAttribute::Puid,
        ProfiledAttribute::DecisionTypeOther,
        ProfiledAttribute::ContentTypeOther,
    ];

    /// `(applicable, filled)` for one record.
    fn observe(self, rec: &SorRecord) -> (bool, bool) {
        match self {
            ProfiledAttribute::DecisionGroundReferenceUrl => {
                (true, rec.decision_ground_reference_url.is_some())
            }
            ProfiledAttribute::IllegalContentExplanation => (
                rec.decision_ground == DecisionGround::IllegalContent,
                rec.illegal_content_explanation.is_some(),
            ),
            ProfiledAttribute::Puid => (true, rec.puid.is_some()),
            ProfiledAttribute::DecisionTypeOther => (
                rec.decision_type == DecisionType::Other,
                rec.decision_type_other.is_some(),
            ),
            ProfiledAttribute::ContentTypeOther => (
                rec.content_type == ContentType::Other,
                rec.content_type_other.is_some(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeFill {
    pub attribute: ProfiledAttribute,
    pub filled: u64,
    pub applicable: u64,
    /// `filled / applicable`; absent when nothing was applicable.
    pub fill_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeFillReport {
    pub records: u64,
    pub attributes: Vec<AttributeFill>,
}

impl AttributeFillReport {
    pub fn get(&self, attribute: ProfiledAttribute) -> &AttributeFill {
        self.attributes
            .iter()
            .find(|a| a.attribute == attribute)
            .expect("report covers every profiled attribute")
    }
}

/// Mergeable counters behind [`informativeness_profile`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProfileAccumulator {
    records: u64,
    // indexed like ProfiledAttribute::ALL: (filled, applicable)
    counts: [(u64, u64); 5],
}

impl ProfileAccumulator {
    pub fn observe(&mut self, rec: &SorRecord) {
        self.records += 1;
        for (slot, attr) in self.counts.iter_mut().zip(ProfiledAttribute::ALL) {
            let (applicable, filled) = attr.observe(rec);
            if applicable {
                slot.1 += 1;
                if filled {
                    slot.0 += 1;
                }
            }
        }
    }

    pub fn merge(&mut self, other: &ProfileAccumulator) {
        self.records += other.records;
        for (mine, theirs) in self.counts.iter_mut().zip(other.counts) {
            mine.0 += theirs.0;
            mine.1 += theirs.1;
        }
    }

    pub fn report(&self) -> AttributeFillReport {
        let attributes = ProfiledAttribute::ALL
            .iter()
            .zip(self.counts)
            .map(|(&attribute, (filled, applicable))| AttributeFill {
                attribute,
                filled,
                applicable,
                fill_rate: (applicable > 0).then(|| filled as f64 / applicable as f64),
            })
            .collect();
        AttributeFillReport { records: self.records, attributes }
    }
}

/// Fill counts and rates for every profiled attribute over `records`.
pub fn informativeness_profile<I>(records: I) -> AttributeFillReport
where
    I: IntoIterator,
    I::Item: Borrow<SorRecord>,
{
    let mut acc = ProfileAccumulator::default();
    for rec in records {
        acc.observe(rec.borrow());
    }
    acc.report()
}
