//! The statement-of-reasons record schema: closed vocabularies, the
//! category taxonomy, row validation and attribute fill profiling.

mod enums;
mod profile;
pub(crate) mod record;
mod taxonomy;

pub use enums::{
    parse_bool, AutomatedDecision, ContentType, DecisionGround, DecisionType, SourceType,
    UnknownVariant,
};
pub use profile::{
    informativeness_profile, AttributeFill, AttributeFillReport, ProfileAccumulator,
    ProfiledAttribute,
};
pub(crate) use enums::vocabulary;
pub(crate) use record::RowCursor;
pub use record::{validate_record, QuarantineEntry, QuarantineReason, RawRow, SorRecord, SOR_COLUMNS};
pub use taxonomy::{CategoryCode, CategoryTaxonomy, TaxonomyError, TaxonomyFile};
