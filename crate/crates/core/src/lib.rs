//! Auditing toolkit for DSA transparency data.
//!
//! Two pipelines share one record model:
//!
//! * cross-checking a platform's Transparency Report [`claims`] against
//!   aggregates replicated from its Statements of Reasons ([`aggregate`],
//!   [`crosscheck`]);
//! * verifying filed Statements of Reasons against the platform's own
//!   moderation export ([`verify`]).
//!
//! [`synth`] generates coupled corpora with known, injected faults.

pub mod aggregate;
pub mod claims;
pub mod crosscheck;
pub mod ingest;
pub mod report;
pub mod synth;
pub mod sor_model;
pub mod timefmt;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/numbers.md")]
    mod numbers {}
    #[doc = include_str!("../../../book/src/crosscheck.md")]
    mod crosscheck {}
    #[doc = include_str!("../../../book/src/verify.md")]
    mod verify {}
    #[doc = include_str!("../../../book/src/synth.md")]
    mod synth {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
