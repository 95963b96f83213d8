//! Reserve-based admission mechanisms over seat-typed matchings.
//!
//! The crate models markets where schools hold type-specific reserve quotas
//! alongside open seats, and implements the deferred-acceptance mechanisms
//! built on them: two-stage (reserved seats then open seats, or the reverse)
//! and one-stage variants differing in the school-side choice rule. Auditors
//! recompute cutoffs and verify outcomes from the student's perspective;
//! brute-force oracles enumerate matchings, stable sets, equilibrium
//! outcomes, and misreport sweeps on small markets.
//!
//! Module map:
//! - [`model`] — instances, validation, matchings, cutoffs, affordability.
//! - [`choice`] — the single-school seat-typed choice rules and their
//!   exhaustive property checker.
//! - [`engine`] — multi-school deferred acceptance, school-level and
//!   subschool-level.
//! - [`mechanisms`] — the named end-to-end mechanisms and their wire ids.
//! - [`audit`] — stability axioms, verification rules, cutoff conventions.
//! - [`oracle`] — guarded brute-force ground truth.
//! - [`format`] — JSON interchange for instances, preferences, and results.
//! - [`gen`] — seeded deterministic market generator.
//! - [`fixtures`] — bundled example markets with golden outputs.

pub mod audit;
pub mod choice;
pub mod engine;
pub mod fixtures;
pub mod format;
pub mod gen;
pub mod mechanisms;
pub mod model;
pub mod oracle;
