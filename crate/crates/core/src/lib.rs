//! Exact projected model counting with dynamic blocked clause elimination.
//!
//! The engine counts the models of `∃X.Σ` for a CNF formula `Σ` and a
//! projection set `X` of forgotten variables. Search is DPLL-style with
//! unit propagation, connected-component decomposition and component
//! caching. On top of that, clauses blocked by a literal over `X` are
//! removed — optionally at every decision level, driven by a watched-triple
//! manager whose updates are cheap to undo on backtracking.
//!
//! Modules:
//! - [`formula`]: CNF representation with stable clause ids, occurrence
//!   index, resolution and the DIMACS dialect with `c p show` lines.
//! - [`bcp`]: conditioning and Boolean constraint propagation over a
//!   trail-backed mutable view of one formula.
//! - [`bce`]: the [`bce::BlockedClauseManager`] tracking blocked-clause
//!   candidates through watched triples.
//! - [`counter`]: the counting engine with its `off`/`pre`/`dyn` modes.
//! - [`oracle`]: brute-force references and a seeded instance generator
//!   used to validate everything else.

pub mod bce;
pub mod bcp;
pub mod counter;
pub mod formula;
pub mod oracle;

pub use counter::{count, count_with, BceMode, CountResult, CountStats, CounterOptions};
pub use formula::{Clause, ClauseId, Lit, ParseError, ProjectedFormula, Var};
