//! Formal graph-pattern algebra for SPARQL.
//!
//! The crate is organised bottom-up:
//!
//! * [`rdf`] holds ground terms, triples and datasets plus their line format.
//! * [`algebra`] holds the pattern and condition ASTs, their parenthesized
//!   text syntax, variable analysis and FILTER scope validation.
//! * [`mappings`] implements partial mappings and the join / union /
//!   difference / left-outer-join operators over mapping sets.
//! * [`eval`] implements the compositional semantics, the depth-first
//!   semantics, FILTER satisfaction and the membership decision procedures.
//! * [`rewriter`] implements UNION normal form, well-designedness analysis,
//!   the OPT normal form rewrite system and the FILTER identities.
//! * [`harness`] builds SAT-CNF and QBF reduction instances together with
//!   brute-force oracles for them.
//! * [`gen`] produces random datasets and patterns for property suites.
//!
//! Data-parallel work (join partitions, UNION branches, batch checks) runs on
//! rayon when the `parallel` feature is enabled and falls back to sequential
//! loops otherwise; see [`Execution`].

pub mod algebra;
pub mod eval;
pub mod gen;
pub mod harness;
pub mod mappings;
mod par;
pub mod rdf;
pub mod rewriter;
mod syntax;

pub use algebra::{Condition, GraphPattern, TermPattern, TriplePattern, Variable};
pub use eval::{eval_compositional, eval_depth_first, membership, membership_fast, EvalError};
pub use mappings::{Mapping, MappingSet};
pub use par::Execution;
pub use rdf::{Dataset, Term, TermKind, Triple};
pub use syntax::{ParseError, ParseErrorKind};

/// Runs a recursive step on a grown stack when the current one runs low, so
/// patterns nested tens of thousands of levels deep do not overflow.
pub(crate) fn deep<R>(f: impl FnOnce() -> R) -> R {
    stacker::maybe_grow(128 * 1024, 4 * 1024 * 1024, f)
}
