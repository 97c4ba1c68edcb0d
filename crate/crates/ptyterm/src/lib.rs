//! Probabilistic call-by-value and call-by-name λ-calculi with exact
//! multidistribution semantics, plus a non-idempotent monadic intersection
//! type system whose derivations certify lower bounds on termination
//! probability and expected runtime.
//!
//! The crate is organized around the pipeline
//! `syntax` → `semantics` (run programs) and
//! `types` → `derivation` (check certificates) → `transform`
//! (rewrite and synthesize certificates), with `stdlib` providing the
//! named example terms and Scott-encoding ingredients used by tests and
//! the `ptyterm` command-line tool.

pub mod cli;
pub mod derivation;
mod lex;
pub mod multidist;
pub mod semantics;
pub mod stdlib;
pub mod syntax;
pub mod transform;
pub mod types;

pub use multidist::{MultiDist, Rat};
pub use syntax::{Mode, Term};
