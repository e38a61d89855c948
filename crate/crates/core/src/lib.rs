//! Symbolic verification engine for curvature-jet tensor identities.
//!
//! The crate mechanically re-derives, for concrete small jet order, a family
//! of tensor identities, coefficient tables and inequality chains about
//! covariant derivatives of curvature at a point, and cross-checks the
//! symbolic results against a numeric oracle on randomly sampled
//! symmetry-constrained curvature jets.
//!
//! Module map:
//! - [`expr`]: abstract-index tensor expressions, parser and printer
//! - [`canon`]: canonical forms under dummy renaming and slot symmetries
//! - [`rules`]: symmetrisation, trace rules, Bianchi identities, derivative
//!   commutation with curvature corrections
//! - [`reduce`]: reduction to the invariant basis by relation closure and
//!   exact Gaussian elimination
//! - [`comb`]: closed-form coefficients and combinatorial identities
//! - [`proofs`]: scripted verification of each result, producing reports
//! - [`oracle`]: numeric cross-validation on random constrained jets
//! - [`report`]: machine-readable verification reports

pub mod canon;
pub mod rules;
pub mod comb;
pub mod expr;
pub mod reduce;
pub mod ratio;
