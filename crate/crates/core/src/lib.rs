//! Pointwise laboratory for metric connections with skew torsion driven by a
//! nonsymmetric tensor G = g + F on small charts.
//!
//! The layers, bottom to top:
//!
//! * [`tensor`]: dense tensors in a chart basis, least squares, spectral splits.
//! * [`fields`]: analytic structure fields (g, F and their exact partials),
//!   Christoffel symbols, covariant/exterior derivatives of F, the cached
//!   per-point geometry pack, and a finite-difference validator.
//! * [`connection`]: closed-form torsion candidates, contorsion transforms,
//!   connection assembly and the metricity residual.
//! * [`oracle`]: the pointwise linear-system solver that decides whether a
//!   compatible connection exists at a point, independently of any formula.
//! * [`identities`] and [`delta`]: a battery of tensor identities and the
//!   interpreted correction-term tables used by the derivation chains.
//! * [`catalog`]: concrete chart families with exact derivatives plus seeded
//!   point sampling.
//! * [`runner`]: check suites, report records and the CLI entry points.

// Basis-index loops mirror the slot notation of the formulas; iterator
// rewrites would obscure which index sits in which slot.
#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod check;
pub mod connection;
pub mod delta;
pub mod error;
pub mod fields;
pub mod identities;
pub mod oracle;
pub mod runner;
pub mod tensor;

pub use error::{Error, Result};
