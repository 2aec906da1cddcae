//! Signal-to-noise models for detecting a phase-imprinting cloak with
//! entangled microwave light, together with an exact truncated Fock-space
//! oracle used to check every closed-form moment.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: density matrices, ladder operators and the optical channels
//!   (beam splitter, phase shifter, two-mode squeezer) on a truncated basis.
//! * [`analytic`]: closed-form SNRs for the coherent-state, quadrature and
//!   Josephson-mixer protocols, plus the regime formulas built on them.
//! * [`engine`]: pipelines that run the oracle, compare it against the
//!   closed forms, sweep parameter grids and locate gain boundaries.
//! * [`report`]: the flat key-value configuration format and CSV/JSON tables.
//! * [`cli`]: the `qi-cloak` command-line front end.

// `!(x >= 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod engine;
mod error;
pub mod fock;
pub mod report;

pub use analytic::{ProtocolParams, SnrBreakdown};
pub use error::{Error, Result};
