//! Consensus and flocking with transmission and reaction delays.
//!
//! The crate simulates the delayed Hegselmann–Krause and Cucker–Smale
//! systems, evaluates sufficient-condition certificates for consensus and
//! flocking together with their guaranteed exponential envelopes, and maps
//! the stability boundary of the two-agent toy equation
//! `u'(t) = -u(t - tau) - u(t - sigma)`.

// `!(x >= 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dde;
pub mod error;
pub mod exec;
pub mod influence;
pub mod models;
pub mod certificates;
pub mod diagnostics;
pub mod spectral;
pub mod sweep;
pub mod cli;

pub use error::{Error, Result};
