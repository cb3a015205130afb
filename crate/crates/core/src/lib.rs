//! Fock-space simulation of post-selected linear-optical teleportation fed by
//! a double-pass type-II down-conversion source.
//!
//! The pipeline is pure-state up to measurement:
//!
//! 1. [`pdc::double_pass_source`] expands the two pair-creation passes
//!    (beams 2&3, then 1&4) to a chosen pair order.
//! 2. [`experiment::build_circuit`] wires rotators, PBS, BS, polarizers and
//!    optional detector loss as [`optics::ModeUnitary`] elements.
//! 3. [`detection::pattern_probability`] applies a coincidence condition and
//!    returns per-branch probabilities with conditional density operators of
//!    the output beam.
//!
//! [`oracle`] re-derives the same numbers through a dense, generator-based
//! engine for cross-checking.

pub mod detection;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod optics;
pub mod oracle;
pub mod pdc;

pub use error::{Result, SimError};
