//! Core algorithms for two-model inference cascades.
//!
//! A small model scores every example; examples it is uncertain about are
//! deferred to a larger model. This crate holds the pure parts of that
//! workflow:
//!
//! - [`model`]: prediction records, runs, and cross-run alignment
//! - [`uncertainty`]: per-example uncertainty scores (higher = more uncertain)
//! - [`switcher`]: switcher curves, humps, concavity and the example-level
//!   analyses built on top of them
//! - [`calibration`]: turning a target deferral fraction or accuracy into a
//!   routing threshold
//! - [`routing`]: the per-request deferral decision used by a live router
//! - [`synth`]: a seeded synthetic generator of small/large committees
//!
//! The crate is `no_std` (it only needs `alloc`). IO, file formats and the
//! HTTP service live in the companion `cascade` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod calibration;
mod error;
pub mod model;
pub mod routing;
pub mod synth;
pub mod switcher;
pub mod uncertainty;

pub use error::{Error, Result};
