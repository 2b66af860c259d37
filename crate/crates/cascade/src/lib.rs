//! IO, reports, router service and CLI for the `cascade` toolkit.
//!
//! Analyses live in [`cascade_core`]; this crate reads and writes prediction
//! logs, manifests, CSV tables and policy files, and serves routing decisions.

pub mod cli;
pub mod error;
pub mod log;
pub mod manifest;
pub mod policy;
pub mod reports;
pub mod service;
pub mod synth_io;
pub mod table;

pub use error::{Error, Result};
