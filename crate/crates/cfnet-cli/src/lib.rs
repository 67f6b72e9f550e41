//! Config-driven pipeline behind the `cfnet` binary.
//!
//! `fit` writes `theta.json`, `history.csv` and `diagnostics.json`; the
//! pricing and comparison commands read `theta.json` back and refuse it when
//! it was fitted for a different model or transform.

pub mod commands;
pub mod config;
pub mod error;
pub mod theta;

pub use config::RunConfig;
pub use error::CliError;
pub use theta::ThetaFile;
