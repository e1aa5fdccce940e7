//! Command-line front end: JSON run configurations, multi-seed runs, sweeps
//! and the verification suite.

pub mod config;
pub mod harness;
pub mod scenarios;
pub mod verify;
