//! Command-line harness: config parsing, run manifests and the registered
//! check suites.

pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod registry;
pub mod suites;
