//! Command-line front end: JSON run configurations, artifact manifests and
//! the verification suite.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod verify;
