//! Library surface of the command-line runner, exposed for integration
//! tests.

pub mod commands;
pub mod config;
pub mod manifest;
