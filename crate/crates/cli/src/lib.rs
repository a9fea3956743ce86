//! Sweep runner behind the `ensemble-chain` binary: configuration, parallel
//! evaluation over time grids and parameter lists, CSV output and self-tests.

pub mod config;
pub mod runner;
pub mod selftest;

pub use config::{Cli, CliCommand, Command, Flags, Outcomes, RunConfig};
pub use runner::{render, run, TRACE_HEADER};
