//! Experiment runner for [`magstark`]: TOML configs, one subcommand per experiment, JSON
//! envelopes with CSV payloads, and multi-grid convergence studies.
//!
//! Exit status of the binary: 0 when every gate passes, 2 when a gate fails, 1 on any error.

// `!(a < b)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod convergence;
pub mod envelope;
pub mod error;
pub mod runner;

pub use config::ExperimentConfig;
pub use envelope::{Gate, Outcome};
pub use error::{CliError, CliResult};
pub use runner::{execute, Experiment};

/// Exit status for a finished run.
pub fn exit_code(outcome: &Outcome) -> i32 {
    if outcome.pass() {
        0
    } else {
        2
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
