//! Experiment harness for the `deepc` command-line tool.
//!
//! [`config`] parses the flat configuration format, [`experiments`] runs the
//! suites and [`report`] writes raw CSVs and the PASS/FAIL summary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod report;
pub mod seeds;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::ExperimentReport;
