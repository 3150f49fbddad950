//! Experiment suites. Each returns an [`ExperimentReport`]; nothing is
//! written until the caller asks for it.

pub mod data;
pub mod equivalence;
pub mod quad;

use anyhow::Result;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::ExperimentReport;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Equivalence => equivalence::run(cfg),
        ExperimentKind::Figure8 => quad::figure8(cfg),
        ExperimentKind::StepStats => quad::step_stats(cfg),
        ExperimentKind::RegSweep => quad::reg_sweep(cfg),
        ExperimentKind::Collect => data::collect(cfg),
        ExperimentKind::Solve => data::solve(cfg),
    }
}
