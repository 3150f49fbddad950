//! Data-enabled predictive control.
//!
//! The crate builds non-parametric predictors from raw input/output data
//! (block-Hankel matrices), solves the resulting constrained tracking
//! problems with a convex QP backend, and provides the model-based MPC
//! baseline, a least-squares identification baseline and a nonlinear
//! quadcopter plant for closed-loop experiments.
//!
//! Module map:
//! * [`behavioral`]: Hankel matrices, persistency of excitation, past/future data partition.
//! * [`ltisys`]: state-space simulation, observability/Toeplitz matrices, lag, state reconstruction.
//! * [`qp`]: convex QP solver (interior point, or ADMM) with one-norm embedding.
//! * [`controllers`]: MPC, DeePC, regularized DeePC, low-rank preprocessing, receding-horizon loop.
//! * [`sysid`]: full-state least-squares identification.
//! * [`quadsim`]: 12-state rigid-body quadcopter with measurement noise.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavioral;
pub mod controllers;
pub mod error;
pub mod linalg;
pub mod ltisys;
pub mod qp;
pub mod quadsim;
pub mod sysid;

pub use behavioral::{DataMatrices, Trajectory};
pub use controllers::{Bounds, ClosedLoop, ControlProblem, Controller, LowRankCutoff, SolveResult, StepRecord};
pub use error::{Error, Result};
pub use ltisys::{StateSpace, SystemOrderInfo};
pub use qp::{QpMethod, QpProblem, QpSettings, QpSolution, QpStatus};
pub use quadsim::{QuadParams, QuadState};
pub use sysid::IdResult;

pub use nalgebra::{DMatrix, DVector};
