//! Predictive controllers built on the QP backend.
//!
//! * [`solve_mpc`]: model-based tracking MPC with the states substituted out.
//! * [`solve_deepc`]: data-driven tracking over span coefficients `g`.
//! * [`solve_regularized_deepc`]: DeePC with a one-norm penalized slack on
//!   the past-output rows and a one-norm penalty on `g`.
//! * [`low_rank_approx`]: SVD truncation of the stacked data matrix.
//! * [`run_receding_horizon`]: closed-loop driver for any of the above.

mod deepc;
mod lowrank;
mod mpc;
mod receding;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::qp::{QpSettings, QpStatus};

pub use deepc::{solve_deepc, solve_regularized_deepc};
pub use lowrank::{low_rank_approx, LowRankCutoff};
pub use mpc::solve_mpc;
pub use receding::{
    reference_window, run_receding_horizon, write_diagnostics_csv, ClosedLoop, Controller, LtiPlant, Plant, RunOptions,
    StateEstimator, StepRecord,
};

/// Per-channel box `lower ≤ v ≤ upper`; infinite entries are unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl Bounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("bound vectors differ in length".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("empty box: lower bound above upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: DVector::from_element(dim, f64::NEG_INFINITY),
            upper: DVector::from_element(dim, f64::INFINITY),
        }
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        Self {
            lower: DVector::from_element(dim, lower),
            upper: DVector::from_element(dim, upper),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().chain(self.upper.iter()).all(|v| v.is_infinite())
    }

    /// Number of channels of `v` outside the box by more than `tol`.
    pub fn violations(&self, v: &DVector<f64>, tol: f64) -> usize {
        v.iter()
            .enumerate()
            .filter(|&(i, &x)| x < self.lower[i] - tol || x > self.upper[i] + tol)
            .count()
    }

    /// Repeats the box over `horizon` stacked samples.
    pub fn stacked(&self, horizon: usize) -> (DVector<f64>, DVector<f64>) {
        let lo: Vec<&DVector<f64>> = vec![&self.lower; horizon];
        let hi: Vec<&DVector<f64>> = vec![&self.upper; horizon];
        (linalg::concat(&lo), linalg::concat(&hi))
    }
}

/// Horizon, weights, constraint boxes and regularization of a tracking problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    /// Prediction horizon `N`.
    pub horizon: usize,
    /// Length of the initialization window.
    pub t_ini: usize,
    /// Output weight (p×p, positive semidefinite).
    pub q: DMatrix<f64>,
    /// Input weight (m×m, positive definite).
    pub r: DMatrix<f64>,
    pub input_bounds: Bounds,
    pub output_bounds: Bounds,
    pub lambda_g: f64,
    pub lambda_y: f64,
    /// Plan inputs applied per solve beyond the first (`shift + 1` in total).
    pub shift: usize,
    pub qp: QpSettings,
}

impl ControlProblem {
    /// Unconstrained problem with identity weights.
    pub fn new(m: usize, p: usize, horizon: usize, t_ini: usize) -> Self {
        Self {
            horizon,
            t_ini,
            q: DMatrix::identity(p, p),
            r: DMatrix::identity(m, m),
            input_bounds: Bounds::unbounded(m),
            output_bounds: Bounds::unbounded(p),
            lambda_g: 0.0,
            lambda_y: 0.0,
            shift: 0,
            qp: QpSettings::default(),
        }
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn p(&self) -> usize {
        self.q.nrows()
    }

    pub fn inputs_per_solve(&self) -> usize {
        self.shift + 1
    }

    pub fn validate(&self) -> Result<()> {
        let (m, p) = (self.m(), self.p());
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.shift >= self.horizon {
            return Err(Error::InvalidArgument(format!(
                "shift {} must be below the horizon {}",
                self.shift, self.horizon
            )));
        }
        if !self.r.is_square() || !self.q.is_square() {
            return Err(Error::Dimension("Q and R must be square".into()));
        }
        if !linalg::is_symmetric(&self.r, 1e-12) || !linalg::is_positive_definite(&self.r) {
            return Err(Error::InvalidArgument("R must be symmetric positive definite".into()));
        }
        if !linalg::is_symmetric(&self.q, 1e-12) || !linalg::is_positive_semidefinite(&self.q, 1e-12) {
            return Err(Error::InvalidArgument(
                "Q must be symmetric positive semidefinite".into(),
            ));
        }
        if self.input_bounds.dim() != m || self.output_bounds.dim() != p {
            return Err(Error::Dimension(format!(
                "bounds have dimensions ({}, {}), expected ({m}, {p})",
                self.input_bounds.dim(),
                self.output_bounds.dim()
            )));
        }
        if !(self.lambda_g >= 0.0 && self.lambda_y >= 0.0) {
            return Err(Error::InvalidArgument(
                "regularization weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Stage cost `Σ ‖y_k - r_k‖²_Q + ‖u_k‖²_R` of given sequences.
    pub fn tracking_cost(&self, u: &[DVector<f64>], y: &[DVector<f64>], reference: &[DVector<f64>]) -> f64 {
        u.iter()
            .zip(y)
            .zip(reference)
            .map(|((u, y), r)| {
                let e = y - r;
                e.dot(&(&self.q * &e)) + u.dot(&(&self.r * u))
            })
            .sum()
    }

    /// Block-diagonal weights and stacked reference over the horizon.
    fn stacked_weights(&self, r_window: &[DVector<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
        if r_window.len() < self.horizon {
            return Err(Error::TooShort {
                len: r_window.len(),
                required: self.horizon,
            });
        }
        if let Some(k) = r_window.iter().position(|r| r.len() != self.p()) {
            return Err(Error::Dimension(format!("reference sample {k} has wrong dimension")));
        }
        let qbar = linalg::block_diag_repeat(&self.q, self.horizon);
        let rbar = linalg::block_diag_repeat(&self.r, self.horizon);
        let rref = linalg::stack_samples(&r_window[..self.horizon]);
        Ok((qbar, rbar, rref))
    }
}

/// Optimal plan returned by every controller.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    /// Span coefficients (DeePC variants only).
    pub g: Option<DVector<f64>>,
    /// Past-output slack (regularized DeePC only).
    pub sigma_y: Option<DVector<f64>>,
    /// Full optimal value including regularization terms.
    pub objective: f64,
    /// Stage cost of the predicted plan.
    pub tracking_cost: f64,
    pub status: QpStatus,
    pub iterations: usize,
}

/// Appends finite-bound rows `lo ≤ M z ≤ hi` for the rows of `m` where the box is finite.
fn finite_rows(
    m: &DMatrix<f64>,
    offset: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    out_a: &mut Vec<DMatrix<f64>>,
    out_l: &mut Vec<f64>,
    out_u: &mut Vec<f64>,
) {
    for i in 0..m.nrows() {
        if lo[i].is_finite() || hi[i].is_finite() {
            out_a.push(m.rows(i, 1).into_owned());
            out_l.push(lo[i] - offset[i]);
            out_u.push(hi[i] - offset[i]);
        }
    }
}

fn stack_rows(rows: &[DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    if rows.is_empty() {
        return DMatrix::zeros(0, ncols);
    }
    let refs: Vec<&DMatrix<f64>> = rows.iter().collect();
    linalg::vstack(&refs)
}

/// Symmetrizes a Hessian assembled from products that may differ by roundoff.
fn symmetrize(p: DMatrix<f64>) -> DMatrix<f64> {
    (&p + p.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_validation_and_violations() {
        assert!(Bounds::new(DVector::from_element(1, 1.0), DVector::from_element(1, 0.0)).is_err());
        let b = Bounds::uniform(2, -1.0, 1.0);
        assert_eq!(b.violations(&DVector::from_vec(vec![0.5, 1.5]), 0.0), 1);
        assert_eq!(b.violations(&DVector::from_vec(vec![-2.0, 1.5]), 0.0), 2);
        assert!(Bounds::unbounded(3).is_unbounded());
    }

    #[test]
    fn problem_validation() {
        let mut cp = ControlProblem::new(1, 1, 3, 1);
        assert!(cp.validate().is_ok());
        cp.r = DMatrix::from_element(1, 1, 0.0);
        assert!(cp.validate().is_err());
        let mut cp = ControlProblem::new(1, 1, 3, 1);
        cp.shift = 3;
        assert!(cp.validate().is_err());
        let mut cp = ControlProblem::new(1, 1, 3, 1);
        cp.lambda_g = -1.0;
        assert!(cp.validate().is_err());
        let mut cp = ControlProblem::new(2, 1, 3, 1);
        cp.q = DMatrix::from_element(1, 1, -1.0);
        assert!(cp.validate().is_err());
    }
}
