use nalgebra::DVector;

use super::{finite_rows, stack_rows, symmetrize, ControlProblem, SolveResult};
use crate::error::{Error, Result};
use crate::linalg;
use crate::ltisys::StateSpace;
use crate::qp::{solve_qp, QpProblem};

/// Tracking MPC from the state estimate `x_hat`.
///
/// Outputs are eliminated through `y = O x̂ + T u`, so the decision variable is
/// the stacked input sequence. Input boxes become variable bounds and finite
/// output boxes become inequality rows.
pub fn solve_mpc(
    ss: &StateSpace,
    x_hat: &DVector<f64>,
    r_window: &[DVector<f64>],
    cp: &ControlProblem,
) -> Result<SolveResult> {
    cp.validate()?;
    if ss.m() != cp.m() || ss.p() != cp.p() {
        return Err(Error::Dimension(format!(
            "model has (m, p) = ({}, {}), problem expects ({}, {})",
            ss.m(),
            ss.p(),
            cp.m(),
            cp.p()
        )));
    }
    if x_hat.len() != ss.n() {
        return Err(Error::Dimension(format!(
            "state estimate has length {}, expected {}",
            x_hat.len(),
            ss.n()
        )));
    }
    let (n_h, m, p) = (cp.horizon, cp.m(), cp.p());
    let (qbar, rbar, rref) = cp.stacked_weights(r_window)?;
    let free = ss.observability_matrix(n_h) * x_hat;
    let t = ss.toeplitz_impulse(n_h);

    // ‖free + T u - r‖²_Q + ‖u‖²_R
    let err0 = &free - &rref;
    let qt = &qbar * &t;
    let hess = symmetrize((t.tr_mul(&qt) + &rbar) * 2.0);
    let lin = qt.tr_mul(&err0) * 2.0;
    let offset = err0.dot(&(&qbar * &err0));

    let (ylo, yhi) = cp.output_bounds.stacked(n_h);
    let (mut rows, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
    finite_rows(&t, &free, &ylo, &yhi, &mut rows, &mut lo, &mut hi);
    let (ulo, uhi) = cp.input_bounds.stacked(n_h);

    let prob = QpProblem::new(hess, lin)
        .with_offset(offset)
        .with_inequalities(stack_rows(&rows, n_h * m), DVector::from_vec(lo), DVector::from_vec(hi))
        .with_bounds(ulo, uhi);
    let sol = solve_qp(&prob, &cp.qp)?;

    let y_stack = &free + &t * &sol.x;
    let u = linalg::unstack_samples(&sol.x, m);
    let y = linalg::unstack_samples(&y_stack, p);
    let tracking_cost = cp.tracking_cost(&u, &y, &r_window[..n_h]);
    Ok(SolveResult {
        u,
        y,
        g: None,
        sigma_y: None,
        objective: sol.objective,
        tracking_cost,
        status: sol.status,
        iterations: sol.iterations,
    })
}
