use nalgebra::{DMatrix, DVector};

use super::{finite_rows, stack_rows, symmetrize, ControlProblem, SolveResult};
use crate::behavioral::DataMatrices;
use crate::error::{Error, Result};
use crate::linalg;
use crate::qp::{embed_one_norm, solve_qp, QpProblem, QpSolution};

fn check_inputs(dm: &DataMatrices, u_ini: &[DVector<f64>], y_ini: &[DVector<f64>], cp: &ControlProblem) -> Result<()> {
    cp.validate()?;
    if dm.t_ini != cp.t_ini || dm.horizon != cp.horizon {
        return Err(Error::Dimension(format!(
            "data windows (T_ini, N) = ({}, {}) do not match problem ({}, {})",
            dm.t_ini, dm.horizon, cp.t_ini, cp.horizon
        )));
    }
    if dm.m != cp.m() || dm.p != cp.p() {
        return Err(Error::Dimension(format!(
            "data has (m, p) = ({}, {}), problem expects ({}, {})",
            dm.m,
            dm.p,
            cp.m(),
            cp.p()
        )));
    }
    if u_ini.len() != cp.t_ini || y_ini.len() != cp.t_ini {
        return Err(Error::Dimension(format!(
            "initialization window has {} inputs and {} outputs, expected {}",
            u_ini.len(),
            y_ini.len(),
            cp.t_ini
        )));
    }
    if u_ini.iter().any(|u| u.len() != dm.m) || y_ini.iter().any(|y| y.len() != dm.p) {
        return Err(Error::Dimension("initialization sample with wrong dimension".into()));
    }
    Ok(())
}

/// Cost, boxes and variable count shared by both DeePC variants, expressed
/// over `g` padded with `extra` trailing zero columns.
fn base_problem(dm: &DataMatrices, r_window: &[DVector<f64>], cp: &ControlProblem, extra: usize) -> Result<QpProblem> {
    let (qbar, rbar, rref) = cp.stacked_weights(r_window)?;
    let gd = dm.g_dim();
    let nv = gd + extra;

    // ‖Yf g - r‖²_Q + ‖Uf g‖²_R
    let qy = &qbar * &dm.yf;
    let hg = symmetrize((dm.yf.tr_mul(&qy) + dm.uf.tr_mul(&(&rbar * &dm.uf))) * 2.0);
    let mut p = DMatrix::zeros(nv, nv);
    p.view_mut((0, 0), (gd, gd)).copy_from(&hg);
    let mut q = DVector::zeros(nv);
    q.rows_mut(0, gd).copy_from(&(qy.tr_mul(&rref) * -2.0));
    let offset = rref.dot(&(&qbar * &rref));

    let (ulo, uhi) = cp.input_bounds.stacked(cp.horizon);
    let (ylo, yhi) = cp.output_bounds.stacked(cp.horizon);
    let (mut rows, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
    finite_rows(
        &dm.uf,
        &DVector::zeros(dm.uf.nrows()),
        &ulo,
        &uhi,
        &mut rows,
        &mut lo,
        &mut hi,
    );
    finite_rows(
        &dm.yf,
        &DVector::zeros(dm.yf.nrows()),
        &ylo,
        &yhi,
        &mut rows,
        &mut lo,
        &mut hi,
    );
    let mut a_in = DMatrix::zeros(rows.len(), nv);
    a_in.columns_mut(0, gd).copy_from(&stack_rows(&rows, gd));

    Ok(QpProblem::new(p, q)
        .with_offset(offset)
        .with_inequalities(a_in, DVector::from_vec(lo), DVector::from_vec(hi)))
}

fn package(
    dm: &DataMatrices,
    g: DVector<f64>,
    sigma_y: Option<DVector<f64>>,
    sol: &QpSolution,
    r_window: &[DVector<f64>],
    cp: &ControlProblem,
) -> SolveResult {
    let u = linalg::unstack_samples(&(&dm.uf * &g), dm.m);
    let y = linalg::unstack_samples(&(&dm.yf * &g), dm.p);
    let tracking_cost = cp.tracking_cost(&u, &y, &r_window[..cp.horizon]);
    SolveResult {
        u,
        y,
        g: Some(g),
        sigma_y,
        objective: sol.objective,
        tracking_cost,
        status: sol.status,
        iterations: sol.iterations,
    }
}

/// DeePC: optimize over span coefficients `g` with `u = Uf g`, `y = Yf g`,
/// subject to `Up g = u_ini` and `Yp g = y_ini`.
///
/// Noisy data can make the initialization equalities inconsistent, in which
/// case the returned status is infeasible.
pub fn solve_deepc(
    dm: &DataMatrices,
    u_ini: &[DVector<f64>],
    y_ini: &[DVector<f64>],
    r_window: &[DVector<f64>],
    cp: &ControlProblem,
) -> Result<SolveResult> {
    check_inputs(dm, u_ini, y_ini, cp)?;
    let base = base_problem(dm, r_window, cp, 0)?;
    let a_eq = linalg::vstack(&[&dm.up, &dm.yp]);
    let b_eq = linalg::concat(&[&linalg::stack_samples(u_ini), &linalg::stack_samples(y_ini)]);
    let prob = base.with_equalities(a_eq, b_eq);
    let sol = solve_qp(&prob, &cp.qp)?;
    Ok(package(dm, sol.x.clone(), None, &sol, r_window, cp))
}

/// Regularized DeePC: `Yp g = y_ini + σ_y` with the cost extended by
/// `λ_g ‖g‖₁ + λ_y ‖σ_y‖₁`. The input rows `Up g = u_ini` stay exact.
pub fn solve_regularized_deepc(
    dm: &DataMatrices,
    u_ini: &[DVector<f64>],
    y_ini: &[DVector<f64>],
    r_window: &[DVector<f64>],
    cp: &ControlProblem,
) -> Result<SolveResult> {
    check_inputs(dm, u_ini, y_ini, cp)?;
    let gd = dm.g_dim();
    let ns = dm.yp.nrows();
    let base = base_problem(dm, r_window, cp, ns)?;

    let (mu, my) = (dm.up.nrows(), dm.yp.nrows());
    let mut a_eq = DMatrix::zeros(mu + my, gd + ns);
    a_eq.view_mut((0, 0), (mu, gd)).copy_from(&dm.up);
    a_eq.view_mut((mu, 0), (my, gd)).copy_from(&dm.yp);
    a_eq.view_mut((mu, gd), (my, ns)).fill_with_identity();
    a_eq.view_mut((mu, gd), (my, ns)).scale_mut(-1.0);
    let b_eq = linalg::concat(&[&linalg::stack_samples(u_ini), &linalg::stack_samples(y_ini)]);
    let prob = base.with_equalities(a_eq, b_eq);

    // one-norm terms only on blocks with a positive weight; the penalized
    // range [g | σ] stays contiguous
    let mut weights = Vec::new();
    let mut start = None;
    if cp.lambda_g > 0.0 {
        start = Some(0);
        weights.extend(std::iter::repeat_n(cp.lambda_g, gd));
    }
    if cp.lambda_y > 0.0 {
        start.get_or_insert(gd);
        weights.extend(std::iter::repeat_n(cp.lambda_y, ns));
    }
    let (sol, x) = match start {
        Some(s) => {
            let range = s..s + weights.len();
            let (emb, map) = embed_one_norm(&prob, &DVector::from_vec(weights), range)?;
            let sol = solve_qp(&emb, &cp.qp)?;
            let x = map.recover(&sol.x);
            (sol, x)
        }
        None => {
            let sol = solve_qp(&prob, &cp.qp)?;
            let x = sol.x.clone();
            (sol, x)
        }
    };
    let g = x.rows(0, gd).into_owned();
    let sigma = x.rows(gd, ns).into_owned();
    Ok(package(dm, g, Some(sigma), &sol, r_window, cp))
}
