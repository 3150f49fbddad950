//! Brute-force reference solver for small strictly convex QPs.
//!
//! Every inequality row and every finite variable bound is tried as free,
//! active at its lower side or active at its upper side. Each choice gives an
//! equality-constrained QP whose KKT system is solved directly; the cheapest
//! candidate that satisfies all constraints is the optimum.

#![allow(dead_code)]

use deepc::{DMatrix, DVector, QpProblem};

pub struct OracleSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub active_sets_tried: usize,
}

struct Row {
    a: DVector<f64>,
    lo: f64,
    hi: f64,
}

fn inequality_rows(prob: &QpProblem) -> Vec<Row> {
    let n = prob.num_vars();
    let general = (0..prob.a_in.nrows()).map(|i| Row {
        a: prob.a_in.row(i).transpose(),
        lo: prob.l_in[i],
        hi: prob.u_in[i],
    });
    let bounds = (0..n)
        .filter(|&j| prob.lb[j].is_finite() || prob.ub[j].is_finite())
        .map(|j| {
            let mut a = DVector::zeros(n);
            a[j] = 1.0;
            Row {
                a,
                lo: prob.lb[j],
                hi: prob.ub[j],
            }
        });
    general.chain(bounds).collect()
}

/// Minimizer of the objective subject to `active` rows held at `rhs`, or
/// `None` when the KKT matrix is singular.
fn equality_qp(prob: &QpProblem, active: &[DVector<f64>], rhs: &[f64]) -> Option<DVector<f64>> {
    let n = prob.num_vars();
    let k = active.len();
    if k > n {
        return None;
    }
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    for (i, a) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + i, j)] = a[j];
            kkt[(j, n + i)] = a[j];
        }
    }
    let mut b = DVector::zeros(n + k);
    b.rows_mut(0, n).copy_from(&(-&prob.q));
    for (i, v) in rhs.iter().enumerate() {
        b[n + i] = *v;
    }
    let sol = kkt.full_piv_lu().solve(&b)?;
    let x = sol.rows(0, n).into_owned();
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Global minimizer by enumeration of active sets. Practical up to about
/// nine inequality rows.
pub fn enumerate(prob: &QpProblem, feas_tol: f64) -> Option<OracleSolution> {
    let rows = inequality_rows(prob);
    let eq: Vec<DVector<f64>> = (0..prob.a_eq.nrows()).map(|i| prob.a_eq.row(i).transpose()).collect();
    let combos = 3usize.pow(rows.len() as u32);
    let mut best: Option<OracleSolution> = None;
    let mut tried = 0;
    'combo: for mut code in 0..combos {
        let mut active = eq.clone();
        let mut rhs: Vec<f64> = prob.b_eq.iter().copied().collect();
        for row in &rows {
            let side = code % 3;
            code /= 3;
            let value = match side {
                0 => continue,
                1 => row.lo,
                _ => row.hi,
            };
            if !value.is_finite() || (side == 2 && row.lo == row.hi) {
                continue 'combo;
            }
            active.push(row.a.clone());
            rhs.push(value);
        }
        tried += 1;
        let Some(x) = equality_qp(prob, &active, &rhs) else {
            continue;
        };
        let feasible = rows.iter().all(|r| {
            let v = r.a.dot(&x);
            v >= r.lo - feas_tol && v <= r.hi + feas_tol
        }) && eq
            .iter()
            .zip(prob.b_eq.iter())
            .all(|(a, b)| (a.dot(&x) - b).abs() <= feas_tol);
        if !feasible {
            continue;
        }
        let objective = prob.objective(&x);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(OracleSolution {
                x,
                objective,
                active_sets_tried: 0,
            });
        }
    }
    best.map(|mut b| {
        b.active_sets_tried = tried;
        b
    })
}

/// `‖x - clamp(x - (Px + q))‖∞`, zero exactly at the minimizer of a
/// bound-constrained QP.
pub fn projected_gradient_residual(prob: &QpProblem, x: &DVector<f64>) -> f64 {
    let grad = &prob.p * x + &prob.q;
    (0..x.len())
        .map(|j| (x[j] - (x[j] - grad[j]).clamp(prob.lb[j], prob.ub[j])).abs())
        .fold(0.0, f64::max)
}

/// Largest violation of any constraint at `x`.
pub fn max_violation(prob: &QpProblem, x: &DVector<f64>) -> f64 {
    let rows = inequality_rows(prob);
    let ineq = rows.iter().map(|r| {
        let v = r.a.dot(x);
        (r.lo - v).max(v - r.hi).max(0.0)
    });
    let eq = (0..prob.a_eq.nrows()).map(|i| (prob.a_eq.row(i).transpose().dot(x) - prob.b_eq[i]).abs());
    ineq.chain(eq).fold(0.0, f64::max)
}

/// Random strictly convex QP with `n` variables, finite boxes on every
/// variable and `general` two-sided inequality rows. `draw` yields values in
/// `[-1, 1]`.
pub fn random_boxed_qp(n: usize, general: usize, mut draw: impl FnMut() -> f64) -> QpProblem {
    let m = DMatrix::from_fn(n, n, |_, _| draw());
    let p = &m * m.transpose() + DMatrix::identity(n, n) * (0.1 + 0.5 * (draw() + 1.0));
    let q = DVector::from_fn(n, |_, _| 3.0 * draw());
    let lb = DVector::from_fn(n, |_, _| -0.2 - (draw() + 1.0));
    let ub = DVector::from_fn(n, |_, _| 0.2 + (draw() + 1.0));
    let mut prob = QpProblem::new(p, q).with_bounds(lb, ub);
    if general > 0 {
        let a = DMatrix::from_fn(general, n, |_, _| draw());
        let l = DVector::from_fn(general, |_, _| -0.5 - (draw() + 1.0));
        let u = DVector::from_fn(general, |_, _| 0.5 + (draw() + 1.0));
        prob = prob.with_inequalities(a, l, u);
    }
    prob
}
