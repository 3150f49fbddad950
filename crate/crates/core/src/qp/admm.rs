//! ADMM iteration on `min ½xᵀPx + qᵀx  s.t.  l ≤ Ax ≤ u`.
//!
//! Constraint rows are the equality rows, the general inequality rows and one
//! row per bounded variable. Bound rows are kept implicit (a variable index
//! and a scale factor) instead of being stored as dense identity rows.

use nalgebra::{DMatrix, DVector};

use super::{kkt_residuals, polish, scaling, QpProblem, QpSettings, QpSolution, QpStatus};
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;

/// Scaled working copy of a problem.
pub(super) struct Work {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    /// Dense rows: equalities first, then general inequalities.
    pub a: DMatrix<f64>,
    /// Bounds of every row: dense rows followed by bound rows.
    pub l: DVector<f64>,
    pub u: DVector<f64>,
    /// Variable index of each bound row.
    pub bidx: Vec<usize>,
    pub bcoef: DVector<f64>,
    pub d: DVector<f64>,
    pub e: DVector<f64>,
    pub c: f64,
}

impl Work {
    fn new(prob: &QpProblem) -> Self {
        let n = prob.num_vars();
        let (n_eq, n_in) = (prob.a_eq.nrows(), prob.a_in.nrows());
        let mut a = DMatrix::zeros(n_eq + n_in, n);
        a.rows_mut(0, n_eq).copy_from(&prob.a_eq);
        a.rows_mut(n_eq, n_in).copy_from(&prob.a_in);
        let bidx: Vec<usize> = (0..n)
            .filter(|&j| prob.lb[j].is_finite() || prob.ub[j].is_finite())
            .collect();
        let mut l = Vec::with_capacity(n_eq + n_in + bidx.len());
        let mut u = Vec::with_capacity(l.capacity());
        l.extend(prob.b_eq.iter());
        u.extend(prob.b_eq.iter());
        l.extend(prob.l_in.iter());
        u.extend(prob.u_in.iter());
        l.extend(bidx.iter().map(|&j| prob.lb[j]));
        u.extend(bidx.iter().map(|&j| prob.ub[j]));
        let rows = l.len();
        Self {
            p: prob.p.clone(),
            q: prob.q.clone(),
            a,
            l: DVector::from_vec(l),
            u: DVector::from_vec(u),
            bcoef: DVector::from_element(bidx.len(), 1.0),
            bidx,
            d: DVector::from_element(n, 1.0),
            e: DVector::from_element(rows, 1.0),
            c: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn dense_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn rows(&self) -> usize {
        self.l.len()
    }

    /// `A x` over all rows.
    pub fn ax(&self, x: &DVector<f64>) -> DVector<f64> {
        let md = self.dense_rows();
        let mut out = DVector::zeros(self.rows());
        if md > 0 {
            out.rows_mut(0, md).copy_from(&(&self.a * x));
        }
        for (k, &j) in self.bidx.iter().enumerate() {
            out[md + k] = self.bcoef[k] * x[j];
        }
        out
    }

    /// `Aᵀ y` over all rows.
    pub fn aty(&self, y: &DVector<f64>) -> DVector<f64> {
        let md = self.dense_rows();
        let mut out = if md > 0 {
            self.a.tr_mul(&y.rows(0, md).into_owned())
        } else {
            DVector::zeros(self.n())
        };
        for (k, &j) in self.bidx.iter().enumerate() {
            out[j] += self.bcoef[k] * y[md + k];
        }
        out
    }

    pub fn unscale_x(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.d)
    }

    pub fn unscale_y(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_mul(&self.e) / self.c
    }

    /// Expands working-row duals into the stacked order of the problem,
    /// which carries a bound row for every variable.
    pub fn full_duals(&self, y_unscaled: &DVector<f64>, n: usize) -> DVector<f64> {
        let md = self.dense_rows();
        let mut full = DVector::zeros(md + n);
        full.rows_mut(0, md).copy_from(&y_unscaled.rows(0, md));
        for (k, &j) in self.bidx.iter().enumerate() {
            full[md + j] = y_unscaled[md + k];
        }
        full
    }

    /// Unscaled `(‖Ax - z‖∞, ‖Px + q + Aᵀy‖∞)`.
    fn residuals(&self, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> (f64, f64) {
        let prim = (self.ax(x) - z)
            .iter()
            .zip(self.e.iter())
            .map(|(r, e)| (r / e).abs())
            .fold(0.0, f64::max);
        let stat = &self.p * x + &self.q + self.aty(y);
        let dual = stat
            .iter()
            .zip(self.d.iter())
            .map(|(r, d)| (r / d).abs())
            .fold(0.0, f64::max)
            / self.c;
        (prim, dual)
    }

    /// Primal infeasibility certificate test on a dual increment `dy`.
    fn certifies_infeasible(&self, dy: &DVector<f64>, eps: f64) -> bool {
        let dy_unscaled = self.unscale_y(dy);
        let norm = dy_unscaled.amax();
        if norm < 1e-12 {
            return false;
        }
        let atdy = self.aty(dy);
        let atdy_norm = atdy
            .iter()
            .zip(self.d.iter())
            .map(|(r, d)| (r / d).abs())
            .fold(0.0, f64::max)
            / self.c;
        if atdy_norm > eps * norm {
            return false;
        }
        let mut support = 0.0;
        for i in 0..self.rows() {
            let v = dy_unscaled[i];
            // bounds in original units
            let (li, ui) = (self.l[i] / self.e[i], self.u[i] / self.e[i]);
            if v > 0.0 {
                if !ui.is_finite() {
                    return false;
                }
                support += ui * v;
            } else if v < 0.0 {
                if !li.is_finite() {
                    return false;
                }
                support += li * v;
            }
        }
        support < -eps * norm
    }
}

fn project(v: &mut DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) {
    for i in 0..v.len() {
        v[i] = v[i].max(l[i]).min(u[i]);
    }
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    prim: f64,
    dual: f64,
}

pub(super) fn solve_admm(prob: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    prob.validate()?;
    if !(0.0..2.0).contains(&settings.alpha) || settings.alpha == 0.0 {
        return Err(Error::InvalidArgument("relaxation alpha must lie in (0, 2)".into()));
    }
    if settings.rho <= 0.0 || settings.sigma <= 0.0 {
        return Err(Error::InvalidArgument("rho and sigma must be positive".into()));
    }
    let n = prob.num_vars();
    let mut work = Work::new(prob);
    scaling::equilibrate(&mut work, settings.scaling_passes);
    let md = work.dense_rows();
    let rows = work.rows();

    let rho: DVector<f64> = DVector::from_fn(rows, |i, _| {
        let (l, u) = (work.l[i], work.u[i]);
        if l == u {
            settings.rho * settings.rho_eq_scale
        } else if !l.is_finite() && !u.is_finite() {
            RHO_MIN
        } else {
            settings.rho
        }
    });

    let mut kmat = &work.p + DMatrix::identity(n, n) * settings.sigma;
    if md > 0 {
        let rho_d = rho.rows(0, md);
        let weighted = DMatrix::from_fn(md, n, |i, j| work.a[(i, j)] * rho_d[i]);
        kmat += work.a.tr_mul(&weighted);
    }
    for (k, &j) in work.bidx.iter().enumerate() {
        kmat[(j, j)] += rho[md + k] * work.bcoef[k] * work.bcoef[k];
    }
    let chol = kmat
        .cholesky()
        .ok_or_else(|| Error::Solver("ADMM linear system is not positive definite".into()))?;

    let mut x = DVector::<f64>::zeros(n);
    let mut z = DVector::<f64>::zeros(rows);
    project(&mut z, &work.l, &work.u);
    let mut y = DVector::<f64>::zeros(rows);

    let alpha = settings.alpha;
    let check_every = settings.check_every.max(1);
    let mut best: Option<Iterate> = None;
    let mut prev_guess: Option<polish::ActiveSet> = None;
    let mut last_polished: Option<polish::ActiveSet> = None;

    let finish = |work: &Work, xs: &DVector<f64>, ys: &DVector<f64>, status, iters, polished| {
        let x = work.unscale_x(xs);
        let duals = work.full_duals(&work.unscale_y(ys), n);
        let kkt = kkt_residuals(prob, &x, &duals);
        QpSolution {
            objective: prob.objective(&x),
            x,
            duals,
            status,
            primal_residual: kkt.primal,
            dual_residual: kkt.stationarity,
            iterations: iters,
            polished,
        }
    };

    let try_polish = |work: &Work, active: &polish::ActiveSet, iters: usize| -> Option<QpSolution> {
        let (xs, ys) = polish::solve_reduced(work, active, settings)?;
        let sol = finish(work, &xs, &ys, QpStatus::Optimal, iters, true);
        let kkt = kkt_residuals(prob, &sol.x, &sol.duals);
        (kkt.max() <= settings.eps_abs).then_some(sol)
    };

    for iter in 1..=settings.max_iter {
        let y_prev = y.clone();
        let rhs = &x * settings.sigma - &work.q + work.aty(&(rho.component_mul(&z) - &y));
        let x_tilde = chol.solve(&rhs);
        let z_tilde = work.ax(&x_tilde);
        x = &x_tilde * alpha + &x * (1.0 - alpha);
        let z_relaxed = &z_tilde * alpha + &z * (1.0 - alpha);
        let mut z_next = &z_relaxed + y.component_div(&rho);
        project(&mut z_next, &work.l, &work.u);
        y += rho.component_mul(&(&z_relaxed - &z_next));
        z = z_next;

        if iter % check_every != 0 && iter != settings.max_iter {
            continue;
        }
        let (prim, dual) = work.residuals(&x, &z, &y);
        if best.as_ref().is_none_or(|b| prim.max(dual) < b.prim.max(b.dual)) {
            best = Some(Iterate {
                x: x.clone(),
                y: y.clone(),
                prim,
                dual,
            });
        }

        let converged = prim <= settings.eps_abs && dual <= settings.eps_abs;
        if settings.polish {
            let guess = polish::ActiveSet::guess(&work, &z, &y);
            let settled = prev_guess.as_ref() == Some(&guess);
            let fresh = last_polished.as_ref() != Some(&guess);
            if (settled || converged) && fresh {
                if let Some(sol) = try_polish(&work, &guess, iter) {
                    return Ok(sol);
                }
                last_polished = Some(guess.clone());
            }
            prev_guess = Some(guess);
        }
        if converged {
            let sol = finish(&work, &x, &y, QpStatus::Optimal, iter, false);
            let kkt = kkt_residuals(prob, &sol.x, &sol.duals);
            if kkt.max() <= settings.eps_abs {
                return Ok(sol);
            }
        }
        if work.certifies_infeasible(&(&y - &y_prev), settings.eps_infeasible) {
            return Ok(finish(&work, &x, &y, QpStatus::Infeasible, iter, false));
        }
    }

    let best = best.expect("at least one residual check");
    Ok(finish(
        &work,
        &best.x,
        &best.y,
        QpStatus::MaxIterations,
        settings.max_iter,
        false,
    ))
}
