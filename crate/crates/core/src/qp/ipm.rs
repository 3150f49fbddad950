//! Primal-dual interior-point method (Mehrotra predictor-corrector).
//!
//! Inequalities are collected as `G x + s = h, s ≥ 0`: each finite side of
//! a general row and each finite variable bound is one row. Equal-sided rows
//! and fixed variables join the equality block. Newton systems are reduced
//! to the variables alone and, when the problem came out of a one-norm
//! embedding, split pairs `v = v⁺ - v⁻` are folded back into a single
//! column so the factorized matrix keeps the original size.

use nalgebra::{DMatrix, DVector};

use super::{kkt_residuals, QpProblem, QpSettings, QpSolution, QpStatus};
use crate::error::{Error, Result};
use crate::linalg;

/// Origin of an equality row, for mapping multipliers back.
#[derive(Debug, Clone, Copy)]
enum EqRow {
    Eq(usize),
    In(usize),
    Fixed(usize),
}

/// Origin of an inequality row; `upper` rows read `a x ≤ u`, lower rows
/// `-a x ≤ -l`.
#[derive(Debug, Clone, Copy)]
struct InRow {
    index: usize,
    upper: bool,
}

struct Layout {
    n: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    eq_rows: Vec<EqRow>,
    g: DMatrix<f64>,
    g_rows: Vec<InRow>,
    /// Bound rows: variable and sign (+1 upper, -1 lower).
    bounds: Vec<(usize, f64)>,
    /// Right-hand side `h` for dense rows followed by bound rows.
    h: DVector<f64>,
    /// Variables kept in the reduced system and, for folded pairs, the
    /// index of the `v⁻` partner.
    kept: Vec<(usize, Option<usize>)>,
    p_k: DMatrix<f64>,
    a_k: DMatrix<f64>,
    /// Distinct general rows restricted to kept columns; both sides of a
    /// two-sided row share one entry.
    src_k: DMatrix<f64>,
    /// Distinct row behind each dense inequality row.
    src_of: Vec<usize>,
}

impl Layout {
    fn new(prob: &QpProblem) -> Self {
        let n = prob.num_vars();
        let mut eq_rows = Vec::new();
        let mut eq_data: Vec<(DVector<f64>, f64)> = Vec::new();
        for i in 0..prob.a_eq.nrows() {
            eq_rows.push(EqRow::Eq(i));
            eq_data.push((prob.a_eq.row(i).transpose(), prob.b_eq[i]));
        }
        let mut g_rows = Vec::new();
        let mut g_data: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut src_rows = Vec::new();
        let mut src_of = Vec::new();
        for i in 0..prob.a_in.nrows() {
            let (l, u) = (prob.l_in[i], prob.u_in[i]);
            let row = prob.a_in.row(i).transpose();
            if l == u {
                eq_rows.push(EqRow::In(i));
                eq_data.push((row, l));
                continue;
            }
            if !u.is_finite() && !l.is_finite() {
                continue;
            }
            if u.is_finite() {
                g_rows.push(InRow { index: i, upper: true });
                g_data.push((row.clone(), u));
                src_of.push(src_rows.len());
            }
            if l.is_finite() {
                g_rows.push(InRow { index: i, upper: false });
                g_data.push((-row, -l));
                src_of.push(src_rows.len());
            }
            src_rows.push(i);
        }
        let mut bounds = Vec::new();
        let mut h_bounds = Vec::new();
        for j in 0..n {
            let (l, u) = (prob.lb[j], prob.ub[j]);
            if l == u {
                eq_rows.push(EqRow::Fixed(j));
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                eq_data.push((e, l));
                continue;
            }
            if u.is_finite() {
                bounds.push((j, 1.0));
                h_bounds.push(u);
            }
            if l.is_finite() {
                bounds.push((j, -1.0));
                h_bounds.push(-l);
            }
        }
        let a = DMatrix::from_fn(eq_data.len(), n, |i, j| eq_data[i].0[j]);
        let b = DVector::from_fn(eq_data.len(), |i, _| eq_data[i].1);
        let g = DMatrix::from_fn(g_data.len(), n, |i, j| g_data[i].0[j]);
        let h = DVector::from_iterator(
            g_data.len() + h_bounds.len(),
            g_data.iter().map(|(_, v)| *v).chain(h_bounds.iter().copied()),
        );

        let pairs = valid_pairs(prob, &bounds);
        let minus: Vec<bool> = {
            let mut v = vec![false; n];
            for &(_, m) in &pairs {
                v[m] = true;
            }
            v
        };
        let partner: Vec<Option<usize>> = {
            let mut v = vec![None; n];
            for &(p, m) in &pairs {
                v[p] = Some(m);
            }
            v
        };
        let kept: Vec<(usize, Option<usize>)> = (0..n).filter(|&j| !minus[j]).map(|j| (j, partner[j])).collect();
        let cols: Vec<usize> = kept.iter().map(|k| k.0).collect();
        let p_k = DMatrix::from_fn(cols.len(), cols.len(), |i, j| prob.p[(cols[i], cols[j])]);
        let a_k = a.select_columns(&cols);
        let src_k = prob.a_in.select_rows(&src_rows).select_columns(&cols);
        Self {
            n,
            a,
            b,
            eq_rows,
            g,
            g_rows,
            bounds,
            h,
            kept,
            p_k,
            a_k,
            src_k,
            src_of,
        }
    }

    fn m(&self) -> usize {
        self.h.len()
    }

    fn md(&self) -> usize {
        self.g.nrows()
    }

    fn g_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let md = self.md();
        let mut out = DVector::zeros(self.m());
        if md > 0 {
            out.rows_mut(0, md).copy_from(&(&self.g * x));
        }
        for (k, &(j, sign)) in self.bounds.iter().enumerate() {
            out[md + k] = sign * x[j];
        }
        out
    }

    fn g_tr_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let md = self.md();
        let mut out = if md > 0 {
            self.g.tr_mul(&v.rows(0, md).into_owned())
        } else {
            DVector::zeros(self.n)
        };
        for (k, &(j, sign)) in self.bounds.iter().enumerate() {
            out[j] += sign * v[md + k];
        }
        out
    }

    fn a_tr_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.a.nrows() == 0 {
            DVector::zeros(self.n)
        } else {
            self.a.tr_mul(y)
        }
    }

    fn a_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.a.nrows() == 0 {
            DVector::zeros(0)
        } else {
            &self.a * x
        }
    }
}

/// Split pairs recorded by the one-norm embedding, kept only when the
/// problem data still has the mirrored-column structure they promise.
fn valid_pairs(prob: &QpProblem, bounds: &[(usize, f64)]) -> Vec<(usize, usize)> {
    let pairs = &prob.split_pairs;
    if pairs.is_empty() {
        return Vec::new();
    }
    let n = prob.num_vars();
    let mut seen = vec![false; n];
    let mut bound_count = vec![0usize; n];
    for &(j, _) in bounds {
        bound_count[j] += 1;
    }
    let mirrored = |m: &DMatrix<f64>, p: usize, q: usize| {
        m.nrows() == 0 || m.column(p).iter().zip(m.column(q).iter()).all(|(a, b)| *a == -*b)
    };
    for &(p, q) in pairs {
        if p >= n || q >= n || p == q || seen[p] || seen[q] {
            return Vec::new();
        }
        seen[p] = true;
        seen[q] = true;
        let nonneg = |j: usize| prob.lb[j] == 0.0 && prob.ub[j] == f64::INFINITY && bound_count[j] == 1;
        if !nonneg(p) || !nonneg(q) {
            return Vec::new();
        }
        if !mirrored(&prob.p, p, q) || !mirrored(&prob.a_eq, p, q) || !mirrored(&prob.a_in, p, q) {
            return Vec::new();
        }
    }
    pairs.clone()
}

/// Factorized reduced Newton system for one barrier weighting.
struct Newton<'a> {
    lay: &'a Layout,
    /// Barrier diagonal from bound rows, per variable.
    d: DVector<f64>,
    h_true: DMatrix<f64>,
    h_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `H⁻¹ A_kᵀ` and the Cholesky factor of `A_k H⁻¹ A_kᵀ + δ I`.
    schur: Option<(DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)>,
    refine: usize,
}

impl<'a> Newton<'a> {
    fn new(lay: &'a Layout, w: &DVector<f64>, delta: f64, refine: usize) -> Option<Self> {
        let md = lay.md();
        let mut d = DVector::zeros(lay.n);
        for (k, &(j, _)) in lay.bounds.iter().enumerate() {
            d[j] += w[md + k];
        }
        let e = DVector::from_iterator(
            lay.kept.len(),
            lay.kept.iter().map(|&(j, partner)| match partner {
                Some(q) => d[j] * d[q] / (d[j] + d[q]),
                None => d[j],
            }),
        );
        let mut h = lay.p_k.clone();
        if md > 0 {
            let mut ws = DVector::zeros(lay.src_k.nrows());
            for (k, &src) in lay.src_of.iter().enumerate() {
                ws[src] += w[k];
            }
            let mut wg = lay.src_k.clone();
            for (i, mut row) in wg.row_iter_mut().enumerate() {
                row *= ws[i];
            }
            h += lay.src_k.tr_mul(&wg);
        }
        for i in 0..e.len() {
            h[(i, i)] += e[i];
        }
        let h = (&h + h.transpose()) * 0.5;
        let scale = h.diagonal().amax().max(1.0);
        let mut reg = delta * scale;
        let mut factor = None;
        for _ in 0..8 {
            let mut hr = h.clone();
            for i in 0..hr.nrows() {
                hr[(i, i)] += reg;
            }
            if let Some(c) = hr.cholesky() {
                factor = Some(c);
                break;
            }
            reg *= 100.0;
        }
        let h_chol = factor?;
        let schur = if lay.a_k.nrows() > 0 {
            let x = h_chol.solve(&lay.a_k.transpose());
            let mut s = &lay.a_k * &x;
            s = (&s + s.transpose()) * 0.5;
            let sscale = s.diagonal().amax().max(1e-300);
            let mut sreg = delta * sscale;
            let mut sf = None;
            for _ in 0..8 {
                let mut sr = s.clone();
                for i in 0..sr.nrows() {
                    sr[(i, i)] += sreg;
                }
                if let Some(c) = sr.cholesky() {
                    sf = Some(c);
                    break;
                }
                sreg *= 100.0;
            }
            Some((x, sf?))
        } else {
            None
        };
        Some(Self {
            lay,
            d,
            h_true: h,
            h_chol,
            schur,
            refine,
        })
    }

    fn solve_reduced(&self, rx: &DVector<f64>, ry: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.schur {
            None => (self.h_chol.solve(rx), DVector::zeros(0)),
            Some((x, s)) => {
                let hinv_rx = self.h_chol.solve(rx);
                let dy = s.solve(&(&self.lay.a_k * &hinv_rx - ry));
                let dx = hinv_rx - x * &dy;
                (dx, dy)
            }
        }
    }

    /// Solves `[H Aᵀ; A 0] (dx, dy) = (rx, ry)` in full coordinates.
    fn solve(&self, rx: &DVector<f64>, ry: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let lay = self.lay;
        let rr = DVector::from_iterator(
            lay.kept.len(),
            lay.kept.iter().map(|&(j, partner)| match partner {
                Some(q) => (self.d[q] * rx[j] - self.d[j] * rx[q]) / (self.d[j] + self.d[q]),
                None => rx[j],
            }),
        );
        let (mut dk, mut dy) = self.solve_reduced(&rr, ry);
        for _ in 0..self.refine {
            let mut res_x = &rr - &self.h_true * &dk;
            if lay.a_k.nrows() > 0 {
                res_x -= lay.a_k.tr_mul(&dy);
            }
            let res_y = if lay.a_k.nrows() > 0 {
                ry - &lay.a_k * &dk
            } else {
                DVector::zeros(0)
            };
            let (cx, cy) = self.solve_reduced(&res_x, &res_y);
            dk += cx;
            dy += cy;
        }
        let mut dx = DVector::zeros(lay.n);
        for (i, &(j, partner)) in lay.kept.iter().enumerate() {
            match partner {
                Some(q) => {
                    let a = (rx[j] + rx[q] + self.d[q] * dk[i]) / (self.d[j] + self.d[q]);
                    dx[j] = a;
                    dx[q] = a - dk[i];
                }
                None => dx[j] = dk[i],
            }
        }
        (dx, dy)
    }
}

/// Centrality bound for accepted steps.
const NEIGHBORHOOD: f64 = 1e-2;

/// Iterations without improvement before an acceptable iterate is returned.
const STALL: usize = 4;

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

struct State {
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    z: DVector<f64>,
}

/// Multipliers in the stacked order of [`QpProblem::stacked_constraints`].
fn stacked_duals(prob: &QpProblem, lay: &Layout, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    let (me, mi, n) = (prob.a_eq.nrows(), prob.a_in.nrows(), prob.num_vars());
    let mut out = DVector::zeros(me + mi + n);
    for (k, row) in lay.eq_rows.iter().enumerate() {
        match *row {
            EqRow::Eq(i) => out[i] = y[k],
            EqRow::In(i) => out[me + i] = y[k],
            EqRow::Fixed(j) => out[me + mi + j] = y[k],
        }
    }
    for (k, row) in lay.g_rows.iter().enumerate() {
        let sign = if row.upper { 1.0 } else { -1.0 };
        out[me + row.index] += sign * z[k];
    }
    let md = lay.md();
    for (k, &(j, sign)) in lay.bounds.iter().enumerate() {
        out[me + mi + j] += sign * z[md + k];
    }
    out
}

pub(super) fn solve_ipm(prob: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    let lay = Layout::new(prob);
    let (m, me) = (lay.m(), lay.a.nrows());
    if me > 0 {
        // inconsistent equalities need no iteration to be recognized
        let x_ls = linalg::lstsq(&lay.a, &lay.b, 1e-12);
        let gap = (&lay.a * &x_ls - &lay.b).amax();
        if gap > settings.eps_infeasible.sqrt() * (1.0 + lay.b.amax()) {
            let duals = DVector::zeros(prob.a_eq.nrows() + prob.a_in.nrows() + prob.num_vars());
            let kkt = kkt_residuals(prob, &x_ls, &duals);
            return Ok(QpSolution {
                objective: prob.objective(&x_ls),
                x: x_ls,
                duals,
                status: QpStatus::Infeasible,
                primal_residual: kkt.primal,
                dual_residual: kkt.stationarity,
                iterations: 0,
                polished: false,
            });
        }
    }
    let delta = settings.ipm_regularization;
    let refine = settings.ipm_refine_iter;

    // start from the equality-constrained minimizer with unit barrier weights
    let ones = DVector::from_element(m, 1.0);
    let start = Newton::new(&lay, &ones, delta, refine)
        .ok_or_else(|| Error::Solver("interior-point initialization failed".into()))?;
    let (x0, y0) = start.solve(&(-&prob.q + lay.g_tr_mul(&lay.h)), &lay.b);
    let s_hat = &lay.h - lay.g_mul(&x0);
    let interior = |v: DVector<f64>| {
        let low = v.iter().copied().fold(f64::INFINITY, f64::min);
        if m == 0 || low > 0.0 {
            v
        } else {
            v.add_scalar(1.0 - low)
        }
    };
    let mut st = State {
        x: x0,
        y: y0,
        z: interior(-&s_hat),
        s: interior(s_hat),
    };

    let scale_q = 1.0 + prob.q.amax();
    let scale_b = 1.0 + lay.b.amax().max(lay.h.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
    let tol = settings.ipm_tol;

    let finish = |st: &State, status: QpStatus, iters: usize| {
        let duals = stacked_duals(prob, &lay, &st.y, &st.z);
        let kkt = kkt_residuals(prob, &st.x, &duals);
        QpSolution {
            objective: prob.objective(&st.x),
            x: st.x.clone(),
            duals,
            status,
            primal_residual: kkt.primal,
            dual_residual: kkt.stationarity,
            iterations: iters,
            polished: false,
        }
    };

    let mut best: Option<(f64, usize, State)> = None;
    for iter in 0..=settings.ipm_max_iter {
        let r_d = &prob.p * &st.x + &prob.q + lay.a_tr_mul(&st.y) + lay.g_tr_mul(&st.z);
        let r_p = lay.a_mul(&st.x) - &lay.b;
        let r_g = lay.g_mul(&st.x) + &st.s - &lay.h;
        let mu = if m > 0 { st.s.dot(&st.z) / m as f64 } else { 0.0 };
        let prim = r_p.amax().max(r_g.amax());
        let dual = r_d.amax();

        let small = prim <= tol * scale_b && dual <= tol * scale_q && mu <= tol;
        let close = prim <= 1e-4 * scale_b && dual <= 1e-4 * scale_q;
        if close || small {
            let sol = finish(&st, QpStatus::Optimal, iter);
            let kkt = scaled_kkt(prob, &sol.x, &sol.duals);
            if (small || kkt <= settings.eps_abs * 1e-2) && kkt <= settings.eps_abs {
                return Ok(sol);
            }
            if best.as_ref().is_none_or(|(b, _, _)| kkt < *b) {
                let copy = State {
                    x: st.x.clone(),
                    y: st.y.clone(),
                    s: st.s.clone(),
                    z: st.z.clone(),
                };
                best = Some((kkt, iter, copy));
            }
        }
        // rounding can stall the residuals short of the internal tolerance
        if let Some((b, at, kept)) = &best {
            if *b <= settings.eps_abs && iter >= at + STALL {
                return Ok(finish(kept, QpStatus::Optimal, iter));
            }
        }
        if certifies_infeasible(&lay, &st, settings.eps_infeasible) {
            return Ok(finish(&st, QpStatus::Infeasible, iter));
        }
        if iter == settings.ipm_max_iter {
            break;
        }

        let w = st.z.component_div(&st.s);
        let Some(newton) = Newton::new(&lay, &w, delta, refine) else {
            break;
        };
        let step = |r_c: &DVector<f64>| {
            // Δz = W(GΔx + r_g) - S⁻¹ r_c
            let t = w.component_mul(&r_g) - r_c.component_div(&st.s);
            let rx = -&r_d - lay.g_tr_mul(&t);
            let (dx, dy) = newton.solve(&rx, &(-&r_p));
            let dz = w.component_mul(&(lay.g_mul(&dx) + &r_g)) - r_c.component_div(&st.s);
            let ds = -(r_c + st.s.component_mul(&dz)).component_div(&st.z);
            (dx, dy, ds, dz)
        };

        let rc_aff = st.s.component_mul(&st.z);
        let (_, _, ds_a, dz_a) = step(&rc_aff);
        let alpha_aff = max_step(&st.s, &ds_a).min(max_step(&st.z, &dz_a));
        let mu_aff = if m > 0 {
            (&st.s + &ds_a * alpha_aff).dot(&(&st.z + &dz_a * alpha_aff)) / m as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 {
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let rc = &rc_aff + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let (dx, dy, ds, dz) = step(&rc);
        let mut alpha = (0.99 * max_step(&st.s, &ds).min(max_step(&st.z, &dz))).min(1.0);
        // stay in the wide neighborhood  s_i z_i ≥ γ μ
        let centrality = |s: &DVector<f64>, z: &DVector<f64>| {
            let prod = s.component_mul(z);
            prod.min() * m as f64 / prod.sum()
        };
        let gamma = if m > 0 {
            NEIGHBORHOOD.min(0.5 * centrality(&st.s, &st.z))
        } else {
            0.0
        };
        for _ in 0..30 {
            if m == 0 || centrality(&(&st.s + &ds * alpha), &(&st.z + &dz * alpha)) >= gamma {
                break;
            }
            alpha *= 0.8;
        }
        st.x += &dx * alpha;
        st.y += &dy * alpha;
        st.s += &ds * alpha;
        st.z += &dz * alpha;
        // keep strictly interior
        st.s.apply(|v| *v = v.max(1e-300));
        st.z.apply(|v| *v = v.max(1e-300));
    }

    Ok(match best {
        Some((b, _, kept)) if b <= settings.eps_abs => finish(&kept, QpStatus::Optimal, settings.ipm_max_iter),
        Some((_, _, kept)) => finish(&kept, QpStatus::MaxIterations, settings.ipm_max_iter),
        None => finish(&st, QpStatus::MaxIterations, settings.ipm_max_iter),
    })
}

/// KKT residuals relative to the magnitude of the terms they balance, so
/// that problems with large weights are judged on the same footing.
fn scaled_kkt(prob: &QpProblem, x: &DVector<f64>, duals: &DVector<f64>) -> f64 {
    let kkt = kkt_residuals(prob, x, duals);
    let finite = |v: &DVector<f64>| v.iter().filter(|t| t.is_finite()).fold(0.0, |m: f64, t| m.max(t.abs()));
    let primal_scale = 1.0
        + x.amax()
            .max(finite(&prob.b_eq))
            .max(finite(&prob.l_in))
            .max(finite(&prob.u_in))
            .max(finite(&prob.lb))
            .max(finite(&prob.ub));
    let dual_scale = 1.0 + prob.q.amax().max((&prob.p * x).amax()).max(duals.amax());
    let comp_scale = 1.0 + duals.amax();
    (kkt.primal / primal_scale)
        .max(kkt.stationarity / dual_scale)
        .max(kkt.complementarity / comp_scale)
}

/// Farkas test on the normalized multipliers: `Aᵀŷ + Gᵀẑ ≈ 0` with
/// `bᵀŷ + hᵀẑ < 0` proves the constraints cannot all hold.
fn certifies_infeasible(lay: &Layout, st: &State, eps: f64) -> bool {
    let norm = st.y.amax().max(st.z.amax());
    if norm < 1e6 {
        return false;
    }
    let (y, z) = (&st.y / norm, &st.z / norm);
    let res = (lay.a_tr_mul(&y) + lay.g_tr_mul(&z)).amax();
    let val = lay.b.dot(&y) + lay.h.dot(&z);
    res <= eps.sqrt() && val < -eps.sqrt()
}
