//! Active-set polishing: once ADMM has identified which constraints are
//! active, the reduced equality-constrained KKT system is solved directly.

use nalgebra::{DMatrix, DVector};

use super::admm::Work;
use super::QpSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Side {
    Inactive,
    Lower,
    Upper,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) struct ActiveSet(Vec<Side>);

impl ActiveSet {
    /// Guesses active rows from an ADMM iterate (scaled `z`, `y`).
    pub fn guess(work: &Work, z: &DVector<f64>, y: &DVector<f64>) -> Self {
        let sides = (0..work.rows())
            .map(|i| {
                let (l, u) = (work.l[i], work.u[i]);
                if l == u {
                    Side::Equal
                } else if z[i] - l < -y[i] {
                    Side::Lower
                } else if u - z[i] < y[i] {
                    Side::Upper
                } else {
                    Side::Inactive
                }
            })
            .collect();
        Self(sides)
    }

    fn target(&self, work: &Work, i: usize) -> Option<f64> {
        match self.0[i] {
            Side::Inactive => None,
            Side::Lower | Side::Equal => Some(work.l[i]),
            Side::Upper => Some(work.u[i]),
        }
        .filter(|v| v.is_finite())
    }
}

/// Solves the reduced KKT system for the guessed active set. Returns scaled
/// `(x, y)` over all working rows, or `None` when the system is singular.
pub(super) fn solve_reduced(
    work: &Work,
    active: &ActiveSet,
    settings: &QpSettings,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = work.n();
    let md = work.dense_rows();

    // variables pinned by an active bound row
    let mut fixed: Vec<Option<(usize, f64)>> = vec![None; n];
    for (k, &j) in work.bidx.iter().enumerate() {
        if let Some(t) = active.target(work, md + k) {
            fixed[j] = Some((k, t / work.bcoef[k]));
        }
    }
    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let rows: Vec<(usize, f64)> = (0..md).filter_map(|i| active.target(work, i).map(|t| (i, t))).collect();

    let mut x = DVector::<f64>::zeros(n);
    for j in 0..n {
        if let Some((_, v)) = fixed[j] {
            x[j] = v;
        }
    }

    let nf = free.len();
    let na = rows.len();
    let dim = nf + na;
    // exact reduced KKT matrix and right-hand side
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    for (a, &ja) in free.iter().enumerate() {
        for (b, &jb) in free.iter().enumerate() {
            kkt[(a, b)] = work.p[(ja, jb)];
        }
    }
    for (r, &(i, _)) in rows.iter().enumerate() {
        for (b, &jb) in free.iter().enumerate() {
            let v = work.a[(i, jb)];
            kkt[(nf + r, b)] = v;
            kkt[(b, nf + r)] = v;
        }
    }
    let px_fixed = &work.p * &x;
    let ax_fixed = if md > 0 { &work.a * &x } else { DVector::zeros(0) };
    let mut rhs = DVector::<f64>::zeros(dim);
    for (a, &j) in free.iter().enumerate() {
        rhs[a] = -work.q[j] - px_fixed[j];
    }
    for (r, &(i, t)) in rows.iter().enumerate() {
        rhs[nf + r] = t - ax_fixed[i];
    }

    let mut reg = kkt.clone();
    for a in 0..nf {
        reg[(a, a)] += settings.polish_delta;
    }
    for r in 0..na {
        reg[(nf + r, nf + r)] -= settings.polish_delta;
    }
    let mut sol = DVector::<f64>::zeros(dim);
    if dim > 0 {
        let lu = reg.lu();
        sol = lu.solve(&rhs)?;
        for _ in 0..settings.polish_refine_iter {
            let res = &rhs - &kkt * &sol;
            let Some(corr) = lu.solve(&res) else { break };
            sol += corr;
        }
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }

    for (a, &j) in free.iter().enumerate() {
        x[j] = sol[a];
    }
    let mut y = DVector::<f64>::zeros(work.rows());
    for (r, &(i, _)) in rows.iter().enumerate() {
        y[i] = sol[nf + r];
    }
    // bound multipliers from stationarity of the pinned variables
    let grad = &work.p * &x + &work.q + work.aty(&y);
    for j in 0..n {
        if let Some((k, _)) = fixed[j] {
            y[md + k] = -grad[j] / work.bcoef[k];
        }
    }
    Some((x, y))
}
