//! Ruiz equilibration of the working problem.

use nalgebra::DVector;

use super::admm::Work;

const MIN_NORM: f64 = 1e-4;
const MAX_NORM: f64 = 1e4;

fn clamp_norm(v: f64) -> f64 {
    if v < MIN_NORM {
        1.0
    } else {
        v.min(MAX_NORM)
    }
}

/// Scales `work` in place so that the columns of `[P Aᵀ; A 0]` have unit
/// infinity norm, then scales the cost. Records `D`, `E` and `c`.
pub(super) fn equilibrate(work: &mut Work, passes: usize) {
    let n = work.q.len();
    let md = work.a.nrows();
    let mb = work.bidx.len();
    for _ in 0..passes {
        let mut col = DVector::<f64>::zeros(n);
        for j in 0..n {
            let pmax = work.p.column(j).amax();
            let amax = if md > 0 { work.a.column(j).amax() } else { 0.0 };
            col[j] = pmax.max(amax);
        }
        for (k, &j) in work.bidx.iter().enumerate() {
            col[j] = col[j].max(work.bcoef[k].abs());
        }
        let mut row = DVector::<f64>::zeros(md + mb);
        for i in 0..md {
            row[i] = work.a.row(i).amax();
        }
        for k in 0..mb {
            row[md + k] = work.bcoef[k].abs();
        }
        let dd = col.map(|v| 1.0 / clamp_norm(v).sqrt());
        let de = row.map(|v| 1.0 / clamp_norm(v).sqrt());

        for j in 0..n {
            for i in 0..n {
                work.p[(i, j)] *= dd[i] * dd[j];
            }
            for i in 0..md {
                work.a[(i, j)] *= de[i] * dd[j];
            }
        }
        work.q.component_mul_assign(&dd);
        for (k, &j) in work.bidx.iter().enumerate() {
            work.bcoef[k] *= de[md + k] * dd[j];
        }
        work.d.component_mul_assign(&dd);
        work.e.component_mul_assign(&de);
    }

    // cost scaling
    if n > 0 {
        let mean_col: f64 = (0..n).map(|j| work.p.column(j).amax()).sum::<f64>() / n as f64;
        let gamma = clamp_norm(mean_col.max(work.q.amax()));
        let c = 1.0 / gamma;
        work.p *= c;
        work.q *= c;
        work.c *= c;
    }

    for i in 0..md + mb {
        work.l[i] *= work.e[i];
        work.u[i] *= work.e[i];
    }
}
