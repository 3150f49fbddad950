use nalgebra::DMatrix;

use crate::behavioral::DataMatrices;
use crate::error::{Error, Result};
use crate::linalg;

/// How many singular values of the stacked data matrix to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowRankCutoff {
    /// Keep the `k` largest.
    Rank(usize),
    /// Keep those above `τ · σ_max`, with `τ ∈ (0, 1)`.
    Threshold(f64),
}

/// Truncated-SVD approximation of `col(Up, Yp, Uf, Yf)`, re-split into its
/// four blocks. The result is generally no longer Hankel.
pub fn low_rank_approx(dm: &DataMatrices, cutoff: LowRankCutoff) -> Result<DataMatrices> {
    match cutoff {
        LowRankCutoff::Rank(0) => return Err(Error::InvalidArgument("target rank must be at least 1".into())),
        LowRankCutoff::Threshold(t) if !(t > 0.0 && t < 1.0) => {
            return Err(Error::InvalidArgument(format!("threshold {t} outside (0, 1)")))
        }
        _ => {}
    }
    let stacked = dm.stacked();
    let dec = linalg::svd(&stacked).ok_or_else(|| Error::Solver("SVD of the data matrix did not converge".into()))?;
    let smax = dec.s.iter().copied().fold(0.0, f64::max);
    let kept = match cutoff {
        LowRankCutoff::Rank(k) => k.min(dec.s.len()),
        LowRankCutoff::Threshold(t) => dec.s.iter().filter(|&&s| s > t * smax).count(),
    };
    let approx = dec.u.columns(0, kept) * DMatrix::from_diagonal(&dec.s.rows(0, kept)) * dec.v_t.rows(0, kept);
    DataMatrices::from_stacked(&approx, dm.t_ini, dm.horizon, dm.m, dm.p)
}
