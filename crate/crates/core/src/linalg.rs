//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Default relative singular-value threshold for numeric rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Thin singular value decomposition `m = U diag(s) Vᵀ`, singular values
/// sorted largest first.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD. nalgebra's bidiagonal SVD loses several digits on
/// rank-deficient wide matrices such as noiseless Hankel data, so the
/// decomposition is delegated to faer. Returns `None` if it fails to converge.
pub fn svd(m: &DMatrix<f64>) -> Option<Svd> {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Some(Svd {
            u: DMatrix::zeros(m.nrows(), 0),
            s: DVector::zeros(0),
            v_t: DMatrix::zeros(0, m.ncols()),
        });
    }
    let dec = to_faer(m).thin_svd().ok()?;
    let s = dec.S().column_vector();
    Some(Svd {
        u: from_faer(dec.U()),
        s: DVector::from_fn(k, |i, _| s[i]),
        v_t: from_faer(dec.V()).transpose(),
    })
}

/// Singular values of `m`, largest first. Empty matrices have none.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = match to_faer(m).singular_values() {
        Ok(v) => v,
        Err(_) => m.singular_values().iter().copied().collect(),
    };
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values strictly above `tol * sigma_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > tol * smax).count(),
        _ => 0,
    }
}

/// Stacks matrices with equal column counts on top of each other.
pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let ncols = blocks.first().map_or(0, |b| b.ncols());
    let nrows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(nrows, ncols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), ncols, "vstack: column mismatch");
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Concatenates vectors end to end.
pub fn concat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(*p);
        r += p.len();
    }
    out
}

/// Flattens a sequence of equally sized vectors time-major into one column.
pub fn stack_samples(samples: &[DVector<f64>]) -> DVector<f64> {
    let refs: Vec<&DVector<f64>> = samples.iter().collect();
    concat(&refs)
}

/// Splits a stacked column back into `chunk`-sized samples.
pub fn unstack_samples(v: &DVector<f64>, chunk: usize) -> Vec<DVector<f64>> {
    if chunk == 0 {
        return Vec::new();
    }
    (0..v.len() / chunk)
        .map(|k| v.rows(k * chunk, chunk).into_owned())
        .collect()
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
///
/// Singular values below `rcond * sigma_max` are treated as zero.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let Some(dec) = svd(a) else {
        return DVector::zeros(a.ncols());
    };
    let smax = dec.s.iter().copied().fold(0.0, f64::max);
    let cut = rcond * smax;
    let utb = dec.u.tr_mul(b);
    let scaled = DVector::from_fn(dec.s.len(), |i, _| {
        if dec.s[i] > cut && dec.s[i] > 0.0 {
            utb[i] / dec.s[i]
        } else {
            0.0
        }
    });
    dec.v_t.tr_mul(&scaled)
}

/// Block diagonal matrix repeating `block` `count` times.
pub fn block_diag_repeat(block: &DMatrix<f64>, count: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * count, c * count);
    for k in 0..count {
        out.view_mut((k * r, k * c), (r, c)).copy_from(block);
    }
    out
}

/// Relative symmetric test: `max |m - m'| <= tol * max(1, max |m|)`.
pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Positive definiteness through a Cholesky attempt on the symmetric part.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky().is_some()
}

/// Positive semidefiniteness via the smallest eigenvalue of the symmetric part.
pub fn is_positive_semidefinite(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let sym = (m + m.transpose()) * 0.5;
    let scale = sym.amax().max(1.0);
    let eig = sym.symmetric_eigenvalues();
    eig.iter().all(|&l| l >= -tol * scale)
}
