//! Weighted one-norm penalties through positive/negative variable splitting.
//!
//! A penalized variable `v` is written `v = v⁺ - v⁻` with `v± ≥ 0`, and the
//! cost gains `w (v⁺ + v⁻)`. `v⁺` keeps the original column index and `v⁻`
//! is appended after all existing variables.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::QpProblem;
use crate::error::{Error, Result};

/// Index map from an embedded problem back to the original variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneNormMap {
    pub n_original: usize,
    /// Original variable index of each split pair, in order.
    pub split: Vec<usize>,
}

impl OneNormMap {
    pub fn plus_index(&self, k: usize) -> usize {
        self.split[k]
    }

    pub fn minus_index(&self, k: usize) -> usize {
        self.n_original + k
    }

    /// Recovers the original variables from an embedded solution.
    pub fn recover(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.rows(0, self.n_original).into_owned();
        for (k, &i) in self.split.iter().enumerate() {
            out[i] -= x[self.minus_index(k)];
        }
        out
    }

    /// Composes with a later embedding, returning the map from the final
    /// problem to the variables of the very first one.
    pub fn then(&self, later: &OneNormMap) -> ComposedMap {
        ComposedMap {
            maps: vec![self.clone(), later.clone()],
        }
    }
}

/// A chain of one-norm embeddings applied in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposedMap {
    maps: Vec<OneNormMap>,
}

impl ComposedMap {
    pub fn recover(&self, x: &DVector<f64>) -> DVector<f64> {
        self.maps.iter().rev().fold(x.clone(), |acc, map| map.recover(&acc))
    }
}

/// Adds `Σ_k weights[k] · |x[range.start + k]|` to the cost of `prob`.
///
/// The returned problem is a plain QP whose optimizer, mapped back with
/// [`OneNormMap::recover`], solves the penalized problem. Finite bounds on a
/// split variable become general inequality rows on `v⁺ - v⁻`.
pub fn embed_one_norm(
    prob: &QpProblem,
    weights: &DVector<f64>,
    range: Range<usize>,
) -> Result<(QpProblem, OneNormMap)> {
    let n = prob.num_vars();
    if range.end > n || range.start > range.end {
        return Err(Error::Dimension(format!("variable range {range:?} outside 0..{n}")));
    }
    if weights.len() != range.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} variables",
            weights.len(),
            range.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("one-norm weights must be nonnegative".into()));
    }
    let r = range.len();
    let split: Vec<usize> = range.clone().collect();

    // x_original = M x_new with M = [I | -E]
    let extend_cols = |a: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(a.nrows(), n + r);
        out.columns_mut(0, n).copy_from(a);
        for (k, &i) in split.iter().enumerate() {
            out.column_mut(n + k).copy_from(&(-a.column(i)));
        }
        out
    };

    let p_half = extend_cols(&prob.p); // P M
    let mut p = DMatrix::zeros(n + r, n + r);
    p.rows_mut(0, n).copy_from(&p_half);
    for (k, &i) in split.iter().enumerate() {
        p.row_mut(n + k).copy_from(&(-p_half.row(i)));
    }

    let mut q = DVector::zeros(n + r);
    q.rows_mut(0, n).copy_from(&prob.q);
    for (k, &i) in split.iter().enumerate() {
        q[n + k] = -prob.q[i] + weights[k];
        q[i] += weights[k];
    }

    let a_eq = extend_cols(&prob.a_eq);

    let mut lb = DVector::from_element(n + r, 0.0);
    let mut ub = DVector::from_element(n + r, f64::INFINITY);
    lb.rows_mut(0, n).copy_from(&prob.lb);
    ub.rows_mut(0, n).copy_from(&prob.ub);

    let bounded: Vec<(usize, usize)> = split
        .iter()
        .enumerate()
        .filter(|(_, &i)| prob.lb[i].is_finite() || prob.ub[i].is_finite())
        .map(|(k, &i)| (k, i))
        .collect();
    let extra = bounded.len();
    let m_in = prob.a_in.nrows();
    let mut a_in = DMatrix::zeros(m_in + extra, n + r);
    a_in.rows_mut(0, m_in).copy_from(&extend_cols(&prob.a_in));
    let mut l_in = DVector::zeros(m_in + extra);
    let mut u_in = DVector::zeros(m_in + extra);
    l_in.rows_mut(0, m_in).copy_from(&prob.l_in);
    u_in.rows_mut(0, m_in).copy_from(&prob.u_in);
    for (row, &(k, i)) in bounded.iter().enumerate() {
        a_in[(m_in + row, i)] = 1.0;
        a_in[(m_in + row, n + k)] = -1.0;
        l_in[m_in + row] = prob.lb[i];
        u_in[m_in + row] = prob.ub[i];
    }
    for &i in &split {
        lb[i] = 0.0;
        ub[i] = f64::INFINITY;
    }

    let embedded = QpProblem {
        p,
        q,
        offset: prob.offset,
        a_eq,
        b_eq: prob.b_eq.clone(),
        a_in,
        l_in,
        u_in,
        lb,
        ub,
        split_pairs: split.iter().enumerate().map(|(k, &i)| (i, n + k)).collect(),
    };
    Ok((embedded, OneNormMap { n_original: n, split }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{solve_qp, QpSettings, QpStatus};
    use proptest::prelude::*;

    fn scalar_problem(p: f64, q: f64) -> QpProblem {
        QpProblem::new(DMatrix::from_element(1, 1, p), DVector::from_element(1, q))
    }

    #[test]
    fn pure_one_norm_is_minimized_at_origin() {
        // min 2|x|, with a tiny quadratic so the problem is bounded below in every direction
        let (emb, map) = embed_one_norm(&scalar_problem(0.0, 0.0), &DVector::from_element(1, 2.0), 0..1).unwrap();
        let sol = solve_qp(&emb, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(map.recover(&sol.x)[0].abs() < 1e-6);
    }

    #[test]
    fn soft_threshold_example() {
        // (x-3)² + 2|x| → x* = 2
        let prob = scalar_problem(2.0, -6.0).with_offset(9.0);
        let (emb, map) = embed_one_norm(&prob, &DVector::from_element(1, 2.0), 0..1).unwrap();
        let sol = solve_qp(&emb, &QpSettings::default()).unwrap();
        assert!((map.recover(&sol.x)[0] - 2.0).abs() < 1e-6);
        assert!((sol.objective - 5.0).abs() < 1e-6);
    }

    #[test]
    fn zero_weight_is_a_no_op() {
        let prob = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_vec(vec![-1.0, 0.3]),
        )
        .with_bounds(DVector::from_vec(vec![-0.1, -1.0]), DVector::from_vec(vec![0.2, 1.0]));
        let plain = solve_qp(&prob, &QpSettings::default()).unwrap();
        let (emb, map) = embed_one_norm(&prob, &DVector::zeros(2), 0..2).unwrap();
        let split = solve_qp(&emb, &QpSettings::default()).unwrap();
        assert!((map.recover(&split.x) - &plain.x).amax() < 1e-6);
    }

    #[test]
    fn rejects_negative_weights_and_bad_ranges() {
        let prob = scalar_problem(1.0, 0.0);
        assert!(embed_one_norm(&prob, &DVector::from_element(1, -1.0), 0..1).is_err());
        assert!(embed_one_norm(&prob, &DVector::from_element(2, 1.0), 0..2).is_err());
    }

    #[test]
    fn composed_maps_recover_original() {
        let prob = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(3));
        let (p1, m1) = embed_one_norm(&prob, &DVector::from_element(1, 1.0), 1..2).unwrap();
        let (_, m2) = embed_one_norm(&p1, &DVector::from_element(1, 1.0), 2..3).unwrap();
        // layout: [x0, x1+, x2+, x1-, x2-]
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0, 0.5, 4.0]);
        let orig = m1.then(&m2).recover(&x);
        assert_eq!(orig.as_slice(), &[1.0, 1.5, -1.0]);
    }

    proptest! {
        #[test]
        fn soft_threshold_property(a in -5.0f64..5.0, lambda in 0.0f64..4.0) {
            // ½(x - a)² + λ|x|
            let prob = scalar_problem(1.0, -a).with_offset(0.5 * a * a);
            let (emb, map) = embed_one_norm(&prob, &DVector::from_element(1, lambda), 0..1).unwrap();
            let sol = solve_qp(&emb, &QpSettings::default()).unwrap();
            prop_assert_eq!(sol.status, QpStatus::Optimal);
            let expected = a.signum() * (a.abs() - lambda).max(0.0);
            prop_assert!((map.recover(&sol.x)[0] - expected).abs() < 1e-6);
        }
    }
}
