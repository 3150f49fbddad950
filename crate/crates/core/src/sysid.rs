//! One-step least-squares identification of full-state models.
//!
//! Outputs are taken as (possibly noisy) state measurements, so the model is
//! `x⁺ = A x + B u` with `C = I` and `D = 0`.

use nalgebra::{DMatrix, DVector};

use crate::behavioral::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::ltisys::StateSpace;

/// Identified model with fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IdResult {
    pub model: StateSpace,
    /// Residual 2-norm of each state equation over the data.
    pub residuals: Vec<f64>,
    /// Assumed state dimension (equal to the output dimension).
    pub order: usize,
    /// The regressor `[x; u]` did not have full row rank.
    pub rank_deficient: bool,
}

/// Fits `(A, B)` minimizing `Σ ‖x_{t+1} - A x_t - B u_t‖² + ridge ‖[A B]‖²_F`.
pub fn identify_full_state(traj: &Trajectory, ridge: f64) -> Result<IdResult> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ridge weight {ridge} must be finite and nonnegative"
        )));
    }
    let (n, m) = (traj.p(), traj.m());
    let required = n + m + 1;
    if traj.len() < required {
        return Err(Error::TooShort {
            len: traj.len(),
            required,
        });
    }
    let samples = traj.len() - 1;
    let (x, u) = (traj.outputs(), traj.inputs());
    let k = n + m;

    // regressor columns [x_t; u_t]
    let phi = DMatrix::from_fn(k, samples, |i, t| if i < n { x[t][i] } else { u[t][i - n] });
    let next = DMatrix::from_fn(n, samples, |i, t| x[t + 1][i]);
    let rank = linalg::numeric_rank(&phi, DEFAULT_RANK_TOL);
    let rank_deficient = rank < k;
    if rank_deficient {
        log::warn!("identification regressor has rank {rank} < {k}; data is not exciting enough");
    }

    // rows of Θ = [A B] solve  [Φᵀ; √ρ I] θ = [x⁺ᵀ; 0]
    let extra = if ridge > 0.0 { k } else { 0 };
    let mut lhs = DMatrix::zeros(samples + extra, k);
    lhs.rows_mut(0, samples).copy_from(&phi.transpose());
    if extra > 0 {
        lhs.rows_mut(samples, k).fill_diagonal(ridge.sqrt());
    }
    let mut theta = DMatrix::zeros(n, k);
    for i in 0..n {
        let mut rhs = DVector::zeros(samples + extra);
        rhs.rows_mut(0, samples).copy_from(&next.row(i).transpose());
        let row = linalg::lstsq(&lhs, &rhs, 1e-13);
        theta.row_mut(i).copy_from(&row.transpose());
    }

    let resid = &next - &theta * &phi;
    let residuals = (0..n).map(|i| resid.row(i).norm()).collect();
    let model = StateSpace::new(
        theta.columns(0, n).into_owned(),
        theta.columns(n, m).into_owned(),
        DMatrix::identity(n, n),
        DMatrix::zeros(n, m),
    )?;
    Ok(IdResult {
        model,
        residuals,
        order: n,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltisys::random_controllable_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn full_state_data(ss: &StateSpace, len: usize, noise: f64, seed: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<_> = (0..len)
            .map(|_| DVector::from_fn(ss.m(), |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let mut x = DVector::zeros(ss.n());
        let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).unwrap();
        let mut y = Vec::with_capacity(len);
        for ut in &u {
            let meas = if noise > 0.0 {
                x.map(|v| v + normal.sample(&mut rng))
            } else {
                x.clone()
            };
            y.push(meas);
            x = &ss.a * &x + &ss.b * ut;
        }
        Trajectory::new(ss.m(), ss.n(), u, y, 1.0).unwrap()
    }

    fn as_full_state(ss: &StateSpace) -> StateSpace {
        StateSpace::new(
            ss.a.clone(),
            ss.b.clone(),
            DMatrix::identity(ss.n(), ss.n()),
            DMatrix::zeros(ss.n(), ss.m()),
        )
        .unwrap()
    }

    #[test]
    fn recovers_noiseless_model() {
        let ss = as_full_state(&random_controllable_system(3, 2, 1, 12).unwrap());
        let traj = full_state_data(&ss, 40, 0.0, 1);
        let id = identify_full_state(&traj, 0.0).unwrap();
        assert!(!id.rank_deficient);
        assert!((&id.model.a - &ss.a).amax() < 1e-8);
        assert!((&id.model.b - &ss.b).amax() < 1e-8);
        assert!(id.residuals.iter().all(|r| *r < 1e-8));
        assert_eq!(id.order, 3);
        assert_eq!(id.model.c, DMatrix::identity(3, 3));
    }

    #[test]
    fn zero_data_is_flagged() {
        let zeros = vec![DVector::zeros(2); 10];
        let traj = Trajectory::new(2, 2, zeros.clone(), zeros, 1.0).unwrap();
        let id = identify_full_state(&traj, 0.0).unwrap();
        assert!(id.rank_deficient);
        assert!(id.model.a.amax() == 0.0);
    }

    #[test]
    fn heavy_ridge_shrinks_to_zero() {
        let ss = as_full_state(&random_controllable_system(2, 1, 1, 3).unwrap());
        let traj = full_state_data(&ss, 30, 0.0, 2);
        let id = identify_full_state(&traj, 1e14).unwrap();
        assert!(id.model.a.amax() < 1e-8);
        assert!(id.model.b.amax() < 1e-8);
    }

    #[test]
    fn rejects_short_data_and_bad_ridge() {
        let v = vec![DVector::zeros(1); 2];
        let traj = Trajectory::new(1, 1, v.clone(), v, 1.0).unwrap();
        assert!(matches!(identify_full_state(&traj, 0.0), Err(Error::TooShort { .. })));
        let v = vec![DVector::zeros(1); 5];
        let traj = Trajectory::new(1, 1, v.clone(), v, 1.0).unwrap();
        assert!(identify_full_state(&traj, -1.0).is_err());
    }

    #[test]
    fn error_shrinks_with_noise() {
        let ss = as_full_state(&random_controllable_system(3, 1, 1, 40).unwrap());
        let median_error = |sigma: f64| {
            let mut errs: Vec<f64> = (0..11)
                .map(|seed| {
                    let traj = full_state_data(&ss, 200, sigma, 1000 + seed);
                    let id = identify_full_state(&traj, 0.0).unwrap();
                    linalg::singular_values(&(&id.model.a - &ss.a))[0]
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[errs.len() / 2]
        };
        let e: Vec<f64> = [0.1, 0.01, 0.001].iter().map(|&s| median_error(s)).collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
    }
}
