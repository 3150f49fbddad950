mod common;

use common::oracle::{enumerate, max_violation, projected_gradient_residual, random_boxed_qp};
use deepc::qp::{kkt_residuals, solve_qp};
use deepc::{QpMethod, QpSettings, QpStatus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn settings(method: QpMethod) -> QpSettings {
    QpSettings {
        method,
        ..QpSettings::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_enumeration(seed in any::<u64>(), n in 1usize..=5, general in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_boxed_qp(n, general, || rng.random_range(-1.0..=1.0));
        let oracle = enumerate(&prob, 1e-9).expect("boxes keep the problem feasible");
        for method in [QpMethod::InteriorPoint, QpMethod::Admm] {
            let sol = solve_qp(&prob, &settings(method)).unwrap();
            prop_assert_eq!(sol.status, QpStatus::Optimal);
            let gap = (&sol.x - &oracle.x).amax();
            prop_assert!(gap <= 1e-5, "{method:?}: |x - x*| = {gap:e}");
            prop_assert!(max_violation(&prob, &sol.x) <= 1e-6);
            let kkt = kkt_residuals(&prob, &sol.x, &sol.duals);
            prop_assert!(kkt.max() <= 1e-6, "{method:?}: {kkt:?}");
            prop_assert!(sol.objective <= oracle.objective + 1e-6 * (1.0 + oracle.objective.abs()));
        }
    }

    #[test]
    fn box_only_optimum_is_a_projected_gradient_fixed_point(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prob = random_boxed_qp(n, 0, || rng.random_range(-1.0..=1.0));
        let sol = solve_qp(&prob, &QpSettings::default()).unwrap();
        prop_assert!(projected_gradient_residual(&prob, &sol.x) <= 1e-7);
    }
}

#[test]
fn oracle_finds_the_unconstrained_minimizer_inside_the_box() {
    let prob = deepc::QpProblem::new(
        deepc::DMatrix::identity(2, 2),
        deepc::DVector::from_vec(vec![-0.5, 0.25]),
    )
    .with_bounds(
        deepc::DVector::from_element(2, -1.0),
        deepc::DVector::from_element(2, 1.0),
    );
    let sol = enumerate(&prob, 1e-12).unwrap();
    assert_eq!(sol.active_sets_tried, 9);
    assert!((sol.x[0] - 0.5).abs() < 1e-14 && (sol.x[1] + 0.25).abs() < 1e-14);
}
