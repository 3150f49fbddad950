use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use deepc::behavioral::hankel;
use deepc::controllers::{solve_deepc, solve_mpc, solve_regularized_deepc};
use deepc::qp::solve_qp;
use deepc::{ControlProblem, DMatrix, DVector, QpMethod, QpProblem, QpSettings};
use deepc_bench::{lti_fixture, quad_fixture};
use std::hint::black_box;

fn hankel_matrices(c: &mut Criterion) {
    let signal: Vec<DVector<f64>> = (0..214).map(|k| DVector::from_element(4, (k as f64).sin())).collect();
    c.bench_function("hankel_214x4_depth31", |b| {
        b.iter(|| hankel(black_box(&signal), 31).unwrap())
    });
}

fn box_qp(c: &mut Criterion) {
    let n = 40;
    let m = DMatrix::from_fn(n, n, |i, j| ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5);
    let p = &m * m.transpose() + DMatrix::identity(n, n);
    let q = DVector::from_fn(n, |i, _| (i as f64).cos() * 5.0);
    let prob = QpProblem::new(p, q).with_bounds(DVector::from_element(n, -1.0), DVector::from_element(n, 1.0));
    for (name, method) in [
        ("qp_box40_ipm", QpMethod::InteriorPoint),
        ("qp_box40_admm", QpMethod::Admm),
    ] {
        let settings = QpSettings {
            method,
            ..QpSettings::default()
        };
        c.bench_function(name, |b| b.iter(|| solve_qp(black_box(&prob), &settings).unwrap()));
    }
}

fn controllers(c: &mut Criterion) {
    let (ss, dm) = lti_fixture(4, 2, 2, 4, 10);
    let cp = ControlProblem::new(2, 2, 10, 4);
    let r = vec![DVector::from_element(2, 0.5); 10];
    let u_ini = vec![DVector::zeros(2); 4];
    let y_ini = vec![DVector::zeros(2); 4];
    c.bench_function("mpc_n4_horizon10", |b| {
        b.iter(|| solve_mpc(&ss, &DVector::zeros(4), black_box(&r), &cp).unwrap())
    });
    c.bench_function("deepc_n4_horizon10", |b| {
        b.iter(|| solve_deepc(&dm, &u_ini, &y_ini, black_box(&r), &cp).unwrap())
    });

    let (dm, cp, u_ini, y_ini) = quad_fixture();
    let mut r = DVector::zeros(12);
    r.rows_mut(0, 3).fill(1.0);
    let r = vec![r; 30];
    let mut group = c.benchmark_group("quadcopter");
    group.sample_size(10);
    group.bench_function("regularized_deepc_horizon30", |b| {
        b.iter_batched(
            || r.clone(),
            |r| solve_regularized_deepc(&dm, &u_ini, &y_ini, &r, &cp).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, hankel_matrices, box_qp, controllers);
criterion_main!(benches);
