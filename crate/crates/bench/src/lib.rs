//! Fixtures shared by the benchmarks.

use deepc::behavioral::{min_data_length, partition_data};
use deepc::ltisys::random_controllable_system;
use deepc::quadsim::{collect_excitation_data, ExcitationLaw, INPUT_DIM, STATE_DIM};
use deepc::{ControlProblem, DMatrix, DVector, DataMatrices, QuadParams, StateSpace, Trajectory};
use nalgebra::dvector;

/// Random system with a persistently exciting record of minimal length.
pub fn lti_fixture(n: usize, m: usize, p: usize, t_ini: usize, horizon: usize) -> (StateSpace, DataMatrices) {
    let ss = random_controllable_system(n, m, p, 11).expect("generator succeeds");
    let len = min_data_length(m, t_ini, horizon, n);
    // deterministic pseudo-random inputs in [-1, 1]
    let u: Vec<DVector<f64>> = (0..len)
        .map(|k| DVector::from_fn(m, |i, _| (((k * 7919 + i * 104_729) % 2001) as f64 / 1000.0) - 1.0))
        .collect();
    let (y, _) = ss.simulate(&DVector::zeros(n), &u).expect("dimensions agree");
    let traj = Trajectory::new(m, p, u, y, 1.0).expect("consistent trajectory");
    let (dm, _) = partition_data(&traj, t_ini, horizon, Some(n)).expect("long enough");
    (ss, dm)
}

/// Quadcopter data set and tracking problem with the case-study weights.
pub fn quad_fixture() -> (DataMatrices, ControlProblem, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let params = QuadParams::default();
    let (t_ini, horizon) = (1, 30);
    let samples = min_data_length(INPUT_DIM, t_ini, horizon, STATE_DIM);
    let law = ExcitationLaw::Stabilized { amplitude: 0.1 };
    let data = collect_excitation_data(&params, samples, &law, t_ini + horizon + STATE_DIM, 3).expect("collection");
    let (dm, _) = partition_data(&data.trajectory, t_ini, horizon, Some(STATE_DIM)).expect("partition");
    let mut cp = ControlProblem::new(INPUT_DIM, STATE_DIM, horizon, t_ini);
    let mut q = DVector::from_element(STATE_DIM, 1.0);
    q.rows_mut(0, 3).copy_from(&dvector![200.0, 200.0, 300.0]);
    cp.q = DMatrix::from_diagonal(&q);
    cp.lambda_g = 30.0;
    cp.lambda_y = 1e5;
    let u_ini = vec![params.hover_inputs()];
    let y_ini = vec![DVector::zeros(STATE_DIM)];
    (dm, cp, u_ini, y_ini)
}
