//! Rigid-body quadrotor with additive white measurement noise.
//!
//! Rotors sit in a plus layout: rotor 1 on the body `+x` arm, then `+y`,
//! `-x`, `-y`. Rotors 1 and 3 spin one way and 2 and 4 the other, so their
//! drag torques about body `z` have opposite signs. Attitude uses ZYX Euler
//! angles (roll α, pitch β, yaw γ); the last three state entries are body
//! angular rates, which coincide with the Euler rates at level attitude.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::behavioral::{is_persistently_exciting_default, ExcitationReport, Trajectory};
use crate::controllers::Plant;
use crate::error::{Error, Result};

pub const STATE_DIM: usize = 12;
pub const INPUT_DIM: usize = 4;
const DIVERGENCE_LIMIT: f64 = 1e6;
/// Pitch closer than this to ±π/2 counts as hitting the Euler singularity.
const CLAMP_SLACK: f64 = 1e-9;
const GIMBAL_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Roll, pitch, yaw.
    pub attitude: Vector3<f64>,
    /// Body angular rates.
    pub rates: Vector3<f64>,
}

impl QuadState {
    /// Level and at rest at the origin.
    pub fn hover() -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            attitude: Vector3::zeros(),
            rates: Vector3::zeros(),
        }
    }

    /// `[x y z ẋ ẏ ż α β γ p q r]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(STATE_DIM);
        v.fixed_rows_mut::<3>(0).copy_from(&self.position);
        v.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        v.fixed_rows_mut::<3>(6).copy_from(&self.attitude);
        v.fixed_rows_mut::<3>(9).copy_from(&self.rates);
        v
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() != STATE_DIM {
            return Err(Error::Dimension(format!(
                "quadrotor state has length {}, expected 12",
                v.len()
            )));
        }
        Ok(Self {
            position: v.fixed_rows::<3>(0).into_owned(),
            velocity: v.fixed_rows::<3>(3).into_owned(),
            attitude: v.fixed_rows::<3>(6).into_owned(),
            rates: v.fixed_rows::<3>(9).into_owned(),
        })
    }

    fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    /// Translational kinetic plus gravitational potential plus rotational energy.
    pub fn energy(&self, params: &QuadParams) -> f64 {
        let inertia = params.inertia_matrix();
        0.5 * params.mass * self.velocity.norm_squared()
            + params.mass * params.gravity * self.position.z
            + 0.5 * self.rates.dot(&(inertia * self.rates))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    pub mass: f64,
    pub gravity: f64,
    /// Diagonal of the inertia tensor.
    pub inertia: Vector3<f64>,
    pub arm_length: f64,
    /// Newtons per unit of normalized rotor input.
    pub thrust_coeff: f64,
    /// Drag torque per Newton of rotor thrust.
    pub yaw_coeff: f64,
    pub dt: f64,
    /// Standard deviation of the measurement noise on each state channel.
    pub noise_std: DVector<f64>,
}

impl Default for QuadParams {
    fn default() -> Self {
        let (mass, gravity) = (0.5, 9.81);
        Self {
            mass,
            gravity,
            inertia: Vector3::new(4.9e-3, 4.9e-3, 8.8e-3),
            arm_length: 0.25,
            // full input on every rotor gives 2.5 times the hover thrust
            thrust_coeff: 2.5 * mass * gravity / 4.0,
            yaw_coeff: 0.016,
            dt: 0.1,
            noise_std: DVector::from_element(STATE_DIM, 0.01),
        }
    }
}

impl QuadParams {
    pub fn with_noise(mut self, std: f64) -> Self {
        self.noise_std = DVector::from_element(STATE_DIM, std);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.mass,
            self.gravity,
            self.arm_length,
            self.thrust_coeff,
            self.yaw_coeff,
            self.dt,
        ];
        if positive
            .iter()
            .chain(self.inertia.iter())
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "quadrotor parameters must be positive and finite".into(),
            ));
        }
        if self.noise_std.len() != STATE_DIM || self.noise_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("noise_std needs 12 nonnegative entries".into()));
        }
        Ok(())
    }

    /// Per-rotor input that balances gravity.
    pub fn hover_input(&self) -> f64 {
        self.mass * self.gravity / (4.0 * self.thrust_coeff)
    }

    pub fn hover_inputs(&self) -> DVector<f64> {
        DVector::from_element(INPUT_DIM, self.hover_input())
    }

    fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia)
    }
}

/// Result of one simulator step.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadStep {
    pub state: QuadState,
    /// Next state plus measurement noise.
    pub measurement: DVector<f64>,
    /// Some input was outside `[0, 1]` and got clamped.
    pub clamped: bool,
}

fn derivative(s: &QuadState, thrusts: &[f64; 4], params: &QuadParams) -> QuadState {
    let f = thrusts.map(|u| params.thrust_coeff * u);
    let total = f.iter().sum::<f64>();
    let (roll, pitch, yaw) = (s.attitude.x, s.attitude.y, s.attitude.z);
    let rot = Rotation3::from_euler_angles(roll, pitch, yaw);
    let accel = rot * Vector3::new(0.0, 0.0, total / params.mass) - Vector3::new(0.0, 0.0, params.gravity);

    let l = params.arm_length;
    let torque = Vector3::new(
        l * (f[1] - f[3]),
        l * (f[2] - f[0]),
        params.yaw_coeff * (f[0] - f[1] + f[2] - f[3]),
    );
    let inertia = params.inertia_matrix();
    let w = s.rates;
    let w_dot = Vector3::new(
        (torque.x - (w.cross(&(inertia * w))).x) / params.inertia.x,
        (torque.y - (w.cross(&(inertia * w))).y) / params.inertia.y,
        (torque.z - (w.cross(&(inertia * w))).z) / params.inertia.z,
    );

    let (sr, cr) = roll.sin_cos();
    let (tp, cp) = (pitch.tan(), pitch.cos());
    let euler_rates = Vector3::new(
        w.x + sr * tp * w.y + cr * tp * w.z,
        cr * w.y - sr * w.z,
        (sr * w.y + cr * w.z) / cp,
    );
    QuadState {
        position: s.velocity,
        velocity: accel,
        attitude: euler_rates,
        rates: w_dot,
    }
}

fn axpy(s: &QuadState, h: f64, d: &QuadState) -> QuadState {
    QuadState {
        position: s.position + d.position * h,
        velocity: s.velocity + d.velocity * h,
        attitude: s.attitude + d.attitude * h,
        rates: s.rates + d.rates * h,
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Noise-free RK4 step; `step` is only used to label divergence errors.
pub fn integrate(state: &QuadState, thrusts: &[f64; 4], params: &QuadParams, step: usize) -> Result<QuadState> {
    let h = params.dt;
    let k1 = derivative(state, thrusts, params);
    let k2 = derivative(&axpy(state, h / 2.0, &k1), thrusts, params);
    let k3 = derivative(&axpy(state, h / 2.0, &k2), thrusts, params);
    let k4 = derivative(&axpy(state, h, &k3), thrusts, params);
    let mut next = *state;
    for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        next = axpy(&next, h * w / 6.0, k);
    }
    let magnitude = next.to_vector().amax();
    if !next.is_finite() || magnitude > DIVERGENCE_LIMIT {
        return Err(Error::Diverged { step, magnitude });
    }
    if (next.attitude.y.abs() - PI / 2.0).abs() < GIMBAL_MARGIN {
        return Err(Error::Diverged {
            step,
            magnitude: next.attitude.y.abs(),
        });
    }
    next.attitude = next.attitude.map(wrap_angle);
    Ok(next)
}

/// Advances one sample period and measures the new state.
pub fn quad_step<R: Rng + ?Sized>(
    state: &QuadState,
    thrusts: &DVector<f64>,
    params: &QuadParams,
    rng: &mut R,
) -> Result<QuadStep> {
    if thrusts.len() != INPUT_DIM {
        return Err(Error::Dimension(format!(
            "expected 4 rotor inputs, got {}",
            thrusts.len()
        )));
    }
    // solver round-off just outside the box is not worth a report
    let clamped = thrusts.iter().any(|u| *u < -CLAMP_SLACK || *u > 1.0 + CLAMP_SLACK);
    if clamped {
        log::debug!("rotor inputs {:?} clamped to [0, 1]", thrusts.as_slice());
    }
    let u = [0, 1, 2, 3].map(|i| thrusts[i].clamp(0.0, 1.0));
    let next = integrate(state, &u, params, 0)?;
    let measurement = measure(&next, params, rng);
    Ok(QuadStep {
        state: next,
        measurement,
        clamped,
    })
}

fn measure<R: Rng + ?Sized>(state: &QuadState, params: &QuadParams, rng: &mut R) -> DVector<f64> {
    let mut y = state.to_vector();
    for i in 0..STATE_DIM {
        let std = params.noise_std[i];
        if std > 0.0 {
            y[i] += Normal::new(0.0, std).expect("finite std").sample(rng);
        }
    }
    y
}

/// Closed-loop plant wrapper pairing each applied input with the
/// measurement of the state it was applied in.
#[derive(Debug, Clone)]
pub struct QuadPlant {
    pub params: QuadParams,
    pub state: QuadState,
    rng: ChaCha8Rng,
    pending: DVector<f64>,
    steps: usize,
    pub clamp_events: usize,
}

impl QuadPlant {
    pub fn new(params: QuadParams, initial: QuadState, noise_seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let pending = measure(&initial, &params, &mut rng);
        Ok(Self {
            params,
            state: initial,
            rng,
            pending,
            steps: 0,
            clamp_events: 0,
        })
    }

    /// Measurement of the current state.
    pub fn measurement(&self) -> &DVector<f64> {
        &self.pending
    }
}

impl Plant for QuadPlant {
    fn apply(&mut self, u: &DVector<f64>) -> Result<DVector<f64>> {
        let out = quad_step(&self.state, u, &self.params, &mut self.rng).map_err(|e| match e {
            Error::Diverged { magnitude, .. } => Error::Diverged {
                step: self.steps,
                magnitude,
            },
            other => other,
        })?;
        self.steps += 1;
        self.clamp_events += usize::from(out.clamped);
        self.state = out.state;
        Ok(std::mem::replace(&mut self.pending, out.measurement))
    }

    fn state_estimate(&self) -> Option<DVector<f64>> {
        Some(self.pending.clone())
    }
}

/// Linearization `(A, B)` of the noise-free step map at hover, by central
/// differences.
pub fn linearize_hover(params: &QuadParams) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let x0 = QuadState::hover().to_vector();
    let u0 = params.hover_input();
    let h = 1e-6;
    let f = |x: &DVector<f64>, u: [f64; 4]| -> Result<DVector<f64>> {
        Ok(integrate(&QuadState::from_vector(x)?, &u, params, 0)?.to_vector())
    };
    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    for j in 0..STATE_DIM {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[j] += h;
        xm[j] -= h;
        a.set_column(j, &((f(&xp, [u0; 4])? - f(&xm, [u0; 4])?) / (2.0 * h)));
    }
    let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);
    for j in 0..INPUT_DIM {
        let mut up = [u0; 4];
        let mut um = [u0; 4];
        up[j] += h;
        um[j] -= h;
        b.set_column(j, &((f(&x0, up)? - f(&x0, um)?) / (2.0 * h)));
    }
    Ok((a, b))
}

/// Infinite-horizon discrete LQR gain `K` (u = -K x) by Riccati iteration.
pub fn lqr_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    for _ in 0..100_000 {
        let btp = b.transpose() * &p;
        let gain = (r + &btp * b)
            .cholesky()
            .ok_or_else(|| Error::Solver("Riccati iteration lost definiteness".into()))?
            .solve(&(&btp * a));
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * &gain;
        let next = (&next + next.transpose()) * 0.5;
        let change = (&next - &p).amax() / next.amax().max(1.0);
        p = next;
        if change < 1e-12 {
            return Ok(gain);
        }
    }
    Err(Error::Solver("Riccati iteration did not converge".into()))
}

/// Input policy used while collecting identification data.
#[derive(Debug, Clone, PartialEq)]
pub enum ExcitationLaw {
    /// `u = hover + U(-a, a)` on each rotor.
    OpenLoop { amplitude: f64 },
    /// `u = hover - K ŷ + U(-a, a)` with an LQR gain `K` on the measured
    /// state, clamped to `[0, 1]`. The recorded input is the one applied.
    Stabilized { amplitude: f64 },
}

impl ExcitationLaw {
    pub fn amplitude(&self) -> f64 {
        match *self {
            ExcitationLaw::OpenLoop { amplitude } | ExcitationLaw::Stabilized { amplitude } => amplitude,
        }
    }

    fn with_amplitude(&self, amplitude: f64) -> Self {
        match self {
            ExcitationLaw::OpenLoop { .. } => ExcitationLaw::OpenLoop { amplitude },
            ExcitationLaw::Stabilized { .. } => ExcitationLaw::Stabilized { amplitude },
        }
    }
}

/// Excitation data with its persistency-of-excitation check.
#[derive(Debug, Clone)]
pub struct CollectedData {
    pub trajectory: Trajectory,
    pub excitation: ExcitationReport,
    /// Amplitude actually used after any divergence retries.
    pub amplitude: f64,
    pub attempts: usize,
}

const COLLECTION_RETRIES: usize = 5;

/// Simulates `samples` steps from hover under `law` and records applied
/// inputs with measured outputs. A divergent run is retried with half the
/// excitation amplitude, at most five times.
pub fn collect_excitation_data(
    params: &QuadParams,
    samples: usize,
    law: &ExcitationLaw,
    pe_order: usize,
    seed: u64,
) -> Result<CollectedData> {
    params.validate()?;
    if samples == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(law.amplitude() >= 0.0) {
        return Err(Error::InvalidArgument(
            "excitation amplitude must be nonnegative".into(),
        ));
    }
    let gain = match law {
        ExcitationLaw::Stabilized { .. } => {
            let (a, b) = linearize_hover(params)?;
            let q = DMatrix::from_diagonal(&DVector::from_vec(vec![
                10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 10.0, 10.0, 10.0, 0.1, 0.1, 0.1,
            ]));
            Some(lqr_gain(&a, &b, &q, &(DMatrix::identity(INPUT_DIM, INPUT_DIM) * 10.0))?)
        }
        ExcitationLaw::OpenLoop { .. } => None,
    };

    let mut amplitude = law.amplitude();
    let mut last_err = None;
    for attempt in 0..=COLLECTION_RETRIES {
        let current = law.with_amplitude(amplitude);
        match collect_once(params, samples, &current, gain.as_ref(), seed, attempt) {
            Ok(trajectory) => {
                let excitation = is_persistently_exciting_default(trajectory.inputs(), pe_order)?;
                if !excitation.exciting {
                    log::warn!(
                        "collected inputs reach rank {} of {} for order {pe_order}",
                        excitation.rank,
                        excitation.required_rank
                    );
                }
                return Ok(CollectedData {
                    trajectory,
                    excitation,
                    amplitude,
                    attempts: attempt + 1,
                });
            }
            Err(e @ Error::Diverged { .. }) => {
                log::warn!(
                    "excitation run diverged ({e}); retrying with amplitude {}",
                    amplitude / 2.0
                );
                last_err = Some(e);
                amplitude /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn collect_once(
    params: &QuadParams,
    samples: usize,
    law: &ExcitationLaw,
    gain: Option<&DMatrix<f64>>,
    seed: u64,
    attempt: usize,
) -> Result<Trajectory> {
    // separate streams for the dither and the sensor noise
    let mut dither_rng = ChaCha8Rng::seed_from_u64(seed);
    dither_rng.set_stream(2 * attempt as u64);
    let mut plant = QuadPlant::new(params.clone(), QuadState::hover(), seed)?;
    plant.rng.set_stream(2 * attempt as u64 + 1);
    plant.pending = measure(&plant.state, params, &mut plant.rng);

    let amplitude = law.amplitude();
    let dither = (amplitude > 0.0).then(|| Uniform::new_inclusive(-amplitude, amplitude).expect("valid range"));
    let hover = params.hover_inputs();
    let mut inputs = Vec::with_capacity(samples);
    let mut outputs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut u = hover.clone();
        if let Some(k) = gain {
            u -= k * plant.measurement();
        }
        if let Some(d) = &dither {
            u += DVector::from_fn(INPUT_DIM, |_, _| d.sample(&mut dither_rng));
        }
        let u = u.map(|v| v.clamp(0.0, 1.0));
        let y = plant.apply(&u)?;
        inputs.push(u);
        outputs.push(y);
    }
    Trajectory::new(INPUT_DIM, STATE_DIM, inputs, outputs, params.dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless() -> QuadParams {
        QuadParams::default().with_noise(0.0)
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let p = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = QuadState {
            position: Vector3::new(0.3, -1.0, 2.0),
            ..QuadState::hover()
        };
        let out = quad_step(&s, &p.hover_inputs(), &p, &mut rng).unwrap();
        assert!((out.state.to_vector() - s.to_vector()).amax() < 1e-9);
        assert!((p.hover_input() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn free_fall_from_rest() {
        let p = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = quad_step(&QuadState::hover(), &DVector::zeros(4), &p, &mut rng).unwrap();
        assert!((out.state.velocity.z + p.gravity * p.dt).abs() < 1e-12);
        assert!((out.state.position.z + 0.5 * p.gravity * p.dt * p.dt).abs() < 1e-12);
    }

    #[test]
    fn noiseless_measurement_is_the_state() {
        let p = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = DVector::from_vec(vec![0.41, 0.39, 0.4, 0.42]);
        let out = quad_step(&QuadState::hover(), &u, &p, &mut rng).unwrap();
        assert_eq!(out.measurement, out.state.to_vector());
    }

    #[test]
    fn out_of_range_inputs_are_clamped_and_flagged() {
        let p = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = quad_step(&QuadState::hover(), &DVector::from_element(4, 1.7), &p, &mut rng).unwrap();
        let b = quad_step(&QuadState::hover(), &DVector::from_element(4, 1.0), &p, &mut rng).unwrap();
        assert!(a.clamped && !b.clamped);
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn energy_does_not_grow_without_thrust() {
        let p = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = QuadState {
            velocity: Vector3::new(1.0, -0.5, 2.0),
            attitude: Vector3::new(0.2, -0.1, 0.5),
            rates: Vector3::new(0.5, -0.3, 1.0),
            ..QuadState::hover()
        };
        for _ in 0..50 {
            let e0 = s.energy(&p);
            s = quad_step(&s, &DVector::zeros(4), &p, &mut rng).unwrap().state;
            assert!(s.energy(&p) <= e0 + 1e-6);
        }
    }

    #[test]
    fn measurement_noise_is_white() {
        let p = QuadParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = QuadState::hover();
        let noise: Vec<f64> = (0..10_000)
            .map(|_| quad_step(&s, &p.hover_inputs(), &p, &mut rng).unwrap().measurement[2])
            .collect();
        let mean = noise.iter().sum::<f64>() / noise.len() as f64;
        let var = noise.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        for lag in 1..=5 {
            let cov: f64 = noise.windows(lag + 1).map(|w| (w[0] - mean) * (w[lag] - mean)).sum();
            assert!((cov / var).abs() < 0.1, "lag {lag}: {}", cov / var);
        }
        assert!((var / noise.len() as f64).sqrt() - 0.01 < 1e-3);
    }

    #[test]
    fn steps_are_deterministic_in_the_seed() {
        let p = QuadParams::default();
        let u = DVector::from_vec(vec![0.5, 0.3, 0.45, 0.35]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            quad_step(&QuadState::hover(), &u, &p, &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3).measurement, run(4).measurement);
    }

    #[test]
    fn divergence_is_reported() {
        let p = noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = QuadState {
            velocity: Vector3::new(2e6, 0.0, 0.0),
            ..QuadState::hover()
        };
        assert!(matches!(
            quad_step(&s, &p.hover_inputs(), &p, &mut rng),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn attitude_is_wrapped() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn plant_pairs_inputs_with_current_measurement() {
        let p = noiseless();
        let mut plant = QuadPlant::new(p.clone(), QuadState::hover(), 1).unwrap();
        let y0 = plant.apply(&DVector::zeros(4)).unwrap();
        assert_eq!(y0, QuadState::hover().to_vector());
        assert!(plant.state_estimate().unwrap()[5] < 0.0);
    }

    #[test]
    fn lqr_stabilizes_the_hover_linearization() {
        let p = noiseless();
        let (a, b) = linearize_hover(&p).unwrap();
        let k = lqr_gain(&a, &b, &DMatrix::identity(12, 12), &DMatrix::identity(4, 4)).unwrap();
        let radius = (&a - &b * &k)
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max);
        assert!(radius < 1.0);
    }

    #[test]
    fn case_study_sized_data_set_is_exciting() {
        let p = QuadParams::default();
        let law = ExcitationLaw::Stabilized { amplitude: 0.1 };
        let data = collect_excitation_data(&p, 214, &law, 43, 7).unwrap();
        assert_eq!(data.trajectory.len(), 214);
        assert!(data.excitation.exciting, "{:?}", data.excitation);
        let again = collect_excitation_data(&p, 214, &law, 43, 7).unwrap();
        assert_eq!(data.trajectory, again.trajectory);
    }
}
