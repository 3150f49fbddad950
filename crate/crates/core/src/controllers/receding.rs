use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;

use super::{solve_deepc, solve_mpc, solve_regularized_deepc, Bounds, ControlProblem, SolveResult};
use crate::behavioral::DataMatrices;
use crate::error::{Error, Result};
use crate::ltisys::StateSpace;
use crate::qp::QpStatus;

/// A system driven one sample at a time.
pub trait Plant {
    /// Applies `u` at the current time and returns the output measured at
    /// that time, then advances.
    fn apply(&mut self, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// State at the current time, if the plant exposes one.
    fn state_estimate(&self) -> Option<DVector<f64>> {
        None
    }
}

/// Noise-free linear plant exposing its exact state.
#[derive(Debug, Clone)]
pub struct LtiPlant {
    pub ss: StateSpace,
    pub x: DVector<f64>,
}

impl LtiPlant {
    pub fn new(ss: StateSpace, x0: DVector<f64>) -> Result<Self> {
        if x0.len() != ss.n() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, expected {}",
                x0.len(),
                ss.n()
            )));
        }
        Ok(Self { ss, x: x0 })
    }
}

impl Plant for LtiPlant {
    fn apply(&mut self, u: &DVector<f64>) -> Result<DVector<f64>> {
        if u.len() != self.ss.m() {
            return Err(Error::Dimension(format!("input has length {}", u.len())));
        }
        let (y, x_next) = self.ss.step(&self.x, u);
        self.x = x_next;
        Ok(y)
    }

    fn state_estimate(&self) -> Option<DVector<f64>> {
        Some(self.x.clone())
    }
}

/// Source of `x̂(t)` for the MPC controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateEstimator {
    /// Use [`Plant::state_estimate`].
    Plant,
    /// Least-squares fit of the model to the most recent window.
    Reconstruct,
}

#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Mpc {
        model: &'a StateSpace,
        estimator: StateEstimator,
    },
    DeePc(&'a DataMatrices),
    RegularizedDeePc(&'a DataMatrices),
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Mpc { .. } => "mpc",
            Controller::DeePc(_) => "deepc",
            Controller::RegularizedDeePc(_) => "regularized-deepc",
        }
    }

    fn solve(
        &self,
        plant: &dyn Plant,
        u_ini: &[DVector<f64>],
        y_ini: &[DVector<f64>],
        r_window: &[DVector<f64>],
        cp: &ControlProblem,
    ) -> Result<SolveResult> {
        match *self {
            Controller::Mpc { model, estimator } => {
                let x_hat = match estimator {
                    StateEstimator::Plant => plant
                        .state_estimate()
                        .ok_or_else(|| Error::InvalidArgument("plant does not expose its state".into()))?,
                    StateEstimator::Reconstruct => {
                        model.reconstruct_initial_state_with_tol(u_ini, y_ini, f64::INFINITY)?
                    }
                };
                solve_mpc(model, &x_hat, r_window, cp)
            }
            Controller::DeePc(dm) => solve_deepc(dm, u_ini, y_ini, r_window, cp),
            Controller::RegularizedDeePc(dm) => solve_regularized_deepc(dm, u_ini, y_ini, r_window, cp),
        }
    }
}

/// Options for [`run_receding_horizon`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Inputs applied before the first solve; `T_ini` zeros when absent.
    pub warmup: Option<Vec<DVector<f64>>>,
    /// Record wall-clock solve times. Off by default so that diagnostics are
    /// reproducible byte for byte.
    pub record_timing: bool,
    /// On an infeasible solve, re-solve that step without the output box
    /// instead of stopping the loop.
    pub relax_output_bounds: bool,
}

/// Diagnostics of one applied input.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Whether a solve happened at this step (false for reused plan inputs).
    pub solved: bool,
    pub status: QpStatus,
    pub objective: f64,
    pub solve_ms: f64,
    /// Output channels outside the output box at this step.
    pub violations: usize,
    /// ‖σ_y‖₁ of the plan in use (regularized DeePC only).
    pub slack_norm: Option<f64>,
    /// The output box was dropped to obtain this plan.
    pub relaxed: bool,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
}

/// Closed-loop run: warmup samples, closed-loop samples and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub warmup_inputs: Vec<DVector<f64>>,
    pub warmup_outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub records: Vec<StepRecord>,
    pub solves: usize,
    /// Reason the loop stopped before `steps`, if it did.
    pub aborted: Option<String>,
}

impl ClosedLoop {
    /// Realized stage cost on the measured closed-loop samples.
    pub fn realized_cost(&self, cp: &ControlProblem, reference: &[DVector<f64>]) -> f64 {
        let r = reference_window(reference, 0, self.outputs.len());
        cp.tracking_cost(&self.inputs, &self.outputs, &r)
    }

    pub fn violation_steps(&self) -> usize {
        self.records.iter().filter(|r| r.violations > 0).count()
    }
}

/// `len` reference samples starting at `start`, holding the last value past
/// the end of `reference`.
pub fn reference_window(reference: &[DVector<f64>], start: usize, len: usize) -> Vec<DVector<f64>> {
    let last = reference.len().saturating_sub(1);
    (start..start + len).map(|k| reference[k.min(last)].clone()).collect()
}

/// Receding-horizon loop: solve, apply the first `shift + 1` inputs, update
/// the initialization window from measurements, repeat for `steps` samples.
///
/// An infeasible solve stops the loop for the unregularized controllers and
/// is reported through [`ClosedLoop::aborted`].
pub fn run_receding_horizon(
    plant: &mut dyn Plant,
    controller: &Controller<'_>,
    cp: &ControlProblem,
    reference: &[DVector<f64>],
    steps: usize,
    options: &RunOptions,
) -> Result<ClosedLoop> {
    cp.validate()?;
    if reference.is_empty() {
        return Err(Error::InvalidArgument("reference is empty".into()));
    }
    let warmup = options
        .warmup
        .clone()
        .unwrap_or_else(|| vec![DVector::zeros(cp.m()); cp.t_ini]);
    if warmup.len() < cp.t_ini {
        return Err(Error::TooShort {
            len: warmup.len(),
            required: cp.t_ini,
        });
    }
    let mut u_hist = Vec::with_capacity(warmup.len() + steps);
    let mut y_hist = Vec::with_capacity(warmup.len() + steps);
    for u in &warmup {
        let y = plant.apply(u)?;
        u_hist.push(u.clone());
        y_hist.push(y);
    }
    let n_warm = u_hist.len();

    let mut records = Vec::with_capacity(steps);
    let mut solves = 0;
    let mut aborted = None;
    let mut k = 0;
    while k < steps {
        let start = u_hist.len() - cp.t_ini;
        let r_window = reference_window(reference, k, cp.horizon);
        let clock = Instant::now();
        let mut plan = controller.solve(&*plant, &u_hist[start..], &y_hist[start..], &r_window, cp)?;
        let mut relaxed = false;
        if plan.status == QpStatus::Infeasible && options.relax_output_bounds && !cp.output_bounds.is_unbounded() {
            let mut loose = cp.clone();
            loose.output_bounds = Bounds::unbounded(cp.p());
            plan = controller.solve(&*plant, &u_hist[start..], &y_hist[start..], &r_window, &loose)?;
            relaxed = true;
        }
        let solve_ms = if options.record_timing {
            clock.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        solves += 1;
        if plan.status == QpStatus::Infeasible && !matches!(controller, Controller::RegularizedDeePc(_)) {
            aborted = Some(format!("{} problem infeasible at step {k}", controller.name()));
            break;
        }
        if plan.status != QpStatus::Optimal {
            log::debug!("{} step {k}: solver status {}", controller.name(), plan.status);
        }
        let slack_norm = plan.sigma_y.as_ref().map(|s| s.lp_norm(1));
        for (j, u) in plan.u.iter().take(cp.inputs_per_solve()).enumerate() {
            if k >= steps {
                break;
            }
            let y = plant.apply(u)?;
            records.push(StepRecord {
                step: k,
                solved: j == 0,
                status: plan.status,
                objective: plan.objective,
                solve_ms: if j == 0 { solve_ms } else { 0.0 },
                violations: cp.output_bounds.violations(&y, 0.0),
                slack_norm,
                relaxed,
                u: u.clone(),
                y: y.clone(),
            });
            u_hist.push(u.clone());
            y_hist.push(y);
            k += 1;
        }
    }

    let outputs = y_hist.split_off(n_warm);
    let inputs = u_hist.split_off(n_warm);
    Ok(ClosedLoop {
        warmup_inputs: u_hist,
        warmup_outputs: y_hist,
        inputs,
        outputs,
        records,
        solves,
        aborted,
    })
}

/// Writes `step,solve_status,objective,solve_ms,violation_count,u...,y...`.
pub fn write_diagnostics_csv<W: Write>(records: &[StepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let (m, p) = records.first().map_or((0, 0), |r| (r.u.len(), r.y.len()));
    let mut header: Vec<String> = ["step", "solve_status", "objective", "solve_ms", "violation_count"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend((1..=p).map(|i| format!("y{i}")));
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.step.to_string(),
            if r.relaxed {
                format!("{}_relaxed", r.status.as_str())
            } else {
                r.status.as_str().to_string()
            },
            r.objective.to_string(),
            r.solve_ms.to_string(),
            r.violations.to_string(),
        ];
        row.extend(r.u.iter().chain(r.y.iter()).map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavioral::{partition_data, Trajectory};
    use crate::controllers::Bounds;
    use crate::ltisys::random_controllable_system;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (StateSpace, DataMatrices, ControlProblem) {
        let ss = random_controllable_system(2, 1, 1, seed).unwrap();
        let (t_ini, horizon) = (2, 6);
        let len = crate::behavioral::min_data_length(1, t_ini, horizon, 2) + 10;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let u: Vec<_> = (0..len)
            .map(|_| DVector::from_element(1, rng.random_range(-1.0..1.0)))
            .collect();
        let (y, _) = ss.simulate(&DVector::zeros(2), &u).unwrap();
        let dm = partition_data(
            &Trajectory::new(ss.m(), ss.p(), u, y, 1.0).unwrap(),
            t_ini,
            horizon,
            Some(2),
        )
        .unwrap()
        .0;
        let mut cp = ControlProblem::new(1, 1, horizon, t_ini);
        cp.input_bounds = Bounds::uniform(1, -1.0, 1.0);
        cp.output_bounds = Bounds::uniform(1, -10.0, 10.0);
        (ss, dm, cp)
    }

    fn scalars(v: &[f64]) -> Vec<DVector<f64>> {
        v.iter().map(|&x| DVector::from_element(1, x)).collect()
    }

    #[test]
    fn mpc_and_deepc_close_the_loop_identically() {
        let (ss, dm, cp) = setup(4);
        let reference = scalars(&[1.0]);
        let x0 = DVector::from_vec(vec![0.5, -0.2]);
        let opts = RunOptions::default();
        let mut p1 = LtiPlant::new(ss.clone(), x0.clone()).unwrap();
        let mpc = Controller::Mpc {
            model: &ss,
            estimator: StateEstimator::Plant,
        };
        let a = run_receding_horizon(&mut p1, &mpc, &cp, &reference, 20, &opts).unwrap();
        let mut p2 = LtiPlant::new(ss.clone(), x0).unwrap();
        let b = run_receding_horizon(&mut p2, &Controller::DeePc(&dm), &cp, &reference, 20, &opts).unwrap();
        assert!(a.aborted.is_none() && b.aborted.is_none());
        for (ua, ub) in a.inputs.iter().zip(&b.inputs) {
            assert!((ua - ub).amax() < 1e-5, "{ua} vs {ub}");
        }
    }

    #[test]
    fn reconstruct_estimator_matches_exact_state() {
        let (ss, _, cp) = setup(9);
        let reference = scalars(&[0.5, -0.5]);
        let x0 = DVector::from_vec(vec![0.1, 0.3]);
        let opts = RunOptions::default();
        let run = |estimator| {
            let mut plant = LtiPlant::new(ss.clone(), x0.clone()).unwrap();
            let ctrl = Controller::Mpc { model: &ss, estimator };
            run_receding_horizon(&mut plant, &ctrl, &cp, &reference, 10, &opts).unwrap()
        };
        let a = run(StateEstimator::Plant);
        let b = run(StateEstimator::Reconstruct);
        for (ua, ub) in a.inputs.iter().zip(&b.inputs) {
            assert!((ua - ub).amax() < 1e-6);
        }
    }

    #[test]
    fn rest_stays_at_rest() {
        let (ss, dm, cp) = setup(2);
        let mut plant = LtiPlant::new(ss, DVector::zeros(2)).unwrap();
        let run = run_receding_horizon(
            &mut plant,
            &Controller::DeePc(&dm),
            &cp,
            &scalars(&[0.0]),
            8,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(run.inputs.iter().all(|u| u.amax() < 1e-6));
        assert!(run.outputs.iter().all(|y| y.amax() < 1e-6));
        assert_eq!(run.warmup_inputs.len(), cp.t_ini);
    }

    #[test]
    fn full_shift_solves_once_per_horizon() {
        let (ss, _, mut cp) = setup(3);
        cp.shift = cp.horizon - 1;
        let steps = 20;
        let mut plant = LtiPlant::new(ss.clone(), DVector::zeros(2)).unwrap();
        let ctrl = Controller::Mpc {
            model: &ss,
            estimator: StateEstimator::Plant,
        };
        let run =
            run_receding_horizon(&mut plant, &ctrl, &cp, &scalars(&[1.0]), steps, &RunOptions::default()).unwrap();
        assert_eq!(run.solves, steps.div_ceil(cp.horizon));
        assert_eq!(run.records.len(), steps);
        assert_eq!(run.records.iter().filter(|r| r.solved).count(), run.solves);
    }

    #[test]
    fn infeasible_deepc_aborts() {
        let (ss, dm, mut cp) = setup(5);
        cp.output_bounds = Bounds::uniform(1, 5.0, 6.0);
        let mut plant = LtiPlant::new(ss, DVector::zeros(2)).unwrap();
        let run = run_receding_horizon(
            &mut plant,
            &Controller::DeePc(&dm),
            &cp,
            &scalars(&[5.5]),
            5,
            &RunOptions::default(),
        )
        .unwrap();
        assert!(run.aborted.is_some());
        assert!(run.inputs.is_empty());
    }

    #[test]
    fn reference_is_held_past_its_end() {
        let r = scalars(&[1.0, 2.0]);
        let w = reference_window(&r, 1, 3);
        assert_eq!(w, scalars(&[2.0, 2.0, 2.0]));
    }

    #[test]
    fn diagnostics_csv_layout() {
        let rec = StepRecord {
            step: 0,
            solved: true,
            status: QpStatus::Optimal,
            objective: 1.5,
            solve_ms: 0.0,
            violations: 1,
            slack_norm: None,
            relaxed: false,
            u: DVector::from_vec(vec![0.25]),
            y: DVector::from_vec(vec![1.0, -2.0]),
        };
        let mut buf = Vec::new();
        write_diagnostics_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,solve_status,objective,solve_ms,violation_count,u1,y1,y2\n0,optimal,1.5,0,1,0.25,1,-2\n"
        );
    }

    #[test]
    fn realized_cost_uses_measurements() {
        let cp = ControlProblem::new(1, 1, 2, 1);
        let run = ClosedLoop {
            warmup_inputs: vec![],
            warmup_outputs: vec![],
            inputs: scalars(&[1.0, 0.0]),
            outputs: scalars(&[0.0, 3.0]),
            records: vec![],
            solves: 0,
            aborted: None,
        };
        // (0-1)² + 1² + (3-1)² + 0²
        assert_eq!(run.realized_cost(&cp, &scalars(&[1.0])), 6.0);
    }
}
