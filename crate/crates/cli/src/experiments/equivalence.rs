//! Closed-loop comparison of model-based MPC and DeePC on random
//! deterministic LTI systems.

use anyhow::Result;
use deepc::behavioral::{is_persistently_exciting_default, min_data_length, partition_data};
use deepc::controllers::{run_receding_horizon, ClosedLoop, Controller, LtiPlant, RunOptions, StateEstimator};
use deepc::ltisys::random_controllable_system;
use deepc::{DVector, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::report::{ExperimentReport, RunRecord};
use crate::seeds;

const REFERENCE_RANGE: f64 = 2.0;

fn uniform_samples(rng: &mut ChaCha8Rng, len: usize, dim: usize, half_width: f64) -> Vec<DVector<f64>> {
    (0..len)
        .map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-half_width..=half_width)))
        .collect()
}

/// Largest input difference over the common prefix of two runs.
pub fn max_input_deviation(a: &ClosedLoop, b: &ClosedLoop) -> f64 {
    a.inputs
        .iter()
        .zip(&b.inputs)
        .map(|(u, v)| (u - v).amax())
        .fold(0.0, f64::max)
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("equivalence");
    for rep in 0..cfg.reps {
        let record = one_system(cfg, rep, &mut report)?;
        log::info!("system {rep}: {}", record.status);
        report.runs.push(record);
    }

    let included: Vec<&RunRecord> = report.runs.iter().filter(|r| r.status != "pe_violation").collect();
    let excluded = report.runs.len() - included.len();
    let deviation = |r: &RunRecord| {
        r.extra
            .iter()
            .find(|(k, _)| k == "max_du")
            .and_then(|(_, v)| v.parse::<f64>().ok())
    };
    let worst = included
        .iter()
        .map(|r| deviation(r).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let failures = included.iter().filter(|r| r.failed()).count();
    let count = included.len();
    report.note(format!("pe_excluded = {excluded}"));
    report.check(
        "max_input_deviation",
        count > 0 && failures == 0 && worst <= cfg.tolerance,
        format!(
            "max deviation {worst:e} <= {:e} over {count} systems ({failures} failed, {excluded} excluded)",
            cfg.tolerance
        ),
    );
    Ok(report)
}

fn one_system(cfg: &ExperimentConfig, rep: usize, report: &mut ExperimentReport) -> Result<RunRecord> {
    let sys_seed = seeds::derive(cfg.seed, "system", rep as u64);
    let data_seed = seeds::derive(cfg.seed, "data", rep as u64);
    let start_seed = seeds::derive(cfg.seed, "initial", rep as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(sys_seed);
    let n = rng.random_range(1..=cfg.max_order);
    let m = rng.random_range(1..=cfg.max_io);
    let p = rng.random_range(1..=cfg.max_io);
    let t_ini = cfg.t_ini.unwrap_or(n);
    let required = min_data_length(m, t_ini, cfg.horizon, n);
    let len = if cfg.data_len == 0 { required } else { cfg.data_len };

    let mut record = RunRecord {
        method: "mpc-vs-deepc".into(),
        point: String::new(),
        rep,
        data_seed,
        noise_seed: start_seed,
        cost: None,
        violation_s: None,
        duration_s: cfg.steps as f64,
        status: String::new(),
        extra: vec![
            ("n".into(), n.to_string()),
            ("m".into(), m.to_string()),
            ("p".into(), p.to_string()),
            ("t_ini".into(), t_ini.to_string()),
            ("data_len".into(), len.to_string()),
        ],
    };

    let ss = match random_controllable_system(n, m, p, sys_seed) {
        Ok(ss) => ss,
        Err(e) => {
            record.status = format!("failed: {e}");
            return Ok(record);
        }
    };
    let mut data_rng = ChaCha8Rng::seed_from_u64(data_seed);
    let u = uniform_samples(&mut data_rng, len, m, 1.0);
    let (y, _) = ss.simulate(&DVector::zeros(n), &u)?;
    let pe = is_persistently_exciting_default(&u, t_ini + cfg.horizon + n)?;
    record
        .extra
        .push(("pe_rank".into(), format!("{}/{}", pe.rank, pe.required_rank)));
    if !pe.exciting || len < required {
        record.status = "pe_violation".into();
        return Ok(record);
    }
    let traj = Trajectory::new(m, p, u, y, 1.0)?;
    let (dm, _) = partition_data(&traj, t_ini, cfg.horizon, Some(n))?;
    let cp = cfg.control_problem(m, p, t_ini)?;

    let mut start_rng = ChaCha8Rng::seed_from_u64(start_seed);
    let x0 = DVector::from_fn(n, |_, _| start_rng.random_range(-1.0..=1.0));
    let reference = uniform_samples(&mut start_rng, 1, p, REFERENCE_RANGE);
    let options = RunOptions {
        record_timing: true,
        ..RunOptions::default()
    };
    let mpc = Controller::Mpc {
        model: &ss,
        estimator: StateEstimator::Plant,
    };
    let deepc = Controller::DeePc(&dm);
    let mut runs = Vec::new();
    for (name, controller) in [("mpc", mpc), ("deepc", deepc)] {
        let mut plant = LtiPlant::new(ss.clone(), x0.clone())?;
        match run_receding_horizon(&mut plant, &controller, &cp, &reference, cfg.steps, &options) {
            Ok(mut run) => {
                report
                    .solve_ms
                    .extend(run.records.iter().filter(|r| r.solved).map(|r| r.solve_ms));
                if !cfg.record_timing {
                    run.records.iter_mut().for_each(|r| r.solve_ms = 0.0);
                }
                report
                    .diagnostics
                    .push((format!("system{rep:02}_{name}"), run.records.clone()));
                runs.push(run);
            }
            Err(e) => {
                record.status = format!("failed: {name}: {e}");
                return Ok(record);
            }
        }
    }
    let (a, b) = (&runs[0], &runs[1]);
    if let Some(reason) = a.aborted.as_ref().or(b.aborted.as_ref()) {
        record.status = format!("failed: {reason}");
        return Ok(record);
    }
    let du = max_input_deviation(a, b);
    record.cost = Some(b.realized_cost(&cp, &reference));
    record.violation_s = Some(b.violation_steps() as f64);
    record
        .extra
        .push(("mpc_cost".into(), format!("{:e}", a.realized_cost(&cp, &reference))));
    record.extra.push(("max_du".into(), format!("{du:e}")));
    record.status = "ok".into();
    Ok(record)
}
