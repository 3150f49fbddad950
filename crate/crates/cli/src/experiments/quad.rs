//! Quadcopter experiments: figure-eight tracking, step statistics and the
//! regularization sweep. Every repetition collects a fresh data set; both
//! methods of a repetition share its data seed and plant-noise seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use anyhow::Result;
use deepc::behavioral::{min_data_length, partition_data};
use deepc::controllers::{run_receding_horizon, Controller, RunOptions, StateEstimator};
use deepc::quadsim::{collect_excitation_data, ExcitationLaw, QuadPlant, INPUT_DIM, STATE_DIM};
use deepc::sysid::identify_full_state;
use deepc::{ControlProblem, DVector, DataMatrices, Error, QuadParams, QuadState, StateSpace, StepRecord};

use crate::config::{Excitation, ExperimentConfig, Sweep};
use crate::report::{mean, quartiles, ExperimentReport, RunRecord};
use crate::seeds;

pub const DEEPC: &str = "deepc";
pub const ID_MPC: &str = "id-mpc";

const FIGURE8_AMPLITUDE: f64 = 2.0;
const FIGURE8_PERIOD_S: f64 = 15.0;
const STEP_TIME_S: f64 = 1.0;
const STEP_TARGET: [f64; 3] = [1.0, 1.0, 1.0];
const SLACK_TOL: f64 = 1e-6;

/// Data and models of one repetition.
pub struct QuadSetup {
    pub params: QuadParams,
    pub t_ini: usize,
    pub dm: DataMatrices,
    pub model: StateSpace,
    pub data_seed: u64,
    pub noise_seed: u64,
    pub notes: Vec<String>,
}

/// A repetition whose data could not be collected or fitted.
#[derive(Debug, Clone)]
pub struct SetupFailure {
    pub data_seed: u64,
    pub noise_seed: u64,
    pub reason: String,
}

pub fn setup(cfg: &ExperimentConfig, rep: usize) -> Result<QuadSetup, SetupFailure> {
    let data_seed = seeds::derive(cfg.seed, "data", rep as u64);
    let noise_seed = seeds::derive(cfg.seed, "noise", rep as u64);
    let wrap = |e: Error| SetupFailure {
        data_seed,
        noise_seed,
        reason: e.to_string(),
    };
    let params = QuadParams::default().with_noise(cfg.noise_std);
    let t_ini = cfg.t_ini.unwrap_or(1);
    let samples = if cfg.data_len == 0 {
        min_data_length(INPUT_DIM, t_ini, cfg.horizon, STATE_DIM)
    } else {
        cfg.data_len
    };
    let law = match cfg.excitation {
        Excitation::Stabilized => ExcitationLaw::Stabilized {
            amplitude: cfg.excitation_amplitude,
        },
        Excitation::OpenLoop => ExcitationLaw::OpenLoop {
            amplitude: cfg.excitation_amplitude,
        },
    };
    let pe_order = t_ini + cfg.horizon + STATE_DIM;
    let data = collect_excitation_data(&params, samples, &law, pe_order, data_seed).map_err(wrap)?;
    let (dm, short) = partition_data(&data.trajectory, t_ini, cfg.horizon, Some(STATE_DIM)).map_err(wrap)?;
    let mut notes = Vec::new();
    if let Some(s) = short {
        notes.push(format!(
            "rep {rep}: {} samples, below the minimum {}",
            s.len, s.required
        ));
    }
    if !data.excitation.exciting {
        notes.push(format!(
            "rep {rep}: input rank {} of {} required",
            data.excitation.rank, data.excitation.required_rank
        ));
    }
    if data.attempts > 1 {
        notes.push(format!(
            "rep {rep}: excitation amplitude reduced to {} after {} attempts",
            data.amplitude, data.attempts
        ));
    }
    let model = identify_full_state(&data.trajectory, 0.0).map_err(wrap)?.model;
    Ok(QuadSetup {
        params,
        t_ini,
        dm,
        model,
        data_seed,
        noise_seed,
        notes,
    })
}

fn position_reference(steps: usize, f: impl Fn(f64) -> [f64; 3], dt: f64) -> Vec<DVector<f64>> {
    (0..steps)
        .map(|k| {
            let mut r = DVector::zeros(STATE_DIM);
            let pos = f(k as f64 * dt);
            r.rows_mut(0, 3).copy_from_slice(&pos);
            r
        })
        .collect()
}

/// Position step from the origin at `t = 1 s`; other channels stay at zero.
pub fn step_reference(len: usize, dt: f64) -> Vec<DVector<f64>> {
    let k_step = (STEP_TIME_S / dt).round() as usize;
    (0..len)
        .map(|k| {
            let mut r = DVector::zeros(STATE_DIM);
            if k >= k_step {
                r.rows_mut(0, 3).copy_from_slice(&STEP_TARGET);
            }
            r
        })
        .collect()
}

/// Gerono lemniscate in the horizontal plane at constant altitude, starting
/// at the origin.
pub fn figure8_reference(len: usize, dt: f64) -> Vec<DVector<f64>> {
    let w = 2.0 * PI / FIGURE8_PERIOD_S;
    let a = FIGURE8_AMPLITUDE;
    position_reference(len, |t| [a * (w * t).sin(), a * (w * t).sin() * (w * t).cos(), 0.0], dt)
}

/// Result of one closed loop: the raw record and, when it completed, the
/// step diagnostics.
pub struct MethodRun {
    pub record: RunRecord,
    pub steps: Option<Vec<StepRecord>>,
    pub solve_ms: Vec<f64>,
}

pub fn run_method(
    cfg: &ExperimentConfig,
    setup: &QuadSetup,
    method: &str,
    cp: &ControlProblem,
    reference: &[DVector<f64>],
    rep: usize,
    point: &str,
) -> MethodRun {
    let dt = setup.params.dt;
    let controller = match method {
        DEEPC => Controller::RegularizedDeePc(&setup.dm),
        _ => Controller::Mpc {
            model: &setup.model,
            estimator: StateEstimator::Plant,
        },
    };
    let options = RunOptions {
        warmup: Some(vec![setup.params.hover_inputs(); setup.t_ini]),
        record_timing: true,
        relax_output_bounds: true,
    };
    let mut record = RunRecord {
        method: method.to_string(),
        point: point.to_string(),
        rep,
        data_seed: setup.data_seed,
        noise_seed: setup.noise_seed,
        cost: None,
        violation_s: None,
        duration_s: cfg.steps as f64 * dt,
        status: String::new(),
        extra: Vec::new(),
    };
    let outcome = QuadPlant::new(setup.params.clone(), QuadState::hover(), setup.noise_seed)
        .and_then(|mut plant| run_receding_horizon(&mut plant, &controller, cp, reference, cfg.steps, &options));
    let run = match outcome {
        Ok(run) => run,
        Err(e) => {
            record.status = format!("failed: {e}");
            return MethodRun {
                record,
                steps: None,
                solve_ms: Vec::new(),
            };
        }
    };
    let solve_ms: Vec<f64> = run.records.iter().filter(|r| r.solved).map(|r| r.solve_ms).collect();
    let mut steps = run.records.clone();
    if !cfg.record_timing {
        steps.iter_mut().for_each(|r| r.solve_ms = 0.0);
    }
    let relaxed = run.records.iter().filter(|r| r.relaxed && r.solved).count();
    let max_slack = run.records.iter().filter_map(|r| r.slack_norm).fold(0.0, f64::max);
    record.extra = vec![
        ("solves".into(), run.solves.to_string()),
        ("relaxed_solves".into(), relaxed.to_string()),
        ("max_slack_norm".into(), format!("{max_slack:e}")),
    ];
    if let Some(reason) = &run.aborted {
        record.status = format!("failed: {reason}");
    } else {
        record.cost = Some(run.realized_cost(cp, reference));
        record.violation_s = Some(run.violation_steps() as f64 * dt);
        record.status = "ok".into();
    }
    MethodRun {
        record,
        steps: Some(steps),
        solve_ms,
    }
}

fn failed_setup(cfg: &ExperimentConfig, rep: usize, point: &str, method: &str, err: &SetupFailure) -> RunRecord {
    RunRecord {
        method: method.into(),
        point: point.into(),
        rep,
        data_seed: err.data_seed,
        noise_seed: err.noise_seed,
        cost: None,
        violation_s: None,
        duration_s: cfg.steps as f64 * QuadParams::default().dt,
        status: format!("failed: data collection: {}", err.reason),
        extra: Vec::new(),
    }
}

fn reference_table(reference: &[DVector<f64>], dt: f64) -> String {
    let mut s = String::from("t,x,y,z\n");
    for (k, r) in reference.iter().enumerate() {
        let _ = writeln!(s, "{},{:e},{:e},{:e}", k as f64 * dt, r[0], r[1], r[2]);
    }
    s
}

/// Runs both methods on every repetition with the given reference.
fn paired_runs(
    cfg: &ExperimentConfig,
    report: &mut ExperimentReport,
    reference: &[DVector<f64>],
    keep_diagnostics: bool,
) -> Result<()> {
    for rep in 0..cfg.reps {
        let setup = match setup(cfg, rep) {
            Ok(s) => s,
            Err(e) => {
                for method in [DEEPC, ID_MPC] {
                    report.runs.push(failed_setup(cfg, rep, "", method, &e));
                }
                continue;
            }
        };
        report.notes.extend(setup.notes.iter().cloned());
        let cp = cfg.control_problem(INPUT_DIM, STATE_DIM, setup.t_ini)?;
        for method in [DEEPC, ID_MPC] {
            let run = run_method(cfg, &setup, method, &cp, reference, rep, "");
            log::info!("rep {rep} {method}: {} cost {:?}", run.record.status, run.record.cost);
            report.solve_ms.extend(&run.solve_ms);
            if keep_diagnostics {
                if let Some(steps) = run.steps {
                    report.diagnostics.push((format!("rep{rep:02}_{method}"), steps));
                }
            }
            report.runs.push(run.record);
        }
    }
    Ok(())
}

/// Pairs of completed `(deepc, id-mpc)` records by repetition.
fn pairs(report: &ExperimentReport) -> Vec<(&RunRecord, &RunRecord)> {
    let by_rep = |m: &str| -> BTreeMap<usize, &RunRecord> {
        report
            .runs
            .iter()
            .filter(|r| r.method == m && !r.failed())
            .map(|r| (r.rep, r))
            .collect()
    };
    let (d, i) = (by_rep(DEEPC), by_rep(ID_MPC));
    d.iter().filter_map(|(rep, a)| i.get(rep).map(|b| (*a, *b))).collect()
}

pub fn figure8(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("figure8");
    let dt = QuadParams::default().dt;
    let reference = figure8_reference(cfg.steps + cfg.horizon, dt);
    paired_runs(cfg, &mut report, &reference, true)?;
    report
        .tables
        .push(("reference.csv".into(), reference_table(&reference[..cfg.steps], dt)));

    let deepc: Vec<&RunRecord> = report.runs.iter().filter(|r| r.method == DEEPC).collect();
    let total = deepc.len();
    let completed = deepc.iter().filter(|r| !r.failed()).count();
    let violation: f64 = deepc.iter().filter_map(|r| r.violation_s).sum();
    let detail = format!("{completed} of {total} runs completed, {violation} s outside the position box");
    report.check("deepc_within_box", completed == total && violation == 0.0, detail);
    if cfg.noise_std == 0.0 {
        let worst = report
            .diagnostics
            .iter()
            .filter(|(name, _)| name.ends_with(DEEPC))
            .flat_map(|(_, steps)| steps.iter().filter_map(|s| s.slack_norm))
            .fold(0.0, f64::max);
        report.check(
            "noiseless_slack_vanishes",
            completed == total && worst <= SLACK_TOL,
            format!("max slack norm {worst:e} <= {SLACK_TOL:e}"),
        );
    }
    Ok(report)
}

pub fn step_stats(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("step-stats");
    let dt = QuadParams::default().dt;
    let reference = step_reference(cfg.steps + cfg.horizon, dt);
    paired_runs(cfg, &mut report, &reference, true)?;

    let pairs: Vec<(RunRecord, RunRecord)> = pairs(&report)
        .into_iter()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    let dc: Vec<f64> = pairs.iter().filter_map(|p| p.0.cost).collect();
    let ic: Vec<f64> = pairs.iter().filter_map(|p| p.1.cost).collect();
    let median = |v: &[f64]| quartiles(v).map_or(f64::NAN, |q| q.median);
    let (dm, im) = (median(&dc), median(&ic));
    report.note(format!("paired_runs = {} of {}", pairs.len(), cfg.reps));
    report.check(
        "median_cost",
        !pairs.is_empty() && dm <= im,
        format!(
            "{DEEPC} median {dm:.6e} <= {ID_MPC} median {im:.6e} over {} pairs",
            pairs.len()
        ),
    );
    // ties are not wins; excluded repetitions count against
    let wins = pairs.iter().filter(|(d, i)| d.violation_s < i.violation_s).count();
    let ties = pairs.iter().filter(|(d, i)| d.violation_s == i.violation_s).count();
    let needed = (0.6 * cfg.reps as f64).ceil() as usize;
    report.check(
        "violation_wins",
        wins >= needed,
        format!(
            "{DEEPC} violation duration below {ID_MPC} in {wins} of {} repetitions ({ties} ties), need {needed}",
            cfg.reps
        ),
    );
    Ok(report)
}

fn point_label(lambda_g: f64, lambda_y: f64) -> String {
    format!("lambda_g={lambda_g:e};lambda_y={lambda_y:e}")
}

pub fn reg_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("reg-sweep");
    let dt = QuadParams::default().dt;
    let reference = step_reference(cfg.steps + cfg.horizon, dt);

    let mut points: Vec<(&str, f64, f64)> = Vec::new();
    if matches!(cfg.sweep, Sweep::LambdaG | Sweep::Both) {
        points.extend(cfg.lambda_g_grid.iter().map(|&g| ("lambda_g", g, cfg.sweep_lambda_y)));
    }
    if matches!(cfg.sweep, Sweep::LambdaY | Sweep::Both) {
        points.extend(cfg.lambda_y_grid.iter().map(|&y| ("lambda_y", cfg.sweep_lambda_g, y)));
    }

    // results keyed by (sweep index, rep); shared points are solved once
    let mut rows: BTreeMap<(usize, usize), RunRecord> = BTreeMap::new();
    for rep in 0..cfg.reps {
        let setup = setup(cfg, rep);
        if let Ok(s) = &setup {
            report.notes.extend(s.notes.iter().cloned());
        }
        let mut solved: BTreeMap<String, RunRecord> = BTreeMap::new();
        for (idx, &(sweep, g, y)) in points.iter().enumerate() {
            let label = point_label(g, y);
            let mut record = match &setup {
                Err(e) => failed_setup(cfg, rep, &label, DEEPC, e),
                Ok(s) => {
                    if let Some(r) = solved.get(&label) {
                        r.clone()
                    } else {
                        let mut cp = cfg.control_problem(INPUT_DIM, STATE_DIM, s.t_ini)?;
                        cp.lambda_g = g;
                        cp.lambda_y = y;
                        let run = run_method(cfg, s, DEEPC, &cp, &reference, rep, &label);
                        log::info!("rep {rep} {label}: {} cost {:?}", run.record.status, run.record.cost);
                        report.solve_ms.extend(&run.solve_ms);
                        solved.insert(label.clone(), run.record.clone());
                        run.record
                    }
                }
            };
            record.point = format!("{sweep}:{label}");
            rows.insert((idx, rep), record);
        }
    }
    report.runs = rows.into_values().collect();

    let average = |point: &str| -> (Option<f64>, usize) {
        let costs: Vec<f64> = report.completed(DEEPC, point).filter_map(|r| r.cost).collect();
        (mean(&costs), costs.len())
    };
    let mut table = String::from("sweep,lambda_g,lambda_y,completed,mean_cost,mean_violation_s\n");
    for &(sweep, g, y) in &points {
        let point = format!("{sweep}:{}", point_label(g, y));
        let (cost, n) = average(&point);
        let viol: Vec<f64> = report.completed(DEEPC, &point).filter_map(|r| r.violation_s).collect();
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:e}"));
        let _ = writeln!(table, "{sweep},{g:e},{y:e},{n},{},{}", fmt(cost), fmt(mean(&viol)));
    }
    let mut tables = vec![("sweep.csv".to_string(), table)];

    let g_points: Vec<(f64, String)> = points
        .iter()
        .filter(|p| p.0 == "lambda_g")
        .map(|&(s, g, y)| (g, format!("{s}:{}", point_label(g, y))))
        .collect();
    let zero = g_points.iter().find(|(g, _)| *g == 0.0);
    let best = g_points
        .iter()
        .filter(|(g, _)| (10.0..=1e3).contains(g))
        .filter_map(|(g, p)| average(p).0.map(|c| (*g, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let check = match (zero, best) {
        (Some((_, zp)), Some((bg, bc))) => {
            let (zc, zn) = average(zp);
            // a point whose runs all failed counts as infinitely expensive
            let zc = zc.unwrap_or(f64::INFINITY);
            Some((
                zc > bc,
                format!("mean cost at lambda_g=0 {zc:.6e} ({zn} runs) > best lambda_g={bg:e} mean {bc:.6e}"),
            ))
        }
        _ => None,
    };
    report.tables.append(&mut tables);
    if let Some((pass, detail)) = check {
        report.check("zero_lambda_g_worse", pass, detail);
    }
    Ok(report)
}
