//! Data generation and single open-loop solves from files.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use deepc::behavioral::{is_persistently_exciting_default, min_data_length, partition_data};
use deepc::controllers::{solve_deepc, solve_regularized_deepc};
use deepc::ltisys::random_controllable_system;
use deepc::quadsim::{collect_excitation_data, ExcitationLaw, INPUT_DIM, STATE_DIM};
use deepc::{DVector, QpStatus, QuadParams, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Excitation, ExperimentConfig, SolveController, SystemKind};
use crate::report::ExperimentReport;
use crate::seeds;

fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

/// Writes `data.csv` (and `system.txt` for a random LTI system); passes when
/// the inputs are persistently exciting of the order DeePC needs.
pub fn collect(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("collect");
    let seed = seeds::derive(cfg.seed, "data", 0);
    let (traj, n) = match cfg.system {
        SystemKind::Quadcopter => {
            let params = QuadParams::default().with_noise(cfg.noise_std);
            let t_ini = cfg.t_ini.unwrap_or(1);
            let samples = match cfg.data_len {
                0 => min_data_length(INPUT_DIM, t_ini, cfg.horizon, STATE_DIM),
                len => len,
            };
            let law = match cfg.excitation {
                Excitation::Stabilized => ExcitationLaw::Stabilized {
                    amplitude: cfg.excitation_amplitude,
                },
                Excitation::OpenLoop => ExcitationLaw::OpenLoop {
                    amplitude: cfg.excitation_amplitude,
                },
            };
            let data = collect_excitation_data(&params, samples, &law, t_ini + cfg.horizon + STATE_DIM, seed)?;
            report.note(format!("excitation_amplitude = {}", data.amplitude));
            report.note(format!("attempts = {}", data.attempts));
            (data.trajectory, STATE_DIM)
        }
        SystemKind::Lti => {
            let (n, m, p) = (cfg.order, cfg.inputs.unwrap_or(1), cfg.outputs.unwrap_or(1));
            let ss = random_controllable_system(n, m, p, seeds::derive(cfg.seed, "system", 0))?;
            let t_ini = cfg.t_ini.unwrap_or(n);
            let samples = match cfg.data_len {
                0 => min_data_length(m, t_ini, cfg.horizon, n),
                len => len,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<DVector<f64>> = (0..samples)
                .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
                .collect();
            let (y, _) = ss.simulate(&DVector::zeros(n), &u)?;
            report.tables.push(("system.txt".into(), ss.to_text()));
            (Trajectory::new(m, p, u, y, 1.0)?, n)
        }
    };
    let t_ini = cfg.t_ini.unwrap_or(if cfg.system == SystemKind::Lti { n } else { 1 });
    let order = t_ini + cfg.horizon + n;
    let pe = is_persistently_exciting_default(traj.inputs(), order)?;
    report.note(format!("samples = {}", traj.len()));
    report.check(
        "persistently_exciting",
        pe.exciting,
        format!("input Hankel rank {} of {} at order {order}", pe.rank, pe.required_rank),
    );
    report.tables.push(("data.csv".into(), trajectory_csv(&traj)?));
    Ok(report)
}

fn read_reference(path: &Path, p: usize) -> Result<Vec<DVector<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != p {
            bail!("{} line {}: {} columns, expected {p}", path.display(), k + 2, rec.len());
        }
        let v = rec.iter().map(|f| f.parse::<f64>()).collect::<Result<Vec<_>, _>>()?;
        out.push(DVector::from_vec(v));
    }
    if out.is_empty() {
        bail!("{} holds no reference samples", path.display());
    }
    Ok(out)
}

/// One open-loop DeePC solve from a data file, an initialization file (its
/// last `t_ini` samples are used) and a reference file with one column per
/// output; the last reference row is held to fill the horizon.
pub fn solve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("solve");
    let (m, p) = (cfg.inputs.unwrap_or(INPUT_DIM), cfg.outputs.unwrap_or(STATE_DIM));
    let need = |f: &Option<std::path::PathBuf>, key: &str| -> Result<std::path::PathBuf> {
        f.clone().with_context(|| format!("solve needs `{key}` in the config"))
    };
    let data = Trajectory::load(need(&cfg.data_file, "data_file")?, m, p)?;
    let ini = Trajectory::load(need(&cfg.ini_file, "ini_file")?, m, p)?;
    let reference = read_reference(&need(&cfg.reference_file, "reference_file")?, p)?;
    let t_ini = cfg.t_ini.unwrap_or(1);
    if ini.len() < t_ini {
        bail!("initialization file has {} samples, t_ini is {t_ini}", ini.len());
    }
    let (dm, short) = partition_data(&data, t_ini, cfg.horizon, None)?;
    debug_assert!(short.is_none());
    let cp = cfg.control_problem(m, p, t_ini)?;
    let start = ini.len() - t_ini;
    let r_window = deepc::controllers::reference_window(&reference, 0, cfg.horizon);
    let (u_ini, y_ini) = (&ini.inputs()[start..], &ini.outputs()[start..]);
    let res = match cfg.controller {
        SolveController::DeePc => solve_deepc(&dm, u_ini, y_ini, &r_window, &cp)?,
        SolveController::RegularizedDeePc => solve_regularized_deepc(&dm, u_ini, y_ini, &r_window, &cp)?,
    };
    report.note(format!("status = {}", res.status));
    report.note(format!("objective = {:e}", res.objective));
    report.note(format!("tracking_cost = {:e}", res.tracking_cost));
    report.note(format!("iterations = {}", res.iterations));
    if let Some(s) = &res.sigma_y {
        report.note(format!("slack_norm = {:e}", s.lp_norm(1)));
    }
    report.check(
        "solved",
        res.status == QpStatus::Optimal,
        format!("solver status {}", res.status),
    );

    let mut plan = String::from("k");
    (1..=m).for_each(|i| write!(plan, ",u{i}").unwrap());
    (1..=p).for_each(|i| write!(plan, ",y{i}").unwrap());
    plan.push('\n');
    for (k, (u, y)) in res.u.iter().zip(&res.y).enumerate() {
        write!(plan, "{k}")?;
        for v in u.iter().chain(y.iter()) {
            write!(plan, ",{v:e}")?;
        }
        plan.push('\n');
    }
    report.tables.push(("plan.csv".into(), plan));
    Ok(report)
}
