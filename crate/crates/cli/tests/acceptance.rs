//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use deepc::behavioral::{min_data_length, partition_data};
use deepc::controllers::solve_regularized_deepc;
use deepc::linalg::singular_values;
use deepc::ltisys::random_controllable_system;
use deepc::qp::{kkt_residuals, solve_qp};
use deepc::{ControlProblem, DVector, QpSettings, QpStatus, Trajectory};
use deepc_cli::config::Sweep;
use deepc_cli::{experiments, ExperimentConfig, ExperimentKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn inputs(rng: &mut ChaCha8Rng, len: usize, m: usize) -> Vec<DVector<f64>> {
    (0..len)
        .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-1.0..=1.0)))
        .collect()
}

fn stack(blocks: &[&[DVector<f64>]]) -> DVector<f64> {
    DVector::from_iterator(
        blocks.iter().map(|b| b.iter().map(|s| s.len()).sum::<usize>()).sum(),
        blocks.iter().flat_map(|b| b.iter().flat_map(|s| s.iter().copied())),
    )
}

fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (
        rng.random_range(1..=4),
        rng.random_range(1..=2),
        rng.random_range(1..=2),
    )
}

fn equivalence() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Equivalence);
    match experiments::run(&cfg) {
        Ok(report) => {
            let c = &report.checks[0];
            outcome(c.pass, c.detail.clone())
        }
        Err(e) => outcome(false, format!("error: {e:#}")),
    }
}

fn data_budget() -> Outcome {
    let v = min_data_length(4, 1, 30, 12);
    outcome(v == 214, format!("min_data_length(4, 1, 30, 12) = {v}, expected 214"))
}

fn trajectory_span() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (n, m, p) = random_dims(&mut rng);
        let ss = random_controllable_system(n, m, p, 2000 + seed).unwrap();
        let (t_ini, horizon) = (n, 10);
        let len = min_data_length(m, t_ini, horizon, n);
        let u = inputs(&mut rng, len, m);
        let (y, _) = ss.simulate(&DVector::zeros(n), &u).unwrap();
        let (dm, _) = partition_data(&Trajectory::new(m, p, u, y, 1.0).unwrap(), t_ini, horizon, Some(n)).unwrap();
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let u_new = inputs(&mut rng, t_ini + horizon, m);
        let (y_new, _) = ss.simulate(&x0, &u_new).unwrap();
        let w = stack(&[&u_new[..t_ini], &y_new[..t_ini], &u_new[t_ini..], &y_new[t_ini..]]);
        let h = dm.stacked();
        let svd = h.clone().svd(true, true);
        let g = svd.solve(&w, 1e-10 * svd.singular_values.max()).unwrap();
        worst = worst.max((&h * g - &w).norm() / w.norm());
    }
    outcome(
        worst <= 1e-8,
        format!("worst relative residual {worst:e} <= 1e-8 over 5 systems"),
    )
}

fn reconstruction() -> Outcome {
    let (mut worst, mut used, mut seed) = (0.0f64, 0, 0u64);
    while used < 20 && seed < 200 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let (n, m, p) = random_dims(&mut rng);
        let ss = random_controllable_system(n, m, p, 4000 + seed).unwrap();
        let lag = ss.lag(1e-9).unwrap();
        let sv = singular_values(&ss.observability_matrix(lag));
        let cond = sv[0] / sv[n - 1];
        if cond > 1e3 {
            continue;
        }
        used += 1;
        let x_start = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let u = inputs(&mut rng, lag, m);
        let (y, x_end) = ss.simulate(&x_start, &u).unwrap();
        let err = match ss.reconstruct_initial_state(&u, &y) {
            Ok(x) => (x - x_end).amax(),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    outcome(
        used == 20 && worst <= 1e-9,
        format!("worst error {worst:e} <= 1e-9 over {used} systems with observability condition <= 1e3"),
    )
}

fn slack() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    // a window longer than the state dimension, so that not every y_ini is
    // consistent with some initial state
    let (n, m, p, t_ini, horizon) = (3, 1, 1, 6, 8);
    let ss = random_controllable_system(n, m, p, 5001).unwrap();
    let len = min_data_length(m, t_ini, horizon, n) + 10;
    let u = inputs(&mut rng, len, m);
    let (y, _) = ss.simulate(&DVector::zeros(n), &u).unwrap();
    let (dm, _) = partition_data(&Trajectory::new(m, p, u, y, 1.0).unwrap(), t_ini, horizon, Some(n)).unwrap();
    let mut cp = ControlProblem::new(m, p, horizon, t_ini);
    cp.lambda_y = 1e5;
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
    let u_ini = inputs(&mut rng, t_ini, m);
    let (y_ini, _) = ss.simulate(&x0, &u_ini).unwrap();
    let r = vec![DVector::from_element(p, 0.5); horizon];
    let norm = |y_ini: &[DVector<f64>]| {
        let res = solve_regularized_deepc(&dm, &u_ini, y_ini, &r, &cp).unwrap();
        (res.status, res.sigma_y.unwrap().lp_norm(1))
    };
    let (s1, clean) = norm(&y_ini);
    let shifted: Vec<DVector<f64>> = y_ini.iter().map(|y| y.add_scalar(1.0)).collect();
    let (s2, offset) = norm(&shifted);
    let ok = s1 == QpStatus::Optimal && s2 == QpStatus::Optimal && clean <= 1e-6 && offset >= 0.1;
    outcome(
        ok,
        format!("consistent window slack {clean:e} <= 1e-6, offset window slack {offset:e} >= 0.1"),
    )
}

fn qp_backend() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let (mut gap, mut kkt_worst, mut failures) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let prob = oracle::random_boxed_qp(n, 0, || rng.random_range(-1.0..=1.0));
        let reference = oracle::enumerate(&prob, 1e-10).expect("boxed problems are feasible");
        match solve_qp(&prob, &QpSettings::default()) {
            Ok(sol) if sol.status == QpStatus::Optimal => {
                gap = gap.max((&sol.x - &reference.x).amax());
                let kkt = kkt_residuals(&prob, &sol.x, &sol.duals);
                kkt_worst = kkt_worst
                    .max(kkt.max())
                    .max(oracle::projected_gradient_residual(&prob, &sol.x));
            }
            _ => failures += 1,
        }
    }
    outcome(
        failures == 0 && gap <= 1e-5 && kkt_worst <= 1e-6,
        format!(
            "100 QPs: max |x - x_enum| {gap:e} <= 1e-5, max KKT residual {kkt_worst:e} <= 1e-6, {failures} failures"
        ),
    )
}

fn quadcopter_trends() -> Outcome {
    let mut step = ExperimentConfig::defaults(ExperimentKind::StepStats);
    step.reps = 10;
    let mut sweep = ExperimentConfig::defaults(ExperimentKind::RegSweep);
    sweep.sweep = Sweep::LambdaG;
    sweep.lambda_g_grid = vec![0.0, 10.0, 30.0, 100.0, 300.0, 1000.0];
    sweep.reps = 8;
    let mut details = Vec::new();
    let mut pass = true;
    for cfg in [step, sweep] {
        match experiments::run(&cfg) {
            Ok(report) => {
                for c in &report.checks {
                    pass &= c.pass;
                    details.push(format!(
                        "{} {}: {}",
                        if c.pass { "ok" } else { "failed" },
                        c.name,
                        c.detail
                    ));
                }
                for line in report.summary().lines().filter(|l| l.starts_with("stats")) {
                    println!("    {line}");
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("{} error: {e:#}", cfg.kind));
            }
        }
    }
    outcome(pass, details.join("; "))
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let key = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut equivalence = ExperimentConfig::defaults(ExperimentKind::Equivalence);
    equivalence.reps = 3;
    let mut step = ExperimentConfig::defaults(ExperimentKind::StepStats);
    step.reps = 2;
    step.steps = 20;
    let mut sweep = ExperimentConfig::defaults(ExperimentKind::RegSweep);
    sweep.reps = 1;
    sweep.steps = 10;
    sweep.lambda_g_grid = vec![0.0, 30.0];
    sweep.lambda_y_grid = vec![1e5];
    let mut compared = 0;
    for cfg in [equivalence, step, sweep] {
        let mut runs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            let report = experiments::run(&cfg).unwrap();
            report.write(dir.path()).unwrap();
            runs.push(csv_files(dir.path()));
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            return outcome(false, format!("{} CSV output differs between invocations", cfg.kind));
        }
        compared += runs[0].len();
    }
    outcome(
        true,
        format!("{compared} CSV files byte-identical across two invocations"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("MPC and DeePC closed-loop equivalence", equivalence),
        ("data budget formula", data_budget),
        ("trajectory span of the data matrices", trajectory_span),
        ("initial state reconstruction", reconstruction),
        ("slack behaviour", slack),
        ("QP backend against enumeration", qp_backend),
        ("quadcopter trends", quadcopter_trends),
        ("determinism", determinism),
    ];
    let mut all = true;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let o = f();
        all &= o.pass;
        println!(
            "{} [{}] {name}: {} ({:.1} s)",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            clock.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
