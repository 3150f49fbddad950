use std::fs;
use std::path::Path;
use std::process::Command;

fn deepc(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_deepc")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn write(path: &Path, text: &str) -> String {
    fs::write(path, text).unwrap();
    path.display().to_string()
}

#[test]
fn collect_then_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("collect.cfg"),
        "system = lti\norder = 2\ninputs = 1\noutputs = 1\nhorizon = 6\n",
    );
    let out = dir.path().join("collect");
    let (code, text) = deepc(&[
        "collect",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("PASS persistently_exciting"));
    let data = out.join("data.csv");
    assert!(data.exists() && out.join("system.txt").exists());

    // the last rows of the data double as the initialization window
    let ini = write(&dir.path().join("ini.csv"), &{
        let body = fs::read_to_string(&data).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        format!("{}\n{}\n", lines[0], lines[lines.len() - 2..].join("\n"))
    });
    let reference = write(&dir.path().join("ref.csv"), "r1\n0.5\n");
    let solve_cfg = write(
        &dir.path().join("solve.cfg"),
        &format!(
            "inputs = 1\noutputs = 1\nt_ini = 2\nhorizon = 6\nq_diag = 1\nu_min = -1\nu_max = 1\ny_min = -inf\ny_max = inf\n\
             controller = deepc\ndata_file = {}\nini_file = {ini}\nreference_file = {reference}\n",
            data.display()
        ),
    );
    let plan_dir = dir.path().join("solve");
    let (code, text) = deepc(&["solve", "--config", &solve_cfg, "--out", plan_dir.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let plan = fs::read_to_string(plan_dir.join("plan.csv")).unwrap();
    assert_eq!(plan.lines().count(), 7);
    assert!(plan.starts_with("k,u1,y1\n"));
}

#[test]
fn flags_override_the_config_and_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("eq.cfg"), "reps = 5\nmax_order = 2\n");
    let out = dir.path().join("eq");
    let (code, text) = deepc(&[
        "equivalence",
        "--config",
        &cfg,
        "--reps",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
    assert!(fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .contains("overall = PASS"));

    let bad = write(&dir.path().join("bad.cfg"), "reps = 0\n");
    let (code, text) = deepc(&["equivalence", "--config", &bad]);
    assert_eq!(code, 2);
    assert!(text.contains("reps"));
}

#[test]
fn a_failed_pass_condition_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // an impossible tolerance cannot pass
    let cfg = write(&dir.path().join("eq.cfg"), "reps = 1\ntolerance = -1\n");
    let out = dir.path().join("eq");
    let (code, text) = deepc(&["equivalence", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("FAIL max_input_deviation"));
}

#[test]
fn insufficient_data_is_excluded_not_failed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("eq.cfg"), "reps = 2\ndata_len = 12\n");
    let out = dir.path().join("eq");
    let (code, text) = deepc(&["equivalence", "--config", &cfg, "--out", out.to_str().unwrap()]);
    // nothing left to compare, so the experiment cannot pass
    assert_eq!(code, 1, "{text}");
    let runs = fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.matches("pe_violation").count(), 2);
    assert!(text.contains("2 excluded"));
}
