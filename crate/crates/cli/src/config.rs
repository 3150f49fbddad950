//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated; `inf` and `-inf` are accepted wherever a number is.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `experiment` | equivalence, figure8, step-stats, reg-sweep, collect, solve | from the subcommand |
//! | `seed` | master seed | 1 |
//! | `reps` | repetitions | 10 (equivalence), 30 (step-stats), 8 (reg-sweep), 1 (others) |
//! | `horizon` | prediction horizon `N` | 30 (quadcopter), 10 (equivalence) |
//! | `t_ini` | initialization window | 1 (quadcopter), system order (random LTI systems) |
//! | `q_diag`, `r_diag` | weight diagonals | 200,200,300,1,… / 1 |
//! | `u_min`, `u_max`, `y_min`, `y_max` | per-channel boxes | quadcopter: thrust [0,1], position [-3,3] |
//! | `lambda_g`, `lambda_y` | regularization | 30, 1e5 |
//! | `shift` | extra plan inputs applied per solve | 0 |
//! | `data_len` | collected samples (0 = minimum data length) | 214 |
//! | `steps` | closed-loop steps | 60 (step-stats, reg-sweep), 600 (figure8), 20 (equivalence) |
//! | `noise_std` | measurement noise on every quadcopter channel | 0.01 |
//! | `excitation` | stabilized or open-loop | stabilized |
//! | `excitation_amplitude` | thrust dither half-width | 0.1 |
//! | `sweep` | lambda_g, lambda_y or both | both |
//! | `lambda_g_grid`, `lambda_y_grid` | sweep grids | 0,1,3,10,30,100,300,1000,3000,10000 / 1e2,…,1e7 |
//! | `sweep_lambda_y`, `sweep_lambda_g` | fixed partner value in each sweep | 1e5 / 300 |
//! | `max_order`, `max_io` | equivalence system size limits | 4 / 2 |
//! | `tolerance` | equivalence pass threshold on input deviation | 1e-5 |
//! | `record_timing` | write wall-clock solve times into diagnostics | false |
//! | `system` | collect: quadcopter or lti | quadcopter |
//! | `order` | collect (lti): state dimension | 3 |
//! | `inputs`, `outputs` | collect (lti) and solve: signal dimensions | 1 / 1 (lti), 4 / 12 (solve) |
//! | `controller` | solve: deepc or regularized-deepc | regularized-deepc |
//! | `data_file`, `ini_file`, `reference_file` | solve: input CSV paths | required for solve |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use deepc::{Bounds, ControlProblem, DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Equivalence,
    Figure8,
    StepStats,
    RegSweep,
    Collect,
    Solve,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Equivalence => "equivalence",
            ExperimentKind::Figure8 => "figure8",
            ExperimentKind::StepStats => "step-stats",
            ExperimentKind::RegSweep => "reg-sweep",
            ExperimentKind::Collect => "collect",
            ExperimentKind::Solve => "solve",
        }
    }

    fn is_quadcopter(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Figure8 | ExperimentKind::StepStats | ExperimentKind::RegSweep
        )
    }
}

impl FromStr for ExperimentKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "equivalence" => ExperimentKind::Equivalence,
            "figure8" => ExperimentKind::Figure8,
            "step-stats" => ExperimentKind::StepStats,
            "reg-sweep" => ExperimentKind::RegSweep,
            "collect" => ExperimentKind::Collect,
            "solve" => ExperimentKind::Solve,
            other => bail!("unknown experiment `{other}`"),
        })
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Excitation {
    Stabilized,
    OpenLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    LambdaG,
    LambdaY,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Quadcopter,
    Lti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveController {
    DeePc,
    RegularizedDeePc,
}

/// Everything an experiment needs. Built from defaults for the experiment
/// kind, then overridden key by key.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub reps: usize,
    pub horizon: usize,
    /// `None` means "system order" for the equivalence experiment.
    pub t_ini: Option<usize>,
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
    pub lambda_g: f64,
    pub lambda_y: f64,
    pub shift: usize,
    pub data_len: usize,
    pub steps: usize,
    pub noise_std: f64,
    pub excitation: Excitation,
    pub excitation_amplitude: f64,
    pub sweep: Sweep,
    pub lambda_g_grid: Vec<f64>,
    pub lambda_y_grid: Vec<f64>,
    pub sweep_lambda_y: f64,
    pub sweep_lambda_g: f64,
    pub max_order: usize,
    pub max_io: usize,
    pub tolerance: f64,
    pub record_timing: bool,
    pub system: SystemKind,
    pub order: usize,
    pub inputs: Option<usize>,
    pub outputs: Option<usize>,
    pub controller: SolveController,
    pub data_file: Option<PathBuf>,
    pub ini_file: Option<PathBuf>,
    pub reference_file: Option<PathBuf>,
    pub out: PathBuf,
}

/// Output weight of the quadcopter study: position channels dominate.
pub const QUAD_Q_DIAG: [f64; 12] = [200.0, 200.0, 300.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
pub const QUAD_POSITION_BOX: f64 = 3.0;

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let quad = kind.is_quadcopter() || kind == ExperimentKind::Solve || kind == ExperimentKind::Collect;
        let inf = f64::INFINITY;
        let (y_min, y_max) = if quad {
            let mut lo = vec![-inf; 12];
            let mut hi = vec![inf; 12];
            for i in 0..3 {
                lo[i] = -QUAD_POSITION_BOX;
                hi[i] = QUAD_POSITION_BOX;
            }
            (lo, hi)
        } else {
            (vec![-10.0], vec![10.0])
        };
        Self {
            kind,
            seed: 1,
            reps: match kind {
                ExperimentKind::Equivalence => 10,
                ExperimentKind::StepStats => 30,
                ExperimentKind::RegSweep => 8,
                _ => 1,
            },
            horizon: if quad { 30 } else { 10 },
            t_ini: if kind.is_quadcopter() || kind == ExperimentKind::Solve {
                Some(1)
            } else {
                None
            },
            q_diag: if quad { QUAD_Q_DIAG.to_vec() } else { vec![1.0] },
            r_diag: vec![1.0],
            u_min: vec![if quad { 0.0 } else { -1.0 }],
            u_max: vec![1.0],
            y_min,
            y_max,
            lambda_g: 30.0,
            lambda_y: 1e5,
            shift: 0,
            data_len: if quad { 214 } else { 0 },
            steps: match kind {
                ExperimentKind::Figure8 => 600,
                ExperimentKind::Equivalence => 20,
                _ => 60,
            },
            noise_std: 0.01,
            excitation: Excitation::Stabilized,
            excitation_amplitude: 0.1,
            sweep: Sweep::Both,
            lambda_g_grid: vec![0.0, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1e3, 3e3, 1e4],
            lambda_y_grid: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7],
            sweep_lambda_y: 1e5,
            sweep_lambda_g: 300.0,
            max_order: 4,
            max_io: 2,
            tolerance: 1e-5,
            record_timing: false,
            system: SystemKind::Quadcopter,
            order: 3,
            inputs: None,
            outputs: None,
            controller: SolveController::RegularizedDeePc,
            data_file: None,
            ini_file: None,
            reference_file: None,
            out: PathBuf::from("out"),
        }
    }

    /// Parses `key = value` text on top of the defaults for `kind`. An
    /// `experiment` key, if present, must agree with `kind`.
    pub fn parse(kind: ExperimentKind, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(kind);
        let mut seen = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", no + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), no + 1).is_some() {
                bail!("line {}: duplicate key `{key}`", no + 1);
            }
            cfg.set(key, value)
                .with_context(|| format!("line {}: key `{key}`", no + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(kind, &text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => {
                let k: ExperimentKind = value.parse()?;
                if k != self.kind {
                    bail!("config is for `{k}` but `{}` was requested", self.kind);
                }
            }
            "seed" => self.seed = value.parse()?,
            "reps" => self.reps = value.parse()?,
            "horizon" => self.horizon = value.parse()?,
            "t_ini" => self.t_ini = Some(value.parse()?),
            "q_diag" => self.q_diag = parse_list(value)?,
            "r_diag" => self.r_diag = parse_list(value)?,
            "u_min" => self.u_min = parse_list(value)?,
            "u_max" => self.u_max = parse_list(value)?,
            "y_min" => self.y_min = parse_list(value)?,
            "y_max" => self.y_max = parse_list(value)?,
            "lambda_g" => self.lambda_g = parse_f64(value)?,
            "lambda_y" => self.lambda_y = parse_f64(value)?,
            "shift" => self.shift = value.parse()?,
            "data_len" => self.data_len = value.parse()?,
            "steps" => self.steps = value.parse()?,
            "noise_std" => self.noise_std = parse_f64(value)?,
            "excitation" => {
                self.excitation = match value {
                    "stabilized" => Excitation::Stabilized,
                    "open-loop" => Excitation::OpenLoop,
                    other => bail!("unknown excitation `{other}`"),
                }
            }
            "excitation_amplitude" => self.excitation_amplitude = parse_f64(value)?,
            "sweep" => {
                self.sweep = match value {
                    "lambda_g" => Sweep::LambdaG,
                    "lambda_y" => Sweep::LambdaY,
                    "both" => Sweep::Both,
                    other => bail!("unknown sweep `{other}`"),
                }
            }
            "lambda_g_grid" => self.lambda_g_grid = parse_list(value)?,
            "lambda_y_grid" => self.lambda_y_grid = parse_list(value)?,
            "sweep_lambda_y" => self.sweep_lambda_y = parse_f64(value)?,
            "sweep_lambda_g" => self.sweep_lambda_g = parse_f64(value)?,
            "max_order" => self.max_order = value.parse()?,
            "max_io" => self.max_io = value.parse()?,
            "tolerance" => self.tolerance = parse_f64(value)?,
            "record_timing" => self.record_timing = value.parse()?,
            "system" => {
                self.system = match value {
                    "quadcopter" => SystemKind::Quadcopter,
                    "lti" => SystemKind::Lti,
                    other => bail!("unknown system `{other}`"),
                }
            }
            "order" => self.order = value.parse()?,
            "inputs" => self.inputs = Some(value.parse()?),
            "outputs" => self.outputs = Some(value.parse()?),
            "controller" => {
                self.controller = match value {
                    "deepc" => SolveController::DeePc,
                    "regularized-deepc" => SolveController::RegularizedDeePc,
                    other => bail!("unknown controller `{other}`"),
                }
            }
            "data_file" => self.data_file = Some(PathBuf::from(value)),
            "ini_file" => self.ini_file = Some(PathBuf::from(value)),
            "reference_file" => self.reference_file = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            other => bail!("unknown key `{other}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            bail!("reps must be at least 1");
        }
        if self.horizon == 0 {
            bail!("horizon must be positive");
        }
        if self.steps == 0 {
            bail!("steps must be positive");
        }
        if self.lambda_g < 0.0 || self.lambda_y < 0.0 {
            bail!("regularization weights must be nonnegative");
        }
        if self.shift >= self.horizon {
            bail!("shift must be below the horizon");
        }
        if !(self.noise_std >= 0.0) {
            bail!("noise_std must be nonnegative");
        }
        if self
            .lambda_g_grid
            .iter()
            .chain(&self.lambda_y_grid)
            .any(|v| !(*v >= 0.0))
        {
            bail!("sweep grids must be nonnegative");
        }
        for path in [&self.data_file, &self.ini_file, &self.reference_file]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                bail!("referenced file {} does not exist", path.display());
            }
        }
        Ok(())
    }

    /// Control problem for `m` inputs and `p` outputs. Single-entry lists
    /// are broadcast to every channel.
    pub fn control_problem(&self, m: usize, p: usize, t_ini: usize) -> Result<ControlProblem> {
        let mut cp = ControlProblem::new(m, p, self.horizon, t_ini);
        cp.q = DMatrix::from_diagonal(&broadcast(&self.q_diag, p, "q_diag")?);
        cp.r = DMatrix::from_diagonal(&broadcast(&self.r_diag, m, "r_diag")?);
        cp.input_bounds = Bounds::new(broadcast(&self.u_min, m, "u_min")?, broadcast(&self.u_max, m, "u_max")?)?;
        cp.output_bounds = Bounds::new(broadcast(&self.y_min, p, "y_min")?, broadcast(&self.y_max, p, "y_max")?)?;
        cp.lambda_g = self.lambda_g;
        cp.lambda_y = self.lambda_y;
        cp.shift = self.shift;
        cp.validate()?;
        Ok(cp)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse::<f64>().with_context(|| format!("`{s}` is not a number")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let v = s.split(',').map(|t| parse_f64(t.trim())).collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        bail!("empty list");
    }
    Ok(v)
}

fn broadcast(v: &[f64], dim: usize, name: &str) -> Result<DVector<f64>> {
    match v.len() {
        1 => Ok(DVector::from_element(dim, v[0])),
        n if n == dim => Ok(DVector::from_column_slice(v)),
        n => bail!("{name} has {n} entries, expected 1 or {dim}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadcopter_defaults_match_the_case_study() {
        let cfg = ExperimentConfig::defaults(ExperimentKind::StepStats);
        let cp = cfg.control_problem(4, 12, 1).unwrap();
        assert_eq!(cp.horizon, 30);
        assert_eq!(cp.q[(2, 2)], 300.0);
        assert_eq!(cp.r, DMatrix::identity(4, 4));
        assert_eq!((cp.lambda_g, cp.lambda_y), (30.0, 1e5));
        assert_eq!(cp.output_bounds.upper[0], 3.0);
        assert!(cp.output_bounds.upper[3].is_infinite());
        assert_eq!(cfg.data_len, 214);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let text = "# quick run\nreps = 3\nlambda_g_grid = 0, 10,30\ny_max = inf\n\nexperiment = reg-sweep\n";
        let cfg = ExperimentConfig::parse(ExperimentKind::RegSweep, text).unwrap();
        assert_eq!(cfg.reps, 3);
        assert_eq!(cfg.lambda_g_grid, vec![0.0, 10.0, 30.0]);
        assert!(cfg.y_max[0].is_infinite());
    }

    #[test]
    fn rejects_bad_input() {
        let kind = ExperimentKind::StepStats;
        assert!(ExperimentConfig::parse(kind, "reps = 0").is_err());
        assert!(ExperimentConfig::parse(kind, "bogus = 1").is_err());
        assert!(ExperimentConfig::parse(kind, "reps 3").is_err());
        assert!(ExperimentConfig::parse(kind, "reps = 2\nreps = 3").is_err());
        assert!(ExperimentConfig::parse(kind, "experiment = figure8").is_err());
        assert!(ExperimentConfig::parse(kind, "data_file = /nonexistent/file.csv").is_err());
        let cfg = ExperimentConfig::parse(kind, "q_diag = 1, 2").unwrap();
        assert!(cfg.control_problem(4, 12, 1).is_err());
    }
}
