//! Discrete-time LTI state-space systems `x+ = Ax + Bu`, `y = Cx + Du`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RANK_TOL};

/// Relative least-squares residual above which initial data is called inconsistent.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Order and lag of a minimal representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemOrderInfo {
    pub order: usize,
    pub lag: usize,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {:?}",
                a.shape()
            )));
        }
        let (m, p) = (b.ncols(), c.nrows());
        if b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
            return Err(Error::Dimension(format!(
                "non-conformal system: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// One step of the recursion: returns `(y_k, x_{k+1})`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let y = &self.c * x + &self.d * u;
        let x_next = &self.a * x + &self.b * u;
        (y, x_next)
    }

    /// Simulates from `x0`, returning the outputs and the state after the last input.
    pub fn simulate(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, DVector<f64>)> {
        if x0.len() != self.n() {
            return Err(Error::Dimension(format!(
                "initial state has length {}, expected {}",
                x0.len(),
                self.n()
            )));
        }
        if let Some(k) = inputs.iter().position(|u| u.len() != self.m()) {
            return Err(Error::Dimension(format!(
                "input {k} has length {}, expected {}",
                inputs[k].len(),
                self.m()
            )));
        }
        let mut x = x0.clone();
        let mut outputs = Vec::with_capacity(inputs.len());
        for u in inputs {
            let (y, x_next) = self.step(&x, u);
            outputs.push(y);
            x = x_next;
        }
        Ok((outputs, x))
    }

    /// `col(C, CA, ..., CA^{ell-1})`.
    pub fn observability_matrix(&self, ell: usize) -> DMatrix<f64> {
        let (n, p) = (self.n(), self.p());
        let mut o = DMatrix::zeros(ell * p, n);
        let mut ca = self.c.clone();
        for k in 0..ell {
            o.view_mut((k * p, 0), (p, n)).copy_from(&ca);
            ca = &ca * &self.a;
        }
        o
    }

    /// `(B, AB, ..., A^{k-1}B)`.
    pub fn controllability_matrix(&self, k: usize) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut ctrb = DMatrix::zeros(n, k * m);
        let mut ab = self.b.clone();
        for i in 0..k {
            ctrb.view_mut((0, i * m), (n, m)).copy_from(&ab);
            ab = &self.a * &ab;
        }
        ctrb
    }

    /// Smallest `ell` with `rank O_ell = n`.
    pub fn lag(&self, tol: f64) -> Result<usize> {
        let n = self.n();
        for ell in 1..=n {
            let rank = linalg::numeric_rank(&self.observability_matrix(ell), tol);
            if rank == n {
                return Ok(ell);
            }
            if ell == n {
                return Err(Error::Unobservable { rank, n });
            }
        }
        unreachable!("state dimension is positive")
    }

    pub fn order_info(&self, tol: f64) -> Result<SystemOrderInfo> {
        Ok(SystemOrderInfo {
            order: self.n(),
            lag: self.lag(tol)?,
        })
    }

    pub fn is_controllable(&self, tol: f64) -> bool {
        linalg::numeric_rank(&self.controllability_matrix(self.n()), tol) == self.n()
    }

    pub fn is_observable(&self, tol: f64) -> bool {
        linalg::numeric_rank(&self.observability_matrix(self.n()), tol) == self.n()
    }

    /// Block lower-triangular impulse-response matrix: block `(i, j)` is
    /// `D` on the diagonal and `C A^{i-j-1} B` below it.
    pub fn toeplitz_impulse(&self, horizon: usize) -> DMatrix<f64> {
        let (m, p) = (self.m(), self.p());
        let mut markov = Vec::with_capacity(horizon);
        markov.push(self.d.clone());
        let mut a_pow_b = self.b.clone();
        for _ in 1..horizon {
            markov.push(&self.c * &a_pow_b);
            a_pow_b = &self.a * &a_pow_b;
        }
        let mut t = DMatrix::zeros(horizon * p, horizon * m);
        for i in 0..horizon {
            for j in 0..=i {
                t.view_mut((i * p, j * m), (p, m)).copy_from(&markov[i - j]);
            }
        }
        t
    }

    /// Largest eigenvalue modulus of `A`.
    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }

    /// Recovers the state reached after applying `u_ini` from the window's
    /// start state implied by `(u_ini, y_ini)`.
    pub fn reconstruct_initial_state(&self, u_ini: &[DVector<f64>], y_ini: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.reconstruct_initial_state_with_tol(u_ini, y_ini, DEFAULT_CONSISTENCY_TOL)
    }

    pub fn reconstruct_initial_state_with_tol(
        &self,
        u_ini: &[DVector<f64>],
        y_ini: &[DVector<f64>],
        consistency_tol: f64,
    ) -> Result<DVector<f64>> {
        let t_ini = u_ini.len();
        if y_ini.len() != t_ini {
            return Err(Error::Dimension(format!(
                "u_ini has {t_ini} samples but y_ini has {}",
                y_ini.len()
            )));
        }
        if y_ini.iter().any(|y| y.len() != self.p()) {
            return Err(Error::Dimension("output sample size differs from p".into()));
        }
        let n = self.n();
        let obs = self.observability_matrix(t_ini);
        if t_ini == 0 || linalg::numeric_rank(&obs, DEFAULT_RANK_TOL) < n {
            let lag = self.lag(DEFAULT_RANK_TOL)?;
            return Err(Error::WindowShorterThanLag { t_ini, lag });
        }
        let u = linalg::stack_samples(u_ini);
        let y = linalg::stack_samples(y_ini);
        let rhs = &y - self.toeplitz_impulse(t_ini) * &u;
        let x_start = linalg::lstsq(&obs, &rhs, 1e-13);
        let residual = (&obs * &x_start - &rhs).norm() / rhs.norm().max(1.0);
        if residual > consistency_tol {
            return Err(Error::Inconsistent { residual });
        }
        let (_, x_now) = self.simulate(&x_start, u_ini)?;
        Ok(x_now)
    }

    /// Writes the text format: a `n m p` line followed by row-major A, B, C, D.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.n(), self.m(), self.p());
        for mat in [&self.a, &self.b, &self.c, &self.d] {
            for r in 0..mat.nrows() {
                let row: Vec<String> = mat.row(r).iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i, t)));
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            let (line, tok) = tokens.next().ok_or(Error::Parse {
                line: 1,
                msg: "missing dimension line `n m p`".into(),
            })?;
            *d = tok.parse().map_err(|e| Error::Parse {
                line,
                msg: format!("dimension `{tok}`: {e}"),
            })?;
        }
        let [n, m, p] = dims;
        let mut read = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
            let mut vals = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                let (line, tok) = tokens.next().ok_or(Error::Parse {
                    line: 0,
                    msg: "unexpected end of matrix data".into(),
                })?;
                vals.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("`{tok}`: {e}"),
                })?);
            }
            Ok(DMatrix::from_row_slice(rows, cols, &vals))
        };
        let a = read(n, n)?;
        let b = read(n, m)?;
        let c = read(p, n)?;
        let d = read(p, m)?;
        if let Some((line, tok)) = tokens.next() {
            return Err(Error::Parse {
                line,
                msg: format!("trailing token `{tok}`"),
            });
        }
        Self::new(a, b, c, d)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

const GENERATOR_ATTEMPTS: usize = 200;
/// Rank tolerance used to accept a random draw; stricter than the default so
/// that accepted systems are well conditioned.
const GENERATOR_RANK_TOL: f64 = 1e-4;

/// Draws a random controllable and observable system with spectral radius in
/// `[0.5, 1.0]` and `D = 0`. Deterministic in `seed`.
pub fn random_controllable_system(n: usize, m: usize, p: usize, seed: u64) -> Result<StateSpace> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions must be positive (n={n}, m={m}, p={p})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = Uniform::new_inclusive(0.5, 1.0).expect("valid range");
    let gauss = |r: usize, c: usize, rng: &mut ChaCha8Rng| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    for _ in 0..GENERATOR_ATTEMPTS {
        let mut a: DMatrix<f64> = gauss(n, n, &mut rng);
        let b = gauss(n, m, &mut rng);
        let c = gauss(p, n, &mut rng);
        let target = radius.sample(&mut rng);
        let rho = StateSpace::new(a.clone(), b.clone(), c.clone(), DMatrix::zeros(p, m))?.spectral_radius();
        if rho < 1e-8 {
            continue;
        }
        a *= target / rho;
        let sys = StateSpace::new(a, b, c, DMatrix::zeros(p, m))?;
        if sys.is_controllable(GENERATOR_RANK_TOL) && sys.is_observable(GENERATOR_RANK_TOL) {
            return Ok(sys);
        }
    }
    Err(Error::GeneratorExhausted {
        attempts: GENERATOR_ATTEMPTS,
    })
}
