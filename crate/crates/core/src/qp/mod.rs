//! Convex quadratic programming backend.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀPx + qᵀx + offset
//! subject to  A_eq x = b_eq
//!             l_in ≤ A_in x ≤ u_in
//!             lb ≤ x ≤ ub
//! ```
//!
//! The default method is a primal-dual interior-point iteration. An
//! operator-splitting (ADMM) iteration with active-set polishing is
//! available through [`QpSettings::method`].

mod admm;
mod ipm;
mod one_norm;
mod polish;
mod scaling;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub use one_norm::{embed_one_norm, OneNormMap};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    /// Constant added to the reported objective.
    pub offset: f64,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    /// General two-sided rows `l_in ≤ A_in x ≤ u_in`.
    pub a_in: DMatrix<f64>,
    pub l_in: DVector<f64>,
    pub u_in: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
    /// Variable pairs `(v⁺, v⁻)` introduced by [`embed_one_norm`].
    pub(crate) split_pairs: Vec<(usize, usize)>,
}

impl QpProblem {
    /// Unconstrained problem `½ xᵀPx + qᵀx`.
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            p,
            q,
            offset: 0.0,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            l_in: DVector::zeros(0),
            u_in: DVector::zeros(0),
            lb: DVector::from_element(n, f64::NEG_INFINITY),
            ub: DVector::from_element(n, f64::INFINITY),
            split_pairs: Vec::new(),
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, l: DVector<f64>, u: DVector<f64>) -> Self {
        self.a_in = a;
        self.l_in = l;
        self.u_in = u;
        self
    }

    pub fn with_bounds(mut self, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let dim = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{what} is {got:?}, expected {want:?}")))
            }
        };
        dim("P", self.p.shape(), (n, n))?;
        dim("A_eq", self.a_eq.shape(), (self.b_eq.len(), n))?;
        dim("A_in", self.a_in.shape(), (self.l_in.len(), n))?;
        dim("u_in", (self.u_in.len(), 1), (self.l_in.len(), 1))?;
        dim("lb", (self.lb.len(), 1), (n, 1))?;
        dim("ub", (self.ub.len(), 1), (n, 1))?;
        if !linalg::is_symmetric(&self.p, 1e-12) {
            return Err(Error::InvalidArgument("P is not symmetric".into()));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&self.p) || !finite(&self.a_eq) || !finite(&self.a_in) {
            return Err(Error::InvalidArgument("non-finite matrix entry".into()));
        }
        if !self.q.iter().chain(self.b_eq.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite vector entry".into()));
        }
        let ordered = |l: &DVector<f64>, u: &DVector<f64>| {
            l.iter()
                .zip(u.iter())
                .all(|(a, b)| a <= b && !a.is_nan() && !b.is_nan())
        };
        if !ordered(&self.lb, &self.ub) || !ordered(&self.l_in, &self.u_in) {
            return Err(Error::InvalidArgument("lower bound exceeds upper bound".into()));
        }
        Ok(())
    }

    /// `½ xᵀPx + qᵀx + offset`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x) + self.offset
    }

    /// Dense stacked constraint matrix `[A_eq; A_in; I]` with its bounds,
    /// in the row order used by [`QpSolution::duals`]. Every variable gets
    /// a bound row, including unbounded ones.
    pub fn stacked_constraints(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let n = self.num_vars();
        let eye = DMatrix::identity(n, n);
        let a = linalg::vstack(&[&self.a_eq, &self.a_in, &eye]);
        let l = linalg::concat(&[&self.b_eq, &self.l_in, &self.lb]);
        let u = linalg::concat(&[&self.b_eq, &self.u_in, &self.ub]);
        (a, l, u)
    }

    /// Text dump for reproducing solver issues. Each block is written as a
    /// `name rows cols` line followed by row-major values, one row per line;
    /// vectors are written as columns.
    pub fn dump(&self) -> String {
        let mut s = String::from("# qp-dump v1\n");
        let mut block = |name: &str, m: &DMatrix<f64>| {
            let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        };
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        block("P", &self.p);
        block("q", &col(&self.q));
        block("offset", &DMatrix::from_element(1, 1, self.offset));
        block("A_eq", &self.a_eq);
        block("b_eq", &col(&self.b_eq));
        block("A_in", &self.a_in);
        block("l_in", &col(&self.l_in));
        block("u_in", &col(&self.u_in));
        block("lb", &col(&self.lb));
        block("ub", &col(&self.ub));
        s
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let mut next_block = |name: &str| -> Result<DMatrix<f64>> {
            let (ln, header) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing block {name}"),
            })?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != name {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected `{name} rows cols`"),
                });
            }
            let parse_dim = |t: &str| {
                t.parse::<usize>().map_err(|e| Error::Parse {
                    line: ln + 1,
                    msg: e.to_string(),
                })
            };
            let (rows, cols) = (parse_dim(parts[1])?, parse_dim(parts[2])?);
            let mut vals = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, row) = lines.next().ok_or(Error::Parse {
                    line: ln + 1,
                    msg: format!("block {name} truncated"),
                })?;
                for tok in row.split_whitespace() {
                    vals.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                        line: ln + 1,
                        msg: format!("`{tok}`: {e}"),
                    })?);
                }
            }
            if vals.len() != rows * cols {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("block {name} has {} values, expected {}", vals.len(), rows * cols),
                });
            }
            Ok(DMatrix::from_row_slice(rows, cols, &vals))
        };
        let row_vec = |m: DMatrix<f64>| DVector::from_iterator(m.len(), m.iter().copied());
        let p = next_block("P")?;
        let q = row_vec(next_block("q")?);
        let offset = next_block("offset")?[(0, 0)];
        let a_eq = next_block("A_eq")?;
        let b_eq = row_vec(next_block("b_eq")?);
        let a_in = next_block("A_in")?;
        let l_in = row_vec(next_block("l_in")?);
        let u_in = row_vec(next_block("u_in")?);
        let lb = row_vec(next_block("lb")?);
        let ub = row_vec(next_block("ub")?);
        let prob = Self {
            p,
            q,
            offset,
            a_eq,
            b_eq,
            a_in,
            l_in,
            u_in,
            lb,
            ub,
            split_pairs: Vec::new(),
        };
        prob.validate()?;
        Ok(prob)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum QpMethod {
    #[default]
    InteriorPoint,
    Admm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub method: QpMethod,
    /// Absolute tolerance on stationarity, feasibility and complementarity.
    pub eps_abs: f64,
    /// Tolerance of the primal infeasibility certificate test.
    pub eps_infeasible: f64,
    pub max_iter: usize,
    /// ADMM penalty parameter (fixed for the whole solve).
    pub rho: f64,
    /// Penalty multiplier applied to equality rows.
    pub rho_eq_scale: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    /// Residuals are evaluated every `check_every` iterations.
    pub check_every: usize,
    pub scaling_passes: usize,
    pub polish: bool,
    /// Regularization of the polishing KKT system.
    pub polish_delta: f64,
    pub polish_refine_iter: usize,
    /// Interior-point iteration limit.
    pub ipm_max_iter: usize,
    /// Relative tolerance on the interior-point residuals and gap.
    pub ipm_tol: f64,
    /// Relative diagonal regularization of the Newton systems.
    pub ipm_regularization: f64,
    pub ipm_refine_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_infeasible: 1e-7,
            max_iter: 50_000,
            rho: 0.1,
            rho_eq_scale: 1e3,
            sigma: 1e-6,
            alpha: 1.6,
            check_every: 10,
            scaling_passes: 10,
            polish: true,
            polish_delta: 1e-9,
            polish_refine_iter: 5,
            method: QpMethod::InteriorPoint,
            ipm_max_iter: 100,
            ipm_tol: 1e-10,
            ipm_regularization: 1e-11,
            ipm_refine_iter: 2,
        }
    }
}

/// Solves a convex QP with the configured method. Deterministic for
/// identical inputs and settings.
pub fn solve_qp(prob: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    match settings.method {
        QpMethod::InteriorPoint => {
            prob.validate()?;
            ipm::solve_ipm(prob, settings)
        }
        QpMethod::Admm => admm::solve_admm(prob, settings),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIterations => "max_iterations",
        }
    }
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers in the row order of [`QpProblem::stacked_constraints`]:
    /// equalities, general inequalities, then one row per variable bound.
    /// Negative values belong to active lower bounds, positive to upper.
    pub duals: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
}

/// First-order optimality residuals, all in infinity norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖Px + q + Aᵀy‖`.
    pub stationarity: f64,
    /// Distance of `Ax` to `[l, u]`.
    pub primal: f64,
    /// Largest natural complementarity violation
    /// `max(min(y⁺, |u - Ax|), min(y⁻, |Ax - l|))`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

/// KKT residuals of `(x, y)` for `prob`, with `y` in stacked-row order.
pub fn kkt_residuals(prob: &QpProblem, x: &DVector<f64>, y: &DVector<f64>) -> KktResiduals {
    let (me, mi, n) = (prob.a_eq.nrows(), prob.a_in.nrows(), prob.num_vars());
    let (y_eq, y_in, y_b) = (y.rows(0, me), y.rows(me, mi), y.rows(me + mi, n));
    let mut grad = &prob.p * x + &prob.q + y_b;
    if me > 0 {
        grad += prob.a_eq.tr_mul(&y_eq);
    }
    if mi > 0 {
        grad += prob.a_in.tr_mul(&y_in);
    }
    let mut primal: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut visit = |v: f64, l: f64, u: f64, yi: f64| {
        primal = primal.max(l - v).max(v - u);
        let (yp, ym) = (yi.max(0.0), (-yi).max(0.0));
        complementarity = complementarity.max(yp.min((u - v).abs())).max(ym.min((v - l).abs()));
    };
    if me > 0 {
        let ax = &prob.a_eq * x;
        for i in 0..me {
            visit(ax[i], prob.b_eq[i], prob.b_eq[i], y_eq[i]);
        }
    }
    if mi > 0 {
        let ax = &prob.a_in * x;
        for i in 0..mi {
            visit(ax[i], prob.l_in[i], prob.u_in[i], y_in[i]);
        }
    }
    for j in 0..n {
        visit(x[j], prob.lb[j], prob.ub[j], y_b[j]);
    }
    KktResiduals {
        stationarity: grad.amax(),
        primal: primal.max(0.0),
        complementarity,
    }
}
