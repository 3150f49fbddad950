//! Non-parametric system representation: block-Hankel matrices built from raw
//! input/output samples, persistency-of-excitation tests, and the past/future
//! split used as a predictor.
//!
//! Blocks are stacked time-major: every channel of sample `t` is contiguous,
//! so column `j` of a depth-`L` Hankel matrix is `col(w[j], ..., w[j+L-1])`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RANK_TOL};

/// A sampled input/output trajectory `w = col(u, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    m: usize,
    p: usize,
    inputs: Vec<DVector<f64>>,
    outputs: Vec<DVector<f64>>,
    /// Sample period in seconds. Metadata only.
    pub dt: f64,
}

impl Trajectory {
    /// Builds a trajectory, validating that every sample has the declared size.
    pub fn new(m: usize, p: usize, inputs: Vec<DVector<f64>>, outputs: Vec<DVector<f64>>, dt: f64) -> Result<Self> {
        if m == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "input and output dimensions must be positive (m={m}, p={p})"
            )));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::Dimension(format!(
                "{} input samples but {} output samples",
                inputs.len(),
                outputs.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::TooShort { len: 0, required: 1 });
        }
        if let Some(k) = inputs.iter().position(|u| u.len() != m) {
            return Err(Error::Dimension(format!(
                "input sample {k} has dimension {}, expected {m}",
                inputs[k].len()
            )));
        }
        if let Some(k) = outputs.iter().position(|y| y.len() != p) {
            return Err(Error::Dimension(format!(
                "output sample {k} has dimension {}, expected {p}",
                outputs[k].len()
            )));
        }
        Ok(Self {
            m,
            p,
            inputs,
            outputs,
            dt,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    /// Always false: a trajectory holds at least one sample.
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[DVector<f64>] {
        &self.outputs
    }

    /// Interleaved samples `col(u_t, y_t)`.
    pub fn samples(&self) -> Vec<DVector<f64>> {
        self.inputs
            .iter()
            .zip(&self.outputs)
            .map(|(u, y)| linalg::concat(&[u, y]))
            .collect()
    }

    /// Reads the CSV format `t,u1..um,y1..yp`.
    pub fn read_csv<R: Read>(reader: R, m: usize, p: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let expected = 1 + m + p;
        let header_len = rdr.headers()?.len();
        if header_len != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header has {header_len} columns, expected {expected} for m={m}, p={p}"),
            });
        }
        let mut times = Vec::new();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            let record = record?;
            let line = k + 2;
            if record.len() != expected {
                return Err(Error::Parse {
                    line,
                    msg: format!("{} columns, expected {expected}", record.len()),
                });
            }
            let values = record
                .iter()
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        line,
                        msg: format!("`{f}`: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            times.push(values[0]);
            inputs.push(DVector::from_column_slice(&values[1..1 + m]));
            outputs.push(DVector::from_column_slice(&values[1 + m..]));
        }
        let dt = if times.len() >= 2 { times[1] - times[0] } else { 1.0 };
        Self::new(m, p, inputs, outputs, dt)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.m).map(|i| format!("u{i}")));
        header.extend((1..=self.p).map(|i| format!("y{i}")));
        writeln!(w, "{}", header.join(","))?;
        for (k, (u, y)) in self.inputs.iter().zip(&self.outputs).enumerate() {
            let mut row = vec![format!("{}", k as f64 * self.dt)];
            row.extend(u.iter().map(|v| format!("{v:e}")));
            row.extend(y.iter().map(|v| format!("{v:e}")));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, m: usize, p: usize) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, m, p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }
}

/// Past/future data matrices `Up, Yp, Uf, Yf`.
///
/// Freshly partitioned matrices are block-Hankel; after a low-rank
/// approximation they generally are not.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub up: DMatrix<f64>,
    pub yp: DMatrix<f64>,
    pub uf: DMatrix<f64>,
    pub yf: DMatrix<f64>,
    pub t_ini: usize,
    pub horizon: usize,
    pub m: usize,
    pub p: usize,
}

impl DataMatrices {
    /// Number of span coefficients, `T - T_ini - N + 1` for fresh data.
    pub fn g_dim(&self) -> usize {
        self.uf.ncols()
    }

    /// `col(Up, Yp, Uf, Yf)`.
    pub fn stacked(&self) -> DMatrix<f64> {
        linalg::vstack(&[&self.up, &self.yp, &self.uf, &self.yf])
    }

    /// Re-splits a stacked `col(Up, Yp, Uf, Yf)` matrix.
    pub fn from_stacked(stacked: &DMatrix<f64>, t_ini: usize, horizon: usize, m: usize, p: usize) -> Result<Self> {
        let rows = [t_ini * m, t_ini * p, horizon * m, horizon * p];
        let total: usize = rows.iter().sum();
        if stacked.nrows() != total {
            return Err(Error::Dimension(format!(
                "stacked data matrix has {} rows, expected {total}",
                stacked.nrows()
            )));
        }
        let cols = stacked.ncols();
        let mut offset = 0;
        let mut take = |r: usize| {
            let block = stacked.rows(offset, r).into_owned();
            offset += r;
            block
        };
        let (up, yp, uf, yf) = (take(rows[0]), take(rows[1]), take(rows[2]), take(rows[3]));
        debug_assert_eq!(up.ncols(), cols);
        Ok(Self {
            up,
            yp,
            uf,
            yf,
            t_ini,
            horizon,
            m,
            p,
        })
    }
}

/// Raised when a trajectory is shorter than the persistency-of-excitation minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsufficientData {
    pub len: usize,
    pub required: usize,
}

/// Result of a persistency-of-excitation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcitationReport {
    pub exciting: bool,
    pub rank: usize,
    pub required_rank: usize,
}

/// Depth-`depth` block-Hankel matrix of `signal`.
pub fn hankel(signal: &[DVector<f64>], depth: usize) -> Result<DMatrix<f64>> {
    if depth == 0 {
        return Err(Error::InvalidArgument("Hankel depth must be positive".into()));
    }
    let len = signal.len();
    if len < depth {
        return Err(Error::TooShort { len, required: depth });
    }
    let q = signal[0].len();
    if let Some(k) = signal.iter().position(|s| s.len() != q) {
        return Err(Error::Dimension(format!(
            "sample {k} has dimension {}, expected {q}",
            signal[k].len()
        )));
    }
    let cols = len - depth + 1;
    let mut h = DMatrix::zeros(depth * q, cols);
    for j in 0..cols {
        for i in 0..depth {
            h.view_mut((i * q, j), (q, 1)).copy_from(&signal[i + j]);
        }
    }
    Ok(h)
}

/// Tests whether `u` is persistently exciting of order `order`, i.e. whether
/// its depth-`order` Hankel matrix has full row rank `order * m`.
///
/// Numeric rank counts singular values above `tol * sigma_max`. Signals
/// shorter than `(m + 1) * order - 1` cannot be exciting and return `false`.
pub fn is_persistently_exciting(u: &[DVector<f64>], order: usize, tol: f64) -> Result<ExcitationReport> {
    let m = u.first().map_or(0, |v| v.len());
    let required_rank = order * m;
    if u.len() < order || order == 0 || m == 0 {
        return Ok(ExcitationReport {
            exciting: false,
            rank: 0,
            required_rank,
        });
    }
    let h = hankel(u, order)?;
    let rank = linalg::numeric_rank(&h, tol);
    let long_enough = u.len() + 1 >= (m + 1) * order;
    Ok(ExcitationReport {
        exciting: long_enough && rank == required_rank,
        rank,
        required_rank,
    })
}

/// Same as [`is_persistently_exciting`] with the default tolerance.
pub fn is_persistently_exciting_default(u: &[DVector<f64>], order: usize) -> Result<ExcitationReport> {
    is_persistently_exciting(u, order, DEFAULT_RANK_TOL)
}

/// Smallest number of samples for which an `m`-input signal can be
/// persistently exciting of order `t_ini + horizon + n_upper`.
pub fn min_data_length(m: usize, t_ini: usize, horizon: usize, n_upper: usize) -> usize {
    (m + 1) * (t_ini + horizon + n_upper) - 1
}

/// Builds depth-`(t_ini + horizon)` Hankel matrices of the recorded inputs and
/// outputs and splits each into `t_ini` past and `horizon` future block rows.
///
/// When `n_upper` is given and the trajectory is shorter than
/// [`min_data_length`], the matrices are still returned together with an
/// [`InsufficientData`] flag.
pub fn partition_data(
    traj: &Trajectory,
    t_ini: usize,
    horizon: usize,
    n_upper: Option<usize>,
) -> Result<(DataMatrices, Option<InsufficientData>)> {
    let depth = t_ini + horizon;
    if horizon == 0 {
        return Err(Error::InvalidArgument("prediction horizon must be positive".into()));
    }
    if traj.len() < depth {
        return Err(Error::TooShort {
            len: traj.len(),
            required: depth,
        });
    }
    let (m, p) = (traj.m(), traj.p());
    let hu = hankel(traj.inputs(), depth)?;
    let hy = hankel(traj.outputs(), depth)?;
    let dm = DataMatrices {
        up: hu.rows(0, t_ini * m).into_owned(),
        uf: hu.rows(t_ini * m, horizon * m).into_owned(),
        yp: hy.rows(0, t_ini * p).into_owned(),
        yf: hy.rows(t_ini * p, horizon * p).into_owned(),
        t_ini,
        horizon,
        m,
        p,
    };
    let warning = n_upper.and_then(|n| {
        let required = min_data_length(m, t_ini, horizon, n);
        (traj.len() < required).then(|| {
            log::warn!(
                "trajectory of length {} is shorter than the excitation minimum {required}",
                traj.len()
            );
            InsufficientData {
                len: traj.len(),
                required,
            }
        })
    });
    Ok((dm, warning))
}
