use thiserror::Error;

/// Errors raised by the data-driven control library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("signal too short: length {len} but at least {required} samples are needed")]
    TooShort { len: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system is unobservable: observability rank {rank} < state dimension {n}")]
    Unobservable { rank: usize, n: usize },

    #[error("initial window of length {t_ini} is shorter than the system lag {lag}")]
    WindowShorterThanLag { t_ini: usize, lag: usize },

    #[error("initial data is inconsistent with the model (residual {residual:.3e})")]
    Inconsistent { residual: f64 },

    #[error("no valid system found after {attempts} draws")]
    GeneratorExhausted { attempts: usize },

    #[error("simulation diverged at step {step}: |state| = {magnitude:.3e}")]
    Diverged { step: usize, magnitude: f64 },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
