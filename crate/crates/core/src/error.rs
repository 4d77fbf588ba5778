use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("Wood anomaly: mode n = {n} at alpha = {alpha} has (n + alpha)^2 = omega^2")]
    WoodAnomaly { n: i64, alpha: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular system at alpha = {alpha} (design {design_hash:016x})")]
    Singular { alpha: f64, design_hash: u64 },

    #[error("solve at alpha = {alpha} left relative residual {residual:e}")]
    Inaccurate { alpha: f64, residual: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
