use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mode cap {requested} exceeds field truncation {available}")]
    ModeCapOutOfRange { requested: usize, available: usize },

    #[error("exact resonance at mode (p, n) = ({p}, {n}): divisor is zero at working precision")]
    Resonance { p: i64, n: i64 },

    #[error("mean-mode obstruction: divisor at (0, 0) vanishes identically but the \
             nonlinearity forces that mode; use a zero-mean kernel and drop n = 0 \
             potential entries")]
    MeanModeObstruction,

    #[error("divisor scan window too small: minimizer for n = {n} hits the p boundary \
             (|p| = {p_cap}); increase the p window")]
    WindowTooSmall { n: i64, p_cap: i64 },

    #[error("collocation grid of {points} points is undersized for {modes} modes \
             (need at least {required}); refusing to alias silently")]
    GridUndersized {
        points: usize,
        modes: usize,
        required: usize,
    },

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("missing divisor scan: run divisor_scan for these parameters first")]
    MissingScan,

    #[error("continued fraction needs at least {required} convergents, got {got}")]
    DepthExhausted { required: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
