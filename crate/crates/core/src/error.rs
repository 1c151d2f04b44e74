use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("window [{t0}, {tf}] is outside the series span [{start}, {end}]")]
    WindowOutOfRange { t0: f64, tf: f64, start: f64, end: f64 },

    #[error("n_max = {n_max} requires more than {len} samples")]
    InsufficientLength { n_max: usize, len: usize },

    #[error("series of length {len} is too short for the 0-1 test (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },

    #[error("no grid node satisfies the chaos constraint")]
    NoFeasiblePoint,
}

pub type Result<T> = std::result::Result<T, Error>;
