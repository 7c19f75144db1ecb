use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("n*d must be even (n={n}, d={d})")]
    InvalidParity { n: usize, d: usize },
    #[error("need n > d and d >= 3 (n={n}, d={d})")]
    Degenerate { n: usize, d: usize },
    #[error("configuration model failed after {restarts} restarts")]
    RestartBudgetExceeded { restarts: usize },
    #[error("vertex set of size {size} exceeds limit {limit}")]
    SizeViolation { size: usize, limit: usize },
    #[error("sets do not form a partition of the vertex set")]
    NotAPartition,
    #[error("partition margin violated: |S1|={s1}, max other={other}, required margin {margin}")]
    MarginViolation { s1: usize, other: usize, margin: f64 },
    #[error("parameter too small: derived beta = {beta} must be positive")]
    ParameterTooSmall { beta: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vertex {0} is already minus")]
    DoubleMinus(u32),
    #[error("vertex {0} is already plus")]
    DoublePlus(u32),
    #[error("index {index} out of range (max {max})")]
    OutOfRange { index: usize, max: usize },
    #[error("state space of size {size} exceeds 2^20")]
    StateSpaceTooLarge { size: u128 },
    #[error("rule has no explicit stationary law")]
    NonReversibleRule,
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("conditioning on a null event")]
    NullEvent,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("empty input")]
    EmptyInput,
    #[error("domination violated at t={time}, vertex {vertex}")]
    DominationViolation { time: f64, vertex: u32 },
    #[error("inclusion violated ({which}) at t={time}, vertex {vertex}")]
    InclusionViolation { which: &'static str, time: f64, vertex: u32 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
