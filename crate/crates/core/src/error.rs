use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown builtin function `{0}`")]
    UnknownBuiltin(String),
    #[error("unknown homeomorphism `{0}`")]
    UnknownHomeo(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("csv input, line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("expression `{source_text}`: {message}")]
    Expression {
        source_text: String,
        message: String,
    },
    #[error("evaluation failed at x = {x}: {reason}")]
    Eval { x: f64, reason: String },
    #[error("grid too short: need {needed} octaves, have {available}")]
    GridTooShort { needed: usize, available: usize },
    #[error("E_0 tail check failed: f({x}) = {value} is outside [-{bound}, {bound}]")]
    TailCheck { x: f64, value: f64, bound: f64 },
    #[error("map is not increasing on the probe grid near x = {x}")]
    NotIncreasing { x: f64 },
    #[error("map does not fix 0: h(0) = {value}")]
    NotFixingZero { value: f64 },
    #[error("no inverse bracket for y = {y} below ceiling {ceiling}")]
    InverseBracket { y: f64, ceiling: f64 },
    #[error("0 is not attracting: h({x}) = {hx} >= x")]
    ZeroRepelling { x: f64, hx: f64 },
    #[error("witness check failed: residual {residual} exceeds tolerance {tol}")]
    WitnessFailed { residual: f64, tol: f64 },
    #[error("no convergence after {iterations} iterations (last sup-change {last_change})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("orbit from x = {x} does not reach the second transversal within time {ceiling}")]
    NoCrossing { x: f64, ceiling: f64 },
    #[error("point ({xi}, {eta}) is not in the punctured quarter-plane")]
    OutsideQuarterPlane { xi: f64, eta: f64 },
    #[error("boundary point ({xi}, {eta}) is not supported by realized flows")]
    BoundaryPoint { xi: f64, eta: f64 },
    #[error("invalid transversal: {0}")]
    Transversal(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
