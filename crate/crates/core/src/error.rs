use thiserror::Error;

pub type Result<T, E = QlcError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QlcError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("continuum of singular points")]
    ContinuumOfSingularPoints,
    #[error("condition undefined: {0}")]
    ConditionUndefined(String),
    #[error("point ({x}, {y}) is not singular (|f| = {residual:e})")]
    NotSingular { x: f64, y: f64, residual: f64 },
    #[error("point ({x}, {y}) is not a saddle")]
    NotSaddle { x: f64, y: f64 },
    #[error("not a weak focus candidate: {0}")]
    NotWeakFocusCandidate(String),
    #[error("stiffness/underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("no return")]
    NoReturn,
    #[error("no surrounding cycles possible: {0}")]
    NoSurroundingCycles(String),
    #[error("refine grid: zeros at {0} and {1} are closer than 1e-6")]
    RefineGrid(f64, f64),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("undecided: separatrix not classified before max time {0}")]
    Undecided(f64),
    #[error("no bracket: {0}")]
    NoBracket(String),
    #[error("continuation failed at {param} = {last_value} (x* = {last_x})")]
    ContinuationFailed {
        param: String,
        last_value: f64,
        last_x: f64,
    },
    #[error("no fold in range: {0}")]
    NoFold(String),
    #[error("stage {stage} failed: {details}")]
    StageFailed { stage: String, details: String },
}
