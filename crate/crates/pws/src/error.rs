use field_expr::EvalError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PwsError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("x={x} is not in the sliding region (h={h})")]
    NotSliding { x: f64, h: f64 },
    #[error("sliding denominator degenerate at x={x}")]
    DegenerateDenominator { x: f64 },
    #[error("systems have different windows")]
    WindowMismatch,
    #[error("multiplicity indeterminate at x={x} up to order {max_order}")]
    Indeterminate { x: f64, max_order: usize },
    #[error("leading coefficient vanishes for claimed order {m} at x={x}")]
    ZeroLeadingCoefficient { x: f64, m: usize },
    #[error("tangent-point bound violated: {0}")]
    BoundViolation(String),
    #[error("step size underflow at t={t}, (x,y)=({x},{y})")]
    StepUnderflow { t: f64, x: f64, y: f64 },
    #[error("step budget exhausted at t={t}, (x,y)=({x},{y})")]
    TooManySteps { t: f64, x: f64, y: f64 },
    #[error("ambiguous tangency at x={x}")]
    AmbiguousTangency { x: f64 },
    #[error("orbit does not reach the target section: {0}")]
    NoArrival(String),
    #[error("orbit arrives tangentially at the target section (x={x}, y={y})")]
    TangentialArrival { x: f64, y: f64 },
    #[error("orbit departs tangentially from the source section")]
    TangentialDeparture,
    #[error("tangency order mismatch: claimed {claimed}, detected {detected}")]
    OrderMismatch { claimed: usize, detected: usize },
    #[error("trajectory is not closed (residual {residual:e})")]
    NotClosed { residual: f64 },
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("parameter out of range: {0}")]
    RangeError(String),
    #[error("harvest failure: {0}")]
    HarvestFailure(String),
    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),
    #[error("census mismatch: {0}")]
    CensusMismatch(String),
}

pub type Result<T> = std::result::Result<T, PwsError>;
