use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("singular point {0} is not a cell edge")]
    SingularPointOffGrid(f64),
    #[error("space has no analytic density to refine")]
    NotRefinable,
    #[error("k-cut at k = {k} has zero mass")]
    EmptyCut { k: i32 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("measure is not absolutely continuous on {} cell(s), first {:?}", .cells.len(), .cells.first())]
    NotAbsolutelyContinuous { cells: Vec<usize> },
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("total masses differ: {0} vs {1}")]
    UnbalancedMasses(f64, f64),
    #[error("support {rows}x{cols} exceeds solver cap {cap}")]
    SizeCap { rows: usize, cols: usize, cap: usize },
    #[error("output grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("degenerate jacobian on segment {0}")]
    DegenerateJacobian(usize),
    #[error("coupling marginal differs from density on cell {cell}: {got} vs {expected}")]
    MarginalMismatch { cell: usize, got: f64, expected: f64 },
    #[error("marginal support leaves the regular set on {} cell(s)", .cells.len())]
    SupportViolation { cells: Vec<usize> },
    #[error("mismatched inputs: {0}")]
    MismatchedInputs(String),
    #[error("sampler could not meet the entropy cap: {0}")]
    SamplerEntropyViolation(String),
    #[error("space has infinite total mass")]
    InfiniteMass,
    #[error("regularity parameters differ: {0}")]
    RegularityMismatch(String),
    #[error("measure and space use different grids")]
    GridMismatch,
    #[error("no table entry for {0}")]
    MissingEntry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
