use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("seed points {0} and {1} are within the net radius of each other")]
    SeedConflict(String, String),
    #[error("exact covering requested for a ball with {size} points (cap {cap})")]
    InstanceTooLarge { size: usize, cap: usize },
    #[error("invalid scales: r = {r} must not exceed R = {big_r}")]
    InvalidScales { r: f64, big_r: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("depth {depth} exceeds the limit {limit}")]
    TooDeep { depth: usize, limit: usize },
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("delta {0} is outside the admissible range")]
    DeltaOutOfRange(String),
    #[error("cube {cube} at level {level} violates the ball sandwich: {detail}")]
    SandwichViolation { cube: usize, level: usize, detail: String },
    #[error("source mismatch: {0}")]
    SourceMismatch(String),
    #[error("p = {p} is outside (0, {bound}]")]
    POutOfRange { p: String, bound: String },
    #[error("tree structure error: {0}")]
    StructureError(String),
    #[error("invalid weight vector: {0}")]
    EtaInvalid(String),
    #[error("cube {cube} has only {found} children at interior distance >= {threshold}, {wanted} required")]
    NotEnoughInteriorChildren { cube: usize, found: usize, wanted: usize, threshold: f64 },
    #[error("invalid scale window: {0}")]
    WindowInvalid(String),
    #[error("tree depth {depth} is below the requested chain length {needed}")]
    TreeTooShallow { depth: usize, needed: usize },
    #[error("parameters out of range: {0}")]
    ParamsOutOfRange(String),
    #[error("requested {requested} levels below cube {cube}, only {available} available")]
    DepthExceeded { cube: usize, requested: usize, available: usize },
    #[error("check not applicable: {0}")]
    NotApplicable(String),
    #[error("target {target} is below the set dimension {set_dimension}")]
    TargetBelowSetDimension { target: f64, set_dimension: f64 },
    #[error("target {target} not bracketed; attainable range over the scan is [{low}, {high}]")]
    TargetNotBracketed { target: f64, low: f64, high: f64 },
    #[error("unknown point id {0:?}")]
    UnknownPoint(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
