use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 16 nodes per side, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("radius {radius} outside the admissible range ({min}, {max}]")]
    RadiusOutOfRange { radius: f64, min: f64, max: f64 },

    #[error("radius {radius} is below the interpolation floor {floor}")]
    BelowInterpolationFloor { radius: f64, floor: f64 },

    #[error("degenerate projection of a vector with norm {0}")]
    DegenerateProjection(f64),

    #[error("node {node} is off the target by {deviation}")]
    OffTarget { node: usize, deviation: f64 },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("under-resolved bubble: radius {radius} <= 4h = {floor}")]
    UnderResolvedBubble { radius: f64, floor: f64 },

    #[error("rescaling window R*r = {window} exceeds R0 = {limit}")]
    WindowTooLarge { window: f64, limit: f64 },

    #[error("non-finite energy at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },

    #[error("deformation step unstable after {halvings} halvings")]
    StepInstability { halvings: usize },

    #[error("need at least {need} grid points, got {got}")]
    TooFewGridPoints { need: usize, got: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
