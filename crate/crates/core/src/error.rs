use thiserror::Error;

/// Errors raised across the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid exponent `{0}`")]
    InvalidExponent(String),
    #[error("point is not admissible on the critical hyperbola: {0}")]
    NotOnHyperbola(String),
    #[error("unsupported exponent regime: {0}")]
    UnsupportedRegime(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no bracket for the shooting parameter in [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },
    #[error("shooting did not converge: {0}")]
    NoConvergence(String),
    #[error("profile lost positivity at r = {radius}")]
    PositivityLost { radius: f64 },
    #[error("decay window holds {points} grid points, at least {required} needed")]
    WindowTooShort { points: usize, required: usize },
    #[error("ground state failed tail validation: {0}")]
    TailValidation(String),

    #[error("weighted tail of {constant} is not integrable (exponent {exponent})")]
    DivergentTail { constant: &'static str, exponent: f64 },
    #[error("normalization mismatch: {0}")]
    NormalizationMismatch(String),

    #[error("radius {radius} is outside the normal chart (injectivity radius {injectivity})")]
    OutOfChart { radius: f64, injectivity: f64 },
    #[error("peak configuration violates separation: {0}")]
    Separation(String),

    #[error("scale t = {0} is not positive")]
    NonpositiveScale(f64),
    #[error("phi = {0} is not positive")]
    NonpositivePhi(f64),
    #[error("no critical point found after {starts} starts")]
    NoCriticalPointFound { starts: usize },
    #[error("{k} peaks at separation {separation} do not fit on the manifold")]
    SeparationUnsatisfiable { k: usize, separation: f64 },

    #[error("cutoff radius {r0} exceeds the chart bound {bound}")]
    ChartViolation { r0: f64, bound: f64 },
    #[error("bubble supports overlap: separation {separation} < 2 r0 = {twice_r0}")]
    OverlappingSupports { separation: f64, twice_r0: f64 },
    #[error("potential is not constant or radial about peak {0}")]
    NonRadialPotential(usize),
    #[error("design matrix condition number {0:e} exceeds 1e10")]
    IllConditionedFit(f64),

    #[error("configuration error: {0}")]
    Config(String),
    #[error("cache format error: {0}")]
    CacheFormat(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
