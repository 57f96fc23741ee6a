use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range (have {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cross-section has no eigenfunction evaluator (spectrum-only geometry)")]
    NoEigenfunctions,

    #[error("z = {re}{im:+}i lies within 1e-9 of the pole at {pole}")]
    PoleProximity { re: f64, im: f64, pole: f64 },

    #[error("log power {0} unsupported (at most 1)")]
    UnsupportedLogPower(u32),

    #[error("EndpointCollision: pole {pole} (mode {mode}) collides with the lower endpoint {endpoint} of I_gamma")]
    EndpointCollision { pole: f64, mode: usize, endpoint: f64 },

    #[error("weight gamma = {gamma} outside the admissible window ({lo}, {hi})")]
    WeightOutsideWindow { gamma: f64, lo: f64, hi: f64 },

    #[error("inconsistent bilaplacian domain: {0}")]
    InconsistentDomain(String),

    #[error("norm order {0} exceeds the supported maximum 4")]
    NormOrder(usize),

    #[error("field has zero norm")]
    ZeroNorm,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Picard iteration failed to converge: residual {residual:e} after {iterations} iterations")]
    PicardDivergence { residual: f64, iterations: usize },

    #[error("singular banded system at row {0}")]
    SingularSystem(usize),

    #[error("inadmissible initial data: {0}")]
    InadmissibleData(String),

    #[error("spectrum of A meets the sector: eigenvalue {re}{im:+}i")]
    SpectrumInSector { re: f64, im: f64 },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("mode {0} vanishes on the fit window")]
    ZeroMode(usize),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::PicardDivergence { .. }
            | Error::InconsistentDomain(_)
            | Error::SingularSystem(_)
            | Error::SpectrumInSector { .. }
            | Error::ZeroMode(_)
            | Error::ZeroNorm => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
