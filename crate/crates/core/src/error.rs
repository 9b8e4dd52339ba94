use thiserror::Error;

/// Every failure the library can report.
///
/// Variants map onto the CLI exit codes through [`Error::exit_code`]:
/// configuration problems exit with 2, numerical failures with 3, and
/// exceeded caps or lost classifications with 4.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix product overflowed; renormalize before multiplying")]
    ProductOverflow,
    #[error("matrix norm {norm} is too close to 1 for a contraction direction")]
    DegenerateNorm { norm: f64 },
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },
    #[error("continued fraction depth {requested} exceeds the {reliable} terms double precision supports")]
    PrecisionExhausted { requested: usize, reliable: usize },
    #[error("no return within cap {cap}")]
    CapExceeded { cap: u64 },
    #[error("gap curve could not be unwrapped near x = {x}")]
    UnwrapFailure { x: f64 },
    #[error("outside the lemma's regime: {0}")]
    RegimeViolation(String),
    #[error("angle gap {gap} at factor {index} is below the floor {floor}")]
    AngleCollision { index: usize, gap: f64, floor: f64 },
    #[error("coupling {lambda} is below the required minimum {min}")]
    LambdaTooSmall { lambda: f64, min: f64 },
    #[error("parameter t = {t} lies outside the admissible range [{lo}, {hi}]")]
    ParameterOutsideRange { t: f64, lo: f64, hi: f64 },
    #[error("potential has no declared pair of nondegenerate extrema")]
    MissingExtrema,
    #[error("starting scale too coarse: q_N^(-2 tau) = {scale} is not below r/10 = {limit}")]
    ScaleTooCoarse { scale: f64, limit: f64 },
    #[error("classification lost at level {level}: {clause}")]
    ClassificationLost { level: usize, clause: String },
    #[error("critical point drift {drift} exceeds bound {bound} at level {level}")]
    DriftViolated { level: usize, drift: f64, bound: f64 },
    #[error("schedule drops to {value} below the floor {floor}")]
    FloorViolated { value: f64, floor: f64 },
    #[error("energy {energy} is within 1e-12 of an eigenvalue")]
    SingularEnergy { energy: f64 },
    #[error("data are degenerate: {0}")]
    DegenerateData(String),
    #[error("unknown lemma suite `{0}`")]
    UnknownSuite(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownSuite(_)
            | Error::Io(_)
            | Error::LambdaTooSmall { .. }
            | Error::ParameterOutsideRange { .. }
            | Error::ScaleTooCoarse { .. }
            | Error::MissingExtrema => 2,
            Error::CapExceeded { .. }
            | Error::ClassificationLost { .. }
            | Error::DriftViolated { .. } => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
