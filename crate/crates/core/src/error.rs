use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("zero-length vector has no direction")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vectors are linearly dependent; cannot span a {wanted}-dimensional subspace")]
    Degenerate { wanted: usize },

    #[error(
        "point {point}: no candidate forms an angle in the admissible window after {found} of {wanted} tangent directions"
    )]
    InsufficientCandidates {
        point: usize,
        found: usize,
        wanted: usize,
    },

    #[error("no normal estimate for point {0}")]
    MissingNormal(usize),

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("lean set is empty")]
    EmptyLeanSet,

    #[error("no usable lean feature size for point {0}")]
    MissingLnfs(usize),

    #[error("lean feature size of point {0} is zero")]
    ZeroLnfs(usize),

    #[error("complex has {count} simplices, more than the cap of {cap}")]
    ComplexTooLarge { count: usize, cap: usize },

    #[error("simplex {simplex:?} has a face that is not in the complex")]
    MissingFace { simplex: Vec<u32> },

    #[error(
        "requested {requested} samples but at least {required} are needed for the target density"
    )]
    UnderSampled { requested: usize, required: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
