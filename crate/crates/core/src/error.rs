use std::path::PathBuf;

/// Errors produced anywhere in the tracking pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("need at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("no consensus: best hypothesis has {0} inliers")]
    NoConsensus(usize),
    #[error("point maps to infinity (w = {0:e})")]
    PointAtInfinity(f64),
    #[error("singular matrix (det = {0:e})")]
    SingularMatrix(f64),
    #[error("degenerate box projection: {0}")]
    DegenerateProjection(&'static str),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),

    #[error("invalid keyframe interval {0}")]
    InvalidInterval(usize),
    #[error("invalid frame count {0}")]
    InvalidFrameCount(usize),
    #[error("zero keyframe displacement between frames {k1} and {k2}")]
    ZeroKeyframeDisplacement { k1: usize, k2: usize },
    #[error("alpha ({0}, {1}) too small for paper_literal mode")]
    DegenerateAlpha(f64, f64),
    #[error("frame {frame} outside [1, {frame_count}]")]
    FrameOutOfRange { frame: usize, frame_count: usize },
    #[error("no homography path between frames {0} and {1}")]
    NoHomographyPath(usize, usize),
    #[error("missing correspondences for frames {src} -> {dst}")]
    MissingCorrespondences { src: usize, dst: usize },
    #[error("estimation failed for frame pair ({a}, {b}): {source}")]
    PairEstimation {
        a: usize,
        b: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty feature set")]
    EmptyFeatureSet,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),

    #[error("frame {frame} is not after the previous frame {previous}")]
    NonMonotonicFrame { frame: usize, previous: usize },
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),

    #[error("plane behind camera")]
    PlaneBehindCamera,
    #[error("frame {frame}: {source}")]
    AtFrame { frame: usize, source: Box<Error> },
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}:{line}: non-positive box")]
    NonPositiveBox { path: PathBuf, line: usize },
    #[error("{path}:{line}: non-invertible homography")]
    NonInvertibleEntry { path: PathBuf, line: usize },
    #[error("{path}:{line}: unknown config key `{key}`")]
    UnknownKey { path: PathBuf, line: usize, key: String },
    #[error("{path}:{line}: bad value for `{key}`: {msg}")]
    TypeError { path: PathBuf, line: usize, key: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
