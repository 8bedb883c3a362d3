use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("points are collinear (triangle area {area:e} <= {threshold:e})")]
    CollinearPoints { area: f64, threshold: f64 },
    #[error("two or more points coincide")]
    DuplicatePoints,
    #[error("point set is empty")]
    EmptySet,
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("cloud has {points} points, need at least {needed}")]
    CloudTooSmall { points: usize, needed: usize },
    #[error("need at least two corners, got {0}")]
    TooFewCorners(usize),
    #[error("no member point survived segmentation")]
    EmptyMembers,
    #[error("curve fit degenerated")]
    DegenerateFit,
    #[error("no ground-truth curve matches the corner pair")]
    NoMatchingGtCurve,
    #[error("closed-curve cluster is collinear")]
    CollinearCluster,
    #[error("cluster has {0} members, need at least 3")]
    TooFewMembers(usize),
    #[error("curve set is empty")]
    EmptyCurveSet,
    #[error("infeasible scene spec: {0}")]
    InfeasibleSpec(String),
    #[error("requested {requested} points but scene has {available}")]
    PTooLarge { requested: usize, available: usize },
    #[error("invalid value: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by malformed or missing user input rather than
    /// a failure inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Parse(_) | Error::Config(_) => true,
            Error::InvalidInput(_) | Error::InfeasibleSpec(_) | Error::PTooLarge { .. } => true,
            Error::Stage { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}
