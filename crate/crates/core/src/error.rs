use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("trajectory too short: {0}")]
    TooShort(String),
    #[error("degenerate motion: {0}")]
    DegenerateMotion(String),
    #[error("insufficient displacement pairs: have {have}, need {need}")]
    InsufficientPairs { have: usize, need: usize },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("class {0} absent from point cloud")]
    ClassAbsent(u32),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("cell ({row}, {col}) outside {nrows}x{ncols} grid")]
    OutOfBounds {
        row: i64,
        col: i64,
        nrows: usize,
        ncols: usize,
    },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("ground truth contains a single class; ROC AUC undefined")]
    DegenerateLabels,
    #[error("goal ({0}, {1}) lies outside the grid")]
    GoalOutOfBounds(f64, f64),
    #[error("no reachable deployment candidates")]
    NoCandidates,
    #[error("unknown scene '{0}'")]
    UnknownScene(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("raster shapes differ: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable identifier printed by the CLI on the diagnostic stream.
    pub fn name(&self) -> &'static str {
        match self {
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::TooShort(_) => "TooShort",
            Error::DegenerateMotion(_) => "DegenerateMotion",
            Error::InsufficientPairs { .. } => "InsufficientPairs",
            Error::EmptyTrajectory => "EmptyTrajectory",
            Error::ClassAbsent(_) => "ClassAbsent",
            Error::EmptyCloud => "EmptyCloud",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::GoalOutOfBounds(..) => "GoalOutOfBounds",
            Error::NoCandidates => "NoCandidates",
            Error::UnknownScene(_) => "UnknownScene",
            Error::Malformed(_) => "Malformed",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::Io(_) => "IoError",
        }
    }
}
