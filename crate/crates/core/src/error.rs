use std::fmt;
use std::path::PathBuf;

/// Where in an input a malformed-file diagnostic points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    ByteOffset(usize),
    PointIndex(usize),
    /// 1-based line number.
    Line(usize),
    Row(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::ByteOffset(o) => write!(f, "byte offset {o}"),
            Position::PointIndex(i) => write!(f, "point index {i}"),
            Position::Line(l) => write!(f, "line {l}"),
            Position::Row(r) => write!(f, "row {r}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is behind the camera (z = {depth})")]
    BehindCamera { depth: f64 },

    #[error("malformed {kind} at {position}: {reason}")]
    Malformed {
        kind: &'static str,
        position: Position,
        reason: String,
    },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation failed for genome {genome:?}: {source}")]
    Evaluation {
        genome: [f64; 7],
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn malformed(kind: &'static str, position: Position, reason: impl Into<String>) -> Self {
        Error::Malformed {
            kind,
            position,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// Strips file context wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
