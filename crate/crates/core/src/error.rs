use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the library.
///
/// Variants are grouped so callers (the CLI in particular) can map them onto
/// coarse categories: configuration, I/O and file format, and numeric failure.
#[derive(Debug)]
pub enum Error {
    /// Two operands disagree on shape.
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// Axis or index range outside a tensor's bounds.
    OutOfBounds { op: &'static str, detail: String },
    /// An argument violates an operation's precondition.
    InvalidArgument(String),
    /// A NaN or infinity showed up where finite values are required.
    NonFinite(String),
    /// A linear system could not be solved reliably.
    Singular { condition: f64 },
    /// A metric has no defined value for the given input.
    UndefinedMetric(&'static str),
    /// Bad run configuration (unknown key, unparsable value, ...).
    Config(String),
    /// Container or checkpoint file does not start with the expected magic.
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    /// File format version this build cannot read.
    UnsupportedVersion { found: u32, supported: u32 },
    /// File ended before the declared payload was read.
    Truncated { context: &'static str },
    /// Structurally invalid file content.
    Format(String),
    Io(std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Coarse category used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorCategory::Config,
            Error::Io(_)
            | Error::BadMagic { .. }
            | Error::UnsupportedVersion { .. }
            | Error::Truncated { .. }
            | Error::Format(_) => ErrorCategory::Io,
            Error::Shape { .. }
            | Error::OutOfBounds { .. }
            | Error::NonFinite(_)
            | Error::Singular { .. }
            | Error::UndefinedMetric(_) => ErrorCategory::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Numeric,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, lhs, rhs } => {
                write!(f, "{op}: shape mismatch {lhs:?} vs {rhs:?}")
            }
            Error::OutOfBounds { op, detail } => write!(f, "{op}: out of bounds: {detail}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite(ctx) => write!(f, "non-finite value in {ctx}"),
            Error::Singular { condition } => {
                write!(f, "singular system (condition estimate {condition:.3e})")
            }
            Error::UndefinedMetric(what) => write!(f, "undefined metric: {what}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::BadMagic { expected, found } => write!(
                f,
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(expected),
                String::from_utf8_lossy(found)
            ),
            Error::UnsupportedVersion { found, supported } => {
                write!(f, "unsupported format version {found} (supported: {supported})")
            }
            Error::Truncated { context } => write!(f, "truncated file while reading {context}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
