use std::path::PathBuf;

use hanslens_core::Error as CoreError;

/// CLI failure modes; each category maps to a distinct exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or incompatible combinations (exit 3).
    Invalid(String),
    /// Filesystem failures (exit 4).
    Io { path: PathBuf, source: std::io::Error },
    /// Propagated library errors; code depends on the category.
    Core(CoreError),
    /// Target artifact exists and --force was not given (exit 7).
    WouldOverwrite(PathBuf),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_) => 3,
                CoreError::Io { .. } | CoreError::Format { .. } => 4,
                CoreError::Dataset(_) | CoreError::ShapeMismatch(_) => 5,
                CoreError::NonFinite(_)
                | CoreError::Numeric(_)
                | CoreError::Diverged { .. }
                | CoreError::DegenerateScores => 6,
            },
            CliError::WouldOverwrite(_) => 7,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::WouldOverwrite(path) => write!(
                f,
                "{} exists; pass --force to overwrite",
                path.display()
            ),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
