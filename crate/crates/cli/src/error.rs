use std::path::PathBuf;

/// Pipeline errors, mapped onto the documented exit codes:
/// 2 config error, 3 missing or stale artifact, 4 numeric failure.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    MissingArtifact { path: PathBuf, hint: String },
    StaleArtifact { path: PathBuf, detail: String },
    Locked { path: PathBuf },
    Io { path: PathBuf, source: std::io::Error },
    Core(qrmia_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. }
            | CliError::StaleArtifact { .. }
            | CliError::Locked { .. } => 3,
            CliError::Io { .. } | CliError::Core(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::MissingArtifact { path, hint } => {
                write!(f, "missing artifact {}: {hint}", path.display())
            }
            CliError::StaleArtifact { path, detail } => write!(
                f,
                "stale artifact {}: {detail} (re-run with --force to rebuild)",
                path.display()
            ),
            CliError::Locked { path } => write!(
                f,
                "workdir is locked by another command ({}); remove the lock or pass --force",
                path.display()
            ),
            CliError::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qrmia_core::Error> for CliError {
    fn from(e: qrmia_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
