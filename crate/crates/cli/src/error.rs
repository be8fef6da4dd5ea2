use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error("cannot read config {}: {source}", path.display())]
    ConfigIo { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{experiment} cell {cell} (x = {x}): {source}")]
    Cell {
        experiment: &'static str,
        cell: usize,
        x: f64,
        source: score_forge_core::Error,
    },
    #[error("{0}")]
    Runtime(String),
    #[error("acceptance checks failed: {}", .0.join("; "))]
    Acceptance(Vec<String>),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::ConfigIo { .. } => 1,
            HarnessError::Acceptance(_) => 2,
            HarnessError::Io { .. } | HarnessError::Cell { .. } | HarnessError::Runtime(_) => 3,
        }
    }
}
