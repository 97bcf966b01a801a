//! Library surface of the experiment runner: configuration parsing,
//! experiment execution, and artifact production. The `eatk` binary is a
//! thin wrapper; the pieces are exposed so tests and fuzz targets can drive
//! the parsing and execution paths directly.

pub mod config;
pub mod experiments;

/// Runner errors, mapped onto process exit codes by the binary
/// (2 = configuration, 3 = I/O).
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Io(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(msg) => write!(f, "config error: {msg}"),
            AppError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for AppError {}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 3,
        }
    }
}
