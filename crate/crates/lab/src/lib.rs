//! IO, configuration, reports and the command-line driver for `geoflow-core`.

use std::fmt;

pub mod cli;
pub mod config;
pub mod formats;
pub mod report;
pub mod runs;
pub mod suites;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A probe or verification verdict failed.
    pub const CHECK_FAILED: i32 = 1;
    /// The state left the admissible set (graph outside the tube, metric degenerate).
    pub const ADMISSIBILITY: i32 = 2;
    pub const SOLVER_FAILURE: i32 = 3;
    pub const USAGE: i32 = 64;
    pub const IO: i32 = 74;
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabError {
    /// Invalid input: bad flags, config, presets or files.
    Usage(String),
    /// Writing an artifact failed.
    Io(String),
    /// A numerical failure outside a solver run.
    Numeric(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => exit::USAGE,
            LabError::Io(_) => exit::IO,
            LabError::Numeric(_) => exit::SOLVER_FAILURE,
        }
    }
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabError::Usage(m) => write!(f, "usage error: {m}"),
            LabError::Io(m) => write!(f, "i/o error: {m}"),
            LabError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for LabError {}

impl From<geoflow_core::Error> for LabError {
    fn from(e: geoflow_core::Error) -> Self {
        LabError::Numeric(e.to_string())
    }
}
