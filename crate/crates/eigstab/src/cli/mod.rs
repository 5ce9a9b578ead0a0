//! Configuration, experiment drivers and CSV/VTK emission.

pub mod config;
pub mod drivers;
pub mod io;

pub use config::{
    ClusterConfig, DomainConfig, MeshConfig, OutputConfig, RunConfig, SolverConfig, TriangleCase,
};
pub use drivers::{run_mesh, run_solve, run_stabilize, run_table1, run_triangle_study};

use thiserror::Error;

/// Driver-level error with the process exit code attached: 1 for config and
/// I/O problems, 2 for numerical failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numeric(#[from] crate::error::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}
