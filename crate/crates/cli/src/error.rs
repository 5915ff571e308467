use std::path::PathBuf;

use neuralmaps_core::composition::CompositionError;
use neuralmaps_core::mesh::MeshError;
use neuralmaps_core::neuralmap::NeuralMapError;
use neuralmaps_core::optimize::OptimizeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Mesh {
        path: PathBuf,
        #[source]
        source: MeshError,
    },
    #[error("{}: {source}", path.display())]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: NeuralMapError,
    },
    #[error("keypoints {}, line {line}: {message}", path.display())]
    Keypoints { path: PathBuf, line: usize, message: String },
    #[error("optimization diverged after {steps} steps; outputs keep the last finite state")]
    Divergence { steps: usize },
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Composition(#[from] CompositionError),
}

/// Process exit codes, one per error class.
pub mod exit {
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const TOPOLOGY: i32 = 4;
    pub const DIVERGENCE: i32 = 5;
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Keypoints { .. } => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Mesh { source, .. } => match source {
                MeshError::Io(_) => exit::IO,
                _ => exit::TOPOLOGY,
            },
            CliError::Checkpoint { source, .. } => match source {
                NeuralMapError::ShapeMismatch { .. } | NeuralMapError::InvalidArchitecture(_) => exit::CONFIG,
                _ => exit::IO,
            },
            CliError::Divergence { .. } => exit::DIVERGENCE,
            CliError::Optimize(e) => match e {
                OptimizeError::InvalidTask(_) | OptimizeError::Energy(_) => exit::CONFIG,
                OptimizeError::Io(_) => exit::IO,
                OptimizeError::Mesh(_) => exit::TOPOLOGY,
                _ => exit::OTHER,
            },
            CliError::Composition(_) => exit::CONFIG,
        }
    }
}
