//! Crate-level error type and the coarse classes the CLI maps to exit codes.

use thiserror::Error;

/// Coarse error classes; the CLI maps these to process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad configuration or input validation failure (exit 2).
    Config,
    /// Missing or rejected credentials (exit 3).
    Auth,
    /// Predict-time schema drift (exit 4).
    SchemaDrift,
    /// Everything else (exit 1).
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("table: {0}")]
    Table(#[from] crate::table::TableError),
    #[error("program: {0}")]
    Dsl(#[from] crate::dsl::DslError),
    #[error("pipeline: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("learner: {0}")]
    Learner(#[from] crate::learners::LearnerError),
    #[error("operator: {0}")]
    SemOp(#[from] crate::semops::SemOpError),
    #[error("synthesizer: {0}")]
    Synth(#[from] crate::synth::SynthError),
    #[error("optimizer: {0}")]
    Optimizer(#[from] crate::optimizer::OptimizerError),
    #[error("archive: {0}")]
    Archive(#[from] crate::archive::ArchiveError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Config(String),
}

impl Error {
    /// Classify for exit-code mapping.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Graph(g) => g.class(),
            Error::Synth(s) => s.class(),
            Error::SemOp(s) => s.class(),
            Error::Table(_) | Error::Dsl(_) => ErrorClass::Config,
            Error::Archive(_) => ErrorClass::Config,
            Error::Optimizer(_) | Error::Learner(_) | Error::Io(_) => ErrorClass::Internal,
        }
    }
}
