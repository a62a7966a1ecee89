//! placeholder
use thiserror::Error;
#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("todo")]
    Todo,
}
