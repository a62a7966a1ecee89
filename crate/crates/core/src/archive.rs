//! placeholder
use thiserror::Error;
#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("todo")]
    Todo,
}
