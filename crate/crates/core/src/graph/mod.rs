//! placeholder
use thiserror::Error;
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("todo")]
    Todo,
}
impl GraphError {
    pub fn class(&self) -> crate::error::ErrorClass {
        crate::error::ErrorClass::Internal
    }
}
