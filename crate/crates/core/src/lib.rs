//! Engine for tabular ML pipelines built around semantic data operators:
//! columnar tables, a sandboxed transformation DSL, a pipeline DAG with
//! fit/predict, small linear learners, synthesizer backends (deterministic
//! mock and OpenAI-compatible HTTP), and a tree-search optimizer that evolves
//! operator programs against cross-validated utility.

pub mod archive;
pub mod dsl;
pub mod error;
pub mod graph;
pub mod learners;
pub mod optimizer;
pub mod rng;
pub mod semops;
pub mod synth;
pub mod table;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Hex-encode a byte slice (lowercase).
pub(crate) fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write;
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// SHA-256 of a byte slice, hex-encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    to_hex(&Sha256::digest(bytes))
}
