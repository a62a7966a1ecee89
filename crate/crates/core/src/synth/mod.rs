//! Program synthesis backends. A synthesizer turns a structured request —
//! operator kind, table profiles, accumulated feedback, and search context —
//! into program text. The deterministic mock backend answers from templates;
//! the HTTP backend asks an external model. Both are addressed through the
//! same trait so the rest of the engine never knows which one it is talking
//! to.

mod llm;
mod mock;

pub use llm::{HttpSynthesizer, HttpSynthesizerConfig};
pub use mock::MockSynthesizer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{grammar_help, ProgramKind};
use crate::error::ErrorClass;
use crate::table::Kind;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synthesizer authentication failed: {0}")]
    Auth(String),
    #[error("synthesizer configuration invalid: {0}")]
    Config(String),
    #[error("synthesizer transport failed after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("synthesizer response malformed: {0}")]
    Protocol(String),
    /// The reply arrived but held no program; counts as a failed candidate,
    /// not a backend fault.
    #[error("synthesizer reply contained no program: {0}")]
    Extraction(String),
}

impl SynthError {
    pub fn class(&self) -> ErrorClass {
        match self {
            SynthError::Auth(_) => ErrorClass::Auth,
            SynthError::Config(_) => ErrorClass::Config,
            SynthError::Transport { .. }
            | SynthError::Protocol(_)
            | SynthError::Extraction(_) => ErrorClass::Internal,
        }
    }
}

/// Shape of one input column as the synthesizer sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub kind: Kind,
    pub missing_fraction: f64,
}

/// A numeric parameter a `choose` program must set, with its allowed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// A program accepted earlier on the same search path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    /// node the program ran at
    pub node: String,
    pub kind: ProgramKind,
    /// one-line description of what the program did
    pub summary: String,
    /// utility of the state that used it, when known
    pub utility: Option<f64>,
}

/// A high-scoring program from elsewhere in the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inspiration {
    /// where it came from (node id or backend name)
    pub source: String,
    pub program: String,
    pub utility: f64,
}

/// Search-derived context attached to a request.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RequestExtras {
    /// utilities of the states along the path to this synthesis, oldest first
    pub utilities: Vec<f64>,
    /// programs accepted along the path
    pub memories: Vec<MemoryEntry>,
    /// best programs from other branches
    pub inspirations: Vec<Inspiration>,
}

/// Everything a backend needs to write one program. Identical requests must
/// produce identical programs from deterministic backends, so this struct is
/// the unit of reproducibility: it serializes canonically and fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRequest {
    /// program kind to produce
    pub kind: ProgramKind,
    /// pipeline node this program is for
    pub node: String,
    /// rendered pipeline context: task, model, dataset descriptions
    pub context: String,
    /// natural-language instruction for this operator; may be empty
    pub instruction: String,
    /// structured shape of the main input
    pub main_schema: Vec<ColumnInfo>,
    /// rendered profile of the main input (sample rows, summaries)
    pub main_profile: String,
    /// structured shape of the auxiliary input, for aggregation programs
    pub aux_schema: Option<Vec<ColumnInfo>>,
    pub aux_profile: Option<String>,
    /// declared join keys (left, right), for aggregation programs
    pub join_keys: Option<(String, String)>,
    /// column the program must operate on (imputation, cleaning, refinement)
    pub target_column: Option<String>,
    /// declared output columns (name, description), for extraction programs
    pub outputs: Vec<(String, String)>,
    /// most new columns (or rows, or parameter values) the program may produce
    pub output_budget: usize,
    /// columns the program must keep
    pub protected: Vec<String>,
    /// parameters a choose program must set
    pub parameters: Vec<ParamDecl>,
    /// failure feedback from earlier attempts in this synthesis, oldest first
    pub feedback: Vec<String>,
    pub extras: RequestExtras,
    pub temperature: f64,
    pub seed: u64,
}

impl SynthesisRequest {
    /// Canonical content hash of the request.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("request serializes");
        crate::sha256_hex(json.as_bytes())
    }
}

/// One synthesized program plus free-form commentary from the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub program_text: String,
    pub commentary: String,
}

/// A program-writing backend.
pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, request: &SynthesisRequest) -> Result<SynthesisResult, SynthError>;

    fn name(&self) -> &'static str;

    /// True when identical requests always return identical results at zero
    /// external cost; run logs then record zero wall time so that reruns are
    /// byte-identical.
    fn deterministic_timing(&self) -> bool {
        false
    }
}

fn render_schema(schema: &[ColumnInfo]) -> String {
    schema
        .iter()
        .map(|c| {
            if c.missing_fraction > 0.0 {
                format!("- {} ({}, {:.1}% missing)", c.name, c.kind, c.missing_fraction * 100.0)
            } else {
                format!("- {} ({})", c.name, c.kind)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Deterministic prompt text for a request; the HTTP backend sends exactly
/// this, so prompts are reproducible and testable.
pub fn render_prompt(req: &SynthesisRequest) -> String {
    let mut out = String::new();
    out.push_str(
        "You write one program in a small table-transformation language. \
Respond with exactly one fenced code block containing the program and \
nothing else in the block.\n",
    );
    out.push_str(&format!("\n## Task\n{}\n", req.context));
    out.push_str(&format!("\n## Target node\n{} (program kind: {})\n", req.node, req.kind));
    if !req.instruction.is_empty() {
        out.push_str(&format!("\n## Instruction\n{}\n", req.instruction));
    }
    if let Some(col) = &req.target_column {
        out.push_str(&format!("\n## Target column\nOperate on `{col}`.\n"));
    }
    if !req.outputs.is_empty() {
        out.push_str("\n## Output columns to produce\n");
        for (name, desc) in &req.outputs {
            if desc.is_empty() {
                out.push_str(&format!("- {name}\n"));
            } else {
                out.push_str(&format!("- {name}: {desc}\n"));
            }
        }
    }
    out.push_str(&format!(
        "\n## Main table columns\n{}\n\n### Main table profile\n{}\n",
        render_schema(&req.main_schema),
        req.main_profile
    ));
    if let Some(aux) = &req.aux_schema {
        out.push_str(&format!("\n## Auxiliary table columns\n{}\n", render_schema(aux)));
        if let Some(profile) = &req.aux_profile {
            out.push_str(&format!("\n### Auxiliary table profile\n{profile}\n"));
        }
    }
    if let Some((left, right)) = &req.join_keys {
        out.push_str(&format!("\n## Join\nUse `join {left} = {right}`.\n"));
    }
    out.push_str(&format!(
        "\n## Limits\nProduce at most {} new columns (or rows, or parameter settings).\n",
        req.output_budget
    ));
    if !req.protected.is_empty() {
        out.push_str(&format!(
            "Keep these columns untouched and present: {}.\n",
            req.protected.join(", ")
        ));
    }
    if !req.parameters.is_empty() {
        out.push_str("\n## Parameters to set\n");
        for p in &req.parameters {
            out.push_str(&format!("- {} in [{}, {}]\n", p.name, p.lo, p.hi));
        }
    }
    if !req.extras.memories.is_empty() {
        out.push_str("\n## Accepted earlier on this path\n");
        for m in &req.extras.memories {
            match m.utility {
                Some(u) => out.push_str(&format!(
                    "- {} ({}): {} [utility {:.4}]\n",
                    m.node, m.kind, m.summary, u
                )),
                None => out.push_str(&format!("- {} ({}): {}\n", m.node, m.kind, m.summary)),
            }
        }
    }
    if !req.extras.inspirations.is_empty() {
        out.push_str("\n## High-scoring programs elsewhere\n");
        for i in &req.extras.inspirations {
            out.push_str(&format!(
                "From {} (utility {:.4}):\n```\n{}\n```\n",
                i.source, i.utility, i.program
            ));
        }
    }
    if !req.extras.utilities.is_empty() {
        let s = req
            .extras
            .utilities
            .iter()
            .map(|u| format!("{u:.4}"))
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!("\n## Utility trajectory\n{s}\n"));
    }
    if !req.feedback.is_empty() {
        out.push_str("\n## Previous attempts failed\n");
        for (i, f) in req.feedback.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, f));
        }
        out.push_str("Write a different program that avoids these failures.\n");
    }
    out.push_str(&format!("\n## Language\n{}\n", grammar_help(req.kind)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> SynthesisRequest {
        SynthesisRequest {
            kind: ProgramKind::FeatureMap,
            node: "fm1".into(),
            context: "predict churn".into(),
            instruction: String::new(),
            main_schema: vec![
                ColumnInfo { name: "a".into(), kind: Kind::Numeric, missing_fraction: 0.0 },
                ColumnInfo { name: "b".into(), kind: Kind::Numeric, missing_fraction: 0.25 },
            ],
            main_profile: "2 columns".into(),
            aux_schema: None,
            aux_profile: None,
            join_keys: None,
            target_column: None,
            outputs: vec![],
            output_budget: 2,
            protected: vec![],
            parameters: vec![],
            feedback: vec![],
            extras: RequestExtras::default(),
            temperature: 1.0,
            seed: 7,
        }
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = request();
        let mut b = request();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 8;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn prompt_is_deterministic_and_mentions_feedback() {
        let mut req = request();
        req.feedback.push("parse error at line 2".into());
        let p1 = render_prompt(&req);
        let p2 = render_prompt(&req);
        assert_eq!(p1, p2);
        assert!(p1.contains("parse error at line 2"));
        assert!(p1.contains("25.0% missing"));
        assert!(p1.contains("dslv1 feature_map"));
    }
}
