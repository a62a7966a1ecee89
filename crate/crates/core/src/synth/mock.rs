//! Template-based synthesizer. The program it writes is a pure function of
//! the request: templates widen with accumulated path memories and, at high
//! temperature, with a seed-derived jitter, so searches can explore without
//! any real nondeterminism. A scripted fault counter can make the first `n`
//! calls return unparseable text, for exercising retry handling.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::{ColumnInfo, SynthError, SynthesisRequest, SynthesisResult, Synthesizer};
use crate::dsl::ProgramKind;
use crate::table::Kind;

pub struct MockSynthesizer {
    scripted_faults: AtomicUsize,
}

impl Default for MockSynthesizer {
    fn default() -> MockSynthesizer {
        MockSynthesizer::new()
    }
}

impl MockSynthesizer {
    pub fn new() -> MockSynthesizer {
        MockSynthesizer { scripted_faults: AtomicUsize::new(0) }
    }

    /// Make the first `n` calls return text that fails to parse.
    pub fn fail_first(n: usize) -> MockSynthesizer {
        MockSynthesizer { scripted_faults: AtomicUsize::new(n) }
    }

    /// Template richness: grows along a search path, and jitters with the
    /// seed once the caller asks for high-temperature variation.
    fn quality(req: &SynthesisRequest) -> usize {
        let jitter = if req.temperature >= 2.0 { (req.seed % 3) as usize } else { 0 };
        req.extras.memories.len() + jitter
    }
}

fn cols_of(schema: &[ColumnInfo], kind: Kind) -> Vec<&ColumnInfo> {
    schema.iter().filter(|c| c.kind == kind).collect()
}

fn feature_map(req: &SynthesisRequest, quality: usize) -> (String, usize) {
    let nums = cols_of(&req.main_schema, Kind::Numeric);
    let mut menu: Vec<String> = Vec::new();
    for (i, c) in nums.iter().enumerate() {
        menu.push(format!("log1p({})", c.name));
        if let Some(next) = nums.get(i + 1) {
            menu.push(format!("{} / {}", c.name, next.name));
        }
    }
    for c in &req.main_schema {
        if c.missing_fraction > 0.0 {
            menu.push(format!("is_missing({})", c.name));
        }
    }
    menu.push("1".to_string());
    let width = req.output_budget.min(menu.len()).min(2 + quality).max(1);
    let mut text = String::from("dslv1 feature_map\n");
    for (i, expr) in menu.iter().take(width).enumerate() {
        text.push_str(&format!("feature f{} = {}\n", i + 1, expr));
    }
    (text, width)
}

fn agg_join(req: &SynthesisRequest, quality: usize) -> (String, usize) {
    let fallback_left = req.main_schema.first().map(|c| c.name.clone()).unwrap_or_default();
    let empty = Vec::new();
    let aux = req.aux_schema.as_ref().unwrap_or(&empty);
    let fallback_right = aux.first().map(|c| c.name.clone()).unwrap_or_default();
    let (left, right) =
        req.join_keys.clone().unwrap_or((fallback_left, fallback_right));
    let values: Vec<&ColumnInfo> =
        aux.iter().filter(|c| c.kind == Kind::Numeric && c.name != right).collect();
    let mut menu: Vec<(String, String)> = vec![("count".into(), right.clone())];
    for v in &values {
        for f in ["sum", "mean", "min", "max", "std", "nunique"] {
            menu.push((f.to_string(), v.name.clone()));
        }
    }
    let width = req.output_budget.min(menu.len()).min(3 + quality).max(1);
    let mut text = String::from("dslv1 agg_join\n");
    for (i, (func, col)) in menu.iter().take(width).enumerate() {
        text.push_str(&format!("agg g{} = {}({}) by {}\n", i + 1, func, col, right));
    }
    text.push_str(&format!("join {left} = {right}\n"));
    (text, width)
}

fn extract_rules(req: &SynthesisRequest, quality: usize) -> (String, usize) {
    let strs = cols_of(&req.main_schema, Kind::String);
    // declared output names must all appear; invent names only when none are
    let names: Vec<String> = if req.outputs.is_empty() {
        let n = req.output_budget.min(3).min(1 + quality).max(1);
        (1..=n).map(|i| format!("e{i}")).collect()
    } else {
        req.outputs.iter().map(|(name, _)| name.clone()).collect()
    };
    let mut text = String::from("dslv1 extract_rules\n");
    for (i, name) in names.iter().enumerate() {
        match strs.first() {
            Some(src) => {
                let src = &src.name;
                let tpl = match (i + quality) % 3 {
                    0 => format!("rule {name}: {src} /(\\d+)/ -> capture 1\nrule {name}: default -> \"0\"\n"),
                    1 => format!("rule {name}: {src} /([A-Za-z]+)/ -> capture 1\nrule {name}: default -> \"none\"\n"),
                    _ => format!("rule {name}: {src} contains(\"a\", \"e\") -> \"vowel\"\nrule {name}: default -> \"other\"\n"),
                };
                text.push_str(&tpl);
            }
            // no string source: a default-only rule still yields a column
            None => text.push_str(&format!("rule {name}: default -> \"x\"\n")),
        }
    }
    (text, names.len())
}

fn augment(req: &SynthesisRequest) -> (String, usize) {
    let k = req.output_budget.max(1);
    (format!("dslv1 augment\nadd {k}\n"), k)
}

/// The declared target column when present in the schema, else a heuristic.
fn target<'r>(
    req: &'r SynthesisRequest,
    fallback: impl Fn() -> Option<&'r ColumnInfo>,
) -> &'r ColumnInfo {
    req.target_column
        .as_ref()
        .and_then(|t| req.main_schema.iter().find(|c| &c.name == t))
        .or_else(fallback)
        .or_else(|| req.main_schema.first())
        .expect("non-empty schema")
}

fn impute(req: &SynthesisRequest) -> (String, usize) {
    let col = target(req, || req.main_schema.iter().find(|c| c.missing_fraction > 0.0));
    let lit = match col.kind {
        Kind::Numeric => "0",
        Kind::String => "\"unknown\"",
        Kind::Boolean => "false",
    };
    (format!("dslv1 impute\nimpute {} = {}\n", col.name, lit), 1)
}

fn clean(req: &SynthesisRequest) -> (String, usize) {
    let col = target(req, || {
        cols_of(&req.main_schema, Kind::String).first().copied()
    });
    let line = match col.kind {
        Kind::String => format!("clean {} = trim({})", col.name, col.name),
        Kind::Numeric => format!("clean {} = abs({})", col.name, col.name),
        Kind::Boolean => format!("clean {} = {}", col.name, col.name),
    };
    (format!("dslv1 clean\n{line}\n"), 1)
}

fn refine(req: &SynthesisRequest, quality: usize) -> (String, usize) {
    // restructure the target column when declared; otherwise sweep the table
    let menu: Vec<String> = match req.target_column.as_ref() {
        Some(t) if req.main_schema.iter().any(|c| &c.name == t) => {
            let c = target(req, || None);
            match c.kind {
                Kind::String => vec![
                    format!("length({})", c.name),
                    format!("length(trim({}))", c.name),
                    format!("if is_missing({}) then 1 else 0", c.name),
                ],
                Kind::Numeric => vec![
                    format!("log1p(abs({}))", c.name),
                    format!("abs({})", c.name),
                    format!("{} * {}", c.name, c.name),
                ],
                Kind::Boolean => vec![
                    format!("if {} then 1 else 0", c.name),
                    format!("if is_missing({}) then 1 else 0", c.name),
                ],
            }
        }
        _ => req
            .main_schema
            .iter()
            .map(|c| match c.kind {
                Kind::String => format!("length({})", c.name),
                Kind::Numeric => format!("log1p(abs({}))", c.name),
                Kind::Boolean => format!("if {} then 1 else 0", c.name),
            })
            .collect(),
    };
    let menu = if menu.is_empty() { vec!["1".to_string()] } else { menu };
    let width = req.output_budget.min(menu.len()).min(1 + quality).max(1);
    let mut text = String::from("dslv1 refine\n");
    for (i, expr) in menu.iter().take(width).enumerate() {
        text.push_str(&format!("feature r{} = {}\n", i + 1, expr));
    }
    (text, width)
}

fn select(req: &SynthesisRequest) -> (String, usize) {
    let names: Vec<&str> = req.main_schema.iter().map(|c| c.name.as_str()).collect();
    (format!("dslv1 select\nkeep {}\n", names.join(", ")), names.len())
}

fn choose(req: &SynthesisRequest, quality: usize) -> (String, usize) {
    // sweep positions across the allowed range, widest spread first
    const POSITIONS: [f64; 5] = [0.5, 0.25, 0.75, 0.0, 1.0];
    let pos = POSITIONS[quality % POSITIONS.len()];
    let mut text = String::from("dslv1 choose\n");
    if req.parameters.is_empty() {
        text.push_str("set unused = 0\n");
        return (text, 1);
    }
    for p in &req.parameters {
        let value = p.lo + pos * (p.hi - p.lo);
        text.push_str(&format!("set {} = {}\n", p.name, value));
    }
    (text, req.parameters.len())
}

impl Synthesizer for MockSynthesizer {
    fn synthesize(&self, req: &SynthesisRequest) -> Result<SynthesisResult, SynthError> {
        if self
            .scripted_faults
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |v| v.checked_sub(1))
            .is_ok()
        {
            return Ok(SynthesisResult {
                program_text: "%%% scripted synthesis fault %%%\n".to_string(),
                commentary: "mock scripted fault".to_string(),
            });
        }
        let quality = MockSynthesizer::quality(req);
        let (program_text, width) = match req.kind {
            ProgramKind::FeatureMap => feature_map(req, quality),
            ProgramKind::AggJoin => agg_join(req, quality),
            ProgramKind::ExtractRules => extract_rules(req, quality),
            ProgramKind::Augment => augment(req),
            ProgramKind::Impute => impute(req),
            ProgramKind::Clean => clean(req),
            ProgramKind::Refine => refine(req, quality),
            ProgramKind::Select => select(req),
            ProgramKind::Choose => choose(req, quality),
        };
        Ok(SynthesisResult {
            program_text,
            commentary: format!(
                "mock {} template: quality {}, seed {}, width {}",
                req.kind, quality, req.seed, width
            ),
        })
    }

    fn name(&self) -> &'static str {
        "mock"
    }

    fn deterministic_timing(&self) -> bool {
        true
    }
}
