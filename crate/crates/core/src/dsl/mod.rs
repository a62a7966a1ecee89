//! A small, sandboxed transformation language for table programs. Programs
//! are parsed into a typed AST, checked against a schema, and interpreted
//! row-by-row under execution budgets. There is no I/O, no recursion, and no
//! unbounded iteration in the language itself.

pub mod ast;
mod eval;
mod parse;
mod typecheck;

pub use ast::*;
pub use eval::{evaluate, EvalBudget, EvalLimits};
pub(crate) use eval::filter_mask;
pub use parse::{parse, Program};
pub use typecheck::{typecheck, SchemaSet};

use thiserror::Error;

/// Hard cap on AST nodes per program; parsing aborts beyond it.
pub const MAX_AST_NODES: usize = 10_000;

/// The nine program kinds, one per semantic operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramKind {
    FeatureMap,
    AggJoin,
    ExtractRules,
    Augment,
    Impute,
    Clean,
    Refine,
    Select,
    Choose,
}

impl ProgramKind {
    /// The header token naming this kind, as written after `dslv1`.
    pub fn token(self) -> &'static str {
        match self {
            ProgramKind::FeatureMap => "feature_map",
            ProgramKind::AggJoin => "agg_join",
            ProgramKind::ExtractRules => "extract_rules",
            ProgramKind::Augment => "augment",
            ProgramKind::Impute => "impute",
            ProgramKind::Clean => "clean",
            ProgramKind::Refine => "refine",
            ProgramKind::Select => "select",
            ProgramKind::Choose => "choose",
        }
    }

    pub fn parse(token: &str) -> Option<ProgramKind> {
        Some(match token {
            "feature_map" => ProgramKind::FeatureMap,
            "agg_join" => ProgramKind::AggJoin,
            "extract_rules" => ProgramKind::ExtractRules,
            "augment" => ProgramKind::Augment,
            "impute" => ProgramKind::Impute,
            "clean" => ProgramKind::Clean,
            "refine" => ProgramKind::Refine,
            "select" => ProgramKind::Select,
            "choose" => ProgramKind::Choose,
            _ => return None,
        })
    }

    pub const ALL: [ProgramKind; 9] = [
        ProgramKind::FeatureMap,
        ProgramKind::AggJoin,
        ProgramKind::ExtractRules,
        ProgramKind::Augment,
        ProgramKind::Impute,
        ProgramKind::Clean,
        ProgramKind::Refine,
        ProgramKind::Select,
        ProgramKind::Choose,
    ];
}

impl std::fmt::Display for ProgramKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Grammar cheat-sheet for one program kind, written for inclusion in
/// synthesis prompts. Kept in one place so prompts and parser agree.
pub fn grammar_help(kind: ProgramKind) -> String {
    let common = "Expressions: columns by name, numbers, \"strings\", true/false/missing, \
arithmetic + - * /, comparisons == != < <= > >=, boolean and/or/not, \
if COND then A else B, and functions lowercase(s), trim(s), \
regex_replace(s, /re/, repl), regex_match(s, /re/), contains(s, sub), \
split_part(s, sep, n), length(s), log1p(x), abs(x), clip(x, lo, hi), \
is_missing(v), coalesce(v, ...). Missing propagates through every operation; \
division by zero and non-finite results become missing. \
Lines starting with # are comments.";
    let body = match kind {
        ProgramKind::FeatureMap => {
            "Statements: `feature NAME = EXPR`, one per line, at least one. \
Each statement appends one column named NAME computed per row from the \
current row's columns."
        }
        ProgramKind::AggJoin => {
            "Statements: one or more `agg NAME = FN(COLUMN) by KEY` over the auxiliary \
table (FN is one of sum, mean, min, max, std, count, nunique, mode; KEY must \
equal the join's right key), optional `feature NAME = EXPR` lines computed \
after the join (they may use the agg outputs), and exactly one \
`join LEFT_KEY = RIGHT_KEY` naming the main-table key and auxiliary-table key."
        }
        ProgramKind::ExtractRules => {
            "Statements: `rule OUT: SRC /REGEX/ -> capture N`, \
`rule OUT: SRC /REGEX/ -> \"literal\"`, \
`rule OUT: SRC contains(\"kw\", ...) -> \"literal\"`, and per output exactly one \
`rule OUT: default -> \"literal\"`. Rules for an output are tried in order on \
the source string; the first match emits, otherwise the default applies. \
Matching is case-insensitive for contains; regexes run as written."
        }
        ProgramKind::Augment => {
            "Statements: exactly one `add K` or `add K where EXPR`. Adds K synthetic \
rows sampled from existing rows (optionally only rows where EXPR is true) \
during training; prediction leaves data untouched."
        }
        ProgramKind::Impute => {
            "Statements: exactly one `impute COLUMN = EXPR`. Missing cells of COLUMN \
are replaced by EXPR evaluated on that row; present cells are kept."
        }
        ProgramKind::Clean => {
            "Statements: exactly one `clean COLUMN = EXPR`. Every cell of COLUMN is \
replaced by EXPR evaluated on that row; the column's type must not change."
        }
        ProgramKind::Refine => {
            "Statements: `feature NAME = EXPR` lines (at least one) and optionally one \
`drop_source COLUMN` removing an input column after the new features are added."
        }
        ProgramKind::Select => {
            "Statements: `keep COLUMN, COLUMN, ...` (one or more lines). The output \
keeps exactly the listed columns; everything else is dropped. Protected \
columns must be listed."
        }
        ProgramKind::Choose => {
            "Statements: `set PARAM = LITERAL` (number, \"string\", true, or false), one \
per parameter, each parameter at most once, covering every declared parameter \
within its allowed range."
        }
    };
    format!(
        "Program header: `dslv1 {}` on the first line.\n{}\n{}",
        kind.token(),
        body,
        common
    )
}

/// Errors from parsing, checking, or running programs.
#[derive(Debug, Error)]
pub enum DslError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse { line: u32, col: u32, message: String },
    #[error("type error in {statement}: {message}")]
    Type { statement: String, message: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Runtime faults; budget overruns name the exhausted limit.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("row budget exhausted: scanned {scanned} rows, limit {limit}")]
    RowLimit { scanned: u64, limit: u64 },
    #[error("regex budget exhausted: {steps} steps, limit {limit}")]
    RegexLimit { steps: u64, limit: u64 },
    #[error("wall-time budget exhausted: ran {elapsed_ms} ms, limit {limit_ms} ms")]
    WallTime { elapsed_ms: u64, limit_ms: u64 },
    #[error("program kind {kind} has no direct table interpretation")]
    Unsupported { kind: ProgramKind },
    #[error("program kind {kind} requires an auxiliary table")]
    MissingAux { kind: ProgramKind },
    #[error(transparent)]
    Table(#[from] crate::table::TableError),
}
