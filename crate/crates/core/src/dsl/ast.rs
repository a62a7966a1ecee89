//! Abstract syntax for the sandboxed transformation language.

use crate::table::AggFunc;

/// A regex literal compiled at parse time. Equality is by source pattern.
#[derive(Debug, Clone)]
pub struct CompiledRegex {
    pub source: String,
    pub re: regex::Regex,
}

impl PartialEq for CompiledRegex {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

/// Binary operators. Arithmetic faults (division by zero, non-finite results)
/// evaluate to missing, never to an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// Built-in functions callable from expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Lowercase,
    Trim,
    RegexReplace,
    RegexMatch,
    Contains,
    SplitPart,
    Length,
    Log1p,
    Abs,
    Clip,
    IsMissing,
    Coalesce,
}

impl Builtin {
    pub fn parse(name: &str) -> Option<Builtin> {
        Some(match name {
            "lowercase" => Builtin::Lowercase,
            "trim" => Builtin::Trim,
            "regex_replace" => Builtin::RegexReplace,
            "regex_match" => Builtin::RegexMatch,
            "contains" => Builtin::Contains,
            "split_part" => Builtin::SplitPart,
            "length" => Builtin::Length,
            "log1p" => Builtin::Log1p,
            "abs" => Builtin::Abs,
            "clip" => Builtin::Clip,
            "is_missing" => Builtin::IsMissing,
            "coalesce" => Builtin::Coalesce,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Lowercase => "lowercase",
            Builtin::Trim => "trim",
            Builtin::RegexReplace => "regex_replace",
            Builtin::RegexMatch => "regex_match",
            Builtin::Contains => "contains",
            Builtin::SplitPart => "split_part",
            Builtin::Length => "length",
            Builtin::Log1p => "log1p",
            Builtin::Abs => "abs",
            Builtin::Clip => "clip",
            Builtin::IsMissing => "is_missing",
            Builtin::Coalesce => "coalesce",
        }
    }

    /// (min_args, max_args); `None` max means variadic.
    pub fn arity(&self) -> (usize, Option<usize>) {
        match self {
            Builtin::Lowercase | Builtin::Trim | Builtin::Length | Builtin::Log1p
            | Builtin::Abs | Builtin::IsMissing => (1, Some(1)),
            Builtin::RegexMatch | Builtin::Contains => (2, Some(2)),
            Builtin::RegexReplace | Builtin::SplitPart | Builtin::Clip => (3, Some(3)),
            Builtin::Coalesce => (2, None),
        }
    }

    /// Argument position that must be a regex literal, if any.
    pub fn regex_arg(&self) -> Option<usize> {
        match self {
            Builtin::RegexMatch | Builtin::RegexReplace => Some(1),
            _ => None,
        }
    }
}

/// A function argument: an expression or a regex literal.
#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Expr(Expr),
    Regex(CompiledRegex),
}

/// Expression tree evaluated per row.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    NumLit(f64),
    StrLit(String),
    BoolLit(bool),
    MissingLit,
    Col(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Arg>),
}

/// `feature NAME = EXPR` list; appends new columns to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub features: Vec<(String, Expr)>,
}

/// One `agg NAME = FN(COL) by KEY` statement.
#[derive(Debug, Clone, PartialEq)]
pub struct AggStmt {
    pub out_name: String,
    pub func: AggFunc,
    pub column: String,
    pub by: String,
}

/// Aggregate an auxiliary table per key, derive post-aggregation features,
/// and left-join the result onto the main table.
#[derive(Debug, Clone, PartialEq)]
pub struct AggJoinPlan {
    pub left_key: String,
    pub right_key: String,
    pub aggs: Vec<AggStmt>,
    /// Post-aggregation features computed on the aggregated table; each may
    /// reference aggregation outputs and earlier post features.
    pub post: Vec<(String, Expr)>,
}

/// Pattern of an extraction rule.
#[derive(Debug, Clone, PartialEq)]
pub enum RulePattern {
    Regex(CompiledRegex),
    /// Case-insensitive substring match against any of the keywords.
    Contains(Vec<String>),
}

/// What a matched rule emits.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleEmit {
    Literal(String),
    /// Regex capture-group index (0 = whole match).
    Capture(usize),
}

/// One `rule OUT: SRC PATTERN -> EMIT` line.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractRule {
    pub src: String,
    pub pattern: RulePattern,
    pub emit: RuleEmit,
}

/// All rules for one output column: first match wins, otherwise the default.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRules {
    pub name: String,
    pub rules: Vec<ExtractRule>,
    pub default: String,
}

/// Ordered per-column extraction rule sets; outputs are string columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractRules {
    pub outputs: Vec<OutputRules>,
}

/// `add K [where EXPR]`: append K rows cycled from matching rows (fit only).
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPlan {
    pub count: usize,
    /// Boolean filter over the input columns plus the pseudo-column `y`.
    pub filter: Option<Expr>,
}

/// `impute COL = EXPR`: fill missing cells of COL with the expression value.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputeRule {
    pub column: String,
    pub value: Expr,
}

/// `clean COL = EXPR`: rewrite COL row-wise, keeping its name and kind.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanRule {
    pub column: String,
    pub value: Expr,
}

/// `feature` lines plus an optional `drop_source COL`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineRule {
    pub features: Vec<(String, Expr)>,
    pub drop_source: Option<String>,
}

/// `keep COL, ...`: column subset in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectList {
    pub keep: Vec<String>,
}

/// A proposed hyperparameter value.
#[derive(Debug, Clone, PartialEq)]
pub enum ChoiceValue {
    Num(f64),
    Str(String),
    Bool(bool),
}

impl ChoiceValue {
    pub fn render(&self) -> String {
        match self {
            ChoiceValue::Num(x) => format!("{x}"),
            ChoiceValue::Str(s) => s.clone(),
            ChoiceValue::Bool(b) => b.to_string(),
        }
    }
}

/// `set PARAM = LITERAL` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceMap {
    pub choices: Vec<(String, ChoiceValue)>,
}

impl ChoiceMap {
    pub fn get(&self, name: &str) -> Option<&ChoiceValue> {
        self.choices.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

/// Statement payload of a parsed program.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    FeatureMap(FeatureMap),
    AggJoin(AggJoinPlan),
    Extract(ExtractRules),
    Augment(AugmentPlan),
    Impute(ImputeRule),
    Clean(CleanRule),
    Refine(RefineRule),
    Select(SelectList),
    Choose(ChoiceMap),
}
