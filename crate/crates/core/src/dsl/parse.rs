//! Line-oriented parser. Every program opens with a `dslv1 <kind>` header;
//! statements follow, one per line, with `#` comments. Parsing enforces the
//! whole-program AST node budget and compiles regex literals up front.

use super::ast::*;
use super::{DslError, ProgramKind, MAX_AST_NODES};
use crate::table::AggFunc;

/// A parsed program together with its source text and node count.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub source: String,
    pub body: Body,
    pub node_count: usize,
}

impl Program {
    pub fn kind(&self) -> ProgramKind {
        match &self.body {
            Body::FeatureMap(_) => ProgramKind::FeatureMap,
            Body::AggJoin(_) => ProgramKind::AggJoin,
            Body::Extract(_) => ProgramKind::ExtractRules,
            Body::Augment(_) => ProgramKind::Augment,
            Body::Impute(_) => ProgramKind::Impute,
            Body::Clean(_) => ProgramKind::Clean,
            Body::Refine(_) => ProgramKind::Refine,
            Body::Select(_) => ProgramKind::Select,
            Body::Choose(_) => ProgramKind::Choose,
        }
    }
}

/// Parse `source` as a program of `expected` kind. The header kind must match.
pub fn parse(source: &str, expected: ProgramKind) -> Result<Program, DslError> {
    let mut p = Parser::new(source);
    let body = p.program(expected)?;
    Ok(Program { source: source.to_string(), body, node_count: p.nodes })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Punct(&'static str),
    End, // end of line
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Num(x) => format!("number {x}"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Punct(p) => format!("{p:?}"),
            Tok::End => "end of line".to_string(),
            Tok::Eof => "end of program".to_string(),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    nodes: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Parser<'a> {
        Parser { src, bytes: src.as_bytes(), pos: 0, nodes: 0 }
    }

    fn line_col(&self, pos: usize) -> (u32, u32) {
        let mut line = 1u32;
        let mut col = 1u32;
        for &b in &self.bytes[..pos.min(self.bytes.len())] {
            if b == b'\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn err_at(&self, pos: usize, message: impl Into<String>) -> DslError {
        let (line, col) = self.line_col(pos);
        DslError::Parse { line, col, message: message.into() }
    }

    fn bump_nodes(&mut self, pos: usize, n: usize) -> Result<(), DslError> {
        self.nodes += n;
        if self.nodes > MAX_AST_NODES {
            return Err(self.err_at(pos, format!("program exceeds {MAX_AST_NODES} AST nodes")));
        }
        Ok(())
    }

    /// Skip spaces, tabs, and comments; stop before newline.
    fn skip_inline(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn next_tok(&mut self) -> Result<(Tok, usize), DslError> {
        self.skip_inline();
        let start = self.pos;
        if self.pos >= self.bytes.len() {
            return Ok((Tok::Eof, start));
        }
        let b = self.bytes[self.pos];
        if b == b'\n' {
            self.pos += 1;
            return Ok((Tok::End, start));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut end = self.pos;
            while end < self.bytes.len()
                && (self.bytes[end].is_ascii_alphanumeric() || self.bytes[end] == b'_')
            {
                end += 1;
            }
            let word = &self.src[self.pos..end];
            self.pos = end;
            return Ok((Tok::Ident(word.to_string()), start));
        }
        if b.is_ascii_digit() {
            let mut end = self.pos;
            while end < self.bytes.len()
                && (self.bytes[end].is_ascii_digit()
                    || self.bytes[end] == b'.'
                    || self.bytes[end] == b'e'
                    || self.bytes[end] == b'E'
                    || ((self.bytes[end] == b'+' || self.bytes[end] == b'-')
                        && end > self.pos
                        && (self.bytes[end - 1] == b'e' || self.bytes[end - 1] == b'E')))
            {
                end += 1;
            }
            let text = &self.src[self.pos..end];
            let x: f64 = text
                .parse()
                .map_err(|_| self.err_at(start, format!("invalid number {text:?}")))?;
            if !x.is_finite() {
                return Err(self.err_at(start, format!("number {text:?} is not finite")));
            }
            self.pos = end;
            return Ok((Tok::Num(x), start));
        }
        if b == b'"' {
            let mut out = String::new();
            let mut i = self.pos + 1;
            loop {
                if i >= self.bytes.len() || self.bytes[i] == b'\n' {
                    return Err(self.err_at(start, "unterminated string literal"));
                }
                match self.bytes[i] {
                    b'"' => {
                        i += 1;
                        break;
                    }
                    b'\\' => {
                        if i + 1 >= self.bytes.len() {
                            return Err(self.err_at(start, "unterminated string escape"));
                        }
                        let esc = self.bytes[i + 1];
                        out.push(match esc {
                            b'"' => '"',
                            b'\\' => '\\',
                            b'n' => '\n',
                            b't' => '\t',
                            other => {
                                return Err(self.err_at(
                                    i,
                                    format!("unknown string escape '\\{}'", other as char),
                                ))
                            }
                        });
                        i += 2;
                    }
                    _ => {
                        // copy one UTF-8 character
                        let ch_start = i;
                        let s = &self.src[ch_start..];
                        let ch = s.chars().next().expect("in-bounds char");
                        out.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            self.pos = i;
            return Ok((Tok::Str(out), start));
        }
        // punctuation, longest match first
        const PUNCTS: [&str; 16] = [
            "->", "==", "!=", "<=", ">=", "=", "<", ">", "+", "-", "*", "/", "(", ")", ",", ":",
        ];
        for p in PUNCTS {
            if self.src[self.pos..].starts_with(p) {
                self.pos += p.len();
                // leak-free static str: PUNCTS entries are 'static
                return Ok((Tok::Punct(p), start));
            }
        }
        Err(self.err_at(start, format!("unexpected character {:?}", self.src[self.pos..].chars().next().unwrap())))
    }

    fn peek(&mut self) -> Result<(Tok, usize), DslError> {
        let save = self.pos;
        let t = self.next_tok();
        self.pos = save;
        t
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<usize, DslError> {
        let (t, pos) = self.next_tok()?;
        if t == Tok::Punct(p) {
            Ok(pos)
        } else {
            Err(self.err_at(pos, format!("expected {p:?}, found {}", t.describe())))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize), DslError> {
        let (t, pos) = self.next_tok()?;
        match t {
            Tok::Ident(s) => Ok((s, pos)),
            other => Err(self.err_at(pos, format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<usize, DslError> {
        let (t, pos) = self.next_tok()?;
        match t {
            Tok::Ident(ref s) if s == kw => Ok(pos),
            other => Err(self.err_at(pos, format!("expected {kw:?}, found {}", other.describe()))),
        }
    }

    /// End of line (or program) after a statement.
    fn expect_end(&mut self) -> Result<(), DslError> {
        let (t, pos) = self.next_tok()?;
        match t {
            Tok::End | Tok::Eof => Ok(()),
            other => Err(self.err_at(pos, format!("expected end of line, found {}", other.describe()))),
        }
    }

    fn skip_blank_lines(&mut self) -> Result<(), DslError> {
        loop {
            let save = self.pos;
            let (t, _) = self.next_tok()?;
            if t != Tok::End {
                self.pos = save;
                return Ok(());
            }
        }
    }

    /// Try to scan a `/.../` regex literal at the cursor; `None` when the next
    /// character is not `/`.
    fn try_regex(&mut self) -> Result<Option<CompiledRegex>, DslError> {
        self.skip_inline();
        if self.pos >= self.bytes.len() || self.bytes[self.pos] != b'/' {
            return Ok(None);
        }
        let start = self.pos;
        let mut i = self.pos + 1;
        let mut pat = String::new();
        loop {
            if i >= self.bytes.len() || self.bytes[i] == b'\n' {
                return Err(self.err_at(start, "unterminated regex literal"));
            }
            match self.bytes[i] {
                b'/' => {
                    i += 1;
                    break;
                }
                b'\\' if i + 1 < self.bytes.len() && self.bytes[i + 1] == b'/' => {
                    pat.push('/');
                    i += 2;
                }
                _ => {
                    let s = &self.src[i..];
                    let ch = s.chars().next().expect("in-bounds char");
                    pat.push(ch);
                    i += ch.len_utf8();
                }
            }
        }
        self.pos = i;
        let re = regex::RegexBuilder::new(&pat)
            .size_limit(1 << 20)
            .build()
            .map_err(|e| self.err_at(start, format!("invalid regex: {e}")))?;
        Ok(Some(CompiledRegex { source: pat, re }))
    }

    // ---- program & statements ----

    fn program(&mut self, expected: ProgramKind) -> Result<Body, DslError> {
        self.skip_blank_lines()?;
        let pos = self.expect_keyword("dslv1")?;
        let (kind_word, kpos) = self.expect_ident("program kind")?;
        let kind = ProgramKind::parse(&kind_word)
            .ok_or_else(|| self.err_at(kpos, format!("unknown program kind {kind_word:?}")))?;
        if kind != expected {
            return Err(self.err_at(
                kpos,
                format!("program kind is {kind_word:?}, expected {:?}", expected.token()),
            ));
        }
        let _ = pos;
        self.expect_end()?;
        match kind {
            ProgramKind::FeatureMap => self.feature_map().map(Body::FeatureMap),
            ProgramKind::AggJoin => self.agg_join().map(Body::AggJoin),
            ProgramKind::ExtractRules => self.extract_rules().map(Body::Extract),
            ProgramKind::Augment => self.augment().map(Body::Augment),
            ProgramKind::Impute => self.impute().map(Body::Impute),
            ProgramKind::Clean => self.clean().map(Body::Clean),
            ProgramKind::Refine => self.refine().map(Body::Refine),
            ProgramKind::Select => self.select().map(Body::Select),
            ProgramKind::Choose => self.choose().map(Body::Choose),
        }
    }

    /// Iterate statement lines; `None` at end of program.
    fn next_statement_keyword(&mut self) -> Result<Option<(String, usize)>, DslError> {
        self.skip_blank_lines()?;
        let save = self.pos;
        let (t, pos) = self.next_tok()?;
        match t {
            Tok::Eof => Ok(None),
            Tok::Ident(s) => Ok(Some((s, pos))),
            other => {
                self.pos = save;
                Err(self.err_at(pos, format!("expected a statement, found {}", other.describe())))
            }
        }
    }

    fn feature_statement(&mut self) -> Result<(String, Expr), DslError> {
        let (name, _) = self.expect_ident("feature name")?;
        self.expect_punct("=")?;
        let expr = self.expr()?;
        self.expect_end()?;
        Ok((name, expr))
    }

    fn feature_map(&mut self) -> Result<FeatureMap, DslError> {
        let mut features = Vec::new();
        while let Some((kw, pos)) = self.next_statement_keyword()? {
            if kw != "feature" {
                return Err(self.err_at(pos, format!("expected 'feature', found {kw:?}")));
            }
            self.bump_nodes(pos, 1)?;
            features.push(self.feature_statement()?);
        }
        if features.is_empty() {
            return Err(self.err_at(self.pos, "feature_map needs at least one feature"));
        }
        Ok(FeatureMap { features })
    }

    fn agg_join(&mut self) -> Result<AggJoinPlan, DslError> {
        let mut aggs: Vec<AggStmt> = Vec::new();
        let mut post = Vec::new();
        let mut join: Option<(String, String, usize)> = None;
        while let Some((kw, pos)) = self.next_statement_keyword()? {
            self.bump_nodes(pos, 1)?;
            match kw.as_str() {
                "agg" => {
                    let (out_name, _) = self.expect_ident("aggregation name")?;
                    self.expect_punct("=")?;
                    let (func_name, fpos) = self.expect_ident("aggregation function")?;
                    let func = AggFunc::parse(&func_name).ok_or_else(|| {
                        self.err_at(fpos, format!("unknown aggregation function {func_name:?}"))
                    })?;
                    self.expect_punct("(")?;
                    let (column, _) = self.expect_ident("column name")?;
                    self.expect_punct(")")?;
                    self.expect_keyword("by")?;
                    let (by, _) = self.expect_ident("group key")?;
                    self.expect_end()?;
                    aggs.push(AggStmt { out_name, func, column, by });
                }
                "feature" => post.push(self.feature_statement()?),
                "join" => {
                    if join.is_some() {
                        return Err(self.err_at(pos, "duplicate join statement"));
                    }
                    let (left, _) = self.expect_ident("left join key")?;
                    self.expect_punct("=")?;
                    let (right, _) = self.expect_ident("right join key")?;
                    self.expect_end()?;
                    join = Some((left, right, pos));
                }
                other => {
                    return Err(self.err_at(
                        pos,
                        format!("expected 'agg', 'feature', or 'join', found {other:?}"),
                    ))
                }
            }
        }
        let (left_key, right_key, jpos) =
            join.ok_or_else(|| self.err_at(self.pos, "agg_join needs a join statement"))?;
        if aggs.is_empty() {
            return Err(self.err_at(self.pos, "agg_join needs at least one agg statement"));
        }
        for a in &aggs {
            if a.by != right_key {
                return Err(self.err_at(
                    jpos,
                    format!(
                        "agg {:?} groups by {:?} but the join uses right key {:?}",
                        a.out_name, a.by, right_key
                    ),
                ));
            }
        }
        Ok(AggJoinPlan { left_key, right_key, aggs, post })
    }

    fn extract_rules(&mut self) -> Result<ExtractRules, DslError> {
        // collected in first-mention order
        let mut outputs: Vec<(String, Vec<ExtractRule>, Option<String>)> = Vec::new();
        while let Some((kw, pos)) = self.next_statement_keyword()? {
            if kw != "rule" {
                return Err(self.err_at(pos, format!("expected 'rule', found {kw:?}")));
            }
            self.bump_nodes(pos, 1)?;
            let (out, _) = self.expect_ident("output column")?;
            self.expect_punct(":")?;
            let entry = match outputs.iter_mut().find(|(n, _, _)| *n == out) {
                Some(e) => e,
                None => {
                    outputs.push((out.clone(), Vec::new(), None));
                    outputs.last_mut().expect("just pushed")
                }
            };
            // default line or pattern line
            let save = self.pos;
            let (t, tpos) = self.next_tok()?;
            match t {
                Tok::Ident(ref s) if s == "default" => {
                    self.expect_punct("->")?;
                    let (lit, lpos) = self.next_tok()?;
                    let text = match lit {
                        Tok::Str(s) => s,
                        other => {
                            return Err(self.err_at(
                                lpos,
                                format!("default emits a string literal, found {}", other.describe()),
                            ))
                        }
                    };
                    self.expect_end()?;
                    if entry.2.is_some() {
                        return Err(
                            self.err_at(tpos, format!("duplicate default for output {out:?}"))
                        );
                    }
                    entry.2 = Some(text);
                }
                Tok::Ident(src) => {
                    // pattern: regex literal or contains(...)
                    let pattern = if let Some(re) = self.try_regex()? {
                        RulePattern::Regex(re)
                    } else {
                        let kpos = self.expect_keyword("contains")?;
                        self.expect_punct("(")?;
                        let mut kws = Vec::new();
                        loop {
                            let (t, tp) = self.next_tok()?;
                            match t {
                                Tok::Str(s) => kws.push(s),
                                other => {
                                    return Err(self.err_at(
                                        tp,
                                        format!("expected keyword string, found {}", other.describe()),
                                    ))
                                }
                            }
                            let (t, tp) = self.next_tok()?;
                            match t {
                                Tok::Punct(",") => continue,
                                Tok::Punct(")") => break,
                                other => {
                                    return Err(self.err_at(
                                        tp,
                                        format!("expected ',' or ')', found {}", other.describe()),
                                    ))
                                }
                            }
                        }
                        if kws.is_empty() {
                            return Err(self.err_at(kpos, "contains needs at least one keyword"));
                        }
                        RulePattern::Contains(kws)
                    };
                    self.expect_punct("->")?;
                    let (t, epos) = self.next_tok()?;
                    let emit = match t {
                        Tok::Str(s) => RuleEmit::Literal(s),
                        Tok::Ident(ref s) if s == "capture" => {
                            let (n, npos) = self.next_tok()?;
                            match n {
                                Tok::Num(x) if x >= 0.0 && x.fract() == 0.0 => {
                                    RuleEmit::Capture(x as usize)
                                }
                                other => {
                                    return Err(self.err_at(
                                        npos,
                                        format!(
                                            "capture takes a non-negative integer, found {}",
                                            other.describe()
                                        ),
                                    ))
                                }
                            }
                        }
                        other => {
                            return Err(self.err_at(
                                epos,
                                format!("expected string literal or 'capture N', found {}", other.describe()),
                            ))
                        }
                    };
                    if matches!(pattern, RulePattern::Contains(_))
                        && matches!(emit, RuleEmit::Capture(_))
                    {
                        return Err(
                            self.err_at(epos, "contains patterns cannot emit captures")
                        );
                    }
                    self.expect_end()?;
                    entry.1.push(ExtractRule { src, pattern, emit });
                }
                other => {
                    self.pos = save;
                    return Err(self.err_at(
                        tpos,
                        format!("expected source column or 'default', found {}", other.describe()),
                    ));
                }
            }
        }
        if outputs.is_empty() {
            return Err(self.err_at(self.pos, "extract_rules needs at least one rule"));
        }
        let mut done = Vec::with_capacity(outputs.len());
        for (name, rules, default) in outputs {
            let default = default.ok_or_else(|| {
                self.err_at(self.pos, format!("output {name:?} has no default rule"))
            })?;
            done.push(OutputRules { name, rules, default });
        }
        Ok(ExtractRules { outputs: done })
    }

    fn augment(&mut self) -> Result<AugmentPlan, DslError> {
        let (kw, pos) = self
            .next_statement_keyword()?
            .ok_or_else(|| self.err_at(self.pos, "augment needs an add statement"))?;
        if kw != "add" {
            return Err(self.err_at(pos, format!("expected 'add', found {kw:?}")));
        }
        self.bump_nodes(pos, 1)?;
        let (t, npos) = self.next_tok()?;
        let count = match t {
            Tok::Num(x) if x >= 0.0 && x.fract() == 0.0 => x as usize,
            other => {
                return Err(self.err_at(
                    npos,
                    format!("add takes a non-negative integer row count, found {}", other.describe()),
                ))
            }
        };
        let save = self.pos;
        let (t, _) = self.next_tok()?;
        let filter = match t {
            Tok::Ident(ref s) if s == "where" => {
                let e = self.expr()?;
                self.expect_end()?;
                Some(e)
            }
            Tok::End | Tok::Eof => None,
            other => {
                return Err(self.err_at(
                    save,
                    format!("expected 'where' or end of line, found {}", other.describe()),
                ))
            }
        };
        if let Some((_, pos)) = self.next_statement_keyword()? {
            return Err(self.err_at(pos, "augment takes a single add statement"));
        }
        Ok(AugmentPlan { count, filter })
    }

    fn impute(&mut self) -> Result<ImputeRule, DslError> {
        let (kw, pos) = self
            .next_statement_keyword()?
            .ok_or_else(|| self.err_at(self.pos, "impute needs a statement"))?;
        if kw != "impute" {
            return Err(self.err_at(pos, format!("expected 'impute', found {kw:?}")));
        }
        self.bump_nodes(pos, 1)?;
        let (column, _) = self.expect_ident("target column")?;
        self.expect_punct("=")?;
        let value = self.expr()?;
        self.expect_end()?;
        if let Some((_, pos)) = self.next_statement_keyword()? {
            return Err(self.err_at(pos, "impute takes a single statement"));
        }
        Ok(ImputeRule { column, value })
    }

    fn clean(&mut self) -> Result<CleanRule, DslError> {
        let (kw, pos) = self
            .next_statement_keyword()?
            .ok_or_else(|| self.err_at(self.pos, "clean needs a statement"))?;
        if kw != "clean" {
            return Err(self.err_at(pos, format!("expected 'clean', found {kw:?}")));
        }
        self.bump_nodes(pos, 1)?;
        let (column, _) = self.expect_ident("target column")?;
        self.expect_punct("=")?;
        let value = self.expr()?;
        self.expect_end()?;
        if let Some((_, pos)) = self.next_statement_keyword()? {
            return Err(self.err_at(pos, "clean takes a single statement"));
        }
        Ok(CleanRule { column, value })
    }

    fn refine(&mut self) -> Result<RefineRule, DslError> {
        let mut features = Vec::new();
        let mut drop_source = None;
        while let Some((kw, pos)) = self.next_statement_keyword()? {
            self.bump_nodes(pos, 1)?;
            match kw.as_str() {
                "feature" => features.push(self.feature_statement()?),
                "drop_source" => {
                    if drop_source.is_some() {
                        return Err(self.err_at(pos, "duplicate drop_source"));
                    }
                    let (c, _) = self.expect_ident("column name")?;
                    self.expect_end()?;
                    drop_source = Some(c);
                }
                other => {
                    return Err(self.err_at(
                        pos,
                        format!("expected 'feature' or 'drop_source', found {other:?}"),
                    ))
                }
            }
        }
        if features.is_empty() {
            return Err(self.err_at(self.pos, "refine needs at least one feature"));
        }
        Ok(RefineRule { features, drop_source })
    }

    fn select(&mut self) -> Result<SelectList, DslError> {
        let mut keep = Vec::new();
        while let Some((kw, pos)) = self.next_statement_keyword()? {
            if kw != "keep" {
                return Err(self.err_at(pos, format!("expected 'keep', found {kw:?}")));
            }
            self.bump_nodes(pos, 1)?;
            loop {
                let (name, _) = self.expect_ident("column name")?;
                keep.push(name);
                let save = self.pos;
                let (t, _) = self.next_tok()?;
                match t {
                    Tok::Punct(",") => continue,
                    Tok::End | Tok::Eof => break,
                    other => {
                        return Err(self.err_at(
                            save,
                            format!("expected ',' or end of line, found {}", other.describe()),
                        ))
                    }
                }
            }
        }
        if keep.is_empty() {
            return Err(self.err_at(self.pos, "select needs at least one keep statement"));
        }
        Ok(SelectList { keep })
    }

    fn choose(&mut self) -> Result<ChoiceMap, DslError> {
        let mut choices: Vec<(String, ChoiceValue)> = Vec::new();
        while let Some((kw, pos)) = self.next_statement_keyword()? {
            if kw != "set" {
                return Err(self.err_at(pos, format!("expected 'set', found {kw:?}")));
            }
            self.bump_nodes(pos, 1)?;
            let (name, npos) = self.expect_ident("parameter name")?;
            if choices.iter().any(|(n, _)| *n == name) {
                return Err(self.err_at(npos, format!("duplicate parameter {name:?}")));
            }
            self.expect_punct("=")?;
            let (t, vpos) = self.next_tok()?;
            let value = match t {
                Tok::Num(x) => ChoiceValue::Num(x),
                Tok::Punct("-") => {
                    let (t2, v2) = self.next_tok()?;
                    match t2 {
                        Tok::Num(x) => ChoiceValue::Num(-x),
                        other => {
                            return Err(self.err_at(
                                v2,
                                format!("expected number after '-', found {}", other.describe()),
                            ))
                        }
                    }
                }
                Tok::Str(s) => ChoiceValue::Str(s),
                Tok::Ident(ref s) if s == "true" => ChoiceValue::Bool(true),
                Tok::Ident(ref s) if s == "false" => ChoiceValue::Bool(false),
                other => {
                    return Err(self.err_at(
                        vpos,
                        format!("expected a literal value, found {}", other.describe()),
                    ))
                }
            };
            self.expect_end()?;
            choices.push((name, value));
        }
        if choices.is_empty() {
            return Err(self.err_at(self.pos, "choose needs at least one set statement"));
        }
        Ok(ChoiceMap { choices })
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr, DslError> {
        let save = self.pos;
        let (t, _) = self.next_tok()?;
        if let Tok::Ident(ref s) = t {
            if s == "if" {
                self.bump_nodes(save, 1)?;
                let cond = self.expr()?;
                self.expect_keyword("then")?;
                let a = self.expr()?;
                self.expect_keyword("else")?;
                let b = self.expr()?;
                return Ok(Expr::If(Box::new(cond), Box::new(a), Box::new(b)));
            }
        }
        self.pos = save;
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.and_expr()?;
        loop {
            let save = self.pos;
            let (t, pos) = self.next_tok()?;
            match t {
                Tok::Ident(ref s) if s == "or" => {
                    self.bump_nodes(pos, 1)?;
                    let rhs = self.and_expr()?;
                    lhs = Expr::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
                }
                _ => {
                    self.pos = save;
                    return Ok(lhs);
                }
            }
        }
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.not_expr()?;
        loop {
            let save = self.pos;
            let (t, pos) = self.next_tok()?;
            match t {
                Tok::Ident(ref s) if s == "and" => {
                    self.bump_nodes(pos, 1)?;
                    let rhs = self.not_expr()?;
                    lhs = Expr::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
                }
                _ => {
                    self.pos = save;
                    return Ok(lhs);
                }
            }
        }
    }

    fn not_expr(&mut self) -> Result<Expr, DslError> {
        let save = self.pos;
        let (t, pos) = self.next_tok()?;
        if let Tok::Ident(ref s) = t {
            if s == "not" {
                self.bump_nodes(pos, 1)?;
                let inner = self.not_expr()?;
                return Ok(Expr::Not(Box::new(inner)));
            }
        }
        self.pos = save;
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> Result<Expr, DslError> {
        let lhs = self.add_expr()?;
        let save = self.pos;
        let (t, pos) = self.next_tok()?;
        let op = match t {
            Tok::Punct("==") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            _ => {
                self.pos = save;
                return Ok(lhs);
            }
        };
        self.bump_nodes(pos, 1)?;
        let rhs = self.add_expr()?;
        Ok(Expr::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let save = self.pos;
            let (t, pos) = self.next_tok()?;
            let op = match t {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => {
                    self.pos = save;
                    return Ok(lhs);
                }
            };
            self.bump_nodes(pos, 1)?;
            let rhs = self.mul_expr()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let save = self.pos;
            let (t, pos) = self.next_tok()?;
            let op = match t {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                _ => {
                    self.pos = save;
                    return Ok(lhs);
                }
            };
            self.bump_nodes(pos, 1)?;
            let rhs = self.unary_expr()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary_expr(&mut self) -> Result<Expr, DslError> {
        let save = self.pos;
        let (t, pos) = self.next_tok()?;
        if t == Tok::Punct("-") {
            self.bump_nodes(pos, 1)?;
            let inner = self.unary_expr()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.pos = save;
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let (t, pos) = self.next_tok()?;
        self.bump_nodes(pos, 1)?;
        match t {
            Tok::Num(x) => Ok(Expr::NumLit(x)),
            Tok::Str(s) => Ok(Expr::StrLit(s)),
            Tok::Punct("(") => {
                // parenthesized group: not an AST node of its own
                self.nodes -= 1;
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "true" => Ok(Expr::BoolLit(true)),
                "false" => Ok(Expr::BoolLit(false)),
                "missing" => Ok(Expr::MissingLit),
                "if" | "then" | "else" | "and" | "or" | "not" => {
                    Err(self.err_at(pos, format!("keyword {name:?} is not a value")))
                }
                _ => {
                    let save = self.pos;
                    let (t, _) = self.next_tok()?;
                    if t == Tok::Punct("(") {
                        let builtin = Builtin::parse(&name).ok_or_else(|| {
                            self.err_at(pos, format!("unknown function {name:?}"))
                        })?;
                        self.call_args(builtin, pos)
                    } else {
                        self.pos = save;
                        Ok(Expr::Col(name))
                    }
                }
            },
            other => Err(self.err_at(pos, format!("expected an expression, found {}", other.describe()))),
        }
    }

    fn call_args(&mut self, builtin: Builtin, call_pos: usize) -> Result<Expr, DslError> {
        let mut args: Vec<Arg> = Vec::new();
        // empty arg list?
        let save = self.pos;
        let (t, _) = self.next_tok()?;
        if t != Tok::Punct(")") {
            self.pos = save;
            loop {
                let arg = if builtin.regex_arg() == Some(args.len()) {
                    match self.try_regex()? {
                        Some(re) => {
                            self.bump_nodes(self.pos, 1)?;
                            Arg::Regex(re)
                        }
                        None => {
                            let (_, p) = self.peek()?;
                            return Err(self.err_at(
                                p,
                                format!(
                                    "{} takes a /regex/ literal as argument {}",
                                    builtin.name(),
                                    args.len() + 1
                                ),
                            ));
                        }
                    }
                } else {
                    Arg::Expr(self.expr()?)
                };
                args.push(arg);
                let (t, p) = self.next_tok()?;
                match t {
                    Tok::Punct(",") => continue,
                    Tok::Punct(")") => break,
                    other => {
                        return Err(self.err_at(
                            p,
                            format!("expected ',' or ')', found {}", other.describe()),
                        ))
                    }
                }
            }
        }
        let (min, max) = builtin.arity();
        let ok = args.len() >= min && max.map_or(true, |m| args.len() <= m);
        if !ok {
            let want = match max {
                Some(m) if m == min => format!("{min}"),
                Some(m) => format!("{min}..{m}"),
                None => format!("at least {min}"),
            };
            return Err(self.err_at(
                call_pos,
                format!("{} takes {want} arguments, found {}", builtin.name(), args.len()),
            ));
        }
        Ok(Expr::Call(builtin, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_map_smoke() {
        let src = "dslv1 feature_map\nfeature ratio = price / quantity\nfeature flag = price > 10 and not is_missing(quantity)\n";
        let p = parse(src, ProgramKind::FeatureMap).unwrap();
        match &p.body {
            Body::FeatureMap(fm) => {
                assert_eq!(fm.features.len(), 2);
                assert_eq!(fm.features[0].0, "ratio");
            }
            _ => panic!("wrong body"),
        }
        assert_eq!(p.source, src);
    }

    #[test]
    fn header_kind_must_match() {
        let src = "dslv1 feature_map\nfeature a = 1\n";
        let err = parse(src, ProgramKind::Select).unwrap_err();
        assert!(err.to_string().contains("select"), "{err}");
    }

    #[test]
    fn syntax_error_cites_line_and_column() {
        let src = "dslv1 feature_map\nfeature = a + 1\n";
        let err = parse(src, ProgramKind::FeatureMap).unwrap_err();
        match err {
            DslError::Parse { line, col, ref message } => {
                assert_eq!(line, 2);
                assert_eq!(col, 9);
                assert!(message.contains("feature name"), "{message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn ast_node_budget_enforced() {
        // 1 statement node + 5001 literals + 5000 adds = 10_002 nodes
        let mut src = String::from("dslv1 feature_map\nfeature big = 1");
        for _ in 0..5000 {
            src.push_str(" + 1");
        }
        src.push('\n');
        let err = parse(&src, ProgramKind::FeatureMap).unwrap_err();
        assert!(err.to_string().contains("AST nodes"), "{err}");

        // one fewer addition fits the budget exactly
        let mut small = String::from("dslv1 feature_map\nfeature big = 1");
        for _ in 0..4999 {
            small.push_str(" + 1");
        }
        small.push('\n');
        let p = parse(&small, ProgramKind::FeatureMap).unwrap();
        assert_eq!(p.node_count, 10_000);
    }

    #[test]
    fn agg_join_plan_parses() {
        let src = "dslv1 agg_join\nagg total = sum(price) by basket\nagg n = count(item) by basket\nfeature per_item = total / n\njoin id = basket\n";
        let p = parse(src, ProgramKind::AggJoin).unwrap();
        match &p.body {
            Body::AggJoin(plan) => {
                assert_eq!(plan.left_key, "id");
                assert_eq!(plan.right_key, "basket");
                assert_eq!(plan.aggs.len(), 2);
                assert_eq!(plan.post.len(), 1);
            }
            _ => panic!("wrong body"),
        }
    }

    #[test]
    fn agg_by_key_must_match_join_key() {
        let src = "dslv1 agg_join\nagg total = sum(price) by other\njoin id = basket\n";
        assert!(parse(src, ProgramKind::AggJoin).is_err());
    }

    #[test]
    fn extract_rules_parse_with_defaults() {
        let src = concat!(
            "dslv1 extract_rules\n",
            "rule capacity: name /\\b(32|64|128) ?gb/ -> capture 1\n",
            "rule capacity: name contains(\"usb\") -> \"usb\"\n",
            "rule capacity: default -> \"0\"\n",
            "rule brand: name /(sandisk|kingston)/ -> capture 1\n",
            "rule brand: default -> \"other\"\n",
        );
        let p = parse(src, ProgramKind::ExtractRules).unwrap();
        match &p.body {
            Body::Extract(ex) => {
                assert_eq!(ex.outputs.len(), 2);
                assert_eq!(ex.outputs[0].rules.len(), 2);
                assert_eq!(ex.outputs[0].default, "0");
            }
            _ => panic!("wrong body"),
        }
    }

    #[test]
    fn extract_without_default_rejected() {
        let src = "dslv1 extract_rules\nrule cap: name /x/ -> \"1\"\n";
        let err = parse(src, ProgramKind::ExtractRules).unwrap_err();
        assert!(err.to_string().contains("default"), "{err}");
    }

    #[test]
    fn regex_with_escaped_slash() {
        let src = "dslv1 extract_rules\nrule part: name /a\\/b/ -> \"yes\"\nrule part: default -> \"no\"\n";
        let p = parse(src, ProgramKind::ExtractRules).unwrap();
        match &p.body {
            Body::Extract(ex) => match &ex.outputs[0].rules[0].pattern {
                RulePattern::Regex(re) => assert_eq!(re.source, "a/b"),
                _ => panic!("expected regex"),
            },
            _ => panic!("wrong body"),
        }
    }

    #[test]
    fn division_is_not_mistaken_for_regex() {
        let src = "dslv1 feature_map\nfeature r = a / b / c\n";
        let p = parse(src, ProgramKind::FeatureMap).unwrap();
        match &p.body {
            Body::FeatureMap(fm) => match &fm.features[0].1 {
                Expr::Bin(BinOp::Div, _, _) => {}
                other => panic!("expected division, got {other:?}"),
            },
            _ => panic!("wrong body"),
        }
    }

    #[test]
    fn augment_with_filter() {
        let p = parse("dslv1 augment\nadd 10 where y == 1\n", ProgramKind::Augment).unwrap();
        match &p.body {
            Body::Augment(a) => {
                assert_eq!(a.count, 10);
                assert!(a.filter.is_some());
            }
            _ => panic!("wrong body"),
        }
    }

    #[test]
    fn choose_literals() {
        let p = parse(
            "dslv1 choose\nset l2 = 0.5\nset mode = \"fast\"\nset deep = false\n",
            ProgramKind::Choose,
        )
        .unwrap();
        match &p.body {
            Body::Choose(c) => {
                assert_eq!(c.choices.len(), 3);
                assert_eq!(c.get("l2"), Some(&ChoiceValue::Num(0.5)));
            }
            _ => panic!("wrong body"),
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let src = "# header comment\ndslv1 select\n\nkeep a, b # trailing\n";
        let p = parse(src, ProgramKind::Select).unwrap();
        match &p.body {
            Body::Select(s) => assert_eq!(s.keep, vec!["a", "b"]),
            _ => panic!("wrong body"),
        }
    }

    #[test]
    fn if_expression_parses() {
        let src = "dslv1 feature_map\nfeature safe = if b != 0 then a / b else 0\n";
        let p = parse(src, ProgramKind::FeatureMap).unwrap();
        match &p.body {
            Body::FeatureMap(fm) => assert!(matches!(fm.features[0].1, Expr::If(..))),
            _ => panic!("wrong body"),
        }
    }
}
