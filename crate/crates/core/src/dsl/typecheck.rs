//! Static checks against a table schema. Successful checks return the output
//! schema the program will produce, so callers can chain programs without
//! running them.

use super::ast::*;
use super::parse::Program;
use super::DslError;
use crate::table::Kind;

/// Schemas visible to a program: the main table and, for aggregation
/// programs, an auxiliary table.
#[derive(Debug, Clone, Default)]
pub struct SchemaSet {
    pub main: Vec<(String, Kind)>,
    pub aux: Option<Vec<(String, Kind)>>,
}

impl SchemaSet {
    pub fn from_tables(main: &crate::table::Table, aux: Option<&crate::table::Table>) -> SchemaSet {
        SchemaSet { main: main.schema(), aux: aux.map(|t| t.schema()) }
    }
}

/// Expression types; `Unknown` is the type of a bare `missing` literal and
/// unifies with anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExprKind {
    Num,
    Str,
    Bool,
    Unknown,
}

impl ExprKind {
    fn name(self) -> &'static str {
        match self {
            ExprKind::Num => "number",
            ExprKind::Str => "string",
            ExprKind::Bool => "boolean",
            ExprKind::Unknown => "missing",
        }
    }
}

fn unify(a: ExprKind, b: ExprKind) -> Option<ExprKind> {
    match (a, b) {
        (ExprKind::Unknown, k) | (k, ExprKind::Unknown) => Some(k),
        (a, b) if a == b => Some(a),
        _ => None,
    }
}

fn of_kind(k: Kind) -> ExprKind {
    match k {
        Kind::Numeric => ExprKind::Num,
        Kind::String => ExprKind::Str,
        Kind::Boolean => ExprKind::Bool,
    }
}

/// Column kind for a new column; all-missing expressions default to numeric.
fn to_kind(k: ExprKind) -> Kind {
    match k {
        ExprKind::Num | ExprKind::Unknown => Kind::Numeric,
        ExprKind::Str => Kind::String,
        ExprKind::Bool => Kind::Boolean,
    }
}

fn terr(statement: &str, message: impl Into<String>) -> DslError {
    DslError::Type { statement: statement.to_string(), message: message.into() }
}

struct Env {
    cols: Vec<(String, ExprKind)>,
}

impl Env {
    fn from_schema(schema: &[(String, Kind)]) -> Env {
        Env { cols: schema.iter().map(|(n, k)| (n.clone(), of_kind(*k))).collect() }
    }

    fn lookup(&self, name: &str) -> Option<ExprKind> {
        self.cols.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    fn contains(&self, name: &str) -> bool {
        self.cols.iter().any(|(n, _)| n == name)
    }
}

fn check_expr(expr: &Expr, env: &Env, stmt: &str) -> Result<ExprKind, DslError> {
    let expect = |got: ExprKind, want: ExprKind, what: &str| -> Result<ExprKind, DslError> {
        unify(got, want)
            .ok_or_else(|| terr(stmt, format!("{what} needs a {}, found {}", want.name(), got.name())))
    };
    match expr {
        Expr::NumLit(_) => Ok(ExprKind::Num),
        Expr::StrLit(_) => Ok(ExprKind::Str),
        Expr::BoolLit(_) => Ok(ExprKind::Bool),
        Expr::MissingLit => Ok(ExprKind::Unknown),
        Expr::Col(name) => env
            .lookup(name)
            .ok_or_else(|| terr(stmt, format!("unknown column {name:?}"))),
        Expr::Neg(inner) => {
            let k = check_expr(inner, env, stmt)?;
            expect(k, ExprKind::Num, "negation")?;
            Ok(ExprKind::Num)
        }
        Expr::Not(inner) => {
            let k = check_expr(inner, env, stmt)?;
            expect(k, ExprKind::Bool, "'not'")?;
            Ok(ExprKind::Bool)
        }
        Expr::Bin(op, a, b) => {
            let ka = check_expr(a, env, stmt)?;
            let kb = check_expr(b, env, stmt)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                    expect(ka, ExprKind::Num, op.symbol())?;
                    expect(kb, ExprKind::Num, op.symbol())?;
                    Ok(ExprKind::Num)
                }
                BinOp::And | BinOp::Or => {
                    expect(ka, ExprKind::Bool, op.symbol())?;
                    expect(kb, ExprKind::Bool, op.symbol())?;
                    Ok(ExprKind::Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    unify(ka, kb).ok_or_else(|| {
                        terr(stmt, format!("cannot compare {} with {}", ka.name(), kb.name()))
                    })?;
                    Ok(ExprKind::Bool)
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let k = unify(ka, kb).ok_or_else(|| {
                        terr(stmt, format!("cannot compare {} with {}", ka.name(), kb.name()))
                    })?;
                    if k == ExprKind::Bool {
                        return Err(terr(stmt, "cannot order boolean values"));
                    }
                    Ok(ExprKind::Bool)
                }
            }
        }
        Expr::If(cond, a, b) => {
            let kc = check_expr(cond, env, stmt)?;
            expect(kc, ExprKind::Bool, "'if' condition")?;
            let ka = check_expr(a, env, stmt)?;
            let kb = check_expr(b, env, stmt)?;
            unify(ka, kb).ok_or_else(|| {
                terr(
                    stmt,
                    format!("'if' branches have different types: {} and {}", ka.name(), kb.name()),
                )
            })
        }
        Expr::Call(builtin, args) => check_call(*builtin, args, env, stmt),
    }
}

fn check_call(builtin: Builtin, args: &[Arg], env: &Env, stmt: &str) -> Result<ExprKind, DslError> {
    let expr_arg = |i: usize| -> Result<ExprKind, DslError> {
        match &args[i] {
            Arg::Expr(e) => check_expr(e, env, stmt),
            Arg::Regex(_) => unreachable!("regex arguments only at regex positions"),
        }
    };
    let want = |i: usize, want: ExprKind| -> Result<(), DslError> {
        let got = expr_arg(i)?;
        unify(got, want).ok_or_else(|| {
            terr(
                stmt,
                format!(
                    "argument {} of {} needs a {}, found {}",
                    i + 1,
                    builtin.name(),
                    want.name(),
                    got.name()
                ),
            )
        })?;
        Ok(())
    };
    match builtin {
        Builtin::Lowercase | Builtin::Trim => {
            want(0, ExprKind::Str)?;
            Ok(ExprKind::Str)
        }
        Builtin::RegexReplace => {
            want(0, ExprKind::Str)?;
            want(2, ExprKind::Str)?;
            Ok(ExprKind::Str)
        }
        Builtin::RegexMatch => {
            want(0, ExprKind::Str)?;
            Ok(ExprKind::Bool)
        }
        Builtin::Contains => {
            want(0, ExprKind::Str)?;
            want(1, ExprKind::Str)?;
            Ok(ExprKind::Bool)
        }
        Builtin::SplitPart => {
            want(0, ExprKind::Str)?;
            want(1, ExprKind::Str)?;
            want(2, ExprKind::Num)?;
            Ok(ExprKind::Str)
        }
        Builtin::Length => {
            want(0, ExprKind::Str)?;
            Ok(ExprKind::Num)
        }
        Builtin::Log1p | Builtin::Abs => {
            want(0, ExprKind::Num)?;
            Ok(ExprKind::Num)
        }
        Builtin::Clip => {
            want(0, ExprKind::Num)?;
            want(1, ExprKind::Num)?;
            want(2, ExprKind::Num)?;
            Ok(ExprKind::Num)
        }
        Builtin::IsMissing => {
            expr_arg(0)?;
            Ok(ExprKind::Bool)
        }
        Builtin::Coalesce => {
            let mut acc = ExprKind::Unknown;
            for i in 0..args.len() {
                let k = expr_arg(i)?;
                acc = unify(acc, k).ok_or_else(|| {
                    terr(
                        stmt,
                        format!(
                            "coalesce arguments disagree: {} and {}",
                            acc.name(),
                            k.name()
                        ),
                    )
                })?;
            }
            Ok(acc)
        }
    }
}

fn check_features(
    features: &[(String, Expr)],
    env: &mut Env,
    out: &mut Vec<(String, Kind)>,
) -> Result<(), DslError> {
    for (name, expr) in features {
        let stmt = format!("feature {name}");
        if env.contains(name) {
            return Err(terr(&stmt, format!("column {name:?} already exists")));
        }
        let k = check_expr(expr, env, &stmt)?;
        env.cols.push((name.clone(), k));
        out.push((name.clone(), to_kind(k)));
    }
    Ok(())
}

/// Check `prog` against `schemas`; on success return the output schema of
/// applying the program to the main table.
pub fn typecheck(prog: &Program, schemas: &SchemaSet) -> Result<Vec<(String, Kind)>, DslError> {
    let mut out: Vec<(String, Kind)> = schemas.main.clone();
    match &prog.body {
        Body::FeatureMap(fm) => {
            let mut env = Env::from_schema(&schemas.main);
            check_features(&fm.features, &mut env, &mut out)?;
            Ok(out)
        }
        Body::AggJoin(plan) => {
            let stmt = format!("join {} = {}", plan.left_key, plan.right_key);
            let aux = schemas
                .aux
                .as_ref()
                .ok_or_else(|| terr(&stmt, "agg_join needs an auxiliary table"))?;
            let left_kind = schemas
                .main
                .iter()
                .find(|(n, _)| *n == plan.left_key)
                .map(|(_, k)| *k)
                .ok_or_else(|| terr(&stmt, format!("unknown column {:?}", plan.left_key)))?;
            let right_kind = aux
                .iter()
                .find(|(n, _)| *n == plan.right_key)
                .map(|(_, k)| *k)
                .ok_or_else(|| {
                    terr(&stmt, format!("unknown auxiliary column {:?}", plan.right_key))
                })?;
            if left_kind != right_kind {
                return Err(terr(
                    &stmt,
                    format!("join keys have different types: {left_kind} and {right_kind}"),
                ));
            }
            let mut env = Env::from_schema(&schemas.main);
            for a in &plan.aggs {
                let stmt = format!("agg {}", a.out_name);
                let col_kind = aux
                    .iter()
                    .find(|(n, _)| *n == a.column)
                    .map(|(_, k)| *k)
                    .ok_or_else(|| {
                        terr(&stmt, format!("unknown auxiliary column {:?}", a.column))
                    })?;
                if a.func.numeric_only() && col_kind != Kind::Numeric {
                    return Err(terr(
                        &stmt,
                        format!("{} needs a numeric column, found {col_kind}", a.func.name()),
                    ));
                }
                if env.contains(&a.out_name) {
                    return Err(terr(&stmt, format!("column {:?} already exists", a.out_name)));
                }
                let k = a.func.output_kind(col_kind);
                env.cols.push((a.out_name.clone(), of_kind(k)));
                out.push((a.out_name.clone(), k));
            }
            check_features(&plan.post, &mut env, &mut out)?;
            Ok(out)
        }
        Body::Extract(ex) => {
            let env = Env::from_schema(&schemas.main);
            for o in &ex.outputs {
                let stmt = format!("rule {}", o.name);
                if env.contains(&o.name) {
                    return Err(terr(&stmt, format!("column {:?} already exists", o.name)));
                }
                for r in &o.rules {
                    match env.lookup(&r.src) {
                        None => {
                            return Err(terr(&stmt, format!("unknown column {:?}", r.src)))
                        }
                        Some(ExprKind::Str) => {}
                        Some(k) => {
                            return Err(terr(
                                &stmt,
                                format!("source column {:?} is {}, not string", r.src, k.name()),
                            ))
                        }
                    }
                    if let (RulePattern::Regex(re), RuleEmit::Capture(n)) = (&r.pattern, &r.emit) {
                        // captures_len counts group 0 (the whole match)
                        if *n >= re.re.captures_len() {
                            return Err(terr(
                                &stmt,
                                format!(
                                    "capture {} out of range: regex has {} groups",
                                    n,
                                    re.re.captures_len() - 1
                                ),
                            ));
                        }
                    }
                }
                out.push((o.name.clone(), Kind::String));
            }
            Ok(out)
        }
        Body::Augment(plan) => {
            if let Some(filter) = &plan.filter {
                let env = Env::from_schema(&schemas.main);
                let k = check_expr(filter, &env, "add")?;
                unify(k, ExprKind::Bool).ok_or_else(|| {
                    terr("add", format!("'where' needs a boolean, found {}", k.name()))
                })?;
            }
            Ok(out)
        }
        Body::Impute(rule) => {
            let stmt = format!("impute {}", rule.column);
            let env = Env::from_schema(&schemas.main);
            let col_kind = env
                .lookup(&rule.column)
                .ok_or_else(|| terr(&stmt, format!("unknown column {:?}", rule.column)))?;
            let vk = check_expr(&rule.value, &env, &stmt)?;
            unify(vk, col_kind).ok_or_else(|| {
                terr(
                    &stmt,
                    format!(
                        "column {:?} is {}, but the fill value is {}",
                        rule.column,
                        col_kind.name(),
                        vk.name()
                    ),
                )
            })?;
            Ok(out)
        }
        Body::Clean(rule) => {
            let stmt = format!("clean {}", rule.column);
            let env = Env::from_schema(&schemas.main);
            let col_kind = env
                .lookup(&rule.column)
                .ok_or_else(|| terr(&stmt, format!("unknown column {:?}", rule.column)))?;
            let vk = check_expr(&rule.value, &env, &stmt)?;
            unify(vk, col_kind).ok_or_else(|| {
                terr(
                    &stmt,
                    format!(
                        "column {:?} is {}, but the replacement is {}",
                        rule.column,
                        col_kind.name(),
                        vk.name()
                    ),
                )
            })?;
            Ok(out)
        }
        Body::Refine(rule) => {
            let mut env = Env::from_schema(&schemas.main);
            if let Some(drop) = &rule.drop_source {
                if !env.contains(drop) {
                    return Err(terr(
                        &format!("drop_source {drop}"),
                        format!("unknown column {drop:?}"),
                    ));
                }
            }
            let mut added = Vec::new();
            check_features(&rule.features, &mut env, &mut added)?;
            if let Some(drop) = &rule.drop_source {
                out.retain(|(n, _)| n != drop);
            }
            out.extend(added);
            Ok(out)
        }
        Body::Select(sel) => {
            let env = Env::from_schema(&schemas.main);
            let mut kept = Vec::with_capacity(sel.keep.len());
            for name in &sel.keep {
                let stmt = format!("keep {name}");
                let k = env
                    .lookup(name)
                    .ok_or_else(|| terr(&stmt, format!("unknown column {name:?}")))?;
                if kept.iter().any(|(n, _): &(String, Kind)| n == name) {
                    return Err(terr(&stmt, format!("column {name:?} listed twice")));
                }
                kept.push((name.clone(), to_kind(k)));
            }
            Ok(kept)
        }
        Body::Choose(_) => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, ProgramKind};
    use super::*;

    fn schema(cols: &[(&str, Kind)]) -> SchemaSet {
        SchemaSet {
            main: cols.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            aux: None,
        }
    }

    #[test]
    fn feature_map_output_schema() {
        let p = parse(
            "dslv1 feature_map\nfeature r = a / b\nfeature m = is_missing(a)\nfeature both = r + 1\n",
            ProgramKind::FeatureMap,
        )
        .unwrap();
        let s = schema(&[("a", Kind::Numeric), ("b", Kind::Numeric)]);
        let out = typecheck(&p, &s).unwrap();
        assert_eq!(
            out,
            vec![
                ("a".to_string(), Kind::Numeric),
                ("b".to_string(), Kind::Numeric),
                ("r".to_string(), Kind::Numeric),
                ("m".to_string(), Kind::Boolean),
                ("both".to_string(), Kind::Numeric),
            ]
        );
    }

    #[test]
    fn unknown_column_rejected() {
        let p = parse("dslv1 feature_map\nfeature r = nope + 1\n", ProgramKind::FeatureMap).unwrap();
        let s = schema(&[("a", Kind::Numeric)]);
        let err = typecheck(&p, &s).unwrap_err();
        assert!(err.to_string().contains("unknown column \"nope\""), "{err}");
    }

    #[test]
    fn log1p_of_string_rejected() {
        let p = parse("dslv1 feature_map\nfeature r = log1p(name)\n", ProgramKind::FeatureMap).unwrap();
        let s = schema(&[("name", Kind::String)]);
        let err = typecheck(&p, &s).unwrap_err();
        assert!(err.to_string().contains("needs a number, found string"), "{err}");
    }

    #[test]
    fn duplicate_feature_name_rejected() {
        let p = parse(
            "dslv1 feature_map\nfeature a = 1\n",
            ProgramKind::FeatureMap,
        )
        .unwrap();
        let s = schema(&[("a", Kind::Numeric)]);
        let err = typecheck(&p, &s).unwrap_err();
        assert!(err.to_string().contains("already exists"), "{err}");
    }

    #[test]
    fn missing_literal_unifies() {
        let p = parse(
            "dslv1 feature_map\nfeature x = if a > 0 then missing else a\nfeature y = coalesce(missing, \"z\")\n",
            ProgramKind::FeatureMap,
        )
        .unwrap();
        let s = schema(&[("a", Kind::Numeric)]);
        let out = typecheck(&p, &s).unwrap();
        assert_eq!(out[1], ("x".to_string(), Kind::Numeric));
        assert_eq!(out[2], ("y".to_string(), Kind::String));
    }

    #[test]
    fn agg_join_checks_keys_and_functions() {
        let p = parse(
            "dslv1 agg_join\nagg total = sum(price) by basket\njoin id = basket\n",
            ProgramKind::AggJoin,
        )
        .unwrap();
        // missing aux
        let s = schema(&[("id", Kind::Numeric)]);
        assert!(typecheck(&p, &s).is_err());
        // key kind mismatch
        let mut s2 = schema(&[("id", Kind::String)]);
        s2.aux = Some(vec![
            ("basket".to_string(), Kind::Numeric),
            ("price".to_string(), Kind::Numeric),
        ]);
        assert!(typecheck(&p, &s2).is_err());
        // sum of a string column
        let mut s3 = schema(&[("id", Kind::Numeric)]);
        s3.aux = Some(vec![
            ("basket".to_string(), Kind::Numeric),
            ("price".to_string(), Kind::String),
        ]);
        let err = typecheck(&p, &s3).unwrap_err();
        assert!(err.to_string().contains("numeric column"), "{err}");
        // well-typed
        let mut s4 = schema(&[("id", Kind::Numeric)]);
        s4.aux = Some(vec![
            ("basket".to_string(), Kind::Numeric),
            ("price".to_string(), Kind::Numeric),
        ]);
        let out = typecheck(&p, &s4).unwrap();
        assert_eq!(out.last().unwrap(), &("total".to_string(), Kind::Numeric));
    }

    #[test]
    fn capture_out_of_range_rejected() {
        let p = parse(
            "dslv1 extract_rules\nrule cap: name /(a)(b)/ -> capture 3\nrule cap: default -> \"x\"\n",
            ProgramKind::ExtractRules,
        )
        .unwrap();
        let s = schema(&[("name", Kind::String)]);
        let err = typecheck(&p, &s).unwrap_err();
        assert!(err.to_string().contains("capture 3 out of range"), "{err}");
    }

    #[test]
    fn extract_source_must_be_string() {
        let p = parse(
            "dslv1 extract_rules\nrule cap: price /x/ -> \"1\"\nrule cap: default -> \"0\"\n",
            ProgramKind::ExtractRules,
        )
        .unwrap();
        let s = schema(&[("price", Kind::Numeric)]);
        assert!(typecheck(&p, &s).is_err());
    }

    #[test]
    fn impute_kind_must_match() {
        let p = parse("dslv1 impute\nimpute age = \"old\"\n", ProgramKind::Impute).unwrap();
        let s = schema(&[("age", Kind::Numeric)]);
        let err = typecheck(&p, &s).unwrap_err();
        assert!(err.to_string().contains("fill value is string"), "{err}");
    }

    #[test]
    fn select_schema_follows_keep_order() {
        let p = parse("dslv1 select\nkeep b, a\n", ProgramKind::Select).unwrap();
        let s = schema(&[("a", Kind::Numeric), ("b", Kind::String)]);
        let out = typecheck(&p, &s).unwrap();
        assert_eq!(
            out,
            vec![("b".to_string(), Kind::String), ("a".to_string(), Kind::Numeric)]
        );
    }

    #[test]
    fn refine_drops_source_after_features() {
        let p = parse(
            "dslv1 refine\nfeature len = length(name)\ndrop_source name\n",
            ProgramKind::Refine,
        )
        .unwrap();
        let s = schema(&[("name", Kind::String), ("z", Kind::Numeric)]);
        let out = typecheck(&p, &s).unwrap();
        assert_eq!(
            out,
            vec![("z".to_string(), Kind::Numeric), ("len".to_string(), Kind::Numeric)]
        );
    }
}
