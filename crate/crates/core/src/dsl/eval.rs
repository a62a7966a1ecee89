//! Program interpreter. Every row-statement visit ticks a budget, every regex
//! application is charged by haystack size, and wall time is checked
//! periodically, so a hostile or runaway program aborts with the exhausted
//! limit named instead of hanging the process.
//!
//! Faults are values: division by zero, non-finite arithmetic, out-of-domain
//! inputs, and out-of-range lookups all produce `missing` rather than errors.
//! Missing propagates through every operation except `is_missing` and
//! `coalesce`, which observe it.

use std::sync::Arc;
use std::time::{Duration, Instant};

use super::ast::*;
use super::parse::Program;
use super::typecheck::{typecheck, SchemaSet};
use super::{DslError, EvalError, ProgramKind};
use crate::table::{AggSpec, Column, Kind, Table, TableError, Value};

fn need_column<'t>(t: &'t Table, name: &str) -> Result<&'t Column, EvalError> {
    t.column(name)
        .ok_or_else(|| EvalError::Table(TableError::UnknownColumn(name.to_string())))
}

/// Execution limits for one program run.
#[derive(Debug, Clone)]
pub struct EvalLimits {
    pub max_rows_scanned: u64,
    pub max_regex_steps: u64,
    pub wall_time: Duration,
}

impl Default for EvalLimits {
    fn default() -> EvalLimits {
        EvalLimits {
            max_rows_scanned: 50_000_000,
            max_regex_steps: 500_000_000,
            wall_time: Duration::from_secs(10),
        }
    }
}

/// Running totals against a set of limits.
#[derive(Debug)]
pub struct EvalBudget {
    limits: EvalLimits,
    rows_scanned: u64,
    regex_steps: u64,
    started: Instant,
    ticks_since_clock: u32,
}

impl EvalBudget {
    pub fn new(limits: &EvalLimits) -> EvalBudget {
        EvalBudget {
            limits: limits.clone(),
            rows_scanned: 0,
            regex_steps: 0,
            started: Instant::now(),
            ticks_since_clock: 0,
        }
    }

    /// Charge one row-statement visit.
    fn tick_row(&mut self) -> Result<(), EvalError> {
        self.rows_scanned += 1;
        if self.rows_scanned > self.limits.max_rows_scanned {
            return Err(EvalError::RowLimit {
                scanned: self.rows_scanned,
                limit: self.limits.max_rows_scanned,
            });
        }
        // the wall clock is comparatively expensive; consult it sparingly
        self.ticks_since_clock += 1;
        if self.ticks_since_clock >= 256 {
            self.ticks_since_clock = 0;
            let elapsed = self.started.elapsed();
            if elapsed > self.limits.wall_time {
                return Err(EvalError::WallTime {
                    elapsed_ms: elapsed.as_millis() as u64,
                    limit_ms: self.limits.wall_time.as_millis() as u64,
                });
            }
        }
        Ok(())
    }

    /// Charge one regex application over `haystack_len` bytes.
    fn charge_regex(&mut self, haystack_len: usize) -> Result<(), EvalError> {
        self.regex_steps += haystack_len as u64 + 1;
        if self.regex_steps > self.limits.max_regex_steps {
            return Err(EvalError::RegexLimit {
                steps: self.regex_steps,
                limit: self.limits.max_regex_steps,
            });
        }
        Ok(())
    }
}

/// One row's visible values: a base table row plus columns appended so far.
struct RowEnv<'a> {
    table: &'a Table,
    row: usize,
    extra_names: &'a [String],
    extra: &'a [Value],
}

impl<'a> RowEnv<'a> {
    fn get(&self, name: &str) -> Value {
        // only the first `extra.len()` extras are computed so far
        for (i, v) in self.extra.iter().enumerate() {
            if self.extra_names[i] == name {
                return v.clone();
            }
        }
        match self.table.column(name) {
            Some(c) => c.get(self.row),
            // typecheck guarantees the name exists; missing is the safe fallback
            None => Value::Missing,
        }
    }
}

fn eval_expr(expr: &Expr, env: &RowEnv<'_>, budget: &mut EvalBudget) -> Result<Value, EvalError> {
    Ok(match expr {
        Expr::NumLit(x) => Value::num(*x),
        Expr::StrLit(s) => Value::Str(s.clone()),
        Expr::BoolLit(b) => Value::Bool(*b),
        Expr::MissingLit => Value::Missing,
        Expr::Col(name) => env.get(name),
        Expr::Neg(inner) => match eval_expr(inner, env, budget)? {
            Value::Num(x) => Value::num(-x),
            _ => Value::Missing,
        },
        Expr::Not(inner) => match eval_expr(inner, env, budget)? {
            Value::Bool(b) => Value::Bool(!b),
            _ => Value::Missing,
        },
        Expr::Bin(op, a, b) => {
            let va = eval_expr(a, env, budget)?;
            let vb = eval_expr(b, env, budget)?;
            if matches!(va, Value::Missing) || matches!(vb, Value::Missing) {
                return Ok(Value::Missing);
            }
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => match (va, vb) {
                    (Value::Num(x), Value::Num(y)) => match op {
                        BinOp::Add => Value::num(x + y),
                        BinOp::Sub => Value::num(x - y),
                        BinOp::Mul => Value::num(x * y),
                        BinOp::Div => {
                            if y == 0.0 {
                                Value::Missing
                            } else {
                                Value::num(x / y)
                            }
                        }
                        _ => unreachable!(),
                    },
                    _ => Value::Missing,
                },
                BinOp::And | BinOp::Or => match (va, vb) {
                    (Value::Bool(x), Value::Bool(y)) => Value::Bool(match op {
                        BinOp::And => x && y,
                        BinOp::Or => x || y,
                        _ => unreachable!(),
                    }),
                    _ => Value::Missing,
                },
                BinOp::Eq | BinOp::Ne => {
                    let eq = values_eq(&va, &vb);
                    match eq {
                        Some(e) => Value::Bool(if *op == BinOp::Eq { e } else { !e }),
                        None => Value::Missing,
                    }
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => match values_cmp(&va, &vb) {
                    Some(ord) => Value::Bool(match op {
                        BinOp::Lt => ord == std::cmp::Ordering::Less,
                        BinOp::Le => ord != std::cmp::Ordering::Greater,
                        BinOp::Gt => ord == std::cmp::Ordering::Greater,
                        BinOp::Ge => ord != std::cmp::Ordering::Less,
                        _ => unreachable!(),
                    }),
                    None => Value::Missing,
                },
            }
        }
        Expr::If(cond, a, b) => {
            // all three evaluate; faults are values, so this is safe
            let vc = eval_expr(cond, env, budget)?;
            let va = eval_expr(a, env, budget)?;
            let vb = eval_expr(b, env, budget)?;
            match vc {
                Value::Bool(true) => va,
                Value::Bool(false) => vb,
                _ => Value::Missing,
            }
        }
        Expr::Call(builtin, args) => eval_call(*builtin, args, env, budget)?,
    })
}

fn values_eq(a: &Value, b: &Value) -> Option<bool> {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => Some(x == y),
        (Value::Str(x), Value::Str(y)) => Some(x == y),
        (Value::Bool(x), Value::Bool(y)) => Some(x == y),
        _ => None,
    }
}

fn values_cmp(a: &Value, b: &Value) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => x.partial_cmp(y),
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

fn eval_call(
    builtin: Builtin,
    args: &[Arg],
    env: &RowEnv<'_>,
    budget: &mut EvalBudget,
) -> Result<Value, EvalError> {
    let expr_arg = |i: usize, budget: &mut EvalBudget| -> Result<Value, EvalError> {
        match &args[i] {
            Arg::Expr(e) => eval_expr(e, env, budget),
            Arg::Regex(_) => unreachable!("regex arguments only at regex positions"),
        }
    };
    let regex_arg = |i: usize| -> &CompiledRegex {
        match &args[i] {
            Arg::Regex(re) => re,
            Arg::Expr(_) => unreachable!("parser guarantees a regex here"),
        }
    };
    Ok(match builtin {
        Builtin::Lowercase => match expr_arg(0, budget)? {
            Value::Str(s) => Value::Str(s.to_lowercase()),
            _ => Value::Missing,
        },
        Builtin::Trim => match expr_arg(0, budget)? {
            Value::Str(s) => Value::Str(s.trim().to_string()),
            _ => Value::Missing,
        },
        Builtin::RegexReplace => {
            let s = expr_arg(0, budget)?;
            let repl = expr_arg(2, budget)?;
            match (s, repl) {
                (Value::Str(s), Value::Str(repl)) => {
                    budget.charge_regex(s.len())?;
                    let re = regex_arg(1);
                    Value::Str(re.re.replace_all(&s, repl.as_str()).into_owned())
                }
                _ => Value::Missing,
            }
        }
        Builtin::RegexMatch => match expr_arg(0, budget)? {
            Value::Str(s) => {
                budget.charge_regex(s.len())?;
                Value::Bool(regex_arg(1).re.is_match(&s))
            }
            _ => Value::Missing,
        },
        Builtin::Contains => {
            let s = expr_arg(0, budget)?;
            let sub = expr_arg(1, budget)?;
            match (s, sub) {
                (Value::Str(s), Value::Str(sub)) => Value::Bool(s.contains(&sub)),
                _ => Value::Missing,
            }
        }
        Builtin::SplitPart => {
            let s = expr_arg(0, budget)?;
            let sep = expr_arg(1, budget)?;
            let n = expr_arg(2, budget)?;
            match (s, sep, n) {
                (Value::Str(s), Value::Str(sep), Value::Num(n)) => {
                    // zero-based part index; anything out of range is missing
                    if sep.is_empty() || n < 0.0 || n.fract() != 0.0 {
                        Value::Missing
                    } else {
                        match s.split(sep.as_str()).nth(n as usize) {
                            Some(part) => Value::Str(part.to_string()),
                            None => Value::Missing,
                        }
                    }
                }
                _ => Value::Missing,
            }
        }
        Builtin::Length => match expr_arg(0, budget)? {
            Value::Str(s) => Value::num(s.chars().count() as f64),
            _ => Value::Missing,
        },
        Builtin::Log1p => match expr_arg(0, budget)? {
            // defined only for non-negative inputs
            Value::Num(x) if x >= 0.0 => Value::num(x.ln_1p()),
            _ => Value::Missing,
        },
        Builtin::Abs => match expr_arg(0, budget)? {
            Value::Num(x) => Value::num(x.abs()),
            _ => Value::Missing,
        },
        Builtin::Clip => {
            let x = expr_arg(0, budget)?;
            let lo = expr_arg(1, budget)?;
            let hi = expr_arg(2, budget)?;
            match (x, lo, hi) {
                (Value::Num(x), Value::Num(lo), Value::Num(hi)) if lo <= hi => {
                    Value::num(x.clamp(lo, hi))
                }
                _ => Value::Missing,
            }
        }
        Builtin::IsMissing => {
            let v = expr_arg(0, budget)?;
            Value::Bool(matches!(v, Value::Missing))
        }
        Builtin::Coalesce => {
            let mut out = Value::Missing;
            for i in 0..args.len() {
                let v = expr_arg(i, budget)?;
                if !matches!(v, Value::Missing) {
                    out = v;
                    break;
                }
            }
            out
        }
    })
}

/// Evaluate row-wise feature statements, appending one column per feature.
fn run_features(
    table: &Table,
    features: &[(String, Expr)],
    budget: &mut EvalBudget,
) -> Result<Vec<(String, Vec<Value>)>, EvalError> {
    let extra_names: Vec<String> = features.iter().map(|(n, _)| n.clone()).collect();
    let n_rows = table.n_rows();
    let mut cols: Vec<(String, Vec<Value>)> = features
        .iter()
        .map(|(n, _)| (n.clone(), Vec::with_capacity(n_rows)))
        .collect();
    let mut extra: Vec<Value> = Vec::with_capacity(features.len());
    for row in 0..n_rows {
        extra.clear();
        for (fi, (_, expr)) in features.iter().enumerate() {
            budget.tick_row()?;
            let v = {
                let env = RowEnv { table, row, extra_names: &extra_names, extra: &extra };
                eval_expr(expr, &env, budget)?
            };
            extra.push(v.clone());
            cols[fi].1.push(v);
        }
    }
    Ok(cols)
}

fn append_columns(
    table: &Table,
    computed: Vec<(String, Vec<Value>)>,
    out_schema: &[(String, Kind)],
) -> Result<Table, EvalError> {
    let mut cols = Vec::with_capacity(computed.len());
    for (name, values) in computed {
        let kind = out_schema
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .unwrap_or(Kind::Numeric);
        cols.push(Column::from_values(&name, kind, values).map_err(EvalError::Table)?);
    }
    table.with_columns(cols).map_err(EvalError::Table)
}

/// Run `prog` over `main` (and `aux` for aggregation programs) under `limits`.
///
/// `augment` and `choose` programs have no direct table interpretation here:
/// row synthesis is a training-time concern and parameter choices configure a
/// learner, so both are interpreted by their operators.
pub fn evaluate(
    prog: &Program,
    main: &Table,
    aux: Option<&Table>,
    limits: &EvalLimits,
) -> Result<Table, DslError> {
    let schemas = SchemaSet::from_tables(main, aux);
    let out_schema = typecheck(prog, &schemas)?;
    let mut budget = EvalBudget::new(limits);
    let out = match &prog.body {
        Body::FeatureMap(fm) => {
            let cols = run_features(main, &fm.features, &mut budget)?;
            append_columns(main, cols, &out_schema)?
        }
        Body::AggJoin(plan) => {
            let aux = aux.ok_or(EvalError::MissingAux { kind: ProgramKind::AggJoin })?;
            for _ in 0..aux.n_rows() {
                budget.tick_row()?;
            }
            let specs: Vec<AggSpec> = plan
                .aggs
                .iter()
                .map(|a| AggSpec {
                    out_name: a.out_name.clone(),
                    func: a.func,
                    column: a.column.clone(),
                })
                .collect();
            let grouped = crate::table::group_aggregate(aux, &plan.right_key, &specs)
                .map_err(EvalError::Table)?;
            for _ in 0..main.n_rows() {
                budget.tick_row()?;
            }
            let joined =
                crate::table::left_outer_join(main, &grouped, &plan.left_key, &plan.right_key)
                    .map_err(EvalError::Table)?;
            let cols = run_features(&joined, &plan.post, &mut budget)?;
            append_columns(&joined, cols, &out_schema)?
        }
        Body::Extract(ex) => {
            let n_rows = main.n_rows();
            let mut new_cols = Vec::with_capacity(ex.outputs.len());
            for o in &ex.outputs {
                let mut values = Vec::with_capacity(n_rows);
                for row in 0..n_rows {
                    budget.tick_row()?;
                    values.push(Value::Str(extract_one(o, main, row, &mut budget)?));
                }
                new_cols.push((o.name.clone(), values));
            }
            append_columns(main, new_cols, &out_schema)?
        }
        Body::Augment(_) => {
            return Err(EvalError::Unsupported { kind: ProgramKind::Augment }.into())
        }
        Body::Choose(_) => {
            return Err(EvalError::Unsupported { kind: ProgramKind::Choose }.into())
        }
        Body::Impute(rule) => {
            let col = need_column(main, &rule.column)?;
            let mut values = Vec::with_capacity(main.n_rows());
            for row in 0..main.n_rows() {
                budget.tick_row()?;
                let current = col.get(row);
                if matches!(current, Value::Missing) {
                    let env = RowEnv { table: main, row, extra_names: &[], extra: &[] };
                    values.push(eval_expr(&rule.value, &env, &mut budget)?);
                } else {
                    values.push(current);
                }
            }
            let new_col = Column::from_values(&rule.column, col.kind(), values)
                .map_err(EvalError::Table)?;
            main.replace_column(new_col).map_err(EvalError::Table)?
        }
        Body::Clean(rule) => {
            let col = need_column(main, &rule.column)?;
            let mut values = Vec::with_capacity(main.n_rows());
            for row in 0..main.n_rows() {
                budget.tick_row()?;
                let env = RowEnv { table: main, row, extra_names: &[], extra: &[] };
                values.push(eval_expr(&rule.value, &env, &mut budget)?);
            }
            let new_col = Column::from_values(&rule.column, col.kind(), values)
                .map_err(EvalError::Table)?;
            main.replace_column(new_col).map_err(EvalError::Table)?
        }
        Body::Refine(rule) => {
            let cols = run_features(main, &rule.features, &mut budget)?;
            let with = append_columns(main, cols, &out_schema)?;
            match &rule.drop_source {
                Some(drop) => with.drop_columns(&[drop.clone()]).map_err(EvalError::Table)?,
                None => with,
            }
        }
        Body::Select(sel) => {
            // keep-list order is the output order
            let mut cols: Vec<Arc<Column>> = Vec::with_capacity(sel.keep.len());
            for name in &sel.keep {
                cols.push(main.column_shared(name).ok_or_else(|| {
                    EvalError::Table(TableError::UnknownColumn(name.clone()))
                })?);
            }
            Table::from_shared(cols).map_err(EvalError::Table)?
        }
    };
    Ok(out)
}

/// Apply one output's rules to a row; the first matching rule emits,
/// otherwise the default does.
fn extract_one(
    output: &OutputRules,
    table: &Table,
    row: usize,
    budget: &mut EvalBudget,
) -> Result<String, EvalError> {
    for rule in &output.rules {
        let src = need_column(table, &rule.src)?;
        let text = match src.get(row) {
            Value::Str(s) => s,
            _ => continue, // missing source: this rule cannot match
        };
        match &rule.pattern {
            RulePattern::Regex(re) => {
                budget.charge_regex(text.len())?;
                if let Some(caps) = re.re.captures(&text) {
                    match &rule.emit {
                        RuleEmit::Literal(lit) => return Ok(lit.clone()),
                        RuleEmit::Capture(n) => {
                            // a matched regex whose group did not participate
                            // falls through to the next rule
                            if let Some(m) = caps.get(*n) {
                                return Ok(m.as_str().to_string());
                            }
                        }
                    }
                }
            }
            RulePattern::Contains(keywords) => {
                let lower = text.to_lowercase();
                if keywords.iter().any(|kw| lower.contains(&kw.to_lowercase())) {
                    match &rule.emit {
                        RuleEmit::Literal(lit) => return Ok(lit.clone()),
                        RuleEmit::Capture(_) => unreachable!("rejected at parse"),
                    }
                }
            }
        }
    }
    Ok(output.default.clone())
}

/// Row mask of a boolean expression over `table`; missing counts as false.
pub(crate) fn filter_mask(
    table: &Table,
    expr: &Expr,
    limits: &EvalLimits,
) -> Result<Vec<bool>, EvalError> {
    let mut budget = EvalBudget::new(limits);
    let mut mask = Vec::with_capacity(table.n_rows());
    for row in 0..table.n_rows() {
        budget.tick_row()?;
        let env = RowEnv { table, row, extra_names: &[], extra: &[] };
        mask.push(matches!(eval_expr(expr, &env, &mut budget)?, Value::Bool(true)));
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::super::{parse, ProgramKind};
    use super::*;
    use crate::table::Kind;

    fn table(cols: Vec<Column>) -> Table {
        Table::new(cols).unwrap()
    }

    fn num_col(name: &str, xs: &[Option<f64>]) -> Column {
        Column::from_values(
            name,
            Kind::Numeric,
            xs.iter().map(|x| x.map_or(Value::Missing, Value::num)).collect(),
        )
        .unwrap()
    }

    fn str_col(name: &str, xs: &[Option<&str>]) -> Column {
        Column::from_values(
            name,
            Kind::String,
            xs.iter()
                .map(|x| x.map_or(Value::Missing, |s| Value::Str(s.to_string())))
                .collect(),
        )
        .unwrap()
    }

    fn run(src: &str, kind: ProgramKind, main: &Table, aux: Option<&Table>) -> Table {
        let p = parse(src, kind).unwrap();
        evaluate(&p, main, aux, &EvalLimits::default()).unwrap()
    }

    #[test]
    fn missing_propagates_through_operators() {
        let t = table(vec![
            num_col("a", &[Some(1.0), None, Some(3.0)]),
            num_col("b", &[Some(2.0), Some(2.0), None]),
        ]);
        let out = run(
            "dslv1 feature_map\nfeature s = a + b\nfeature c = a > 0 and b > 0\nfeature m = is_missing(a)\nfeature f = coalesce(a, b, 0)\n",
            ProgramKind::FeatureMap,
            &t,
            None,
        );
        let s = out.column("s").unwrap().clone();
        assert_eq!(s.get(0), Value::num(3.0));
        assert_eq!(s.get(1), Value::Missing);
        assert_eq!(s.get(2), Value::Missing);
        let c = out.column("c").unwrap().clone();
        assert_eq!(c.get(1), Value::Missing); // strict: missing and true = missing
        let m = out.column("m").unwrap().clone();
        assert_eq!(m.get(1), Value::Bool(true));
        let f = out.column("f").unwrap().clone();
        assert_eq!(f.get(1), Value::num(2.0));
    }

    #[test]
    fn arithmetic_faults_become_missing() {
        let t = table(vec![num_col("a", &[Some(1.0), Some(1e308)])]);
        let out = run(
            "dslv1 feature_map\nfeature div = a / 0\nfeature big = a * 1e308\nfeature neglog = log1p(0 - 2)\n",
            ProgramKind::FeatureMap,
            &t,
            None,
        );
        assert_eq!(out.column("div").unwrap().get(0), Value::Missing);
        assert_eq!(out.column("big").unwrap().get(1), Value::Missing); // overflow
        assert_eq!(out.column("neglog").unwrap().get(0), Value::Missing);
    }

    #[test]
    fn if_selects_after_evaluating_both_branches() {
        let t = table(vec![
            num_col("a", &[Some(10.0), Some(7.0)]),
            num_col("b", &[Some(2.0), Some(0.0)]),
        ]);
        // the taken else-branch shields the div-by-zero in the then-branch
        let out = run(
            "dslv1 feature_map\nfeature safe = if b != 0 then a / b else 0\n",
            ProgramKind::FeatureMap,
            &t,
            None,
        );
        let v = out.column("safe").unwrap().clone();
        assert_eq!(v.get(0), Value::num(5.0));
        assert_eq!(v.get(1), Value::num(0.0));
    }

    #[test]
    fn string_builtins() {
        let t = table(vec![str_col("s", &[Some("  Hello-World  "), None])]);
        let out = run(
            concat!(
                "dslv1 feature_map\n",
                "feature t = lowercase(trim(s))\n",
                "feature p = split_part(trim(s), \"-\", 1)\n",
                "feature n = length(trim(s))\n",
                "feature has = contains(s, \"World\")\n",
            ),
            ProgramKind::FeatureMap,
            &t,
            None,
        );
        assert_eq!(out.column("t").unwrap().get(0), Value::Str("hello-world".into()));
        assert_eq!(out.column("p").unwrap().get(0), Value::Str("World".into()));
        assert_eq!(out.column("n").unwrap().get(0), Value::num(11.0));
        assert_eq!(out.column("has").unwrap().get(0), Value::Bool(true));
        assert_eq!(out.column("t").unwrap().get(1), Value::Missing);
    }

    #[test]
    fn agg_join_matches_manual_composition() {
        let main = table(vec![num_col("id", &[Some(1.0), Some(2.0), Some(3.0)])]);
        let aux = table(vec![
            num_col("key", &[Some(1.0), Some(1.0), Some(2.0)]),
            num_col("v", &[Some(10.0), Some(30.0), Some(5.0)]),
        ]);
        let out = run(
            "dslv1 agg_join\nagg total = sum(v) by key\nagg n = count(v) by key\nfeature avg = total / n\njoin id = key\n",
            ProgramKind::AggJoin,
            &main,
            Some(&aux),
        );
        let total = out.column("total").unwrap().clone();
        assert_eq!(total.get(0), Value::num(40.0));
        assert_eq!(total.get(1), Value::num(5.0));
        assert_eq!(total.get(2), Value::Missing); // unmatched key
        let avg = out.column("avg").unwrap().clone();
        assert_eq!(avg.get(0), Value::num(20.0));
        assert_eq!(avg.get(2), Value::Missing);
    }

    #[test]
    fn extract_rules_capture_and_default() {
        let t = table(vec![str_col(
            "name",
            &[Some("SanDisk 32 GB stick"), Some("plain usb cable"), None],
        )]);
        let out = run(
            concat!(
                "dslv1 extract_rules\n",
                "rule gb: name /(\\d+) ?[gG][bB]/ -> capture 1\n",
                "rule gb: name contains(\"usb\") -> \"0\"\n",
                "rule gb: default -> \"unknown\"\n",
            ),
            ProgramKind::ExtractRules,
            &t,
            None,
        );
        let v = out.column("gb").unwrap().clone();
        assert_eq!(v.get(0), Value::Str("32".into()));
        assert_eq!(v.get(1), Value::Str("0".into()));
        assert_eq!(v.get(2), Value::Str("unknown".into())); // missing source
    }

    #[test]
    fn impute_fills_only_missing_cells() {
        let t = table(vec![num_col("a", &[Some(1.0), None, Some(3.0)])]);
        let out = run("dslv1 impute\nimpute a = 0 - 1\n", ProgramKind::Impute, &t, None);
        let v = out.column("a").unwrap().clone();
        assert_eq!(v.get(0), Value::num(1.0));
        assert_eq!(v.get(1), Value::num(-1.0));
        assert_eq!(v.get(2), Value::num(3.0));
    }

    #[test]
    fn clean_replaces_every_cell() {
        let t = table(vec![str_col("s", &[Some("  a "), Some("b")])]);
        let out = run("dslv1 clean\nclean s = trim(s)\n", ProgramKind::Clean, &t, None);
        let v = out.column("s").unwrap().clone();
        assert_eq!(v.get(0), Value::Str("a".into()));
        assert_eq!(v.get(1), Value::Str("b".into()));
    }

    #[test]
    fn refine_adds_then_drops() {
        let t = table(vec![str_col("name", &[Some("ab")]), num_col("z", &[Some(1.0)])]);
        let out = run(
            "dslv1 refine\nfeature len = length(name)\ndrop_source name\n",
            ProgramKind::Refine,
            &t,
            None,
        );
        assert_eq!(out.column_names(), vec!["z", "len"]);
        assert_eq!(out.column("len").unwrap().get(0), Value::num(2.0));
    }

    #[test]
    fn select_emits_keep_order() {
        let t = table(vec![
            num_col("a", &[Some(1.0)]),
            str_col("b", &[Some("x")]),
            num_col("c", &[Some(2.0)]),
        ]);
        let out = run("dslv1 select\nkeep c, a\n", ProgramKind::Select, &t, None);
        assert_eq!(out.column_names(), vec!["c", "a"]);
    }

    #[test]
    fn augment_and_choose_are_not_table_programs() {
        let t = table(vec![num_col("a", &[Some(1.0)])]);
        let p = parse("dslv1 augment\nadd 3\n", ProgramKind::Augment).unwrap();
        let err = evaluate(&p, &t, None, &EvalLimits::default()).unwrap_err();
        assert!(err.to_string().contains("no direct table interpretation"), "{err}");
        let p = parse("dslv1 choose\nset x = 1\n", ProgramKind::Choose).unwrap();
        assert!(evaluate(&p, &t, None, &EvalLimits::default()).is_err());
    }

    #[test]
    fn row_budget_aborts_and_names_the_limit() {
        let t = table(vec![num_col("a", &(0..100).map(|i| Some(i as f64)).collect::<Vec<_>>())]);
        let p = parse("dslv1 feature_map\nfeature b = a + 1\n", ProgramKind::FeatureMap).unwrap();
        let limits = EvalLimits { max_rows_scanned: 10, ..EvalLimits::default() };
        let err = evaluate(&p, &t, None, &limits).unwrap_err();
        assert!(err.to_string().contains("row budget"), "{err}");
        assert!(err.to_string().contains("limit 10"), "{err}");
    }

    #[test]
    fn regex_budget_aborts() {
        let t = table(vec![str_col("s", &[Some("abcdefghij"); 20].to_vec())]);
        let p = parse(
            "dslv1 feature_map\nfeature m = regex_match(s, /abc/)\n",
            ProgramKind::FeatureMap,
        )
        .unwrap();
        let limits = EvalLimits { max_regex_steps: 50, ..EvalLimits::default() };
        let err = evaluate(&p, &t, None, &limits).unwrap_err();
        assert!(err.to_string().contains("regex budget"), "{err}");
    }

    #[test]
    fn two_pass_feature_chain() {
        let t = table(vec![num_col("a", &[Some(4.0)])]);
        let out = run(
            "dslv1 feature_map\nfeature half = a / 2\nfeature quarter = half / 2\n",
            ProgramKind::FeatureMap,
            &t,
            None,
        );
        assert_eq!(out.column("quarter").unwrap().get(0), Value::num(1.0));
    }
}
