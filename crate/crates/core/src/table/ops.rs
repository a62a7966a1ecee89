//! Relational operations: left outer join and grouped aggregation.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use super::{Column, ColumnData, KeyValue, Kind, Table, TableError, Value};

/// Left outer join on a single key pair. Right keys must be unique; right rows
/// with a missing key match nothing. Unmatched left rows get missing cells in
/// every right-derived column. The right key column itself is not duplicated
/// into the output.
pub fn left_outer_join(
    left: &Table,
    right: &Table,
    left_on: &str,
    right_on: &str,
) -> Result<Table, TableError> {
    let lk = left
        .column(left_on)
        .ok_or_else(|| TableError::UnknownColumn(left_on.to_string()))?;
    let rk = right
        .column(right_on)
        .ok_or_else(|| TableError::UnknownColumn(right_on.to_string()))?;
    if lk.kind() != rk.kind() {
        return Err(TableError::JoinKeyKind {
            left: left_on.to_string(),
            left_kind: lk.kind(),
            right: right_on.to_string(),
            right_kind: rk.kind(),
        });
    }
    for c in right.columns() {
        if c.name() != right_on && left.has_column(c.name()) {
            return Err(TableError::JoinNameClash(c.name().to_string()));
        }
    }

    let mut index: HashMap<KeyValue, usize> = HashMap::with_capacity(right.n_rows());
    for row in 0..right.n_rows() {
        if let Some(key) = KeyValue::from_value(&rk.get(row)) {
            match index.entry(key) {
                Entry::Vacant(e) => {
                    e.insert(row);
                }
                Entry::Occupied(e) => {
                    return Err(TableError::DuplicateJoinKey {
                        key: right_on.to_string(),
                        value: e.key().render(),
                    });
                }
            }
        }
    }

    // row index into right for each left row; None when unmatched
    let matches: Vec<Option<usize>> = (0..left.n_rows())
        .map(|row| KeyValue::from_value(&lk.get(row)).and_then(|k| index.get(&k).copied()))
        .collect();

    let mut out: Vec<Column> = left.columns().cloned().collect();
    for rc in right.columns() {
        if rc.name() == right_on {
            continue;
        }
        let data = match rc.data() {
            ColumnData::Numeric(v) => {
                ColumnData::Numeric(matches.iter().map(|m| m.and_then(|i| v[i])).collect())
            }
            ColumnData::String(v) => ColumnData::String(
                matches.iter().map(|m| m.and_then(|i| v[i].clone())).collect(),
            ),
            ColumnData::Boolean(v) => {
                ColumnData::Boolean(matches.iter().map(|m| m.and_then(|i| v[i])).collect())
            }
        };
        out.push(Column::new(rc.name(), data));
    }
    Table::new(out)
}

/// Aggregation function over one source column per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFunc {
    Sum,
    Mean,
    Min,
    Max,
    /// Population standard deviation; a single value aggregates to 0.
    Std,
    /// Count of non-missing values.
    Count,
    /// Number of distinct non-missing values.
    NUnique,
    /// Most frequent non-missing value; ties resolve to the smallest value.
    Mode,
}

impl AggFunc {
    pub fn name(&self) -> &'static str {
        match self {
            AggFunc::Sum => "sum",
            AggFunc::Mean => "mean",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
            AggFunc::Std => "std",
            AggFunc::Count => "count",
            AggFunc::NUnique => "nunique",
            AggFunc::Mode => "mode",
        }
    }

    pub fn parse(s: &str) -> Option<AggFunc> {
        Some(match s {
            "sum" => AggFunc::Sum,
            "mean" => AggFunc::Mean,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            "std" => AggFunc::Std,
            "count" => AggFunc::Count,
            "nunique" => AggFunc::NUnique,
            "mode" => AggFunc::Mode,
            _ => return None,
        })
    }

    /// True when the function needs a numeric source column.
    pub fn numeric_only(&self) -> bool {
        matches!(self, AggFunc::Sum | AggFunc::Mean | AggFunc::Std)
    }

    /// Output kind for a source column of `kind`.
    pub fn output_kind(&self, kind: Kind) -> Kind {
        match self {
            AggFunc::Sum | AggFunc::Mean | AggFunc::Std | AggFunc::Count | AggFunc::NUnique => {
                Kind::Numeric
            }
            AggFunc::Min | AggFunc::Max | AggFunc::Mode => kind,
        }
    }
}

/// One named aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggSpec {
    pub out_name: String,
    pub func: AggFunc,
    pub column: String,
}

/// Group rows by `key` and compute `aggs` per group. Rows with a missing key
/// are skipped. Output has one row per distinct key in first-appearance order:
/// the key column (original name/kind) followed by one column per aggregation.
pub fn group_aggregate(t: &Table, key: &str, aggs: &[AggSpec]) -> Result<Table, TableError> {
    let kc = t.column(key).ok_or_else(|| TableError::UnknownColumn(key.to_string()))?;
    for a in aggs {
        let src = t
            .column(&a.column)
            .ok_or_else(|| TableError::UnknownColumn(a.column.clone()))?;
        if a.func.numeric_only() && src.kind() != Kind::Numeric {
            return Err(TableError::AggKind {
                func: a.func.name().to_string(),
                column: a.column.clone(),
                kind: src.kind(),
            });
        }
    }

    // group rows by key, preserving first-appearance group order
    let mut order: Vec<KeyValue> = Vec::new();
    let mut groups: HashMap<KeyValue, Vec<usize>> = HashMap::new();
    for row in 0..t.n_rows() {
        if let Some(k) = KeyValue::from_value(&kc.get(row)) {
            match groups.entry(k.clone()) {
                Entry::Vacant(e) => {
                    order.push(k);
                    e.insert(vec![row]);
                }
                Entry::Occupied(mut e) => e.get_mut().push(row),
            }
        }
    }

    let first_rows: Vec<usize> = order.iter().map(|k| groups[k][0]).collect();
    let key_col = kc.take(&first_rows);

    let mut out = vec![key_col];
    for a in aggs {
        let src = t.column(&a.column).expect("checked above");
        let out_kind = a.func.output_kind(src.kind());
        let mut vals = Vec::with_capacity(order.len());
        for k in &order {
            let rows = &groups[k];
            vals.push(aggregate_rows(src, rows, a.func));
        }
        out.push(Column::from_values(a.out_name.clone(), out_kind, vals)?);
    }
    Table::new(out)
}

fn aggregate_rows(src: &Column, rows: &[usize], func: AggFunc) -> Value {
    match func {
        AggFunc::Count => {
            let n = rows.iter().filter(|&&r| !src.is_missing_at(r)).count();
            Value::Num(n as f64)
        }
        AggFunc::NUnique => {
            let mut seen: Vec<KeyValue> = Vec::new();
            for &r in rows {
                if let Some(k) = KeyValue::from_value(&src.get(r)) {
                    if !seen.contains(&k) {
                        seen.push(k);
                    }
                }
            }
            Value::Num(seen.len() as f64)
        }
        AggFunc::Sum => {
            let mut acc = 0.0;
            for &r in rows {
                if let Value::Num(x) = src.get(r) {
                    acc += x;
                }
            }
            Value::num(acc)
        }
        AggFunc::Mean => {
            let mut acc = 0.0;
            let mut n = 0usize;
            for &r in rows {
                if let Value::Num(x) = src.get(r) {
                    acc += x;
                    n += 1;
                }
            }
            if n == 0 {
                Value::Missing
            } else {
                Value::num(acc / n as f64)
            }
        }
        AggFunc::Std => {
            let mut vals = Vec::new();
            for &r in rows {
                if let Value::Num(x) = src.get(r) {
                    vals.push(x);
                }
            }
            if vals.is_empty() {
                return Value::Missing;
            }
            if vals.len() == 1 {
                return Value::Num(0.0);
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / vals.len() as f64;
            Value::num(var.sqrt())
        }
        AggFunc::Min | AggFunc::Max => {
            let mut best: Option<Value> = None;
            for &r in rows {
                let v = src.get(r);
                if v.is_missing() {
                    continue;
                }
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let keep_new = match func {
                            AggFunc::Min => value_lt(&v, &b),
                            _ => value_lt(&b, &v),
                        };
                        if keep_new {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            best.unwrap_or(Value::Missing)
        }
        AggFunc::Mode => {
            // count occurrences preserving deterministic tie resolution:
            // highest count wins, ties go to the smallest value
            let mut counts: Vec<(Value, usize)> = Vec::new();
            for &r in rows {
                let v = src.get(r);
                if v.is_missing() {
                    continue;
                }
                match counts.iter_mut().find(|(seen, _)| values_eq(seen, &v)) {
                    Some((_, n)) => *n += 1,
                    None => counts.push((v, 1)),
                }
            }
            let mut best: Option<(Value, usize)> = None;
            for (v, n) in counts {
                best = Some(match best {
                    None => (v, n),
                    Some((bv, bn)) => {
                        if n > bn || (n == bn && value_lt(&v, &bv)) {
                            (v, n)
                        } else {
                            (bv, bn)
                        }
                    }
                });
            }
            best.map(|(v, _)| v).unwrap_or(Value::Missing)
        }
    }
}

fn values_eq(a: &Value, b: &Value) -> bool {
    a == b
}

/// Total order within one kind: numeric order, lexicographic bytes, false < true.
pub(crate) fn value_lt(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => x < y,
        (Value::Str(x), Value::Str(y)) => x < y,
        (Value::Bool(x), Value::Bool(y)) => !x & y,
        _ => false,
    }
}
