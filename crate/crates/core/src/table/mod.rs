//! Immutable columnar tables with three column kinds (numeric, string,
//! boolean) and a universal missing value. Tables are cheap to clone (columns
//! are shared via `Arc`) and safe to read from multiple threads.

mod csv_io;
mod ops;
mod profile;

pub use csv_io::{parse_csv, read_csv};
pub use ops::{group_aggregate, left_outer_join, AggFunc, AggSpec};
pub use profile::{profile, sample_rows, ColumnProfile, NumericSummary, TableProfile};

use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

/// Column kind. Every cell of a column is of this kind or missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Numeric,
    String,
    Boolean,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Numeric => "numeric",
            Kind::String => "string",
            Kind::Boolean => "boolean",
        })
    }
}

/// One cell value. Numeric payloads are always finite; non-finite results of
/// any computation are represented as `Missing`.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Missing,
    Num(f64),
    Str(String),
    Bool(bool),
}

impl Value {
    /// Numeric value, demoting non-finite floats to missing.
    pub fn num(x: f64) -> Value {
        if x.is_finite() {
            Value::Num(x)
        } else {
            Value::Missing
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn kind(&self) -> Option<Kind> {
        match self {
            Value::Missing => None,
            Value::Num(_) => Some(Kind::Numeric),
            Value::Str(_) => Some(Kind::String),
            Value::Bool(_) => Some(Kind::Boolean),
        }
    }

    /// Render for profiles and error messages.
    pub fn render(&self) -> String {
        match self {
            Value::Missing => "<missing>".to_string(),
            Value::Num(x) => format!("{x}"),
            Value::Str(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
        }
    }
}

/// Typed column storage.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    String(Vec<Option<String>>),
    Boolean(Vec<Option<bool>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::String(v) => v.len(),
            ColumnData::Boolean(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> Kind {
        match self {
            ColumnData::Numeric(_) => Kind::Numeric,
            ColumnData::String(_) => Kind::String,
            ColumnData::Boolean(_) => Kind::Boolean,
        }
    }
}

/// A named, immutable column.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    data: ColumnData,
}

impl Column {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Column {
        Column { name: name.into(), data }
    }

    /// Build a column of the given kind from cell values. Values must match
    /// the kind or be missing.
    pub fn from_values(
        name: impl Into<String>,
        kind: Kind,
        values: Vec<Value>,
    ) -> Result<Column, TableError> {
        let name = name.into();
        let data = match kind {
            Kind::Numeric => {
                let mut v = Vec::with_capacity(values.len());
                for value in values {
                    v.push(match value {
                        Value::Missing => None,
                        Value::Num(x) if x.is_finite() => Some(x),
                        Value::Num(_) => None,
                        other => return Err(TableError::CellKind { column: name, expected: kind, got: other.render() }),
                    });
                }
                ColumnData::Numeric(v)
            }
            Kind::String => {
                let mut v = Vec::with_capacity(values.len());
                for value in values {
                    v.push(match value {
                        Value::Missing => None,
                        Value::Str(s) => Some(s),
                        other => return Err(TableError::CellKind { column: name, expected: kind, got: other.render() }),
                    });
                }
                ColumnData::String(v)
            }
            Kind::Boolean => {
                let mut v = Vec::with_capacity(values.len());
                for value in values {
                    v.push(match value {
                        Value::Missing => None,
                        Value::Bool(b) => Some(b),
                        other => return Err(TableError::CellKind { column: name, expected: kind, got: other.render() }),
                    });
                }
                ColumnData::Boolean(v)
            }
        };
        Ok(Column { name, data })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> Kind {
        self.data.kind()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    /// Cell at `row` as an owned value.
    pub fn get(&self, row: usize) -> Value {
        match &self.data {
            ColumnData::Numeric(v) => v[row].map(Value::Num).unwrap_or(Value::Missing),
            ColumnData::String(v) => v[row].clone().map(Value::Str).unwrap_or(Value::Missing),
            ColumnData::Boolean(v) => v[row].map(Value::Bool).unwrap_or(Value::Missing),
        }
    }

    pub fn is_missing_at(&self, row: usize) -> bool {
        match &self.data {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::String(v) => v[row].is_none(),
            ColumnData::Boolean(v) => v[row].is_none(),
        }
    }

    pub fn missing_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_missing_at(i)).count()
    }

    /// New column with the same name containing the rows at `indices`.
    pub fn take(&self, indices: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::String(v) => {
                ColumnData::String(indices.iter().map(|&i| v[i].clone()).collect())
            }
            ColumnData::Boolean(v) => ColumnData::Boolean(indices.iter().map(|&i| v[i]).collect()),
        };
        Column { name: self.name.clone(), data }
    }
}

/// Hashable owned key for joins and grouping. Missing cells never form keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum KeyValue {
    Num(u64),
    Str(String),
    Bool(bool),
}

impl KeyValue {
    /// Key for a cell; `None` when the cell is missing.
    pub fn from_value(v: &Value) -> Option<KeyValue> {
        match v {
            Value::Missing => None,
            // normalize -0.0 to 0.0 so the two compare equal as keys
            Value::Num(x) => Some(KeyValue::Num(if *x == 0.0 { 0u64 } else { x.to_bits() })),
            Value::Str(s) => Some(KeyValue::Str(s.clone())),
            Value::Bool(b) => Some(KeyValue::Bool(*b)),
        }
    }

    pub fn render(&self) -> String {
        match self {
            KeyValue::Num(bits) => format!("{}", f64::from_bits(*bits)),
            KeyValue::Str(s) => s.clone(),
            KeyValue::Bool(b) => b.to_string(),
        }
    }
}

/// Immutable table: uniquely named columns of equal length.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<Arc<Column>>,
    rows: usize,
}

impl Table {
    /// Build from columns. Names must be unique and lengths equal.
    pub fn new(columns: Vec<Column>) -> Result<Table, TableError> {
        let mut seen = BTreeMap::new();
        let rows = columns.first().map(|c| c.len()).unwrap_or(0);
        for c in &columns {
            if c.len() != rows {
                return Err(TableError::RaggedColumns {
                    column: c.name().to_string(),
                    expected: rows,
                    got: c.len(),
                });
            }
            if seen.insert(c.name().to_string(), ()).is_some() {
                return Err(TableError::DuplicateColumn(c.name().to_string()));
            }
        }
        Ok(Table { columns: columns.into_iter().map(Arc::new).collect(), rows })
    }

    pub(crate) fn from_shared(columns: Vec<Arc<Column>>) -> Result<Table, TableError> {
        let owned: Vec<Column> = columns.iter().map(|c| (**c).clone()).collect();
        // reuse validation, then keep the shared columns
        let _ = Table::new(owned)?;
        let rows = columns.first().map(|c| c.len()).unwrap_or(0);
        Ok(Table { columns, rows })
    }

    /// Empty table with zero columns and zero rows.
    pub fn empty() -> Table {
        Table { columns: Vec::new(), rows: 0 }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    /// Columns in declaration order.
    pub fn columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().map(|c| c.as_ref())
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub(crate) fn column_shared(&self, name: &str) -> Option<Arc<Column>> {
        self.columns.iter().find(|c| c.name() == name).cloned()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    /// Ordered (name, kind) pairs.
    pub fn schema(&self) -> Vec<(String, Kind)> {
        self.columns.iter().map(|c| (c.name().to_string(), c.kind())).collect()
    }

    /// New table with `extra` columns appended (names must stay unique).
    pub fn with_columns(&self, extra: Vec<Column>) -> Result<Table, TableError> {
        let mut cols = self.columns.clone();
        for c in extra {
            if c.len() != self.rows {
                return Err(TableError::RaggedColumns {
                    column: c.name().to_string(),
                    expected: self.rows,
                    got: c.len(),
                });
            }
            cols.push(Arc::new(c));
        }
        Table::from_shared(cols)
    }

    /// New table keeping only `names`, in the table's own column order.
    pub fn select_columns(&self, names: &[String]) -> Result<Table, TableError> {
        for n in names {
            if !self.has_column(n) {
                return Err(TableError::UnknownColumn(n.clone()));
            }
        }
        let cols = self
            .columns
            .iter()
            .filter(|c| names.iter().any(|n| n == c.name()))
            .cloned()
            .collect();
        Table::from_shared(cols)
    }

    /// New table without `names`.
    pub fn drop_columns(&self, names: &[String]) -> Result<Table, TableError> {
        for n in names {
            if !self.has_column(n) {
                return Err(TableError::UnknownColumn(n.clone()));
            }
        }
        let cols = self
            .columns
            .iter()
            .filter(|c| !names.iter().any(|n| n == c.name()))
            .cloned()
            .collect();
        Table::from_shared(cols)
    }

    /// New table with one column replaced (same name, same length).
    pub fn replace_column(&self, col: Column) -> Result<Table, TableError> {
        if !self.has_column(col.name()) {
            return Err(TableError::UnknownColumn(col.name().to_string()));
        }
        if col.len() != self.rows {
            return Err(TableError::RaggedColumns {
                column: col.name().to_string(),
                expected: self.rows,
                got: col.len(),
            });
        }
        let cols = self
            .columns
            .iter()
            .map(|c| if c.name() == col.name() { Arc::new(col.clone()) } else { c.clone() })
            .collect();
        Table::from_shared(cols)
    }

    /// New table containing the rows at `indices` (indices may repeat).
    pub fn take(&self, indices: &[usize]) -> Table {
        let cols = self.columns.iter().map(|c| Arc::new(c.take(indices))).collect();
        Table { columns: cols, rows: indices.len() }
    }

    /// Rows of `self` followed by rows of `other`; schemas must match exactly.
    pub fn concat_rows(&self, other: &Table) -> Result<Table, TableError> {
        if self.schema() != other.schema() {
            return Err(TableError::SchemaMismatch);
        }
        let cols = self
            .columns
            .iter()
            .zip(other.columns.iter())
            .map(|(a, b)| {
                let data = match (a.data(), b.data()) {
                    (ColumnData::Numeric(x), ColumnData::Numeric(y)) => {
                        ColumnData::Numeric(x.iter().chain(y.iter()).cloned().collect())
                    }
                    (ColumnData::String(x), ColumnData::String(y)) => {
                        ColumnData::String(x.iter().chain(y.iter()).cloned().collect())
                    }
                    (ColumnData::Boolean(x), ColumnData::Boolean(y)) => {
                        ColumnData::Boolean(x.iter().chain(y.iter()).cloned().collect())
                    }
                    _ => unreachable!("schemas checked above"),
                };
                Arc::new(Column::new(a.name(), data))
            })
            .collect();
        Ok(Table { columns: cols, rows: self.rows + other.rows })
    }

    /// Deterministic content fingerprint (names, kinds, cells).
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.rows.to_le_bytes());
        for c in &self.columns {
            h.update(c.name().as_bytes());
            h.update([0u8]);
            h.update(c.kind().to_string().as_bytes());
            match c.data() {
                ColumnData::Numeric(v) => {
                    for cell in v {
                        match cell {
                            None => h.update([0u8]),
                            Some(x) => {
                                h.update([1u8]);
                                h.update(x.to_le_bytes());
                            }
                        }
                    }
                }
                ColumnData::String(v) => {
                    for cell in v {
                        match cell {
                            None => h.update([0u8]),
                            Some(s) => {
                                h.update([1u8]);
                                h.update((s.len() as u64).to_le_bytes());
                                h.update(s.as_bytes());
                            }
                        }
                    }
                }
                ColumnData::Boolean(v) => {
                    for cell in v {
                        match cell {
                            None => h.update([0u8]),
                            Some(b) => h.update([1u8, *b as u8]),
                        }
                    }
                }
            }
        }
        crate::to_hex(&h.finalize())
    }

    /// True when both tables have identical schema and cell-exact contents.
    pub fn content_eq(&self, other: &Table) -> bool {
        if self.rows != other.rows || self.schema() != other.schema() {
            return false;
        }
        self.columns
            .iter()
            .zip(other.columns.iter())
            .all(|(a, b)| a.data() == b.data())
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {column:?} has {got} rows, expected {expected}")]
    RaggedColumns { column: String, expected: usize, got: usize },
    #[error("column {column:?} expects {expected} cells, got {got}")]
    CellKind { column: String, expected: Kind, got: String },
    #[error("schemas do not match")]
    SchemaMismatch,
    #[error("csv parse error at row {row}: {message}")]
    CsvParse { row: usize, message: String },
    #[error("join key {key:?} has duplicate right-side value {value}")]
    DuplicateJoinKey { key: String, value: String },
    #[error("join keys {left:?} ({left_kind}) and {right:?} ({right_kind}) have different kinds")]
    JoinKeyKind { left: String, left_kind: Kind, right: String, right_kind: Kind },
    #[error("column name {0:?} appears on both sides of the join")]
    JoinNameClash(String),
    #[error("aggregation {func} requires a numeric column, {column:?} is {kind}")]
    AggKind { func: String, column: String, kind: Kind },
}
