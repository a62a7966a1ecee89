//! CSV ingestion with column-kind inference.
//!
//! Inference per column over non-empty cells: all parse as f64 -> numeric;
//! all are exactly "true"/"false" -> boolean; otherwise string. Empty cells
//! are missing. An explicit kind hint overrides inference for named columns.

use std::collections::BTreeMap;
use std::path::Path;

use super::{Column, ColumnData, Kind, Table, TableError};

/// Read a CSV file (RFC 4180: quoting, embedded commas/newlines) into a table.
pub fn read_csv(path: &Path, hint: Option<&BTreeMap<String, Kind>>) -> Result<Table, TableError> {
    let bytes = std::fs::read(path)
        .map_err(|e| TableError::CsvParse { row: 0, message: format!("{}: {e}", path.display()) })?;
    parse_csv(&bytes, hint)
}

/// Parse CSV bytes into a table. First record is the header.
pub fn parse_csv(bytes: &[u8], hint: Option<&BTreeMap<String, Kind>>) -> Result<Table, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| TableError::CsvParse { row: 0, message: e.to_string() })?
        .iter()
        .map(|h| h.to_string())
        .collect();
    {
        let mut seen = BTreeMap::new();
        for h in &headers {
            if seen.insert(h.clone(), ()).is_some() {
                return Err(TableError::DuplicateColumn(h.clone()));
            }
        }
    }

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TableError::CsvParse { row: i + 1, message: e.to_string() })?;
        if record.len() != headers.len() {
            return Err(TableError::CsvParse {
                row: i + 1,
                message: format!("expected {} fields, got {}", headers.len(), record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            cells[c].push(if field.is_empty() { None } else { Some(field.to_string()) });
        }
    }

    let mut columns = Vec::with_capacity(headers.len());
    for (name, raw) in headers.into_iter().zip(cells) {
        let kind = match hint.and_then(|h| h.get(&name)) {
            Some(&k) => k,
            None => infer_kind(&raw),
        };
        columns.push(coerce_column(name, kind, raw)?);
    }
    Table::new(columns)
}

fn infer_kind(raw: &[Option<String>]) -> Kind {
    let mut any = false;
    let mut all_numeric = true;
    let mut all_boolean = true;
    for cell in raw.iter().flatten() {
        any = true;
        if parse_numeric(cell).is_none() {
            all_numeric = false;
        }
        if cell != "true" && cell != "false" {
            all_boolean = false;
        }
        if !all_numeric && !all_boolean {
            return Kind::String;
        }
    }
    if !any {
        // no observed values: default to string
        return Kind::String;
    }
    if all_numeric {
        Kind::Numeric
    } else if all_boolean {
        Kind::Boolean
    } else {
        Kind::String
    }
}

fn parse_numeric(s: &str) -> Option<f64> {
    let x: f64 = s.trim().parse().ok()?;
    x.is_finite().then_some(x)
}

fn coerce_column(name: String, kind: Kind, raw: Vec<Option<String>>) -> Result<Column, TableError> {
    let data = match kind {
        Kind::Numeric => {
            let mut v = Vec::with_capacity(raw.len());
            for (i, cell) in raw.into_iter().enumerate() {
                v.push(match cell {
                    None => None,
                    Some(s) => Some(parse_numeric(&s).ok_or_else(|| TableError::CsvParse {
                        row: i + 1,
                        message: format!("column {name:?}: {s:?} is not numeric"),
                    })?),
                });
            }
            ColumnData::Numeric(v)
        }
        Kind::Boolean => {
            let mut v = Vec::with_capacity(raw.len());
            for (i, cell) in raw.into_iter().enumerate() {
                v.push(match cell.as_deref() {
                    None => None,
                    Some("true") => Some(true),
                    Some("false") => Some(false),
                    Some(s) => {
                        return Err(TableError::CsvParse {
                            row: i + 1,
                            message: format!("column {name:?}: {s:?} is not boolean"),
                        })
                    }
                });
            }
            ColumnData::Boolean(v)
        }
        Kind::String => ColumnData::String(raw),
    };
    Ok(Column::new(name, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Value;

    #[test]
    fn infers_numeric_with_missing() {
        let t = parse_csv(b"a,b\n1,x\n,y\n", None).unwrap();
        assert_eq!(t.n_rows(), 2);
        let a = t.column("a").unwrap();
        assert_eq!(a.kind(), Kind::Numeric);
        assert_eq!(a.get(0), Value::Num(1.0));
        assert_eq!(a.get(1), Value::Missing);
        assert_eq!(t.column("b").unwrap().kind(), Kind::String);
    }

    #[test]
    fn mixed_column_falls_back_to_string() {
        let t = parse_csv(b"a\n1\n2\nthree\n", None).unwrap();
        let a = t.column("a").unwrap();
        assert_eq!(a.kind(), Kind::String);
        assert_eq!(a.get(0), Value::Str("1".to_string()));
        assert_eq!(a.get(2), Value::Str("three".to_string()));
    }

    #[test]
    fn header_only_file_yields_zero_rows() {
        let t = parse_csv(b"a,b\n", None).unwrap();
        assert_eq!(t.n_rows(), 0);
        assert_eq!(t.n_cols(), 2);
    }

    #[test]
    fn boolean_inference() {
        // a blank line would be skipped as a record; an empty field is missing
        let t = parse_csv(b"flag,x\ntrue,1\nfalse,2\n,3\n", None).unwrap();
        let c = t.column("flag").unwrap();
        assert_eq!(c.kind(), Kind::Boolean);
        assert_eq!(c.get(0), Value::Bool(true));
        assert_eq!(c.get(2), Value::Missing);
    }

    #[test]
    fn quoted_fields_with_commas_and_newlines() {
        let t = parse_csv(b"a,b\n\"x,y\",\"line1\nline2\"\n", None).unwrap();
        assert_eq!(t.column("a").unwrap().get(0), Value::Str("x,y".to_string()));
        assert_eq!(t.column("b").unwrap().get(0), Value::Str("line1\nline2".to_string()));
    }

    #[test]
    fn ragged_row_is_an_error_with_row_index() {
        let err = parse_csv(b"a,b\n1,2\n3\n", None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn duplicate_header_rejected() {
        let err = parse_csv(b"a,a\n1,2\n", None).unwrap_err();
        assert!(matches!(err, TableError::DuplicateColumn(_)));
    }

    #[test]
    fn hint_overrides_inference() {
        let mut hint = BTreeMap::new();
        hint.insert("a".to_string(), Kind::String);
        let t = parse_csv(b"a\n1\n2\n", Some(&hint)).unwrap();
        assert_eq!(t.column("a").unwrap().kind(), Kind::String);
    }

    #[test]
    fn hint_coercion_failure_names_row() {
        let mut hint = BTreeMap::new();
        hint.insert("a".to_string(), Kind::Numeric);
        let err = parse_csv(b"a\n1\nxyz\n", Some(&hint)).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }
}
