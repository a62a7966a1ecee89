//! Seeded table profiling and row sampling. Profiles feed synthesis prompts,
//! so their rendering must be deterministic for a given table and seed.

use serde::{Deserialize, Serialize};

use super::{ColumnData, Kind, KeyValue, Table};
use crate::rng::{rng_from_seed, sample_indices};

/// Summary statistics for a numeric column (over non-missing cells).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Per-column profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub kind: Kind,
    pub missing_fraction: f64,
    /// Distinct non-missing values.
    pub distinct_count: usize,
    pub numeric: Option<NumericSummary>,
    /// Rendered cells from the shared sampled rows (missing -> "<missing>").
    pub samples: Vec<String>,
}

/// Whole-table profile with up to five sampled rows shared across columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProfile {
    pub row_count: usize,
    pub column_count: usize,
    pub columns: Vec<ColumnProfile>,
}

impl TableProfile {
    /// Deterministic plain-text rendering for prompts and logs.
    pub fn render(&self) -> String {
        let mut out = format!("rows={} cols={}\n", self.row_count, self.column_count);
        for c in &self.columns {
            out.push_str(&format!(
                "- {} kind={} missing={:.4} distinct={}",
                c.name, c.kind, c.missing_fraction, c.distinct_count
            ));
            if let Some(n) = &c.numeric {
                out.push_str(&format!(
                    " min={} max={} mean={} std={}",
                    n.min, n.max, n.mean, n.std
                ));
            }
            if !c.samples.is_empty() {
                out.push_str(&format!(" samples=[{}]", c.samples.join(", ")));
            }
            out.push('\n');
        }
        out
    }
}

/// Profile a table. Sample values come from up to five rows drawn without
/// replacement under `seed`; the same rows are used for every column.
pub fn profile(t: &Table, seed: u64) -> TableProfile {
    let mut rng = rng_from_seed(seed);
    let sample = sample_indices(&mut rng, t.n_rows(), 5);
    let columns = t
        .columns()
        .map(|c| {
            let missing = c.missing_count();
            let missing_fraction = if c.len() == 0 {
                0.0
            } else {
                missing as f64 / c.len() as f64
            };
            let mut distinct: Vec<KeyValue> = Vec::new();
            for row in 0..c.len() {
                if let Some(k) = KeyValue::from_value(&c.get(row)) {
                    if !distinct.contains(&k) {
                        distinct.push(k);
                    }
                }
            }
            let numeric = match c.data() {
                ColumnData::Numeric(v) => {
                    let vals: Vec<f64> = v.iter().flatten().copied().collect();
                    if vals.is_empty() {
                        None
                    } else {
                        let n = vals.len() as f64;
                        let mean = vals.iter().sum::<f64>() / n;
                        let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                        Some(NumericSummary {
                            min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
                            max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                            mean,
                            std: var.sqrt(),
                        })
                    }
                }
                _ => None,
            };
            ColumnProfile {
                name: c.name().to_string(),
                kind: c.kind(),
                missing_fraction,
                distinct_count: distinct.len(),
                numeric,
                samples: sample.iter().map(|&r| c.get(r).render()).collect(),
            }
        })
        .collect();
    TableProfile { row_count: t.n_rows(), column_count: t.n_cols(), columns }
}

/// Uniform row sample without replacement; row order is preserved. When
/// `n >= row_count` the whole table is returned unchanged.
pub fn sample_rows(t: &Table, n: usize, seed: u64) -> Table {
    if n >= t.n_rows() {
        return t.clone();
    }
    let mut rng = rng_from_seed(seed);
    let idx = sample_indices(&mut rng, t.n_rows(), n);
    t.take(&idx)
}
