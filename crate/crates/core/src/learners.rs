//! Feature vectorization, two linear learners, and the metrics used to score
//! them. Everything here is deterministic: fits start from zeros, matrices
//! are dense row-major, and the ridge solver is exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Column, ColumnData, Kind, Table};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("column {0:?} missing from the table being vectorized")]
    MissingColumn(String),
    #[error("column {name:?} is {got}, expected {expected}")]
    ColumnKind { name: String, expected: Kind, got: Kind },
    #[error("label column {name:?} has a missing value at row {row}")]
    MissingLabel { name: String, row: usize },
    #[error("label column {name:?} unusable: {message}")]
    Label { name: String, message: String },
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("linear system is singular and cannot be solved")]
    Singular,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix, LearnerError> {
        let n = rows.len();
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for r in &rows {
            if r.len() != d {
                return Err(LearnerError::Shape(format!(
                    "row has {} entries, expected {}",
                    r.len(),
                    d
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: n, cols: d, data })
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// New matrix containing the listed rows, in order (indices may repeat).
    pub fn take_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (i, &r) in indices.iter().enumerate() {
            let src = self.row(r).to_vec();
            out.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(&src);
        }
        out
    }
}

/// How one input column maps into matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoder", rename_all = "snake_case")]
pub enum ColumnEncoder {
    /// One matrix column; missing cells take the training mean.
    Numeric { name: String, mean: f64 },
    /// One 0/1 matrix column; missing cells take the training mean.
    Boolean { name: String, mean: f64 },
    /// One matrix column per training category (sorted); a missing or unseen
    /// value encodes as all zeros.
    Categorical { name: String, categories: Vec<String> },
}

impl ColumnEncoder {
    fn name(&self) -> &str {
        match self {
            ColumnEncoder::Numeric { name, .. } => name,
            ColumnEncoder::Boolean { name, .. } => name,
            ColumnEncoder::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnEncoder::Numeric { .. } | ColumnEncoder::Boolean { .. } => 1,
            ColumnEncoder::Categorical { categories, .. } => categories.len(),
        }
    }

    fn expected_kind(&self) -> Kind {
        match self {
            ColumnEncoder::Numeric { .. } => Kind::Numeric,
            ColumnEncoder::Boolean { .. } => Kind::Boolean,
            ColumnEncoder::Categorical { .. } => Kind::String,
        }
    }
}

/// Fitted table-to-matrix mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerState {
    pub encoders: Vec<ColumnEncoder>,
}

impl VectorizerState {
    pub fn width(&self) -> usize {
        self.encoders.iter().map(|e| e.width()).sum()
    }

    /// One name per matrix column.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width());
        for e in &self.encoders {
            match e {
                ColumnEncoder::Numeric { name, .. } | ColumnEncoder::Boolean { name, .. } => {
                    out.push(name.clone())
                }
                ColumnEncoder::Categorical { name, categories } => {
                    out.extend(categories.iter().map(|c| format!("{name}={c}")))
                }
            }
        }
        out
    }
}

/// Learn the vectorization of `t`: numeric and boolean columns impute their
/// training mean, string columns one-hot over sorted training categories.
pub fn fit_vectorizer(t: &Table) -> VectorizerState {
    let mut encoders = Vec::with_capacity(t.n_cols());
    for col in t.columns() {
        let enc = match col.data() {
            ColumnData::Numeric(v) => {
                let present: Vec<f64> = v.iter().flatten().copied().collect();
                let mean = if present.is_empty() {
                    0.0
                } else {
                    present.iter().sum::<f64>() / present.len() as f64
                };
                ColumnEncoder::Numeric { name: col.name().to_string(), mean }
            }
            ColumnData::Boolean(v) => {
                let present: Vec<f64> =
                    v.iter().flatten().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                let mean = if present.is_empty() {
                    0.0
                } else {
                    present.iter().sum::<f64>() / present.len() as f64
                };
                ColumnEncoder::Boolean { name: col.name().to_string(), mean }
            }
            ColumnData::String(v) => {
                let mut categories: Vec<String> =
                    v.iter().flatten().cloned().collect::<std::collections::BTreeSet<_>>()
                        .into_iter()
                        .collect();
                categories.sort();
                ColumnEncoder::Categorical { name: col.name().to_string(), categories }
            }
        };
        encoders.push(enc);
    }
    VectorizerState { encoders }
}

/// Encode `t` with a fitted state. Every encoded column must be present with
/// its training kind; extra columns are ignored.
pub fn transform(state: &VectorizerState, t: &Table) -> Result<Matrix, LearnerError> {
    let mut out = Matrix::zeros(t.n_rows(), state.width());
    let mut base = 0usize;
    for enc in &state.encoders {
        let col = t
            .column(enc.name())
            .ok_or_else(|| LearnerError::MissingColumn(enc.name().to_string()))?;
        if col.kind() != enc.expected_kind() {
            return Err(LearnerError::ColumnKind {
                name: enc.name().to_string(),
                expected: enc.expected_kind(),
                got: col.kind(),
            });
        }
        match (enc, col.data()) {
            (ColumnEncoder::Numeric { mean, .. }, ColumnData::Numeric(v)) => {
                for (r, cell) in v.iter().enumerate() {
                    out.set(r, base, cell.unwrap_or(*mean));
                }
            }
            (ColumnEncoder::Boolean { mean, .. }, ColumnData::Boolean(v)) => {
                for (r, cell) in v.iter().enumerate() {
                    out.set(r, base, cell.map(|b| if b { 1.0 } else { 0.0 }).unwrap_or(*mean));
                }
            }
            (ColumnEncoder::Categorical { categories, .. }, ColumnData::String(v)) => {
                for (r, cell) in v.iter().enumerate() {
                    if let Some(s) = cell {
                        if let Ok(i) = categories.binary_search(s) {
                            out.set(r, base + i, 1.0);
                        }
                    }
                }
            }
            _ => unreachable!("kind checked above"),
        }
        base += enc.width();
    }
    Ok(out)
}

/// 0/1 labels for classification. Booleans map false/true to 0/1; numerics
/// must already be 0 or 1; strings must take exactly two distinct values,
/// mapped to 0/1 in sorted order.
pub fn classification_labels(col: &Column) -> Result<Vec<f64>, LearnerError> {
    let name = col.name().to_string();
    match col.data() {
        ColumnData::Boolean(v) => v
            .iter()
            .enumerate()
            .map(|(row, cell)| {
                cell.map(|b| if b { 1.0 } else { 0.0 })
                    .ok_or(LearnerError::MissingLabel { name: name.clone(), row })
            })
            .collect(),
        ColumnData::Numeric(v) => v
            .iter()
            .enumerate()
            .map(|(row, cell)| match cell {
                Some(x) if *x == 0.0 || *x == 1.0 => Ok(*x),
                Some(x) => Err(LearnerError::Label {
                    name: name.clone(),
                    message: format!("numeric label {x} at row {row} is not 0 or 1"),
                }),
                None => Err(LearnerError::MissingLabel { name: name.clone(), row }),
            })
            .collect(),
        ColumnData::String(v) => {
            let mut distinct: Vec<&String> = v
                .iter()
                .flatten()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            distinct.sort();
            if distinct.len() != 2 {
                return Err(LearnerError::Label {
                    name,
                    message: format!(
                        "string labels need exactly 2 distinct values, found {}",
                        distinct.len()
                    ),
                });
            }
            v.iter()
                .enumerate()
                .map(|(row, cell)| match cell {
                    Some(s) if s == distinct[0] => Ok(0.0),
                    Some(_) => Ok(1.0),
                    None => Err(LearnerError::MissingLabel { name: name.clone(), row }),
                })
                .collect()
        }
    }
}

/// Finite numeric labels for regression.
pub fn regression_labels(col: &Column) -> Result<Vec<f64>, LearnerError> {
    let name = col.name().to_string();
    match col.data() {
        ColumnData::Numeric(v) => v
            .iter()
            .enumerate()
            .map(|(row, cell)| {
                cell.ok_or(LearnerError::MissingLabel { name: name.clone(), row })
            })
            .collect(),
        _ => Err(LearnerError::Label {
            name,
            message: format!("regression needs a numeric label, found {}", col.kind()),
        }),
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss with an L2 penalty on the weights (not the bias), and
/// its gradient: `loss = mean(log(1+exp(-z)) + z*(1-y)) + l2/2*|w|^2` with
/// `z = w.x + b`, written in the numerically stable form.
pub fn logistic_loss_grad(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    b: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.n_rows().max(1) as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; x.n_cols()];
    let mut grad_b = 0.0;
    for r in 0..x.n_rows() {
        let row = x.row(r);
        let z: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        // max(z,0) - z*y + ln(1 + exp(-|z|))
        loss += z.max(0.0) - z * y[r] + (-z.abs()).exp().ln_1p();
        let d = sigmoid(z) - y[r];
        for (g, a) in grad_w.iter_mut().zip(row) {
            *g += d * a;
        }
        grad_b += d;
    }
    loss /= n;
    grad_b /= n;
    for (g, wj) in grad_w.iter_mut().zip(w) {
        *g = *g / n + l2 * wj;
    }
    loss += 0.5 * l2 * w.iter().map(|wj| wj * wj).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Logistic regression fit by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticParams {
    fn default() -> LogisticParams {
        LogisticParams { l2: 1e-3, learning_rate: 0.5, iterations: 500 }
    }
}

/// Weights in raw feature space: `p = sigmoid(w.x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|r| {
                let z: f64 =
                    x.row(r).iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias;
                sigmoid(z)
            })
            .collect()
    }
}

/// Fit from zeros. Features are standardized internally (zero mean, unit
/// variance; constant columns stay untouched) so the step size is scale-free;
/// the returned weights are folded back into raw feature space. The L2
/// penalty applies to the standardized weights.
pub fn fit_logistic(x: &Matrix, y: &[f64], params: &LogisticParams) -> Result<LogisticModel, LearnerError> {
    if x.n_rows() != y.len() {
        return Err(LearnerError::Shape(format!(
            "{} rows of features but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let n = x.n_rows();
    let d = x.n_cols();
    let mut mean = vec![0.0; d];
    let mut std = vec![1.0; d];
    if n > 0 {
        for c in 0..d {
            let m = (0..n).map(|r| x.get(r, c)).sum::<f64>() / n as f64;
            let var = (0..n).map(|r| (x.get(r, c) - m).powi(2)).sum::<f64>() / n as f64;
            mean[c] = m;
            std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }
    let mut xs = Matrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            xs.set(r, c, (x.get(r, c) - mean[c]) / std[c]);
        }
    }
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..params.iterations {
        let (_, gw, gb) = logistic_loss_grad(&xs, y, &w, b, params.l2);
        for (wj, gj) in w.iter_mut().zip(&gw) {
            *wj -= params.learning_rate * gj;
        }
        b -= params.learning_rate * gb;
    }
    // fold standardization into raw-space weights
    let mut weights = vec![0.0; d];
    let mut bias = b;
    for c in 0..d {
        weights[c] = w[c] / std[c];
        bias -= w[c] * mean[c] / std[c];
    }
    Ok(LogisticModel { weights, bias })
}

/// Ridge regression solved in closed form; the intercept is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    pub l2: f64,
}

impl Default for RidgeParams {
    fn default() -> RidgeParams {
        RidgeParams { l2: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|r| {
                x.row(r).iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias
            })
            .collect()
    }
}

/// Solve the normal equations `(A'A + l2*P) beta = A'y` where `A` is `x` with
/// a trailing all-ones column and `P` penalizes every coefficient except the
/// intercept.
pub fn fit_ridge(x: &Matrix, y: &[f64], params: &RidgeParams) -> Result<RidgeModel, LearnerError> {
    if x.n_rows() != y.len() {
        return Err(LearnerError::Shape(format!(
            "{} rows of features but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let n = x.n_rows();
    let d = x.n_cols() + 1; // + intercept
    let aug = |r: usize, c: usize| -> f64 {
        if c < x.n_cols() {
            x.get(r, c)
        } else {
            1.0
        }
    };
    // gram = A'A + l2*P, rhs = A'y
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for r in 0..n {
        for i in 0..d {
            let ai = aug(r, i);
            rhs[i] += ai * y[r];
            for j in i..d {
                gram[i][j] += ai * aug(r, j);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[i][j] = gram[j][i];
        }
    }
    for (i, row) in gram.iter_mut().enumerate().take(d - 1) {
        row[i] += params.l2;
    }
    let beta = solve_linear(gram, rhs)?;
    let (weights, bias) = beta.split_at(d - 1);
    Ok(RidgeModel { weights: weights.to_vec(), bias: bias[0] })
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, LearnerError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-12 {
            return Err(LearnerError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| a[col][k] * x[k]).sum();
        x[col] = (b[col] - s) / a[col][col];
    }
    Ok(x)
}

/// Which learner a pipeline trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum LearnerConfig {
    Logistic(LogisticParams),
    Ridge(RidgeParams),
}

impl LearnerConfig {
    pub fn is_classifier(&self) -> bool {
        matches!(self, LearnerConfig::Logistic(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerConfig::Logistic(_) => "logistic",
            LearnerConfig::Ridge(_) => "ridge",
        }
    }

    pub fn fit(&self, x: &Matrix, y: &[f64]) -> Result<FittedModel, LearnerError> {
        Ok(match self {
            LearnerConfig::Logistic(p) => FittedModel::Logistic(fit_logistic(x, y, p)?),
            LearnerConfig::Ridge(p) => FittedModel::Ridge(fit_ridge(x, y, p)?),
        })
    }
}

/// A trained model; classification predicts probabilities, regression values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedModel {
    Logistic(LogisticModel),
    Ridge(RidgeModel),
}

impl FittedModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        match self {
            FittedModel::Logistic(m) => m.predict_proba(x),
            FittedModel::Ridge(m) => m.predict(x),
        }
    }
}

/// Scoring metric. Accuracy thresholds probabilities at 0.5; ranking quality
/// uses the rank-sum form with midranks for ties and falls back to accuracy
/// when only one class is present; rmse is root mean squared error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    Auroc,
    Rmse,
}

impl MetricKind {
    pub fn parse(s: &str) -> Option<MetricKind> {
        Some(match s {
            "accuracy" => MetricKind::Accuracy,
            "auroc" => MetricKind::Auroc,
            "rmse" => MetricKind::Rmse,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Auroc => "auroc",
            MetricKind::Rmse => "rmse",
        }
    }

    /// Score predictions against labels.
    pub fn compute(&self, preds: &[f64], labels: &[f64]) -> f64 {
        match self {
            MetricKind::Accuracy => accuracy(preds, labels),
            MetricKind::Auroc => auroc(preds, labels).unwrap_or_else(|| accuracy(preds, labels)),
            MetricKind::Rmse => rmse(preds, labels),
        }
    }

    /// Higher-is-better utility for a score of this metric.
    pub fn utility(&self, score: f64) -> f64 {
        match self {
            MetricKind::Rmse => -score,
            _ => score,
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fraction of predictions on the correct side of 0.5.
pub fn accuracy(preds: &[f64], labels: &[f64]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let hits = preds
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.5) == (**y >= 0.5))
        .count();
    hits as f64 / preds.len() as f64
}

/// Area under the ROC curve via the rank-sum identity with midranks for tied
/// scores. `None` when only one class is present.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y >= 0.5).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).expect("finite scores"));
    // midranks: tied scores share the average of their 1-based positions
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // positions are 1-based
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 =
        (0..n).filter(|&i| labels[i] >= 0.5).map(|i| ranks[i]).sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Root mean squared error.
pub fn rmse(preds: &[f64], labels: &[f64]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let mse =
        preds.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / preds.len() as f64;
    mse.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Value;

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

    #[test]
    fn vectorizer_imputes_training_mean() {
        let t = Table::new(vec![num_col("a", &[Some(1.0), None, Some(3.0)])]).unwrap();
        let state = fit_vectorizer(&t);
        let x = transform(&state, &t).unwrap();
        assert_eq!(x.get(0, 0), 1.0);
        assert_eq!(x.get(1, 0), 2.0); // the mean of {1, 3}
        assert_eq!(x.get(2, 0), 3.0);
    }

    #[test]
    fn one_hot_is_sorted_and_unknowns_are_zero() {
        let train =
            Table::new(vec![str_col("c", &[Some("red"), Some("blue"), Some("red")])]).unwrap();
        let state = fit_vectorizer(&train);
        assert_eq!(state.feature_names(), vec!["c=blue", "c=red"]);
        let test =
            Table::new(vec![str_col("c", &[Some("red"), Some("green"), None])]).unwrap();
        let x = transform(&state, &test).unwrap();
        assert_eq!((x.get(0, 0), x.get(0, 1)), (0.0, 1.0));
        assert_eq!((x.get(1, 0), x.get(1, 1)), (0.0, 0.0)); // unseen category
        assert_eq!((x.get(2, 0), x.get(2, 1)), (0.0, 0.0)); // missing
    }

    #[test]
    fn transform_rejects_missing_and_retyped_columns() {
        let t = Table::new(vec![num_col("a", &[Some(1.0)])]).unwrap();
        let state = fit_vectorizer(&t);
        let gone = Table::new(vec![num_col("b", &[Some(1.0)])]).unwrap();
        assert!(matches!(transform(&state, &gone), Err(LearnerError::MissingColumn(_))));
        let retyped = Table::new(vec![str_col("a", &[Some("x")])]).unwrap();
        assert!(matches!(transform(&state, &retyped), Err(LearnerError::ColumnKind { .. })));
    }

    #[test]
    fn logistic_separates_two_blobs() {
        // deterministic blobs around (0,0) and (4,4)
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let dx = (i % 5) as f64 * 0.1;
            let dy = (i % 3) as f64 * 0.1;
            rows.push(vec![dx, dy]);
            labels.push(0.0);
            rows.push(vec![4.0 + dx, 4.0 + dy]);
            labels.push(1.0);
        }
        let x = Matrix::from_rows(rows).unwrap();
        let m = fit_logistic(&x, &labels, &LogisticParams::default()).unwrap();
        let preds = m.predict_proba(&x);
        assert_eq!(accuracy(&preds, &labels), 1.0);
        // confident on both sides
        assert!(preds.iter().zip(&labels).all(|(p, y)| (p - y).abs() < 0.2));
    }

    #[test]
    fn logistic_standardization_folds_back_to_raw_space() {
        // same data at two scales must give the same predictions
        let rows_raw = vec![vec![1000.0], vec![2000.0], vec![3000.0], vec![4000.0]];
        let labels = vec![0.0, 0.0, 1.0, 1.0];
        let x = Matrix::from_rows(rows_raw).unwrap();
        let m = fit_logistic(&x, &labels, &LogisticParams::default()).unwrap();
        let preds = m.predict_proba(&x);
        assert!(preds[0] < 0.5 && preds[3] > 0.5, "{preds:?}");
    }

    #[test]
    fn logistic_survives_single_class() {
        let x = Matrix::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = vec![1.0, 1.0, 1.0];
        let m = fit_logistic(&x, &y, &LogisticParams::default()).unwrap();
        let preds = m.predict_proba(&x);
        assert!(preds.iter().all(|p| p.is_finite() && *p > 0.5), "{preds:?}");
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let x = Matrix::from_rows(vec![
            vec![0.5, -1.0],
            vec![1.5, 2.0],
            vec![-0.7, 0.3],
            vec![2.2, -0.4],
        ])
        .unwrap();
        let y = vec![0.0, 1.0, 0.0, 1.0];
        let w = vec![0.3, -0.2];
        let b = 0.1;
        let l2 = 0.01;
        let (_, gw, gb) = logistic_loss_grad(&x, &y, &w, b, l2);
        let h = 1e-6;
        for j in 0..w.len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let (lp, _, _) = logistic_loss_grad(&x, &y, &wp, b, l2);
            let (lm, _, _) = logistic_loss_grad(&x, &y, &wm, b, l2);
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - gw[j]).abs() <= 1e-5 * fd.abs().max(1.0), "w[{j}]: {fd} vs {}", gw[j]);
        }
        let (lp, _, _) = logistic_loss_grad(&x, &y, &w, b + h, l2);
        let (lm, _, _) = logistic_loss_grad(&x, &y, &w, b - h, l2);
        let fd = (lp - lm) / (2.0 * h);
        assert!((fd - gb).abs() <= 1e-5 * fd.abs().max(1.0));
    }

    #[test]
    fn ridge_recovers_a_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
        let x = Matrix::from_rows(rows).unwrap();
        let m = fit_ridge(&x, &y, &RidgeParams::default()).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-6, "slope {}", m.weights[0]);
        assert!(m.bias.abs() < 1e-6, "intercept {}", m.bias);
    }

    #[test]
    fn ridge_intercept_is_unpenalized() {
        // constant target: intercept should absorb it exactly even with heavy l2
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y = vec![5.0; 8];
        let x = Matrix::from_rows(rows).unwrap();
        let m = fit_ridge(&x, &y, &RidgeParams { l2: 100.0 }).unwrap();
        assert!(m.weights[0].abs() < 1e-9);
        assert!((m.bias - 5.0).abs() < 1e-9);
    }

    #[test]
    fn auroc_handles_ties_and_single_class() {
        // perfect ranking
        assert_eq!(auroc(&[0.1, 0.4, 0.8, 0.9], &[0.0, 0.0, 1.0, 1.0]), Some(1.0));
        // reversed ranking
        assert_eq!(auroc(&[0.9, 0.8, 0.2, 0.1], &[0.0, 0.0, 1.0, 1.0]), Some(0.0));
        // all scores equal: midranks give exactly one half
        assert_eq!(auroc(&[0.5, 0.5, 0.5, 0.5], &[0.0, 1.0, 0.0, 1.0]), Some(0.5));
        // one class only
        assert_eq!(auroc(&[0.1, 0.9], &[1.0, 1.0]), None);
        // metric-level fallback substitutes accuracy
        assert_eq!(MetricKind::Auroc.compute(&[0.9, 0.8], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn rmse_and_utility_direction() {
        let v = rmse(&[1.0, 2.0], &[0.0, 4.0]);
        assert!((v - (2.5f64).sqrt()).abs() < 1e-12);
        assert_eq!(MetricKind::Rmse.utility(2.0), -2.0);
        assert_eq!(MetricKind::Accuracy.utility(0.9), 0.9);
    }

    #[test]
    fn matrix_take_rows() {
        let x = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let sub = x.take_rows(&[2, 0]);
        assert_eq!(sub.row(0), &[5.0, 6.0]);
        assert_eq!(sub.row(1), &[1.0, 2.0]);
    }

    #[test]
    fn singular_system_is_an_error() {
        // two identical columns, zero penalty
        let x = Matrix::from_rows(vec![vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let y = vec![1.0, 2.0];
        assert!(matches!(
            fit_ridge(&x, &y, &RidgeParams { l2: 0.0 }),
            Err(LearnerError::Singular)
        ));
    }
}
