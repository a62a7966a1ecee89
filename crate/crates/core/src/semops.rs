//! Semantic data operators: declarative table operations whose
//! implementations are synthesized programs. Each operator kind states a
//! contract; this module assembles the synthesis request, validates candidate
//! programs on a data sample against that contract (retrying with feedback),
//! and applies accepted programs to full tables.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{
    self, evaluate, filter_mask, parse, typecheck, AugmentPlan, Body, DslError, EvalLimits,
    Program, ProgramKind, SchemaSet,
};
use crate::error::ErrorClass;
use crate::rng::{mix_seed, rng_from_seed, sample_indices, uniform_below};
use crate::synth::{
    ColumnInfo, ParamDecl, RequestExtras, SynthError, SynthesisRequest, Synthesizer,
};
use crate::table::{profile, sample_rows, KeyValue, Table, Value};

/// Rows drawn from the input for validating most candidates.
const VALIDATION_SAMPLE_ROWS: usize = 100;
/// Rows drawn when validating extraction candidates.
const EXTRACT_SAMPLE_ROWS: usize = 50;
/// Fraction of sampled join keys the filtered auxiliary table keeps, so
/// validation always exercises some unmatched rows.
const JOIN_KEY_RETENTION: f64 = 0.9;
/// Default ceiling on new columns when an operator declares no `k`.
const DEFAULT_OUTPUT_BUDGET: usize = 3;
/// Default retry budget: one initial attempt plus this many retries.
pub const DEFAULT_MAX_RETRIES: usize = 5;

#[derive(Debug, Error)]
pub enum SemOpError {
    #[error("operator {name} ({kind}): {message}")]
    Spec { name: String, kind: OpKind, message: String },
    #[error("synthesis for node {node} failed after {attempts} attempts: {}", report.summary())]
    Exhausted { node: String, attempts: usize, report: ValidationReport },
    #[error("node {node}: {source}")]
    Apply { node: String, source: DslError },
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl SemOpError {
    pub fn class(&self) -> ErrorClass {
        match self {
            SemOpError::Spec { .. } => ErrorClass::Config,
            SemOpError::Synth(e) => e.class(),
            SemOpError::Exhausted { .. } | SemOpError::Apply { .. } => ErrorClass::Internal,
        }
    }
}

/// The nine operator kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// derive up to k feature columns from existing ones
    GenFeatures,
    /// derive up to k aggregated feature columns from a joined table
    AggFeatures,
    /// extract declared columns from text by rules
    ExtractFeatures,
    /// append k synthetic rows at fit time
    Augment,
    /// fill the missing cells of one column
    Fillna,
    /// rewrite one column in place
    Clean,
    /// restructure one column into derived columns
    Refine,
    /// reduce to a column subset
    Select,
    /// propose hyperparameter values inside declared ranges
    Choose,
}

impl OpKind {
    pub const ALL: [OpKind; 9] = [
        OpKind::GenFeatures,
        OpKind::AggFeatures,
        OpKind::ExtractFeatures,
        OpKind::Augment,
        OpKind::Fillna,
        OpKind::Clean,
        OpKind::Refine,
        OpKind::Select,
        OpKind::Choose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::GenFeatures => "gen_features",
            OpKind::AggFeatures => "agg_features",
            OpKind::ExtractFeatures => "extract_features",
            OpKind::Augment => "augment",
            OpKind::Fillna => "fillna",
            OpKind::Clean => "clean",
            OpKind::Refine => "refine",
            OpKind::Select => "select",
            OpKind::Choose => "choose",
        }
    }

    pub fn parse(s: &str) -> Option<OpKind> {
        OpKind::ALL.iter().copied().find(|k| k.name() == s)
    }

    /// Program kind this operator's candidates must parse as.
    pub fn program_kind(self) -> ProgramKind {
        match self {
            OpKind::GenFeatures => ProgramKind::FeatureMap,
            OpKind::AggFeatures => ProgramKind::AggJoin,
            OpKind::ExtractFeatures => ProgramKind::ExtractRules,
            OpKind::Augment => ProgramKind::Augment,
            OpKind::Fillna => ProgramKind::Impute,
            OpKind::Clean => ProgramKind::Clean,
            OpKind::Refine => ProgramKind::Refine,
            OpKind::Select => ProgramKind::Select,
            OpKind::Choose => ProgramKind::Choose,
        }
    }
}

impl std::fmt::Display for OpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One semantic operator as declared in a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OpKind,
    /// node id, used in errors and synthesis requests
    pub name: String,
    /// natural-language instruction; may be empty
    #[serde(default)]
    pub instruction: String,
    /// output budget: new columns (or rows for augment); defaults to 3
    #[serde(default)]
    pub k: Option<usize>,
    /// target column for fillna/clean/refine
    #[serde(default)]
    pub column: Option<String>,
    /// (left, right) join keys for agg_features
    #[serde(default)]
    pub join_keys: Option<(String, String)>,
    /// declared output columns (name, description) for extract_features
    #[serde(default)]
    pub outputs: Vec<(String, String)>,
    /// declared parameter ranges for choose
    #[serde(default)]
    pub ranges: Vec<ParamDecl>,
    /// columns a candidate must keep (target lineage and the like)
    #[serde(default)]
    pub protected: Vec<String>,
}

impl OperatorSpec {
    /// Check the kind-required fields are present and sane.
    pub fn validate(&self) -> Result<(), SemOpError> {
        let fail = |message: String| {
            Err(SemOpError::Spec { name: self.name.clone(), kind: self.kind, message })
        };
        match self.kind {
            OpKind::AggFeatures if self.join_keys.is_none() => {
                return fail("requires join keys".to_string())
            }
            OpKind::Fillna | OpKind::Clean | OpKind::Refine if self.column.is_none() => {
                return fail("requires a target column".to_string())
            }
            OpKind::ExtractFeatures if self.outputs.is_empty() => {
                return fail("requires declared output columns".to_string())
            }
            OpKind::Choose if self.ranges.is_empty() => {
                return fail("requires declared parameter ranges".to_string())
            }
            OpKind::Augment if self.k.is_none() => {
                return fail("requires k, the number of rows to add".to_string())
            }
            _ => {}
        }
        if self.k == Some(0) {
            return fail("k must be at least 1".to_string());
        }
        for p in &self.ranges {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo <= p.hi) {
                return fail(format!("parameter {} has an empty range", p.name));
            }
        }
        Ok(())
    }

    /// Most new columns (or rows, or values) a candidate may produce.
    pub fn effective_budget(&self) -> usize {
        match self.kind {
            OpKind::ExtractFeatures => self.outputs.len(),
            OpKind::Choose => self.ranges.len().max(1),
            _ => self.k.unwrap_or(DEFAULT_OUTPUT_BUDGET),
        }
    }
}

/// One contract check outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything validation learned about one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// true exactly when every check passed
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    /// synthesis attempts consumed up to and including this candidate
    pub attempts_used: usize,
}

impl ValidationReport {
    /// First failure, or a pass note — for error messages.
    pub fn summary(&self) -> String {
        match self.checks.iter().find(|c| !c.passed) {
            Some(c) => format!("check {} failed: {}", c.name, c.detail),
            None => "all checks passed".to_string(),
        }
    }

    fn from_checks(checks: Vec<CheckResult>) -> ValidationReport {
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { passed, checks, attempts_used: 1 }
    }

    fn single_failure(name: &str, detail: &str, attempts_used: usize) -> ValidationReport {
        ValidationReport {
            passed: false,
            checks: vec![CheckResult {
                name: name.to_string(),
                passed: false,
                detail: detail.to_string(),
            }],
            attempts_used,
        }
    }
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.to_string(), passed, detail }
}

fn schema_info(t: &Table) -> Vec<ColumnInfo> {
    let n = t.n_rows();
    t.columns()
        .map(|c| ColumnInfo {
            name: c.name().to_string(),
            kind: c.kind(),
            missing_fraction: if n == 0 { 0.0 } else { c.missing_count() as f64 / n as f64 },
        })
        .collect()
}

/// Bundle everything a backend needs to write a program for `spec`.
pub fn assemble_request(
    spec: &OperatorSpec,
    context: &str,
    main: &Table,
    aux: Option<&Table>,
    extras: RequestExtras,
    temperature: f64,
    seed: u64,
) -> SynthesisRequest {
    SynthesisRequest {
        kind: spec.kind.program_kind(),
        node: spec.name.clone(),
        context: context.to_string(),
        instruction: spec.instruction.clone(),
        main_schema: schema_info(main),
        main_profile: profile(main, seed).render(),
        aux_schema: aux.map(schema_info),
        aux_profile: aux.map(|t| profile(t, seed).render()),
        join_keys: spec.join_keys.clone(),
        target_column: spec.column.clone(),
        outputs: spec.outputs.clone(),
        output_budget: spec.effective_budget(),
        protected: spec.protected.clone(),
        parameters: spec.ranges.clone(),
        feedback: Vec::new(),
        extras,
        temperature,
        seed,
    }
}

/// Run `candidate` on a seeded sample of the input and check the operator's
/// contract. Failures are reported, never thrown.
pub fn validate_candidate(
    spec: &OperatorSpec,
    candidate: &Program,
    main: &Table,
    aux: Option<&Table>,
    seed: u64,
) -> ValidationReport {
    if spec.kind == OpKind::Choose {
        return ValidationReport::from_checks(check_choice(spec, candidate));
    }
    let sample_n = if spec.kind == OpKind::ExtractFeatures {
        EXTRACT_SAMPLE_ROWS
    } else {
        VALIDATION_SAMPLE_ROWS
    };
    let sample = sample_rows(main, sample_n, mix_seed(&[seed, 0x5A]));
    let aux_sample = match (spec.kind, aux, &spec.join_keys) {
        (OpKind::AggFeatures, Some(aux), Some((left, right))) => {
            match filter_aux(&sample, aux, left, right, seed) {
                Ok(t) => Some(t),
                Err(detail) => {
                    return ValidationReport::from_checks(vec![check(
                        "program_runs",
                        false,
                        detail,
                    )])
                }
            }
        }
        _ => aux.cloned(),
    };
    let limits = EvalLimits::default();
    let out = match spec.kind {
        OpKind::Augment => match &candidate.body {
            Body::Augment(plan) => augment_rows(&sample, plan, seed, &limits),
            _ => unreachable!("kind checked at parse"),
        },
        _ => evaluate(candidate, &sample, aux_sample.as_ref(), &limits),
    };
    let out = match out {
        Ok(t) => t,
        Err(e) => {
            return ValidationReport::from_checks(vec![check(
                "program_runs",
                false,
                e.to_string(),
            )])
        }
    };
    let mut checks = vec![check("program_runs", true, String::new())];
    match spec.kind {
        OpKind::GenFeatures | OpKind::AggFeatures => {
            check_rows_preserved(&sample, &out, &mut checks);
            check_originals_retained(&sample, &out, &mut checks);
            check_new_column_count(spec, &sample, &out, &mut checks);
        }
        OpKind::ExtractFeatures => {
            check_rows_preserved(&sample, &out, &mut checks);
            check_originals_retained(&sample, &out, &mut checks);
            let declared: Vec<&str> = spec.outputs.iter().map(|(n, _)| n.as_str()).collect();
            check_outputs_present("declared_outputs_present", &declared, &out, &mut checks);
        }
        OpKind::Fillna => {
            check_targets_declared(spec, candidate, &mut checks);
            check_rows_preserved(&sample, &out, &mut checks);
            check_target_missing_free(spec, &out, &mut checks);
            check_other_cells_unchanged(spec, &sample, &out, &mut checks);
        }
        OpKind::Clean => {
            check_targets_declared(spec, candidate, &mut checks);
            check_rows_preserved(&sample, &out, &mut checks);
            let col = spec.column.as_deref().unwrap_or_default();
            checks.push(check(
                "target_column_present",
                out.has_column(col),
                if out.has_column(col) {
                    String::new()
                } else {
                    format!("column {col} is gone from the output")
                },
            ));
        }
        OpKind::Refine => {
            check_rows_preserved(&sample, &out, &mut checks);
            if let Body::Refine(r) = &candidate.body {
                let declared: Vec<&str> = r.features.iter().map(|(n, _)| n.as_str()).collect();
                check_outputs_present("declared_outputs_present", &declared, &out, &mut checks);
            }
        }
        OpKind::Select => {
            check_rows_preserved(&sample, &out, &mut checks);
            let subset = out.n_cols() >= 1
                && out.columns().all(|c| sample.has_column(c.name()));
            checks.push(check(
                "nonempty_subset",
                subset,
                if subset {
                    String::new()
                } else {
                    "output is not a nonempty subset of the input columns".to_string()
                },
            ));
            let missing: Vec<&str> = spec
                .protected
                .iter()
                .map(|s| s.as_str())
                .filter(|p| !out.has_column(p))
                .collect();
            checks.push(check(
                "protected_columns_kept",
                missing.is_empty(),
                if missing.is_empty() {
                    String::new()
                } else {
                    format!("protected columns dropped: {}", missing.join(", "))
                },
            ));
        }
        OpKind::Augment => {
            let same = out.schema() == sample.schema();
            checks.push(check(
                "schema_identical",
                same,
                if same { String::new() } else { "output schema differs from input".to_string() },
            ));
            let k = spec.k.unwrap_or(0);
            let added = out.n_rows().saturating_sub(sample.n_rows());
            checks.push(check(
                "added_row_count",
                added == k,
                if added == k {
                    String::new()
                } else {
                    format!("program added {added} rows; the operator declares {k}")
                },
            ));
        }
        OpKind::Choose => unreachable!("handled above"),
    }
    ValidationReport::from_checks(checks)
}

fn check_choice(spec: &OperatorSpec, candidate: &Program) -> Vec<CheckResult> {
    let Body::Choose(map) = &candidate.body else {
        unreachable!("kind checked at parse");
    };
    let mut checks = Vec::new();
    let missing: Vec<&str> = spec
        .ranges
        .iter()
        .map(|p| p.name.as_str())
        .filter(|name| map.get(name).is_none())
        .collect();
    checks.push(check(
        "declared_parameters_covered",
        missing.is_empty(),
        if missing.is_empty() {
            String::new()
        } else {
            format!("parameters not set: {}", missing.join(", "))
        },
    ));
    let mut out_of_range = Vec::new();
    for (name, value) in &map.choices {
        match spec.ranges.iter().find(|p| &p.name == name) {
            None => out_of_range.push(format!("{name} is not a declared parameter")),
            Some(decl) => match value {
                dsl::ChoiceValue::Num(x) if *x >= decl.lo && *x <= decl.hi => {}
                dsl::ChoiceValue::Num(x) => out_of_range.push(format!(
                    "{name} = {x} outside [{}, {}]",
                    decl.lo, decl.hi
                )),
                other => out_of_range.push(format!(
                    "{name} = {} is not numeric",
                    other.render()
                )),
            },
        }
    }
    checks.push(check(
        "values_in_range",
        out_of_range.is_empty(),
        out_of_range.join("; "),
    ));
    checks
}

fn check_rows_preserved(input: &Table, out: &Table, checks: &mut Vec<CheckResult>) {
    let ok = out.n_rows() == input.n_rows();
    checks.push(check(
        "row_count_preserved",
        ok,
        if ok {
            String::new()
        } else {
            format!("output has {} rows; input had {}", out.n_rows(), input.n_rows())
        },
    ));
}

fn check_originals_retained(input: &Table, out: &Table, checks: &mut Vec<CheckResult>) {
    let missing: Vec<&str> = input
        .columns()
        .map(|c| c.name())
        .filter(|name| !out.has_column(name))
        .collect();
    checks.push(check(
        "original_columns_retained",
        missing.is_empty(),
        if missing.is_empty() {
            String::new()
        } else {
            format!("input columns dropped: {}", missing.join(", "))
        },
    ));
}

fn check_new_column_count(
    spec: &OperatorSpec,
    input: &Table,
    out: &Table,
    checks: &mut Vec<CheckResult>,
) {
    let added = out.n_cols().saturating_sub(input.n_cols());
    let k = spec.effective_budget();
    let ok = (1..=k).contains(&added);
    checks.push(check(
        "new_column_count",
        ok,
        if ok { String::new() } else { format!("program added {added} columns; allowed 1..={k}") },
    ));
}

fn check_outputs_present(
    name: &str,
    declared: &[&str],
    out: &Table,
    checks: &mut Vec<CheckResult>,
) {
    let missing: Vec<&str> =
        declared.iter().copied().filter(|n| !out.has_column(n)).collect();
    checks.push(check(
        name,
        missing.is_empty(),
        if missing.is_empty() {
            String::new()
        } else {
            format!("declared output columns absent: {}", missing.join(", "))
        },
    ));
}

fn check_targets_declared(
    spec: &OperatorSpec,
    candidate: &Program,
    checks: &mut Vec<CheckResult>,
) {
    let declared = spec.column.as_deref().unwrap_or_default();
    let actual = match &candidate.body {
        Body::Impute(r) => r.column.as_str(),
        Body::Clean(r) => r.column.as_str(),
        _ => declared,
    };
    let ok = actual == declared;
    checks.push(check(
        "targets_declared_column",
        ok,
        if ok {
            String::new()
        } else {
            format!("program targets column {actual}; the operator declares {declared}")
        },
    ));
}

fn check_target_missing_free(spec: &OperatorSpec, out: &Table, checks: &mut Vec<CheckResult>) {
    let name = spec.column.as_deref().unwrap_or_default();
    let (ok, detail) = match out.column(name) {
        None => (false, format!("column {name} is gone from the output")),
        Some(col) => {
            let holes = col.missing_count();
            if holes == 0 {
                (true, String::new())
            } else {
                let first = (0..col.len()).find(|&r| col.is_missing_at(r)).unwrap_or(0);
                (
                    false,
                    format!("column {name} still has {holes} missing cells; first at row {first}"),
                )
            }
        }
    };
    checks.push(check("target_missing_free", ok, detail));
}

fn check_other_cells_unchanged(
    spec: &OperatorSpec,
    input: &Table,
    out: &Table,
    checks: &mut Vec<CheckResult>,
) {
    let target = spec.column.as_deref().unwrap_or_default();
    let mut diff = None;
    'outer: for col in input.columns() {
        let Some(after) = out.column(col.name()) else {
            diff = Some(format!("column {} is gone from the output", col.name()));
            break;
        };
        for row in 0..col.len().min(after.len()) {
            let before_cell = col.get(row);
            // the target column may change only where it was missing
            if col.name() == target && before_cell == Value::Missing {
                continue;
            }
            if after.get(row) != before_cell {
                diff = Some(format!("cell ({}, row {row}) changed", col.name()));
                break 'outer;
            }
        }
    }
    checks.push(check(
        "other_cells_unchanged",
        diff.is_none(),
        diff.unwrap_or_default(),
    ));
}

/// Filter `aux` so roughly `JOIN_KEY_RETENTION` of the sample's join keys
/// still match, leaving the rest to exercise the unmatched-row path.
fn filter_aux(
    sample: &Table,
    aux: &Table,
    left_key: &str,
    right_key: &str,
    seed: u64,
) -> Result<Table, String> {
    let left = sample
        .column(left_key)
        .ok_or_else(|| format!("join key {left_key} not found in the input"))?;
    let mut keys: Vec<KeyValue> = Vec::new();
    for row in 0..left.len() {
        if let Some(k) = KeyValue::from_value(&left.get(row)) {
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    let kept_n = ((keys.len() as f64) * JOIN_KEY_RETENTION).floor() as usize;
    let mut rng = rng_from_seed(mix_seed(&[seed, 0x90]));
    let kept: Vec<&KeyValue> =
        sample_indices(&mut rng, keys.len(), kept_n).into_iter().map(|i| &keys[i]).collect();
    let right = aux
        .column(right_key)
        .ok_or_else(|| format!("join key {right_key} not found in the auxiliary table"))?;
    let rows: Vec<usize> = (0..right.len())
        .filter(|&row| {
            KeyValue::from_value(&right.get(row)).is_some_and(|k| kept.contains(&&k))
        })
        .collect();
    Ok(aux.take(&rows))
}

/// Ask `synth` for a program until one validates, feeding failures back.
/// Consumes at most `max_retries` + 1 attempts.
pub fn synthesize_with_retry(
    spec: &OperatorSpec,
    mut request: SynthesisRequest,
    synth: &dyn Synthesizer,
    main: &Table,
    aux: Option<&Table>,
    max_retries: usize,
) -> Result<SynthesisOutcome, SemOpError> {
    let schemas = SchemaSet::from_tables(main, aux);
    let attempts = max_retries + 1;
    let mut last_report = None;
    for attempt in 1..=attempts {
        let result = match synth.synthesize(&request) {
            Ok(r) => r,
            Err(SynthError::Extraction(e)) => {
                let detail = format!("{e}; emit exactly one fenced dslv1 code block");
                last_report =
                    Some(ValidationReport::single_failure("program_extracted", &detail, attempt));
                request.feedback.push(detail);
                continue;
            }
            // backend faults are not candidate faults: stop retrying
            Err(e) => return Err(SemOpError::Synth(e)),
        };
        let program = match parse(&result.program_text, spec.kind.program_kind()) {
            Ok(p) => p,
            Err(e) => {
                let detail = format!("the program failed to parse: {e}");
                last_report = Some(ValidationReport::single_failure("parses", &detail, attempt));
                request.feedback.push(detail);
                continue;
            }
        };
        if let Err(e) = typecheck(&program, &schemas) {
            let detail = format!("the program failed the type check: {e}");
            last_report = Some(ValidationReport::single_failure("typechecks", &detail, attempt));
            request.feedback.push(detail);
            continue;
        }
        let mut report = validate_candidate(spec, &program, main, aux, request.seed);
        report.attempts_used = attempt;
        if report.passed {
            return Ok(SynthesisOutcome { program, commentary: result.commentary, report });
        }
        let detail = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("check {} failed: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ");
        request.feedback.push(detail);
        last_report = Some(report);
    }
    Err(SemOpError::Exhausted {
        node: spec.name.clone(),
        attempts,
        report: last_report.expect("at least one attempt ran"),
    })
}

/// A validated program with its provenance.
#[derive(Debug, Clone)]
pub struct SynthesisOutcome {
    pub program: Program,
    pub commentary: String,
    pub report: ValidationReport,
}

/// Whether an application happens during training or inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fit,
    Predict,
}

/// What applying an operator yields.
#[derive(Debug, Clone)]
pub enum Applied {
    Table(Table),
    /// hyperparameter values for the learner
    Choices(dsl::ChoiceMap),
}

/// Apply a validated program to full tables.
pub fn apply(
    spec: &OperatorSpec,
    program: &Program,
    main: &Table,
    aux: Option<&Table>,
    mode: Mode,
    seed: u64,
    limits: &EvalLimits,
) -> Result<Applied, SemOpError> {
    let at_node = |source: DslError| SemOpError::Apply { node: spec.name.clone(), source };
    match &program.body {
        Body::Choose(map) => Ok(Applied::Choices(map.clone())),
        Body::Augment(plan) => {
            if mode == Mode::Predict {
                // row augmentation is fit-only; inference passes through
                Ok(Applied::Table(main.clone()))
            } else {
                augment_rows(main, plan, seed, limits).map(Applied::Table).map_err(at_node)
            }
        }
        _ => evaluate(program, main, aux, limits).map(Applied::Table).map_err(at_node),
    }
}

/// Append `plan.count` rows resampled (seeded, with replacement) from the
/// rows matching the plan's filter; no matching rows means nothing to add.
fn augment_rows(
    main: &Table,
    plan: &AugmentPlan,
    seed: u64,
    limits: &EvalLimits,
) -> Result<Table, DslError> {
    let pool: Vec<usize> = match &plan.filter {
        None => (0..main.n_rows()).collect(),
        Some(f) => filter_mask(main, f, limits)?
            .iter()
            .enumerate()
            .filter_map(|(i, &hit)| hit.then_some(i))
            .collect(),
    };
    if pool.is_empty() || plan.count == 0 {
        return Ok(main.clone());
    }
    let mut rng = rng_from_seed(mix_seed(&[seed, 0xAD]));
    let picks: Vec<usize> = (0..plan.count)
        .map(|_| pool[uniform_below(&mut rng, pool.len() as u64) as usize])
        .collect();
    let extra = main.take(&picks);
    main.concat_rows(&extra).map_err(|e| DslError::Eval(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::MockSynthesizer;
    use crate::table::{Column, Kind};

    fn col(name: &str, values: Vec<Value>) -> Column {
        let kind = values
            .iter()
            .find_map(|v| match v {
                Value::Num(_) => Some(Kind::Numeric),
                Value::Str(_) => Some(Kind::String),
                Value::Bool(_) => Some(Kind::Boolean),
                Value::Missing => None,
            })
            .unwrap_or(Kind::Numeric);
        Column::from_values(name, kind, values).unwrap()
    }

    fn nums(name: &str, xs: &[f64]) -> Column {
        col(name, xs.iter().map(|&x| Value::Num(x)).collect())
    }

    fn main_table() -> Table {
        Table::new(vec![
            nums("a", &[1.0, 2.0, 3.0, 4.0]),
            col(
                "b",
                vec![Value::Num(5.0), Value::Missing, Value::Num(7.0), Value::Num(8.0)],
            ),
            col(
                "label",
                vec![Value::Bool(true), Value::Bool(false), Value::Bool(true), Value::Bool(false)],
            ),
        ])
        .unwrap()
    }

    fn spec(kind: OpKind) -> OperatorSpec {
        OperatorSpec {
            kind,
            name: "n1".to_string(),
            instruction: String::new(),
            k: Some(2),
            column: None,
            join_keys: None,
            outputs: vec![],
            ranges: vec![],
            protected: vec![],
        }
    }

    fn request_for(spec: &OperatorSpec, main: &Table, aux: Option<&Table>) -> SynthesisRequest {
        assemble_request(spec, "test", main, aux, RequestExtras::default(), 0.0, 7)
    }

    #[test]
    fn spec_validation_enforces_required_fields() {
        assert!(spec(OpKind::GenFeatures).validate().is_ok());
        assert!(spec(OpKind::AggFeatures).validate().is_err());
        assert!(spec(OpKind::Fillna).validate().is_err());
        assert!(spec(OpKind::ExtractFeatures).validate().is_err());
        assert!(spec(OpKind::Choose).validate().is_err());
        let mut s = spec(OpKind::Augment);
        s.k = None;
        assert!(s.validate().is_err());
        let mut s = spec(OpKind::Choose);
        s.ranges = vec![ParamDecl { name: "l2".into(), lo: 1.0, hi: 0.0 }];
        assert!(s.validate().is_err());
    }

    #[test]
    fn gen_features_validates_and_applies() {
        let main = main_table();
        let s = spec(OpKind::GenFeatures);
        let synth = MockSynthesizer::new();
        let out = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 5)
            .unwrap();
        assert!(out.report.passed);
        assert_eq!(out.report.attempts_used, 1);
        let applied = apply(
            &s,
            &out.program,
            &main,
            None,
            Mode::Fit,
            7,
            &EvalLimits::default(),
        )
        .unwrap();
        match applied {
            Applied::Table(t) => {
                assert_eq!(t.n_rows(), 4);
                assert_eq!(t.n_cols(), 5); // two new features
            }
            _ => panic!("expected a table"),
        }
    }

    #[test]
    fn scripted_fault_costs_one_attempt() {
        let main = main_table();
        let s = spec(OpKind::GenFeatures);
        let synth = MockSynthesizer::fail_first(2);
        let out = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 5)
            .unwrap();
        assert_eq!(out.report.attempts_used, 3);
    }

    #[test]
    fn exhausted_retries_name_the_node() {
        let main = main_table();
        let s = spec(OpKind::GenFeatures);
        let synth = MockSynthesizer::fail_first(6);
        let err = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 5)
            .unwrap_err();
        match err {
            SemOpError::Exhausted { node, attempts, report } => {
                assert_eq!(node, "n1");
                assert_eq!(attempts, 6);
                assert!(!report.passed);
            }
            other => panic!("expected exhaustion, got {other}"),
        }
    }

    #[test]
    fn feedback_accumulates_across_attempts() {
        // the mock ignores feedback, so inspect the failure report instead
        let main = main_table();
        let s = spec(OpKind::GenFeatures);
        let synth = MockSynthesizer::fail_first(6);
        let err = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 2)
            .unwrap_err();
        match err {
            SemOpError::Exhausted { attempts, report, .. } => {
                assert_eq!(attempts, 3);
                assert_eq!(report.checks[0].name, "parses");
            }
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn agg_features_validation_filters_aux_keys() {
        // left keys 0..20, aux rows 2 per key
        let left = Table::new(vec![
            nums("id", &(0..20).map(|i| i as f64).collect::<Vec<_>>()),
            col("y", (0..20).map(|i| Value::Bool(i % 2 == 0)).collect()),
        ])
        .unwrap();
        let mut ids = Vec::new();
        let mut vals = Vec::new();
        for i in 0..20 {
            for j in 0..2 {
                ids.push(i as f64);
                vals.push((i * 2 + j) as f64);
            }
        }
        let aux = Table::new(vec![nums("id", &ids), nums("v", &vals)]).unwrap();
        let mut s = spec(OpKind::AggFeatures);
        s.join_keys = Some(("id".to_string(), "id".to_string()));
        s.k = Some(3);
        let synth = MockSynthesizer::new();
        let out = synthesize_with_retry(
            &s,
            request_for(&s, &left, Some(&aux)),
            &synth,
            &left,
            Some(&aux),
            5,
        )
        .unwrap();
        assert!(out.report.passed, "{:?}", out.report);
        // applying on the full tables keeps every row and adds the features
        match apply(&s, &out.program, &left, Some(&aux), Mode::Fit, 7, &EvalLimits::default())
            .unwrap()
        {
            Applied::Table(t) => {
                assert_eq!(t.n_rows(), 20);
                assert!(t.n_cols() > 2);
            }
            _ => panic!("expected a table"),
        }
    }

    #[test]
    fn fillna_checks_target_and_other_cells() {
        let main = main_table();
        let mut s = spec(OpKind::Fillna);
        s.column = Some("b".to_string());
        let synth = MockSynthesizer::new();
        let out = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 5)
            .unwrap();
        assert!(out.report.passed);
        let names: Vec<&str> =
            out.report.checks.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"target_missing_free"));
        assert!(names.contains(&"other_cells_unchanged"));
        // a candidate targeting the wrong column is rejected with a check
        let wrong = parse("dslv1 impute\nimpute a = 0\n", ProgramKind::Impute).unwrap();
        let report = validate_candidate(&s, &wrong, &main, None, 7);
        assert!(!report.passed);
        assert!(report
            .checks
            .iter()
            .any(|c| c.name == "targets_declared_column" && !c.passed));
    }

    #[test]
    fn fillna_failure_reports_cell_coordinates() {
        let main = main_table();
        let mut s = spec(OpKind::Fillna);
        s.column = Some("b".to_string());
        // imputing with `missing` leaves the hole in place
        let lazy = parse("dslv1 impute\nimpute b = missing\n", ProgramKind::Impute).unwrap();
        let report = validate_candidate(&s, &lazy, &main, None, 7);
        let failed = report.checks.iter().find(|c| c.name == "target_missing_free").unwrap();
        assert!(!failed.passed);
        assert!(failed.detail.contains("row 1"), "{}", failed.detail);
    }

    #[test]
    fn select_protects_the_target_lineage() {
        let main = main_table();
        let mut s = spec(OpKind::Select);
        s.protected = vec!["label".to_string()];
        let dropper = parse("dslv1 select\nkeep a, b\n", ProgramKind::Select).unwrap();
        let report = validate_candidate(&s, &dropper, &main, None, 7);
        assert!(!report.passed);
        assert!(report
            .checks
            .iter()
            .any(|c| c.name == "protected_columns_kept" && !c.passed));
        // the mock keeps everything, so it validates
        let synth = MockSynthesizer::new();
        let out = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 5)
            .unwrap();
        assert!(out.report.passed);
    }

    #[test]
    fn augment_adds_rows_at_fit_only() {
        let main = main_table();
        let mut s = spec(OpKind::Augment);
        s.k = Some(3);
        let synth = MockSynthesizer::new();
        let mut req = request_for(&s, &main, None);
        req.output_budget = 3;
        let out = synthesize_with_retry(&s, req, &synth, &main, None, 5).unwrap();
        assert!(out.report.passed, "{:?}", out.report);
        let fit =
            apply(&s, &out.program, &main, None, Mode::Fit, 7, &EvalLimits::default()).unwrap();
        match fit {
            Applied::Table(t) => assert_eq!(t.n_rows(), 7),
            _ => panic!("expected a table"),
        }
        let predict =
            apply(&s, &out.program, &main, None, Mode::Predict, 7, &EvalLimits::default())
                .unwrap();
        match predict {
            Applied::Table(t) => assert!(t.content_eq(&main)),
            _ => panic!("expected a table"),
        }
    }

    #[test]
    fn augment_filter_draws_only_matching_rows() {
        let main = main_table();
        let plan = parse(
            "dslv1 augment\nadd 5 where label\n",
            ProgramKind::Augment,
        )
        .unwrap();
        let Body::Augment(p) = &plan.body else { panic!() };
        let out = augment_rows(&main, p, 11, &EvalLimits::default()).unwrap();
        assert_eq!(out.n_rows(), 9);
        let label = out.column("label").unwrap();
        for row in 4..9 {
            assert_eq!(label.get(row), Value::Bool(true));
        }
        // same seed, same rows
        let again = augment_rows(&main, p, 11, &EvalLimits::default()).unwrap();
        assert!(out.content_eq(&again));
    }

    #[test]
    fn choose_range_checks() {
        let mut s = spec(OpKind::Choose);
        s.ranges = vec![ParamDecl { name: "l2".into(), lo: 0.0, hi: 1.0 }];
        let main = main_table();
        let good = parse("dslv1 choose\nset l2 = 0.5\n", ProgramKind::Choose).unwrap();
        assert!(validate_candidate(&s, &good, &main, None, 7).passed);
        let high = parse("dslv1 choose\nset l2 = 1.5\n", ProgramKind::Choose).unwrap();
        let report = validate_candidate(&s, &high, &main, None, 7);
        assert!(!report.passed);
        assert!(report.checks.iter().any(|c| c.name == "values_in_range" && !c.passed));
        let unknown = parse("dslv1 choose\nset lr = 0.5\n", ProgramKind::Choose).unwrap();
        let report = validate_candidate(&s, &unknown, &main, None, 7);
        assert!(report
            .checks
            .iter()
            .any(|c| c.name == "declared_parameters_covered" && !c.passed));
    }

    #[test]
    fn validation_leaves_the_input_unchanged() {
        let main = main_table();
        let before = main.fingerprint();
        let s = spec(OpKind::GenFeatures);
        let synth = MockSynthesizer::new();
        let _ = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 5)
            .unwrap();
        assert_eq!(main.fingerprint(), before);
    }

    #[test]
    fn extract_validation_requires_declared_outputs() {
        let main = Table::new(vec![
            col(
                "title",
                vec![
                    Value::Str("sandisk 32 gb".into()),
                    Value::Str("lexar 64 gb".into()),
                    Value::Str("no size".into()),
                ],
            ),
            nums("price", &[10.0, 20.0, 5.0]),
        ])
        .unwrap();
        let mut s = spec(OpKind::ExtractFeatures);
        s.outputs = vec![("size".to_string(), "capacity".to_string())];
        let synth = MockSynthesizer::new();
        let out = synthesize_with_retry(&s, request_for(&s, &main, None), &synth, &main, None, 5)
            .unwrap();
        assert!(out.report.passed, "{:?}", out.report);
        assert!(out.program.source.contains("rule size:"));
        // a program extracting under a different name fails the contract
        let wrong = parse(
            "dslv1 extract_rules\nrule other: title /(\\d+)/ -> capture 1\nrule other: default -> \"0\"\n",
            ProgramKind::ExtractRules,
        )
        .unwrap();
        let report = validate_candidate(&s, &wrong, &main, None, 7);
        assert!(!report.passed);
    }

    #[test]
    fn request_assembly_is_deterministic() {
        let main = main_table();
        let s = spec(OpKind::GenFeatures);
        let a = request_for(&s, &main, None);
        let b = request_for(&s, &main, None);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert!(a.main_profile.contains('a'));
    }
}
