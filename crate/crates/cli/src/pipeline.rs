//! Load, transform, evaluate and compare programs.

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::time::{Duration, Instant};

use dlfilter_core::analysis::{plan_program, StratificationError};
use dlfilter_core::engine::{
    evaluate_with, query, Database, EvalError, EvalOptions, EvalStats, Limits,
};
use dlfilter_core::transform::{transform, TransformError, Transformed};
use dlfilter_core::{parse_program, validate, Diagnostic, ParseError, Program};
use thiserror::Error;

use crate::facts::{edb_predicates, populate, FactError, Facts};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Diagnostics(Vec<Diagnostic>),
    #[error(transparent)]
    Stratification(#[from] StratificationError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Facts(#[from] FactError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for evaluation failures, 1 for everything reported before
    /// evaluation starts.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Eval(_) => 2,
            _ => 1,
        }
    }
}

/// Parses, validates and stratifies.
pub fn load_program(text: &str) -> Result<Program, CliError> {
    let program = parse_program(text)?;
    let diags = validate(&program);
    if !diags.is_empty() {
        return Err(CliError::Diagnostics(diags));
    }
    plan_program(&program)?;
    Ok(program)
}

pub fn database(program: &Program, facts: &Facts) -> Result<Database, CliError> {
    let mut db = Database::new();
    populate(program, facts, &mut db)?;
    Ok(db)
}

pub struct RunOutcome {
    pub db: Database,
    pub stats: EvalStats,
    pub elapsed: Duration,
}

fn clock() -> u64 {
    use std::sync::OnceLock;
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_nanos() as u64
}

/// Evaluates over `facts`; `elapsed` covers evaluation only.
pub fn run(program: &Program, facts: &Facts, limits: Limits) -> Result<RunOutcome, CliError> {
    let db = database(program, facts)?;
    let opts = EvalOptions {
        limits,
        clock: Some(clock),
    };
    let start = Instant::now();
    let (db, stats) = evaluate_with(program, db, &opts)?;
    Ok(RunOutcome {
        db,
        stats,
        elapsed: start.elapsed(),
    })
}

pub fn render_rows(db: &Database, pred: &str) -> Result<Vec<String>, CliError> {
    Ok(query(db, pred)?
        .iter()
        .map(|t| t.iter().map(|c| db.render(c)).collect::<Vec<_>>().join(","))
        .collect())
}

/// Rendered tuples of each predicate, sorted.
pub fn answers(
    db: &Database,
    preds: &[String],
) -> Result<BTreeMap<String, BTreeSet<String>>, CliError> {
    preds
        .iter()
        .map(|p| Ok((p.clone(), render_rows(db, p)?.into_iter().collect())))
        .collect()
}

pub fn answer_hash(answers: &BTreeMap<String, BTreeSet<String>>) -> u64 {
    let mut h = DefaultHasher::new();
    for rows in answers.values() {
        rows.hash(&mut h);
    }
    h.finish()
}

/// Predicates defined by rules of the program.
pub fn derived_predicates(program: &Program) -> Vec<String> {
    let edb: BTreeSet<String> = edb_predicates(program).into_iter().collect();
    let (schema, _) = dlfilter_core::schema::Schema::build(program);
    schema
        .sigs
        .keys()
        .filter(|p| !edb.contains(*p) && !dlfilter_core::schema::is_builtin_type(p))
        .cloned()
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct PredDiff {
    pub pred: String,
    /// In the original result only.
    pub missing: Vec<String>,
    /// In the transformed result only.
    pub extra: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct DiffReport {
    pub identical_programs: bool,
    pub preds: Vec<PredDiff>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.preds
            .iter()
            .all(|d| d.missing.is_empty() && d.extra.is_empty())
    }
}

pub fn diff_programs(
    original: &Program,
    transformed: &Program,
    facts: &Facts,
    preds: &[String],
    limits: Limits,
) -> Result<DiffReport, CliError> {
    let a = run(original, facts, limits)?;
    let b = run(transformed, facts, limits)?;
    let (a, b) = (answers(&a.db, preds)?, answers(&b.db, preds)?);
    let mut report = DiffReport {
        identical_programs: original == transformed,
        preds: Vec::new(),
    };
    for p in preds {
        report.preds.push(PredDiff {
            pred: p.clone(),
            missing: a[p].difference(&b[p]).cloned().collect(),
            extra: b[p].difference(&a[p]).cloned().collect(),
        });
    }
    Ok(report)
}

/// Compares a program with its transformation on every predicate of the
/// original (or only `preds`).
pub fn diff(
    program: &Program,
    facts: &Facts,
    preds: Option<&[String]>,
    limits: Limits,
) -> Result<DiffReport, CliError> {
    let t = transform(program)?;
    let preds = match preds {
        Some(p) => p.to_vec(),
        None => derived_predicates(program),
    };
    diff_programs(program, &t.program, facts, &preds, limits)
}

/// Filtered tuples over generator tuples, summed over distinct filters.
pub fn filter_ratio(t: &Transformed, db: &Database) -> Option<f64> {
    let (mut kept, mut total) = (0usize, 0usize);
    for f in t.filters.iter().filter(|f| !f.shared) {
        kept += db.len(&f.name);
        total += db.len(&f.generator.pred);
    }
    (total > 0).then(|| kept as f64 / total as f64)
}
