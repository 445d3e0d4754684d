//! CSV fact files: one header-less `<pred>.csv` per EDB predicate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dlfilter_core::analysis::build_dep_graph;
use dlfilter_core::engine::{Database, EvalError};
use dlfilter_core::schema::{is_builtin_type, Column, ColumnType, Schema};
use dlfilter_core::{Constant, Program};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FactError {
    #[error("TypeMismatch({file}, row {row}, column {col}): {msg}")]
    TypeMismatch {
        file: String,
        row: usize,
        col: usize,
        msg: String,
    },
    #[error("{file}: {source}")]
    Csv { file: String, source: csv::Error },
    #[error("{file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Fact rows by predicate, as CSV cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Facts {
    pub rows: BTreeMap<String, Vec<Vec<String>>>,
}

impl Facts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, pred: &str, row: Vec<String>) {
        self.rows.entry(pred.to_string()).or_default().push(row);
    }

    pub fn len(&self, pred: &str) -> usize {
        self.rows.get(pred).map_or(0, Vec::len)
    }

    pub fn merge(&mut self, other: Facts) {
        for (p, rows) in other.rows {
            self.rows.entry(p).or_default().extend(rows);
        }
    }

    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, FactError> {
        fs::create_dir_all(dir).map_err(|source| FactError::Io {
            file: dir.display().to_string(),
            source,
        })?;
        let mut written = Vec::new();
        for (pred, rows) in &self.rows {
            let path = dir.join(format!("{pred}.csv"));
            let file = path.display().to_string();
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(&path)
                .map_err(|source| FactError::Csv {
                    file: file.clone(),
                    source,
                })?;
            for r in rows {
                w.write_record(r).map_err(|source| FactError::Csv {
                    file: file.clone(),
                    source,
                })?;
            }
            w.flush().map_err(|source| FactError::Io { file, source })?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Declared predicates without defining clauses.
pub fn edb_predicates(program: &Program) -> Vec<String> {
    let (schema, _) = Schema::build(program);
    let graph = build_dep_graph(program);
    schema
        .sigs
        .keys()
        .filter(|p| !is_builtin_type(p) && !graph.defining.contains_key(*p))
        .cloned()
        .collect()
}

/// Reads `<pred>.csv` for every EDB predicate of `program`; absent files
/// are reported in the returned warnings.
pub fn read_dir(dir: &Path, program: &Program) -> Result<(Facts, Vec<String>), FactError> {
    let (schema, _) = Schema::build(program);
    let mut facts = Facts::new();
    let mut warnings = Vec::new();
    for pred in edb_predicates(program) {
        let path = dir.join(format!("{pred}.csv"));
        if !path.exists() {
            if !schema.get(&pred).is_some_and(|s| s.entity) {
                warnings.push(format!("MissingFactFile({pred}): using an empty relation"));
            }
            continue;
        }
        let file = path.display().to_string();
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(&path)
            .map_err(|source| FactError::Csv {
                file: file.clone(),
                source,
            })?;
        let rows = facts.rows.entry(pred.clone()).or_default();
        for rec in r.records() {
            let rec = rec.map_err(|source| FactError::Csv {
                file: file.clone(),
                source,
            })?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
    }
    Ok((facts, warnings))
}

fn parse_cell(cell: &str, col: &Column, db: &mut Database) -> Result<Constant, String> {
    match &col.ty {
        ColumnType::Str => Ok(Constant::Str(cell.to_string())),
        ColumnType::Entity(ty) => Ok(db.entity(ty, cell)),
        ColumnType::Int { unsigned, bits } => {
            let v: i64 = cell
                .trim()
                .parse()
                .map_err(|_| format!("`{cell}` is not an integer"))?;
            let (lo, hi) = match (unsigned, bits) {
                (true, 64) => (0, i64::MAX),
                (true, b) => (0, (1i64 << b) - 1),
                (false, 64) => (i64::MIN, i64::MAX),
                (false, b) => (-(1i64 << (b - 1)), (1i64 << (b - 1)) - 1),
            };
            let lo = col.min.map_or(lo, |m| m.max(lo));
            let hi = col.max.map_or(hi, |m| m.min(hi));
            if v < lo || v > hi {
                return Err(format!("{v} outside {}", col.ty));
            }
            Ok(Constant::Int(v))
        }
    }
}

/// Inserts the rows of every EDB predicate, type-checked against the
/// declarations. Reference-mode rows `label,value` create entities.
pub fn populate(program: &Program, facts: &Facts, db: &mut Database) -> Result<(), FactError> {
    let (schema, _) = Schema::build(program);
    for pred in edb_predicates(program) {
        let Some(rows) = facts.rows.get(&pred) else {
            continue;
        };
        let sig = schema.get(&pred).expect("EDB predicates are declared");
        let file = format!("{pred}.csv");
        for (i, row) in rows.iter().enumerate() {
            if row.len() != sig.arity() {
                return Err(FactError::TypeMismatch {
                    file,
                    row: i + 1,
                    col: row.len().min(sig.arity()) + 1,
                    msg: format!("expected {} columns, found {}", sig.arity(), row.len()),
                });
            }
            if sig.entity {
                db.entity(&pred, &row[0]);
                continue;
            }
            let mut tuple = Vec::with_capacity(row.len());
            for (c, (cell, col)) in row.iter().zip(&sig.columns).enumerate() {
                let v = parse_cell(cell, col, db).map_err(|msg| FactError::TypeMismatch {
                    file: file.clone(),
                    row: i + 1,
                    col: c + 1,
                    msg,
                })?;
                tuple.push(v);
            }
            db.insert(&pred, &tuple)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dlfilter_core::parse_program;

    const DIGITS: &str = "digit(_) ->.\ndigit(d), val(d:v) -> uint[8](v), v<=9.\n";

    #[test]
    fn refmode_rows_create_entities() {
        let p = parse_program(DIGITS).unwrap();
        let mut f = Facts::new();
        for d in 0..10 {
            f.add("val", vec![d.to_string(), d.to_string()]);
        }
        let mut db = Database::new();
        populate(&p, &f, &mut db).unwrap();
        assert_eq!(db.len("digit"), 10);
        assert_eq!(db.len("val"), 10);
    }

    #[test]
    fn bad_cells_are_type_mismatches() {
        let p = parse_program(DIGITS).unwrap();
        let mut f = Facts::new();
        f.add("val", vec!["x".into(), "foo".into()]);
        let err = populate(&p, &f, &mut Database::new()).unwrap_err();
        assert!(
            matches!(err, FactError::TypeMismatch { row: 1, col: 2, .. }),
            "{err}"
        );
        let mut f = Facts::new();
        f.add("val", vec!["x".into(), "12".into()]);
        assert!(populate(&p, &f, &mut Database::new()).is_err());
    }

    #[test]
    fn directory_round_trip_and_missing_files() {
        let p = parse_program("e(x,y,d) -> string(x), string(y), int[64](d).\nq(x) -> string(x).")
            .unwrap();
        let dir = std::env::temp_dir().join(format!("dlfilter-facts-{}", std::process::id()));
        let mut f = Facts::new();
        f.add("e", vec!["a, b".into(), "c".into(), "-3".into()]);
        f.write_dir(&dir).unwrap();
        let (back, warnings) = read_dir(&dir, &p).unwrap();
        assert_eq!(back, f);
        assert_eq!(warnings.len(), 1);
        std::fs::write(dir.join("q.csv"), "").unwrap();
        let (back, warnings) = read_dir(&dir, &p).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back.len("q"), 0);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
