use std::collections::BTreeSet;

use dlfilter_core::engine::{evaluate, query, Database, Limits};
use dlfilter_core::transform::transform;
use dlfilter_core::{format_program, parse_program, Constant};

const ENGINE: &str = "p(t,w) -> string(t), int[64](w).
s(t,w) -> string(t), int[64](w).
e(t,w) -> string(t), int[64](w).
e(t,w) <- p(t,w).
e(t,w) <- s(t,w), e(tp,wp), w - wp <= 100, w + wp >= 19500.
";

fn engine_db(p: &[(&str, i64)], s: &[(&str, i64)]) -> Database {
    let mut db = Database::new();
    for (pred, rows) in [("p", p), ("s", s)] {
        db.declare(pred, 2, None).unwrap();
        for (t, w) in rows {
            db.insert(pred, &[Constant::Str(t.to_string()), Constant::Int(*w)])
                .unwrap();
        }
    }
    db
}

/// Fixpoint of the engine rules computed directly.
fn engine_oracle(p: &[(&str, i64)], s: &[(&str, i64)]) -> BTreeSet<(String, i64)> {
    let mut e: BTreeSet<(String, i64)> = p.iter().map(|(t, w)| (t.to_string(), *w)).collect();
    loop {
        let mut next = e.clone();
        for (t, w) in s {
            if e.iter().any(|(_, wp)| w - wp <= 100 && w + wp >= 19500) {
                next.insert((t.to_string(), *w));
            }
        }
        if next == e {
            return e;
        }
        e = next;
    }
}

fn engine_rows(db: &Database) -> BTreeSet<(String, i64)> {
    query(db, "e")
        .unwrap()
        .into_iter()
        .map(|t| match (&t[0], &t[1]) {
            (Constant::Str(s), Constant::Int(w)) => (s.clone(), *w),
            other => panic!("{other:?}"),
        })
        .collect()
}

#[test]
fn engine_program_matches_fixpoint_before_and_after_transform() {
    let p: Vec<(&str, i64)> = (0..40)
        .map(|i| (["steam", "gas"][i % 2], 9000 + 37 * i as i64))
        .collect();
    let s: Vec<(&str, i64)> = (0..60)
        .map(|i| (["steam", "gas"][i % 2], 8500 + 29 * i as i64))
        .collect();
    let program = parse_program(ENGINE).unwrap();
    let t = transform(&program).unwrap();
    let oracle = engine_oracle(&p, &s);
    let (a, _) = evaluate(&program, engine_db(&p, &s), Limits::default()).unwrap();
    let (b, _) = evaluate(&t.program, engine_db(&p, &s), Limits::default()).unwrap();
    assert!(oracle.len() > p.len());
    assert_eq!(engine_rows(&a), oracle);
    assert_eq!(engine_rows(&b), oracle);
}

#[test]
fn transformed_text_reparses_to_the_same_program() {
    let t = transform(&parse_program(ENGINE).unwrap()).unwrap();
    let text = format_program(&t.program);
    let again = parse_program(&text).unwrap();
    assert_eq!(format_program(&again), text);
    assert!(dlfilter_core::validate(&again).is_empty());
}

#[test]
fn filters_shrink_work_on_the_engine_program() {
    let p: Vec<(&str, i64)> = (0..200).map(|i| ("steam", 1000 + 50 * i as i64)).collect();
    let s: Vec<(&str, i64)> = (0..200).map(|i| ("steam", 50 * i as i64)).collect();
    let program = parse_program(ENGINE).unwrap();
    let t = transform(&program).unwrap();
    let (a, sa) = evaluate(&program, engine_db(&p, &s), Limits::default()).unwrap();
    let (b, sb) = evaluate(&t.program, engine_db(&p, &s), Limits::default()).unwrap();
    assert_eq!(engine_rows(&a), engine_rows(&b));
    assert!(
        sb.instantiations() < sa.instantiations(),
        "{} vs {}",
        sb.instantiations(),
        sa.instantiations()
    );
}
