use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use dlfilter::corpus;
use dlfilter::facts::Facts;
use dlfilter::pipeline::{diff_programs, load_program};
use dlfilter_core::engine::Limits;

fn dlfilter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlfilter"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dlfilter-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_iamsam_with_and_without_transform() {
    let plain = dlfilter(&["run", "iamsam", "--query", "solution"]);
    let fp = dlfilter(&["run", "iamsam", "--query", "solution", "--transform"]);
    assert_eq!(plain.status.code(), Some(0), "{}", stderr(&plain));
    assert_eq!(fp.status.code(), Some(0));
    let text = stdout(&plain);
    let rows: Vec<&str> = text.lines().collect();
    assert!(!rows.is_empty());
    let mut sorted = rows.clone();
    sorted.sort();
    assert_eq!(rows, sorted);
    assert_eq!(stdout(&plain), stdout(&fp));
    // Every row is a solution of I*AM=SAM.
    for row in rows {
        let v: Vec<i64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        let (i, a, m, s) = (v[0], v[1], v[2], v[3]);
        assert_eq!(i * (10 * a + m), 100 * s + 10 * a + m, "{row}");
    }
}

#[test]
fn run_from_files() {
    let dir = scratch("files");
    let facts = dir.join("facts");
    fs::create_dir_all(&facts).unwrap();
    fs::write(dir.join("p.dl"), "e(x,y) -> int[64](x), int[64](y).\nt(x,y) -> int[64](x), int[64](y).\nt(x,y) <- e(x,y).\nt(x,z) <- t(x,y), e(y,z), z <= 3.\n").unwrap();
    fs::write(facts.join("e.csv"), "1,2\n2,3\n3,4\n").unwrap();
    let out = dlfilter(&[
        "run",
        dir.join("p.dl").to_str().unwrap(),
        "--facts",
        facts.to_str().unwrap(),
        "--query",
        "t",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out), "1,2\n1,3\n2,3\n3,4\n");
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn type_mismatch_in_facts_exits_1() {
    let dir = scratch("mismatch");
    fs::write(dir.join("p.dl"), "e(x) -> int[64](x).\n").unwrap();
    fs::write(dir.join("e.csv"), "x\nfoo\n").unwrap();
    let out = dlfilter(&[
        "run",
        dir.join("p.dl").to_str().unwrap(),
        "--facts",
        dir.to_str().unwrap(),
        "--query",
        "e",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("e.csv"), "{}", stderr(&out));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn naive_engine_text_exits_1() {
    let dir = scratch("naive");
    let path = dir.join("naive.dl");
    fs::write(&path, corpus::ENGINE_NAIVE_FILTERED).unwrap();
    let out = dlfilter(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("RecursionThroughAggregation"),
        "{}",
        stderr(&out)
    );
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn tuple_limit_exits_2() {
    let out = dlfilter(&["run", "flights-g6", "--max-tuples", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("LimitExceeded"), "{}", stderr(&out));
}

#[test]
fn unknown_program_exits_1() {
    assert_eq!(
        dlfilter(&["run", "no-such-benchmark"]).status.code(),
        Some(1)
    );
}

#[test]
fn diff_reports_identity_for_constraint_free_programs() {
    let dir = scratch("identity");
    fs::write(
        dir.join("p.dl"),
        "e(x,y) -> string(x), string(y).\nt(x,y) -> string(x), string(y).\nt(x,y) <- e(x,y).\n",
    )
    .unwrap();
    let out = dlfilter(&["diff", dir.join("p.dl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("identical programs"));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn diff_on_corpus_exits_0() {
    for name in ["iamsam", "engine-set2", "production-500", "flights-g1"] {
        let out = dlfilter(&["diff", name, "--stride", "20"]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}{}",
            stdout(&out),
            stderr(&out)
        );
    }
}

#[test]
fn wrong_bound_is_caught_by_diff() {
    let original = load_program(corpus::ENGINE).unwrap();
    let t = dlfilter_core::transform::transform(&original).unwrap();
    let broken =
        dlfilter_core::format_program(&t.program).replace("n = max(ub_p[],ub_s[])", "n = lb_s[]");
    let broken = load_program(&broken).unwrap();
    let facts = dlfilter::gen::engine_set(1, 50);
    let report = diff_programs(
        &original,
        &broken,
        &facts,
        &["e".to_string()],
        Limits::default(),
    )
    .unwrap();
    assert!(!report.is_empty());
    assert!(!report.preds[0].missing.is_empty() && report.preds[0].extra.is_empty());
}

#[test]
fn transform_prints_filters() {
    let out = dlfilter(&["transform", "iamsam"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("digit_filtered_i(i) <-"));
    assert!(load_program(&text).is_ok());
}

#[test]
fn bench_writes_csv() {
    let dir = scratch("bench");
    let csv = dir.join("report.csv");
    let out = dlfilter(&[
        "bench",
        "iamsam",
        "--repeat",
        "1",
        "--warmup",
        "0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "benchmark,variant,median_s,relative_pct,tuples,instantiations,answers_hash"
    );
    assert_eq!(lines.len(), 3);
    let hash = |l: &str| l.rsplit(',').next().unwrap().to_string();
    assert_eq!(hash(lines[1]), hash(lines[2]));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn gen_graph_round_trips_through_facts() {
    let dir = scratch("graph");
    let out = dlfilter(&["gen-graph", "--preset", "1", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let flights = load_program(corpus::FLIGHTS).unwrap();
    let (facts, warnings) = dlfilter::facts::read_dir(&dir, &flights).unwrap();
    assert!(warnings.is_empty());
    let expected: Facts =
        dlfilter::gen::gen_graph(&dlfilter::gen::preset(1, corpus::DEFAULT_GRAPH_SEED).unwrap());
    assert_eq!(facts.len("e"), expected.len("e"));
    let run = dlfilter(&[
        "run",
        "flights-g1",
        "--facts",
        dir.to_str().unwrap(),
        "--query",
        "query",
    ]);
    assert_eq!(run.status.code(), Some(0));
    fs::remove_dir_all(dir).unwrap();
}

#[test]
fn deps_prints_dot() {
    let out = dlfilter(&["deps", "engine-set1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("digraph"), "{text}");
    assert!(text.contains("\"e\""));
}

#[test]
fn list_names_every_benchmark() {
    let out = dlfilter(&["list"]);
    assert_eq!(stdout(&out).lines().count(), corpus::benchmarks().len());
}
