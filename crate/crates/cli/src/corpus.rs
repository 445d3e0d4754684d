//! Bundled benchmark programs and their data.

use crate::facts::Facts;
use crate::gen::{self, GraphGenSpec};

pub const PUZZLES: [(&str, &str); 8] = [
    ("iamsam", include_str!("../corpus/puzzles/iamsam.dl")),
    ("basegames", include_str!("../corpus/puzzles/basegames.dl")),
    ("sendmoney", include_str!("../corpus/puzzles/sendmoney.dl")),
    (
        "banjoviolin",
        include_str!("../corpus/puzzles/banjoviolin.dl"),
    ),
    (
        "saturnplanets",
        include_str!("../corpus/puzzles/saturnplanets.dl"),
    ),
    ("sixtwenty", include_str!("../corpus/puzzles/sixtwenty.dl")),
    (
        "donaldrobert",
        include_str!("../corpus/puzzles/donaldrobert.dl"),
    ),
    (
        "blackorange",
        include_str!("../corpus/puzzles/blackorange.dl"),
    ),
];

pub const ENGINE: &str = include_str!("../corpus/engine/engine.dl");
pub const ENGINE_NAIVE_FILTERED: &str = include_str!("../corpus/engine/engine_naive_filtered.dl");
pub const PRODUCTION: &str = include_str!("../corpus/production/production.dl");
pub const FLIGHTS: &str = include_str!("../corpus/flights/flights.dl");
pub const FLIGHTS_CMR: &str = include_str!("../corpus/flights/flights_cmr.dl");
pub const DIGITS_CSV: &str = include_str!("../corpus/digits/val.csv");

#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Digits,
    Production { max_tons: i64 },
    Engine { set: usize },
    Graph(GraphGenSpec),
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub name: String,
    pub program: &'static str,
    /// Predicates whose answers are compared across variants.
    pub answer: Vec<&'static str>,
    /// Constraint-magic rewriting of the program with its answer predicate.
    pub cmr: Option<(&'static str, &'static str)>,
    pub data: Data,
}

impl Benchmark {
    pub fn facts(&self, stride: usize) -> Facts {
        match &self.data {
            Data::Digits => gen::digits(),
            Data::Production { max_tons } => gen::production(*max_tons, stride),
            Data::Engine { set } => gen::engine_set(*set, stride),
            Data::Graph(spec) => gen::gen_graph(spec),
        }
    }
}

pub const DEFAULT_GRAPH_SEED: u64 = 2011;

pub fn benchmarks() -> Vec<Benchmark> {
    let mut out = Vec::new();
    for (name, program) in PUZZLES {
        out.push(Benchmark {
            name: name.into(),
            program,
            answer: vec!["solution"],
            cmr: None,
            data: Data::Digits,
        });
    }
    for t in gen::PRODUCTION_TONS {
        out.push(Benchmark {
            name: format!("production-{t}"),
            program: PRODUCTION,
            answer: vec!["candidate", "profit", "best"],
            cmr: None,
            data: Data::Production { max_tons: t },
        });
    }
    for set in 1..=4 {
        out.push(Benchmark {
            name: format!("engine-set{set}"),
            program: ENGINE,
            answer: vec!["e"],
            cmr: None,
            data: Data::Engine { set },
        });
    }
    for k in 1..=gen::GRAPH_PRESETS.len() {
        out.push(Benchmark {
            name: format!("flights-g{k}"),
            program: FLIGHTS,
            answer: vec!["query"],
            cmr: Some((FLIGHTS_CMR, "answer_f")),
            data: Data::Graph(gen::preset(k, DEFAULT_GRAPH_SEED + k as u64).unwrap()),
        });
    }
    out
}

pub fn find(name: &str) -> Option<Benchmark> {
    benchmarks().into_iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_complete() {
        let all = benchmarks();
        assert_eq!(all.iter().filter(|b| b.data == Data::Digits).count(), 8);
        assert_eq!(
            all.iter()
                .filter(|b| matches!(b.data, Data::Production { .. }))
                .count(),
            4
        );
        assert_eq!(
            all.iter()
                .filter(|b| matches!(b.data, Data::Engine { .. }))
                .count(),
            4
        );
        assert_eq!(all.iter().filter(|b| b.cmr.is_some()).count(), 19);
        for b in &all {
            dlfilter_core::parse_program(b.program).unwrap_or_else(|e| panic!("{}: {e}", b.name));
        }
        let rows: Vec<&str> = DIGITS_CSV.lines().collect();
        assert_eq!(rows.len(), 10);
        assert_eq!(gen::digits().rows["val"].len(), 10);
    }
}
