//! Benchmark data generators.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::facts::Facts;

pub fn digits() -> Facts {
    let mut f = Facts::new();
    for d in 0..10 {
        f.add("val", vec![d.to_string(), d.to_string()]);
    }
    f
}

pub const ENGINE_TYPES: [&str; 3] = ["Steam engine", "Internal combustion engine", "Gas Turbine"];

/// `(P range, S range)` of the four engine data sets.
pub const ENGINE_SETS: [((i64, i64), (i64, i64)); 4] = [
    ((1100, 11500), (1, 10000)),
    ((500, 5000), (1, 6000)),
    ((500, 16000), (1000, 14000)),
    ((10000, 16000), (8, 12000)),
];

/// `p` and `s` as full products of the engine types with every `stride`-th
/// wattage of the set's ranges.
pub fn engine_set(set: usize, stride: usize) -> Facts {
    let ((plo, phi), (slo, shi)) = ENGINE_SETS[set - 1];
    let stride = stride.max(1);
    let mut f = Facts::new();
    for t in ENGINE_TYPES {
        for w in (plo..=phi).step_by(stride) {
            f.add("p", vec![t.to_string(), w.to_string()]);
        }
        for w in (slo..=shi).step_by(stride) {
            f.add("s", vec![t.to_string(), w.to_string()]);
        }
    }
    f
}

pub const PRODUCTION_TONS: [i64; 4] = [500, 1000, 2500, 5000];

/// Four products on three lines with fixed rates, costs, prices and
/// demands; quantities are every `stride`-th tonnage in `[1, max_tons]`.
pub fn production(max_tons: i64, stride: usize) -> Facts {
    let mut f = Facts::new();
    let products = ["bolts", "nuts", "gears", "shafts"];
    let lines = ["north", "south", "east"];
    let demand = [900, 1200, 600, 1500];
    let price = [40, 55, 90, 120];
    for (i, p) in products.iter().enumerate() {
        f.add("code", vec![p.to_string(), format!("P{}", i + 1)]);
        f.add("price", vec![p.to_string(), price[i].to_string()]);
        f.add("demand", vec![p.to_string(), demand[i].to_string()]);
        for (j, l) in lines.iter().enumerate() {
            if (i + j) % 4 == 3 {
                continue;
            }
            f.add("assign", vec![p.to_string(), l.to_string()]);
            f.add(
                "rate",
                vec![
                    p.to_string(),
                    l.to_string(),
                    (20 + 7 * i + 11 * j).to_string(),
                ],
            );
            f.add(
                "cost",
                vec![
                    p.to_string(),
                    l.to_string(),
                    (12 + 5 * i + 3 * j).to_string(),
                ],
            );
        }
    }
    for (j, l) in lines.iter().enumerate() {
        f.add("line_name", vec![l.to_string(), format!("L{}", j + 1)]);
    }
    for t in (1..=max_tons).step_by(stride.max(1)) {
        f.add("tons", vec![format!("q{t}"), t.to_string()]);
    }
    f.add("days", vec!["30".into()]);
    f.add("budget", vec!["40000".into()]);
    f
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFamily {
    /// `n` nodes, each with `[0, n/m]` random bi-directional edges.
    RandomBidir,
    /// Six subgraphs of `n` nodes with `[0, m]` edges per node, each
    /// subgraph linked to `[0, o]` others.
    Clustered,
    /// `m` unconnected complete subgraphs of `n` nodes.
    DisjointComplete,
}

impl FromStr for GraphFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random-bidir" => Ok(GraphFamily::RandomBidir),
            "clustered" => Ok(GraphFamily::Clustered),
            "disjoint-complete" => Ok(GraphFamily::DisjointComplete),
            other => Err(format!("unknown graph family `{other}`")),
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphFamily::RandomBidir => "random-bidir",
            GraphFamily::Clustered => "clustered",
            GraphFamily::DisjointComplete => "disjoint-complete",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphGenSpec {
    pub family: GraphFamily,
    pub n: usize,
    pub m: usize,
    pub o: usize,
    pub seed: u64,
}

impl GraphGenSpec {
    pub fn new(family: GraphFamily, n: usize, m: usize, o: usize, seed: u64) -> Self {
        GraphGenSpec {
            family,
            n,
            m,
            o,
            seed,
        }
    }

    pub fn nodes(&self) -> usize {
        match self.family {
            GraphFamily::RandomBidir => self.n,
            GraphFamily::Clustered => 6 * self.n,
            GraphFamily::DisjointComplete => self.n * self.m,
        }
    }
}

/// The 19 graph presets: 6 random, 4 clustered, 9 disjoint-complete.
pub const GRAPH_PRESETS: [(GraphFamily, usize, usize, usize); 19] = [
    (GraphFamily::RandomBidir, 10, 5, 0),
    (GraphFamily::RandomBidir, 20, 10, 0),
    (GraphFamily::RandomBidir, 30, 10, 0),
    (GraphFamily::RandomBidir, 40, 8, 0),
    (GraphFamily::RandomBidir, 60, 10, 0),
    (GraphFamily::RandomBidir, 80, 10, 0),
    (GraphFamily::Clustered, 8, 2, 1),
    (GraphFamily::Clustered, 10, 3, 2),
    (GraphFamily::Clustered, 12, 3, 3),
    (GraphFamily::Clustered, 15, 4, 2),
    (GraphFamily::DisjointComplete, 4, 2, 0),
    (GraphFamily::DisjointComplete, 4, 4, 0),
    (GraphFamily::DisjointComplete, 5, 3, 0),
    (GraphFamily::DisjointComplete, 5, 6, 0),
    (GraphFamily::DisjointComplete, 6, 4, 0),
    (GraphFamily::DisjointComplete, 6, 8, 0),
    (GraphFamily::DisjointComplete, 7, 3, 0),
    (GraphFamily::DisjointComplete, 7, 6, 0),
    (GraphFamily::DisjointComplete, 8, 4, 0),
];

pub fn preset(k: usize, seed: u64) -> Option<GraphGenSpec> {
    let (family, n, m, o) = *GRAPH_PRESETS.get(k.checked_sub(1)?)?;
    Some(GraphGenSpec::new(family, n, m, o, seed))
}

/// Node 0 is `Sydney`.
pub fn node_name(i: usize) -> String {
    if i == 0 {
        "Sydney".to_string()
    } else {
        format!("n{i}")
    }
}

/// Rows of `e(x,y,d)`; every undirected edge gives both directions with
/// the same distance.
pub fn gen_graph(spec: &GraphGenSpec) -> Facts {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    let mut add = |a: usize, b: usize, d: i64, edges: &mut Vec<(usize, usize, i64)>| {
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b, d));
        }
    };
    match spec.family {
        GraphFamily::RandomBidir => {
            let max = spec.n / spec.m.max(1);
            for a in 0..spec.n {
                let k = rng.gen_range(0..=max);
                for _ in 0..k {
                    let b = rng.gen_range(0..spec.n);
                    let d = rng.gen_range(0..=10000);
                    add(a, b, d, &mut edges);
                }
            }
        }
        GraphFamily::Clustered => {
            let n = spec.n.max(1);
            for c in 0..6 {
                for a in 0..n {
                    let k = rng.gen_range(0..=spec.m);
                    for _ in 0..k {
                        let b = rng.gen_range(0..n);
                        let d = rng.gen_range(0..=7000);
                        add(c * n + a, c * n + b, d, &mut edges);
                    }
                }
            }
            for c in 0..6 {
                let k = rng.gen_range(0..=spec.o);
                for _ in 0..k {
                    let other = rng.gen_range(0..6);
                    if other == c {
                        continue;
                    }
                    let a = c * n + rng.gen_range(0..n);
                    let b = other * n + rng.gen_range(0..n);
                    let d = rng.gen_range(0..=15000);
                    add(a, b, d, &mut edges);
                }
            }
        }
        GraphFamily::DisjointComplete => {
            for c in 0..spec.m {
                for a in 0..spec.n {
                    for b in a + 1..spec.n {
                        let d = rng.gen_range(0..=10000);
                        add(c * spec.n + a, c * spec.n + b, d, &mut edges);
                    }
                }
            }
        }
    }
    let mut f = Facts::new();
    f.rows.insert("e".into(), Vec::new());
    for (a, b, d) in edges {
        f.add("e", vec![node_name(a), node_name(b), d.to_string()]);
        f.add("e", vec![node_name(b), node_name(a), d.to_string()]);
    }
    f
}
