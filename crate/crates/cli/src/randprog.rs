//! Random programs with linear constraints, for property checks.

use std::fmt::Write;

use dlfilter_core::{parse_program, Program};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::facts::Facts;

#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub text: String,
    pub program: Program,
    pub facts: Facts,
    /// Predicates defined by rules.
    pub derived: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct RandomProgramConfig {
    pub max_rules: usize,
    pub max_arity: usize,
    /// Number of distinct values per column.
    pub max_domain: i64,
    pub max_rows: usize,
}

impl Default for RandomProgramConfig {
    fn default() -> Self {
        RandomProgramConfig {
            max_rules: 4,
            max_arity: 3,
            max_domain: 50,
            max_rows: 25,
        }
    }
}

struct Pred {
    name: String,
    arity: usize,
    functional: bool,
}

fn decl(p: &Pred) -> String {
    let vars: Vec<String> = (1..=p.arity).map(|i| format!("x{i}")).collect();
    let types: Vec<String> = vars.iter().map(|v| format!("int[64]({v})")).collect();
    if p.functional {
        let (k, v) = vars.split_at(p.arity - 1);
        format!(
            "{}[{}]={} -> {}.",
            p.name,
            k.join(","),
            v[0],
            types.join(", ")
        )
    } else {
        format!("{}({}) -> {}.", p.name, vars.join(","), types.join(", "))
    }
}

/// `c1*x + c2*y + k op c3*z` style constraint over `vars`.
fn linear<R: Rng>(rng: &mut R, vars: &[String], extra: Option<&str>) -> String {
    let n = rng.gen_range(1..=vars.len().min(3));
    let chosen: Vec<&String> = vars.choose_multiple(rng, n).collect();
    let term = |rng: &mut R, v: &str| -> String {
        match rng.gen_range(-3i64..=3) {
            0 | 1 => v.to_string(),
            -1 => format!("-1*{v}"),
            c => format!("{c}*{v}"),
        }
    };
    let split = rng.gen_range(1..=chosen.len());
    let mut lhs: Vec<String> = chosen[..split].iter().map(|v| term(rng, v)).collect();
    let mut rhs: Vec<String> = chosen[split..].iter().map(|v| term(rng, v)).collect();
    if let Some(e) = extra {
        rhs.push(e.to_string());
    }
    if rng.gen_bool(0.7) || rhs.is_empty() {
        rhs.push(rng.gen_range(-20i64..=60).to_string());
    }
    if lhs.is_empty() {
        lhs.push("0".into());
    }
    let op = *["<=", "<=", ">=", ">=", "<", ">", "=", "!="]
        .choose(rng)
        .unwrap();
    format!("{} {op} {}", lhs.join(" + "), rhs.join(" + "))
}

fn edb_rows<R: Rng>(rng: &mut R, p: &Pred, lo: i64, dom: i64, max_rows: usize, facts: &mut Facts) {
    let rows = rng.gen_range(0..=max_rows);
    let mut keys = std::collections::BTreeSet::new();
    for _ in 0..rows {
        let row: Vec<String> = (0..p.arity)
            .map(|_| (lo + rng.gen_range(0..dom)).to_string())
            .collect();
        if p.functional && !keys.insert(row[..p.arity - 1].to_vec()) {
            continue;
        }
        facts.add(&p.name, row);
    }
}

/// A program of at most `max_rules` rules over integer EDB relations,
/// possibly recursive, with linear comparisons, functional links and an
/// aggregate bound. Derived values stay inside a fixed window so every
/// program terminates.
pub fn random_program<R: Rng>(rng: &mut R, cfg: &RandomProgramConfig) -> RandomInstance {
    loop {
        if let Some(inst) = try_random_program(rng, cfg) {
            return inst;
        }
    }
}

fn try_random_program<R: Rng>(rng: &mut R, cfg: &RandomProgramConfig) -> Option<RandomInstance> {
    let mut text = String::new();
    let mut facts = Facts::new();
    let n_edb = rng.gen_range(1..=3);
    let mut edb: Vec<Pred> = (0..n_edb)
        .map(|i| Pred {
            name: format!("e{i}"),
            arity: rng.gen_range(1..=cfg.max_arity),
            functional: false,
        })
        .collect();
    if rng.gen_bool(0.4) {
        edb.push(Pred {
            name: "fv".into(),
            arity: 2,
            functional: true,
        });
    }
    let lo = rng.gen_range(-10..=5);
    let dom = rng.gen_range(5..=cfg.max_domain);
    for p in &edb {
        writeln!(text, "{}", decl(p)).unwrap();
        edb_rows(rng, p, lo, dom, cfg.max_rows, &mut facts);
    }
    let with_agg = rng.gen_bool(0.3);
    if with_agg {
        let src = &edb[0];
        let col = rng.gen_range(0..src.arity);
        let args: Vec<String> = (0..src.arity)
            .map(|i| {
                if i == col {
                    "v".to_string()
                } else {
                    "_".to_string()
                }
            })
            .collect();
        writeln!(
            text,
            "mx[]=n -> int[64](n).\nmx[]=n <- agg<<n=max(v)>> {}({}).",
            src.name,
            args.join(",")
        )
        .unwrap();
    }
    let n_idb = rng.gen_range(1..=2);
    let idb: Vec<Pred> = (0..n_idb)
        .map(|i| Pred {
            name: format!("r{i}"),
            arity: rng.gen_range(1..=cfg.max_arity),
            functional: false,
        })
        .collect();
    for p in &idb {
        writeln!(text, "{}", decl(p)).unwrap();
    }
    let n_rules = rng.gen_range(1..=cfg.max_rules);
    for k in 0..n_rules {
        let head = if k < idb.len() {
            &idb[k]
        } else {
            idb.choose(rng).unwrap()
        };
        let mut body: Vec<String> = Vec::new();
        let mut bound: Vec<String> = Vec::new();
        let pool: Vec<String> = (0..5).map(|i| format!("v{i}")).collect();
        let n_atoms = rng.gen_range(1..=3);
        for a in 0..n_atoms {
            // The first atom of the first rules reads EDB so that the IDB is
            // reachable.
            let p = if a == 0 && k < idb.len() || rng.gen_bool(0.6) {
                edb.iter()
                    .filter(|p| !p.functional)
                    .collect::<Vec<_>>()
                    .choose(rng)
                    .copied()
                    .unwrap()
            } else {
                idb.choose(rng).unwrap()
            };
            let args: Vec<String> = (0..p.arity)
                .map(|_| match rng.gen_range(0..10) {
                    0 => "_".to_string(),
                    1 => (lo + rng.gen_range(0..dom)).to_string(),
                    _ => pool.choose(rng).unwrap().clone(),
                })
                .collect();
            for v in &args {
                if v.starts_with('v') && !bound.contains(v) {
                    bound.push(v.clone());
                }
            }
            body.push(format!("{}({})", p.name, args.join(",")));
        }
        if bound.is_empty() {
            return None;
        }
        if edb.iter().any(|p| p.functional) && rng.gen_bool(0.5) {
            let key = bound.choose(rng).unwrap().clone();
            body.push(format!("fv[{key}]=w"));
            bound.push("w".into());
        }
        if rng.gen_bool(0.3) && bound.len() >= 2 {
            let xs: Vec<&String> = bound.choose_multiple(rng, 2).collect();
            body.push(format!("z = {} + {}", xs[0], xs[1]));
            body.push(format!("z >= {}", lo));
            body.push(format!("z <= {}", lo + dom));
            bound.push("z".into());
        }
        for _ in 0..rng.gen_range(0..=2) {
            let extra = (with_agg && rng.gen_bool(0.3)).then_some("mx[]");
            body.push(linear(rng, &bound, extra));
        }
        let head_args: Vec<String> = (0..head.arity)
            .map(|_| bound.choose(rng).unwrap().clone())
            .collect();
        writeln!(
            text,
            "{}({}) <- {}.",
            head.name,
            head_args.join(","),
            body.join(", ")
        )
        .unwrap();
    }
    let program = parse_program(&text).ok()?;
    if !dlfilter_core::validate(&program).is_empty()
        || dlfilter_core::analysis::plan_program(&program).is_err()
    {
        return None;
    }
    let derived = idb.iter().map(|p| p.name.clone()).collect();
    Some(RandomInstance {
        text,
        program,
        facts,
        derived,
    })
}

/// One rule over up to three generator relations drawn from a domain of
/// at most `max_domain` values, with linear or product constraints and
/// functional links.
pub fn random_single_rule<R: Rng>(rng: &mut R, max_domain: i64) -> RandomInstance {
    loop {
        let mut text = String::from("val[k]=v -> int[64](k), int[64](v).\n");
        let mut facts = Facts::new();
        let lo = rng.gen_range(-8..=4);
        let dom = rng.gen_range(3..=max_domain);
        for k in lo..lo + dom {
            if rng.gen_bool(0.8) {
                facts.add(
                    "val",
                    vec![k.to_string(), (lo + rng.gen_range(0..dom)).to_string()],
                );
            }
        }
        let n_gen = rng.gen_range(1..=3);
        let mut vars: Vec<String> = Vec::new();
        let mut body = Vec::new();
        for g in 0..n_gen {
            let arity = rng.gen_range(1..=2);
            let p = Pred {
                name: format!("g{g}"),
                arity,
                functional: false,
            };
            writeln!(text, "{}", decl(&p)).unwrap();
            let rows = rng.gen_range(1..=dom as usize);
            for _ in 0..rows {
                let row: Vec<String> = (0..arity)
                    .map(|_| (lo + rng.gen_range(0..dom)).to_string())
                    .collect();
                facts.add(&p.name, row);
            }
            let args: Vec<String> = (0..arity)
                .map(|i| format!("{}{}", ["a", "b", "c"][g], i))
                .collect();
            body.push(format!("{}({})", p.name, args.join(",")));
            vars.extend(args.iter().cloned());
            if rng.gen_bool(0.35) {
                let v = format!("l{g}");
                body.push(format!("val[{}]={v}", args[0]));
                vars.push(v);
            }
        }
        for _ in 0..rng.gen_range(1..=3) {
            if rng.gen_bool(0.2) && vars.len() >= 2 {
                let xs: Vec<&String> = vars.choose_multiple(rng, 2).collect();
                let op = *["<=", ">=", "="].choose(rng).unwrap();
                body.push(format!(
                    "{}*{} {op} {}",
                    xs[0],
                    xs[1],
                    rng.gen_range(-10..=40)
                ));
            } else {
                body.push(linear(rng, &vars, None));
            }
        }
        let head: Vec<String> = vars.iter().take(3).cloned().collect();
        let decl_vars: Vec<String> = (1..=head.len()).map(|i| format!("x{i}")).collect();
        writeln!(
            text,
            "out({}) -> {}.",
            decl_vars.join(","),
            decl_vars
                .iter()
                .map(|v| format!("int[64]({v})"))
                .collect::<Vec<_>>()
                .join(", ")
        )
        .unwrap();
        writeln!(text, "out({}) <- {}.", head.join(","), body.join(", ")).unwrap();
        let Ok(program) = parse_program(&text) else {
            continue;
        };
        if !dlfilter_core::validate(&program).is_empty() {
            continue;
        }
        return RandomInstance {
            text,
            program,
            facts,
            derived: vec!["out".into()],
        };
    }
}
