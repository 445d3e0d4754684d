use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dlfilter::bench::{run_bench, write_csv, BenchConfig, BenchInput, Variant};
use dlfilter::corpus::{self, Benchmark};
use dlfilter::facts::{read_dir, Facts};
use dlfilter::gen::{self, GraphFamily, GraphGenSpec};
use dlfilter::pipeline::{derived_predicates, diff, load_program, render_rows, run, CliError};
use dlfilter_core::analysis::build_dep_graph;
use dlfilter_core::engine::Limits;
use dlfilter_core::transform::transform;
use dlfilter_core::{format_program, Program};

#[derive(Parser)]
#[command(
    name = "dlfilter",
    version,
    about = "Run, transform, compare and benchmark Datalog programs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Directory with one `<pred>.csv` per EDB predicate.
    #[arg(long, global = true)]
    facts: Option<PathBuf>,
    /// Apply the filter-predicate transformation before running.
    #[arg(long, global = true)]
    transform: bool,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_iterations: u64,
    #[arg(long, global = true, default_value_t = 100_000_000)]
    max_tuples: u64,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (or directory for generators).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Keep every k-th value of generated ranges.
    #[arg(long, global = true, default_value_t = 1)]
    stride: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a program and print the tuples of the queried predicates.
    Run {
        /// A `.dl` file or the name of a bundled benchmark.
        program: String,
        #[arg(long)]
        query: Vec<String>,
    },
    /// Print the transformed program.
    Transform { program: String },
    /// Evaluate a program and its transformation and compare the results.
    Diff {
        program: String,
        #[arg(long, value_delimiter = ',')]
        preds: Vec<String>,
    },
    /// Time program variants and write a CSV report.
    Bench {
        /// Benchmark names or `.dl` files; `all` runs the whole corpus.
        benchmarks: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "original,fp")]
        variants: Vec<Variant>,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
    /// Generate an `e/3` flight graph.
    GenGraph {
        #[arg(long)]
        family: Option<GraphFamily>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        o: usize,
        /// One of the 19 graph presets (1-based).
        #[arg(long)]
        preset: Option<usize>,
    },
    /// Write the fact files of a bundled benchmark.
    GenData { benchmark: String },
    /// Print the predicate dependency graph in DOT.
    Deps { program: String },
    /// List the bundled benchmarks.
    List,
}

struct Loaded {
    program: Program,
    facts: Facts,
    bench: Option<Benchmark>,
}

impl Cli {
    fn limits(&self) -> Limits {
        Limits {
            max_iterations: self.max_iterations,
            max_tuples: self.max_tuples,
        }
    }

    fn load(&self, arg: &str) -> Result<Loaded, CliError> {
        let path = Path::new(arg);
        let (text, bench) = if path.exists() {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{arg}: {e}")))?;
            (text, None)
        } else if let Some(b) = corpus::find(arg) {
            (b.program.to_string(), Some(b))
        } else {
            return Err(CliError::Usage(format!(
                "{arg}: no such file or bundled benchmark"
            )));
        };
        let program = load_program(&text)?;
        let facts = match (&self.facts, &bench) {
            (Some(dir), _) => {
                let (facts, warnings) = read_dir(dir, &program)?;
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                facts
            }
            (None, Some(b)) => b.facts(self.stride),
            (None, None) => Facts::new(),
        };
        Ok(Loaded {
            program,
            facts,
            bench,
        })
    }

    fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => {
                fs::write(p, text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
            None => {
                let _ = std::io::stdout().write_all(text.as_bytes());
                Ok(())
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.cmd {
        Cmd::Run { program, query } => {
            let l = cli.load(program)?;
            let prog = if cli.transform {
                transform(&l.program)?.program
            } else {
                l.program.clone()
            };
            let out = run(&prog, &l.facts, cli.limits())?;
            let preds: Vec<String> = if !query.is_empty() {
                query.clone()
            } else if let Some(b) = &l.bench {
                b.answer.iter().map(|s| s.to_string()).collect()
            } else {
                derived_predicates(&l.program)
            };
            let mut text = String::new();
            for p in &preds {
                if preds.len() > 1 {
                    text.push_str(&format!("# {p}\n"));
                }
                for row in render_rows(&out.db, p)? {
                    text.push_str(&row);
                    text.push('\n');
                }
            }
            cli.emit(&text)?;
            eprintln!(
                "{} tuples derived, {} instantiations, {:.3}s",
                out.stats.derived(),
                out.stats.instantiations(),
                out.elapsed.as_secs_f64()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Transform { program } => {
            let l = cli.load(program)?;
            let t = transform(&l.program)?;
            cli.emit(&format_program(&t.program))?;
            eprintln!(
                "{} filter predicates, {} bound predicates",
                t.filters.iter().filter(|f| !f.shared).count(),
                t.bounds.len()
            );
            for (clause, var) in &t.untransformed {
                eprintln!("note: no usable condition for `{var}` in clause {clause}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Diff { program, preds } => {
            let l = cli.load(program)?;
            let preds = (!preds.is_empty()).then_some(preds.as_slice());
            let report = diff(&l.program, &l.facts, preds, cli.limits())?;
            if report.identical_programs {
                println!("identical programs");
            }
            for d in &report.preds {
                for t in &d.missing {
                    println!("- {}({t})", d.pred);
                }
                for t in &d.extra {
                    println!("+ {}({t})", d.pred);
                }
            }
            if report.is_empty() {
                println!("no differences on {} predicates", report.preds.len());
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Bench {
            benchmarks,
            variants,
            repeat,
            warmup,
        } => {
            let cfg = BenchConfig {
                variants: variants.clone(),
                repeat: *repeat,
                warmup: *warmup,
                limits: cli.limits(),
            };
            let names: Vec<String> = if benchmarks.iter().any(|b| b == "all") {
                corpus::benchmarks().into_iter().map(|b| b.name).collect()
            } else {
                benchmarks.clone()
            };
            if names.is_empty() {
                return Err(CliError::Usage("bench: name at least one benchmark".into()));
            }
            let mut reports = Vec::new();
            for name in &names {
                let l = cli.load(name)?;
                let mut input = match &l.bench {
                    Some(b) => BenchInput::from_benchmark(b, cli.stride)?,
                    None => BenchInput::from_program(name, l.program.clone(), Facts::new()),
                };
                if cli.facts.is_some() || l.bench.is_none() {
                    input.facts = l.facts;
                }
                let mut cfg = cfg.clone();
                if input.cmr.is_none() {
                    cfg.variants
                        .retain(|v| matches!(v, Variant::Original | Variant::Fp));
                }
                let rep = run_bench(&input, &cfg)?;
                print!("{rep}");
                reports.push(rep);
            }
            if let Some(path) = &cli.out {
                write_csv(path, &reports)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            }
            Ok(if reports.iter().any(|r| r.failed) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Cmd::GenGraph {
            family,
            n,
            m,
            o,
            preset,
        } => {
            let seed = cli.seed.unwrap_or(corpus::DEFAULT_GRAPH_SEED);
            let spec = match (preset, family) {
                (Some(k), _) => gen::preset(*k, seed).ok_or_else(|| {
                    CliError::Usage(format!("preset must be 1..={}", gen::GRAPH_PRESETS.len()))
                })?,
                (None, Some(f)) => GraphGenSpec::new(*f, *n, *m, *o, seed),
                (None, None) => {
                    return Err(CliError::Usage(
                        "gen-graph needs --family or --preset".into(),
                    ))
                }
            };
            let facts = gen::gen_graph(&spec);
            write_facts(cli, &facts)?;
            eprintln!("{} nodes, {} edge rows", spec.nodes(), facts.len("e"));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::GenData { benchmark } => {
            let b = corpus::find(benchmark)
                .ok_or_else(|| CliError::Usage(format!("unknown benchmark `{benchmark}`")))?;
            write_facts(cli, &b.facts(cli.stride))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Deps { program } => {
            let l = cli.load(program)?;
            cli.emit(&build_dep_graph(&l.program).to_dot())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::List => {
            for b in corpus::benchmarks() {
                println!("{}", b.name);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn write_facts(cli: &Cli, facts: &Facts) -> Result<(), CliError> {
    match &cli.out {
        Some(dir) => {
            facts.write_dir(dir)?;
        }
        None => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(std::io::stdout());
            for rows in facts.rows.values() {
                for r in rows {
                    w.write_record(r)
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                }
            }
            let _ = w.flush();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
