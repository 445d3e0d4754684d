//! Timed comparison of program variants.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use dlfilter_core::engine::Limits;
use dlfilter_core::transform::transform;
use dlfilter_core::Program;

use crate::corpus::Benchmark;
use crate::facts::Facts;
use crate::pipeline::{
    answer_hash, answers, derived_predicates, filter_ratio, load_program, run, CliError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Original,
    Fp,
    Cmr,
    CmrFp,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "original" => Ok(Variant::Original),
            "fp" => Ok(Variant::Fp),
            "cmr" => Ok(Variant::Cmr),
            "cmr+fp" => Ok(Variant::CmrFp),
            other => Err(format!(
                "unknown variant `{other}` (original, fp, cmr, cmr+fp)"
            )),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Original => "original",
            Variant::Fp => "fp",
            Variant::Cmr => "cmr",
            Variant::CmrFp => "cmr+fp",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub variants: Vec<Variant>,
    pub repeat: usize,
    pub warmup: usize,
    pub limits: Limits,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            variants: vec![Variant::Original, Variant::Fp],
            repeat: 3,
            warmup: 1,
            limits: Limits::default(),
        }
    }
}

/// A program with its data, ready to benchmark.
#[derive(Clone, Debug)]
pub struct BenchInput {
    pub name: String,
    pub program: Program,
    pub answer: Vec<String>,
    pub cmr: Option<(Program, String)>,
    pub facts: Facts,
}

impl BenchInput {
    pub fn from_benchmark(b: &Benchmark, stride: usize) -> Result<Self, CliError> {
        let cmr = match b.cmr {
            Some((text, answer)) => Some((load_program(text)?, answer.to_string())),
            None => None,
        };
        Ok(BenchInput {
            name: b.name.clone(),
            program: load_program(b.program)?,
            answer: b.answer.iter().map(|s| s.to_string()).collect(),
            cmr,
            facts: b.facts(stride),
        })
    }

    pub fn from_program(name: &str, program: Program, facts: Facts) -> Self {
        let answer = derived_predicates(&program);
        BenchInput {
            name: name.to_string(),
            program,
            answer,
            cmr: None,
            facts,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VariantRow {
    pub variant: Variant,
    pub median: Duration,
    pub min: Duration,
    pub relative_pct: f64,
    pub tuples: u64,
    pub instantiations: u64,
    pub answers_hash: u64,
    /// Filtered over original generator sizes (transformed variants).
    pub filter_ratio: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub benchmark: String,
    pub rows: Vec<VariantRow>,
    /// Variants disagree on the answers.
    pub failed: bool,
    /// Some transformed variant kept more than 90% of its generator tuples.
    pub low_pruning: bool,
}

pub const LOW_PRUNING: f64 = 0.9;

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

pub fn run_bench(input: &BenchInput, cfg: &BenchConfig) -> Result<BenchReport, CliError> {
    if cfg.variants.is_empty() || cfg.repeat == 0 {
        return Err(CliError::Usage(
            "bench needs at least one variant and repeat >= 1".into(),
        ));
    }
    let mut rows: Vec<VariantRow> = Vec::new();
    for &variant in &cfg.variants {
        let (base, answer) = match variant {
            Variant::Original | Variant::Fp => (&input.program, input.answer.clone()),
            Variant::Cmr | Variant::CmrFp => match &input.cmr {
                Some((p, a)) => (p, vec![a.clone()]),
                None => {
                    return Err(CliError::Usage(format!(
                        "{} has no CMR variant",
                        input.name
                    )))
                }
            },
        };
        let transformed = match variant {
            Variant::Fp | Variant::CmrFp => Some(transform(base)?),
            _ => None,
        };
        let program = transformed.as_ref().map_or(base, |t| &t.program);
        for _ in 0..cfg.warmup {
            run(program, &input.facts, cfg.limits)?;
        }
        let mut times = Vec::with_capacity(cfg.repeat);
        let mut last = None;
        for _ in 0..cfg.repeat {
            let out = run(program, &input.facts, cfg.limits)?;
            times.push(out.elapsed);
            last = Some(out);
        }
        let out = last.expect("repeat >= 1");
        let ans = answers(&out.db, &answer)?;
        rows.push(VariantRow {
            variant,
            min: *times.iter().min().unwrap(),
            median: median(times),
            relative_pct: 100.0,
            tuples: out.stats.derived(),
            instantiations: out.stats.instantiations(),
            answers_hash: answer_hash(&ans),
            filter_ratio: transformed.as_ref().and_then(|t| filter_ratio(t, &out.db)),
        });
    }
    let base = rows
        .iter()
        .find(|r| r.variant == Variant::Original)
        .unwrap_or(&rows[0])
        .median
        .as_secs_f64();
    let base_variant = rows
        .iter()
        .find(|r| r.variant == Variant::Original)
        .map_or(rows[0].variant, |r| r.variant);
    for r in &mut rows {
        r.relative_pct = if r.variant == base_variant {
            100.0
        } else if base > 0.0 {
            100.0 * r.median.as_secs_f64() / base
        } else {
            f64::NAN
        };
    }
    let failed = rows.iter().any(|r| r.answers_hash != rows[0].answers_hash);
    let low_pruning = rows
        .iter()
        .any(|r| r.filter_ratio.is_some_and(|x| x > LOW_PRUNING));
    Ok(BenchReport {
        benchmark: input.name.clone(),
        rows,
        failed,
        low_pruning,
    })
}

pub const CSV_HEADER: [&str; 7] = [
    "benchmark",
    "variant",
    "median_s",
    "relative_pct",
    "tuples",
    "instantiations",
    "answers_hash",
];

pub fn write_csv(path: &Path, reports: &[BenchReport]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for rep in reports {
        for r in &rep.rows {
            w.write_record([
                rep.benchmark.clone(),
                r.variant.to_string(),
                format!("{:.6}", r.median.as_secs_f64()),
                format!("{:.2}", r.relative_pct),
                r.tuples.to_string(),
                r.instantiations.to_string(),
                format!("{:016x}", r.answers_hash),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}{}",
            self.benchmark,
            if self.failed {
                "  FAILED: variants disagree"
            } else {
                ""
            }
        )?;
        for r in &self.rows {
            write!(
                f,
                "  {:<8} {:>10.4}s {:>8.2}%  tuples={} inst={} hash={:016x}",
                r.variant.to_string(),
                r.median.as_secs_f64(),
                r.relative_pct,
                r.tuples,
                r.instantiations,
                r.answers_hash
            )?;
            if let Some(x) = r.filter_ratio {
                write!(f, " kept={:.1}%", 100.0 * x)?;
            }
            writeln!(f)?;
        }
        if self.low_pruning {
            writeln!(
                f,
                "  low pruning: filters keep more than {:.0}% of generator tuples",
                100.0 * LOW_PRUNING
            )?;
        }
        Ok(())
    }
}
