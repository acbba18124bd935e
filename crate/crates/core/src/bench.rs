//! Benchmark suite, repeated timed runs and CSV reporting.

use std::path::Path;
use std::time::Duration;

use thiserror::Error;

use crate::compiler::load_program;
use crate::machine::{Component, Config, Machine, MachineError, RunStats, TimingBreakdown};

pub const SEED_VAR: &str = "TRACEWAM_SEED";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_REPS: u32 = 10;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{name} ({mode}): wrong answer\n{diff}")]
    WrongAnswer { name: String, mode: &'static str, diff: String },
    #[error("{name}: {source}")]
    Machine {
        name: String,
        #[source]
        source: MachineError,
    },
    #[error("unknown benchmark {0}")]
    Unknown(String),
    #[error("scale must be positive")]
    InvalidScale,
    #[error("times must be positive, got {old} and {new}")]
    NonPositiveTime { old: f64, new: f64 },
    #[error("no results to write")]
    NoResults,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    DefaultOnly,
    SpecNoMutability,
    SpecWithMutability,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::DefaultOnly, Mode::SpecNoMutability, Mode::SpecWithMutability];

    pub fn name(self) -> &'static str {
        match self {
            Mode::DefaultOnly => "default_only",
            Mode::SpecNoMutability => "spec_no_mutability",
            Mode::SpecWithMutability => "spec_with_mutability",
        }
    }

    /// `base` with the switches this mode fixes.
    pub fn config(self, base: &Config) -> Config {
        let mut c = base.clone();
        match self {
            Mode::DefaultOnly => c.jit = false,
            Mode::SpecNoMutability => {
                c.jit = true;
                c.mutability = false;
            }
            Mode::SpecWithMutability => {
                c.jit = true;
                c.mutability = true;
            }
        }
        c
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub name: String,
    pub source: String,
    /// Entry goal; `{N}` is replaced by the scale and `{SEED}` by the seed.
    pub goal: String,
    pub scale: u64,
    pub reps: u32,
    /// Answers every mode must reproduce. Without them the checks are skipped.
    pub expected: Option<Vec<String>>,
}

impl BenchmarkSpec {
    pub fn goal_text(&self, seed: u64) -> String {
        self.goal.replace("{N}", &self.scale.to_string()).replace("{SEED}", &seed.to_string())
    }

    /// The same benchmark at another scale. Stored answers only hold for the
    /// default scale, so they are dropped.
    pub fn with_scale(mut self, scale: u64) -> BenchmarkSpec {
        if scale != self.scale {
            self.expected = None;
        }
        self.scale = scale;
        self
    }
}

struct Entry {
    name: &'static str,
    source: &'static str,
    goal: &'static str,
    table_size: u64,
    desk: u64,
    /// Answer at `desk` scale and the default seed.
    expected: &'static str,
}

const SUITE: &[Entry] = &[
    Entry {
        name: "append",
        source: include_str!("../benchmarks/append.pl"),
        goal: "main({N}, R)",
        table_size: 63_000_000,
        desk: 200_000,
        expected: "R = 200010",
    },
    Entry {
        name: "nreverse",
        source: include_str!("../benchmarks/nreverse.pl"),
        goal: "main({N}, R)",
        table_size: 52_000,
        desk: 1_000,
        expected: "R = 1000",
    },
    Entry {
        name: "tak",
        source: include_str!("../benchmarks/tak.pl"),
        goal: "main({N}, R)",
        table_size: 57,
        desk: 18,
        expected: "R = 7",
    },
    Entry {
        name: "hanoi",
        source: include_str!("../benchmarks/hanoi.pl"),
        goal: "main({N}, R)",
        table_size: 24,
        desk: 16,
        expected: "R = 65535",
    },
    Entry {
        name: "quicksort",
        source: include_str!("../benchmarks/quicksort.pl"),
        goal: "main({N}, {SEED}, R)",
        table_size: 52_000,
        desk: 5_200,
        expected: "R = 32762",
    },
    Entry {
        name: "binary_trees",
        source: include_str!("../benchmarks/binary_trees.pl"),
        goal: "main({N}, R)",
        table_size: 18,
        desk: 10,
        expected: "R = 27207",
    },
    Entry {
        name: "nsieve",
        source: include_str!("../benchmarks/nsieve.pl"),
        goal: "main({N}, R)",
        table_size: 5,
        desk: 2,
        expected: "R = 566",
    },
    Entry {
        name: "partial_sums",
        source: include_str!("../benchmarks/partial_sums.pl"),
        goal: "main({N}, R)",
        table_size: 30_000_000,
        desk: 300_000,
        expected: "R = r(599999,998543,-69300)",
    },
    Entry {
        name: "recursive",
        source: include_str!("../benchmarks/recursive.pl"),
        goal: "main({N}, R)",
        table_size: 11,
        desk: 4,
        expected: "R = r(125,17711,5)",
    },
];

pub fn suite_names() -> Vec<&'static str> {
    SUITE.iter().map(|e| e.name).collect()
}

/// Full-size input of `name`; desk scales are a fraction of it.
pub fn table_size(name: &str) -> Option<u64> {
    SUITE.iter().find(|e| e.name == name).map(|e| e.table_size)
}

/// A suite program at its desk scale.
pub fn suite_benchmark(name: &str) -> Result<BenchmarkSpec, BenchError> {
    let e = SUITE
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| BenchError::Unknown(name.to_owned()))?;
    let expected = (seed() == DEFAULT_SEED).then(|| vec![e.expected.to_owned()]);
    Ok(BenchmarkSpec {
        name: e.name.to_owned(),
        source: e.source.to_owned(),
        goal: e.goal.to_owned(),
        scale: e.desk,
        reps: DEFAULT_REPS,
        expected,
    })
}

pub fn suite() -> Vec<BenchmarkSpec> {
    SUITE.iter().map(|e| suite_benchmark(e.name).expect("suite entry")).collect()
}

/// Seed for generated test data, from `TRACEWAM_SEED` when set.
pub fn seed() -> u64 {
    std::env::var(SEED_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// One run of a benchmark.
#[derive(Debug, Clone)]
pub struct RunSample {
    pub breakdown: TimingBreakdown,
    /// Wall time of the query as seen by the timer.
    pub elapsed: Duration,
    pub stats: RunStats,
}

/// Runs `spec` once in a fresh machine.
pub fn run_once(spec: &BenchmarkSpec, mode: Mode, base: &Config) -> Result<RunSample, BenchError> {
    let err = |source| BenchError::Machine {
        name: spec.name.clone(),
        source,
    };
    let program = load_program(&spec.source).map_err(|e| err(e.into()))?;
    let mut m = Machine::new(program, mode.config(base));
    let q = m.compile_query(&spec.goal_text(seed())).map_err(err)?;
    let answers = m.run_query(&q).map_err(err)?;
    if let Some(expected) = &spec.expected {
        if &answers != expected {
            return Err(BenchError::WrongAnswer {
                name: spec.name.clone(),
                mode: mode.name(),
                diff: diff(expected, &answers),
            });
        }
    }
    Ok(RunSample {
        breakdown: m.timer.breakdown,
        elapsed: m.timer.elapsed,
        stats: std::mem::take(&mut m.stats),
    })
}

/// Runs `spec.reps` repetitions one after another. Returns the mean
/// breakdown and the counters summed over all repetitions, with the
/// answers of the first.
pub fn run_benchmark(spec: &BenchmarkSpec, mode: Mode, base: &Config) -> Result<(TimingBreakdown, RunStats), BenchError> {
    if spec.scale == 0 {
        return Err(BenchError::InvalidScale);
    }
    let reps = spec.reps.max(1);
    let mut total = TimingBreakdown::default();
    let mut stats = RunStats::default();
    for i in 0..reps {
        let s = run_once(spec, mode, base)?;
        total.add(&s.breakdown);
        if i == 0 {
            stats.solutions = s.stats.solutions.clone();
        }
        stats.accumulate(&s.stats);
    }
    Ok((total.scaled(reps), stats))
}

fn diff(expected: &[String], got: &[String]) -> String {
    let mut out = String::new();
    for i in 0..expected.len().max(got.len()) {
        match (expected.get(i), got.get(i)) {
            (Some(a), Some(b)) if a == b => out.push_str(&format!("  {a}\n")),
            (a, b) => {
                if let Some(a) = a {
                    out.push_str(&format!("- {a}\n"));
                }
                if let Some(b) = b {
                    out.push_str(&format!("+ {b}\n"));
                }
            }
        }
    }
    out
}

/// `old / new`.
pub fn compute_speedup(old_time: f64, new_time: f64) -> Result<f64, BenchError> {
    if !(old_time > 0.0 && new_time > 0.0) {
        return Err(BenchError::NonPositiveTime {
            old: old_time,
            new: new_time,
        });
    }
    Ok(old_time / new_time)
}

/// Percentage gained for a speedup ratio.
pub fn compute_improvement(speedup: f64) -> f64 {
    (speedup - 1.0) * 100.0
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub name: String,
    pub mode: Mode,
    pub breakdown: TimingBreakdown,
    pub stats: RunStats,
    /// Against the default-only row of the same benchmark.
    pub speedup: f64,
}

impl BenchResult {
    pub fn improvement(&self) -> f64 {
        compute_improvement(self.speedup)
    }
}

/// Runs each benchmark under each mode and fills in speedups. Default-only
/// answers serve as the expected output for specs that have none.
pub fn run_suite(specs: &[BenchmarkSpec], modes: &[Mode], base: &Config) -> Result<Vec<BenchResult>, BenchError> {
    let mut out = Vec::new();
    for spec in specs {
        let mut spec = spec.clone();
        let mut baseline: Option<f64> = None;
        let mut rows = Vec::new();
        for &mode in modes {
            let (breakdown, stats) = run_benchmark(&spec, mode, base)?;
            if mode == Mode::DefaultOnly {
                baseline = Some(breakdown.total().as_secs_f64());
                if spec.expected.is_none() {
                    spec.expected = Some(stats.solutions.clone());
                }
            }
            rows.push(BenchResult {
                name: spec.name.clone(),
                mode,
                breakdown,
                stats,
                speedup: 1.0,
            });
        }
        if let Some(old) = baseline {
            for r in &mut rows {
                if r.mode != Mode::DefaultOnly {
                    let new = r.breakdown.total().as_secs_f64();
                    r.speedup = compute_speedup(old, new).unwrap_or(1.0);
                }
            }
        }
        out.extend(rows);
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 17] = [
    "name",
    "mode",
    "total_s",
    "default_emulator_s",
    "overflow_s",
    "garbage_collector_s",
    "monitor_and_trace_builder_s",
    "trace_compiler_s",
    "s_emulator_s",
    "speedup",
    "improvement_pct",
    "dispatches",
    "type_test_evals",
    "guard_evals",
    "side_exits_elementary",
    "side_exits_gc",
    "rebuilds",
];

fn csv_row(r: &BenchResult) -> Vec<String> {
    let f = |x: f64| format!("{x:.4}");
    let mut row = vec![
        r.name.clone(),
        r.mode.name().to_owned(),
        f(r.breakdown.total().as_secs_f64()),
    ];
    row.extend(Component::ALL.iter().map(|&c| f(r.breakdown.get(c).as_secs_f64())));
    row.push(f(r.speedup));
    row.push(f(r.improvement()));
    let s = &r.stats;
    row.extend(
        [s.dispatches, s.type_test_evals, s.guard_evals, s.side_exits_elementary, s.side_exits_gc, s.rebuilds]
            .iter()
            .map(|n| n.to_string()),
    );
    row
}

/// The CSV text for `results`.
pub fn stats_csv(results: &[BenchResult]) -> Result<String, BenchError> {
    if results.is_empty() {
        return Err(BenchError::NoResults);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record(csv_row(r))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("ascii csv"))
}

pub fn emit_stats_csv(results: &[BenchResult], path: &Path) -> Result<(), BenchError> {
    let text = stats_csv(results)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speedup_examples() {
        assert_eq!(compute_speedup(10.0, 10.0).unwrap(), 1.0);
        assert!((compute_speedup(12.357, 10.0).unwrap() - 1.2357).abs() < 1e-12);
        assert!((compute_speedup(9.0, 10.0).unwrap() - 0.9).abs() < 1e-12);
        assert!(compute_speedup(0.0, 1.0).is_err());
        assert!(compute_speedup(1.0, -2.0).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(compute_improvement(1.0), 0.0);
        assert_eq!(format!("{:.2}", compute_improvement(1.2357)), "23.57");
        assert_eq!(format!("{:.2}", compute_improvement(1.1099)), "10.99");
    }

    #[test]
    fn goal_substitution() {
        let s = suite_benchmark("quicksort").unwrap();
        assert_eq!(s.goal_text(7), "main(5200, 7, R)");
        assert!(suite_benchmark("fasta").is_err());
        assert!(s.with_scale(10).expected.is_none());
    }

    #[test]
    fn csv_shape() {
        let mut spec = suite_benchmark("hanoi").unwrap().with_scale(5);
        spec.reps = 2;
        let base = Config {
            critical: 3,
            hot: 6,
            ..Config::default()
        };
        let rows = run_suite(&[spec], &Mode::ALL, &base).unwrap();
        let text = stats_csv(&rows).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        for l in &lines {
            assert_eq!(l.split(',').count(), 17);
        }
        assert!(lines[1].starts_with("hanoi,default_only,"));
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols[9], "1.0000");
        assert_eq!(cols[10], "0.0000");
        assert!(stats_csv(&[]).is_err());
    }

    #[test]
    fn wrong_answer_reports_diff() {
        let mut spec = suite_benchmark("hanoi").unwrap();
        spec.scale = 3;
        spec.reps = 1;
        spec.expected = Some(vec!["R = 8".into()]);
        match run_benchmark(&spec, Mode::DefaultOnly, &Config::default()) {
            Err(BenchError::WrongAnswer { diff, .. }) => {
                assert!(diff.contains("- R = 8"));
                assert!(diff.contains("+ R = 7"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_only_has_no_specializer_time() {
        let mut spec = suite_benchmark("nreverse").unwrap().with_scale(40);
        spec.reps = 1;
        let base = Config {
            critical: 3,
            hot: 6,
            ..Config::default()
        };
        let (b, stats) = run_benchmark(&spec, Mode::DefaultOnly, &base).unwrap();
        for c in [Component::MonitorTraceBuilder, Component::TraceCompiler, Component::SEmulator] {
            assert_eq!(b.get(c), Duration::ZERO);
        }
        assert_eq!(stats.installs, 0);
        assert_eq!(stats.solutions, vec!["R = 40"]);
    }
}
