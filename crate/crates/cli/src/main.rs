use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracewam::bench::{self, BenchError, BenchResult, Mode};
use tracewam::compiler::load_program;
use tracewam::machine::{Config, Machine, MachineError, TimingBreakdown};

const EXIT_FAILURE: u8 = 1;
const EXIT_WRONG_ANSWER: u8 = 2;
const EXIT_COMPILE: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

#[derive(Parser)]
#[command(name = "tracewam", version, about = "Prolog engine with a tracing specializer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Load a program and print every answer to a goal.
    Run {
        file: PathBuf,
        #[arg(short = 'g', long = "goal")]
        goal: String,
    },
    /// Run benchmark programs under each execution mode.
    Bench {
        /// Benchmarks to run; all of them when empty.
        names: Vec<String>,
        /// Input size, replacing each benchmark's default.
        #[arg(long, global = true)]
        scale: Option<u64>,
    },
}

#[derive(Args)]
struct Opts {
    /// Calls before a predicate starts being traced.
    #[arg(long, global = true)]
    critical: Option<u64>,
    /// Calls before the trace is compiled.
    #[arg(long, global = true)]
    hot: Option<u64>,
    #[arg(long, global = true)]
    no_jit: bool,
    #[arg(long, global = true)]
    no_mutability: bool,
    #[arg(long, global = true)]
    heap_cells: Option<usize>,
    /// Largest heap before the run fails.
    #[arg(long, global = true)]
    max_heap_cells: Option<usize>,
    /// Print each trace as it is compiled.
    #[arg(long, global = true)]
    trace_dump: bool,
    /// Print the micro-ops of each compiled trace.
    #[arg(long, global = true)]
    disasm: bool,
    /// Write per-run statistics as CSV.
    #[arg(long, global = true)]
    stats_out: Option<PathBuf>,
    #[arg(long, global = true)]
    reps: Option<u32>,
    /// Check every block transition against the instruction graphs.
    #[arg(long, global = true)]
    validate: bool,
}

impl Opts {
    fn config(&self) -> Config {
        let mut c = Config {
            validate: self.validate,
            trace_dump: self.trace_dump,
            disasm: self.disasm,
            jit: !self.no_jit,
            mutability: !self.no_mutability,
            ..Config::default()
        };
        if let Some(n) = self.critical {
            c.critical = n;
        }
        if let Some(n) = self.hot {
            c.hot = n;
        }
        if let Some(n) = self.heap_cells {
            c.heap_cells = n;
        }
        if let Some(n) = self.max_heap_cells {
            c.max_heap_cells = n;
        }
        c
    }

    fn modes(&self) -> Vec<Mode> {
        if self.no_jit {
            vec![Mode::DefaultOnly]
        } else if self.no_mutability {
            vec![Mode::DefaultOnly, Mode::SpecNoMutability]
        } else {
            Mode::ALL.to_vec()
        }
    }

    fn mode(&self) -> Mode {
        *self.modes().last().expect("at least one mode")
    }
}

fn machine_code(e: &MachineError) -> u8 {
    match e {
        MachineError::HeapExhausted { .. } => EXIT_RESOURCE,
        MachineError::Compile(_) => EXIT_COMPILE,
    }
}

fn run(file: &PathBuf, goal: &str, opts: &Opts) -> Result<(), (u8, String)> {
    let text = std::fs::read_to_string(file).map_err(|e| (EXIT_FAILURE, format!("{}: {e}", file.display())))?;
    let program = load_program(&text).map_err(|e| (EXIT_COMPILE, e.to_string()))?;
    let mut m = Machine::new(program, opts.config());
    let result = m.solve(goal);
    for line in m.debug_log.drain(..) {
        eprintln!("{line}");
    }
    let answers = result.map_err(|e| (machine_code(&e), e.to_string()))?;
    if answers.is_empty() {
        println!("no");
    } else {
        println!("{}", answers.join(" ;\n"));
    }
    if let Some(path) = &opts.stats_out {
        let row = BenchResult {
            name: file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            mode: opts.mode(),
            breakdown: m.timer.breakdown,
            stats: m.stats.clone(),
            speedup: 1.0,
        };
        bench::emit_stats_csv(&[row], path).map_err(|e| (EXIT_FAILURE, e.to_string()))?;
    }
    Ok(())
}

fn bench_code(e: &BenchError) -> u8 {
    match e {
        BenchError::WrongAnswer { .. } => EXIT_WRONG_ANSWER,
        BenchError::Machine { source, .. } => machine_code(source),
        _ => EXIT_FAILURE,
    }
}

fn secs(b: &TimingBreakdown) -> f64 {
    b.total().as_secs_f64()
}

fn run_bench(names: &[String], scale: Option<u64>, opts: &Opts) -> Result<(), (u8, String)> {
    let fail = |e: BenchError| (bench_code(&e), e.to_string());
    let names: Vec<String> = if names.is_empty() {
        bench::suite_names().into_iter().map(String::from).collect()
    } else {
        names.to_vec()
    };
    let mut specs = Vec::new();
    for n in &names {
        let mut s = bench::suite_benchmark(n).map_err(fail)?;
        if let Some(k) = scale {
            s = s.with_scale(k);
        }
        if let Some(r) = opts.reps {
            s.reps = r;
        }
        specs.push(s);
    }
    let base = opts.config();
    let mut all = Vec::new();
    for spec in &specs {
        let rows = bench::run_suite(std::slice::from_ref(spec), &opts.modes(), &base).map_err(fail)?;
        for r in &rows {
            println!(
                "{:<14} {:<22} {:>9.4}s  speedup {:>7.4}  tests/entry {:>6.3}  exits {}/{}  rebuilds {}",
                r.name,
                r.mode.name(),
                secs(&r.breakdown),
                r.speedup,
                r.stats.tests_per_entry(),
                r.stats.side_exits_elementary,
                r.stats.side_exits_gc,
                r.stats.rebuilds
            );
        }
        all.extend(rows);
    }
    if let Some(path) = &opts.stats_out {
        bench::emit_stats_csv(&all, path).map_err(fail)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_FAILURE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let r = match &cli.command {
        Command::Run { file, goal } => run(file, goal, &cli.opts),
        Command::Bench { names, scale } => run_bench(names, *scale, &cli.opts),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
