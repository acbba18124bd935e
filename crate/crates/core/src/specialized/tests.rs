use crate::compiler::{load_program, PredState};
use crate::machine::{Config, Event, Machine};
use crate::specialized::{ExitKind, MicroOp};

const NREV: &str = "app([], L, L).
app([H|T], L, [H|R]) :- app(T, L, R).
nrev([], []).
nrev([H|T], R) :- nrev(T, RT), app(RT, [H], R).
range(N, N, [N]) :- !.
range(I, N, [I|T]) :- I < N, J is I + 1, range(J, N, T).
bench(0, _) :- !.
bench(K, N) :- range(1, N, L), nrev(L, _), K1 is K - 1, bench(K1, N).
";

fn run(text: &str, query: &str, config: Config) -> (Vec<String>, Machine) {
    let mut m = Machine::new(load_program(text).unwrap(), config);
    let s = m.solve(query).unwrap();
    (s, m)
}

fn spec(critical: u64, hot: u64) -> Config {
    Config {
        critical,
        hot,
        validate: true,
        ..Config::default()
    }
}

#[test]
fn nreverse_agrees_with_default() {
    let q = "bench(20, 30), range(1, 30, L), nrev(L, R)";
    let (d, _) = run(NREV, q, Config { jit: false, ..spec(0, 0) });
    let (s, m) = run(NREV, q, spec(20, 40));
    assert_eq!(d, s);
    assert!(m.stats.installs >= 1, "{:?}", m.events);
    assert!(m.stats.semulator_runs > 0);
}

#[test]
fn nreverse_needs_fewer_tests() {
    let q = "bench(40, 30)";
    let (_, d) = run(NREV, q, Config { jit: false, ..spec(0, 0) });
    let (_, s) = run(NREV, q, spec(50, 100));
    let dt = d.stats.tests_per_entry();
    let st = s.stats.tests_per_entry();
    eprintln!("default {dt:.3} specialized {st:.3} events {:?}", s.events);
    assert!(st <= 0.5 * dt, "default {dt} specialized {st}");
}

#[test]
fn lifecycle_reaches_hot_and_stops_marking() {
    let src = "q(X) :- integer(X).";
    let goal = "q(1), q(2), q(3), q(4), q(5), q(6), q(7), q(8)";
    let (_, mut m) = run(src, goal, spec(3, 6));
    let app = m.program.lookup("q", 1).unwrap();
    assert_eq!(m.program.pred(app).state, PredState::Hot);
    assert_eq!(m.program.pred(app).generation, 1);
    assert!(m.events.contains(&Event::Installed { pred: app, generation: 1 }));
    assert!(!m.monitor.enabled);
    let marks = m.stats.mark_calls;
    m.solve(goal).unwrap();
    assert_eq!(m.program.pred(app).generation, 1);
    assert_eq!(m.stats.mark_calls, marks);
}

#[test]
fn traces_validate() {
    let (_, m) = run(NREV, "bench(10, 20)", spec(5, 10));
    for p in &m.program.preds {
        if let Some(sem) = &p.semulator {
            assert_eq!(sem.validate(&m.program.code), vec![]);
        }
    }
}

fn elementary_exits(m: &Machine) -> usize {
    m.events
        .iter()
        .filter(|e| matches!(e, Event::SideExit { kind: ExitKind::ElementaryBlock, .. }))
        .count()
}

#[test]
fn type_flip_rebuilds_once() {
    let src = "p(X) :- atomic(X).";
    let mut m = Machine::new(load_program(src).unwrap(), spec(3, 6));
    let q_int = m.compile_query("p(1)").unwrap();
    for _ in 0..10 {
        assert_eq!(m.run_query(&q_int).unwrap(), vec!["yes"]);
    }
    let p = m.program.lookup("p", 1).unwrap();
    assert_eq!(m.program.pred(p).generation, 1);
    assert_eq!(elementary_exits(&m), 0);
    let q_atom = m.compile_query("p(a)").unwrap();
    for _ in 0..1001 {
        assert_eq!(m.run_query(&q_atom).unwrap(), vec!["yes"]);
    }
    eprintln!("{:?}", m.events);
    assert_eq!(m.stats.side_exits_elementary, 1);
    assert_eq!(m.stats.rebuilds, 1);
    assert_eq!(m.program.pred(p).generation, 2);
    assert_eq!(m.program.pred(p).state, PredState::Hot);
    let exits = m.stats.side_exits();
    for _ in 0..500 {
        m.run_query(&q_int).unwrap();
        m.run_query(&q_atom).unwrap();
    }
    assert_eq!(m.stats.side_exits(), exits);
}

#[test]
fn no_mutability_pins_on_first_exit() {
    let src = "p(X) :- atomic(X).";
    let config = Config {
        mutability: false,
        ..spec(3, 6)
    };
    let mut m = Machine::new(load_program(src).unwrap(), config);
    m.solve("p(1), p(2), p(3), p(4), p(5), p(6), p(7)").unwrap();
    let p = m.program.lookup("p", 1).unwrap();
    assert_eq!(m.program.pred(p).state, PredState::Hot);
    assert_eq!(m.solve("p(a), p(b), p(1), p(c)").unwrap(), vec!["yes"]);
    assert!(m.events.contains(&Event::Pinned { pred: p }));
    assert!(m.program.pred(p).pinned_default);
    assert_eq!(m.stats.rebuilds, 0);
    assert_eq!(m.stats.side_exits_elementary, 1);
    m.solve("p(a), p(1)").unwrap();
    assert_eq!(m.stats.side_exits_elementary, 1);
    assert!(m.program.pred(p).semulator.is_none());
}

#[test]
fn gc_exit_resumes_in_place() {
    let q = "bench(3, 400)";
    let (big, _) = run(NREV, q, spec(50, 100));
    let config = Config {
        heap_cells: crate::machine::DEFAULT_HEAP_CELLS / 10,
        ..spec(50, 100)
    };
    let (small, m) = run(NREV, q, config);
    assert_eq!(big, small);
    assert!(m.stats.reclamations_in_semulator >= 1, "{:?}", m.stats);
    let resumes: Vec<&Event> = m.events.iter().filter(|e| matches!(e, Event::GcResume { .. })).collect();
    assert!(!resumes.is_empty());
    for e in resumes {
        let Event::GcResume { pred, addr, op, generation } = *e else { unreachable!() };
        let sem = m.program.pred(pred).semulator.clone().expect("still installed");
        assert_eq!(sem.generation, generation);
        assert!(matches!(sem.ops[op], MicroOp::GcGuard { addr: a, .. } if a == addr));
        assert!(matches!(m.program.code[addr], crate::compiler::Instr::Enter { .. }));
    }
}
