mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tracewam::bench::{compute_improvement, compute_speedup};
use tracewam::compiler::load_program;
use tracewam::machine::{Config, Machine};

const LISTS: &str = "app([], L, L).
app([H|T], L, [H|R]) :- app(T, L, R).
nrev([], []).
nrev([H|T], R) :- nrev(T, RT), app(RT, [H], R).
range(I, N, []) :- I > N, !.
range(I, N, [I|T]) :- J is I + 1, range(J, N, T).
sum([], S, S).
sum([X|Xs], S0, S) :- S1 is S0 + X, sum(Xs, S1, S).
loop(0, _, S, S) :- !.
loop(K, N, S0, S) :- range(1, N, L), nrev(L, R), sum(R, S0, S1), K1 is K - 1, loop(K1, N, S1, S).
";

fn machine(config: Config) -> Machine {
    Machine::new(load_program(LISTS).unwrap(), config)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn thresholds_never_change_answers(critical in 1u64..40, extra in 0u64..40, k in 1u64..12, n in 1u64..40) {
        let goal = format!("loop({k}, {n}, 0, S)");
        let expected = machine(Config { jit: false, ..Config::default() }).solve(&goal).unwrap();
        let config = Config { critical, hot: critical + extra, validate: true, ..Config::default() };
        let mut m = machine(config);
        prop_assert_eq!(m.solve(&goal).unwrap(), expected);
        prop_assert!(m.stats.side_exits_gc <= m.stats.reclamations);
        prop_assert!(m.stats.rebuilds <= m.stats.side_exits_elementary);
    }

    #[test]
    fn heap_size_never_changes_answers(cells in 64usize..4096, n in 1u64..60) {
        let goal = format!("loop(3, {n}, 0, S)");
        let expected = machine(Config::default()).solve(&goal).unwrap();
        let mut m = machine(Config { heap_cells: cells, critical: 5, hot: 10, ..Config::default() });
        prop_assert_eq!(m.solve(&goal).unwrap(), expected);
    }

    #[test]
    fn counts_are_reproducible(critical in 1u64..20, n in 1u64..30) {
        let goal = format!("loop(4, {n}, 0, S)");
        let config = Config { critical, hot: 2 * critical, heap_cells: 512, ..Config::default() };
        let mut a = machine(config.clone());
        let mut b = machine(config);
        a.solve(&goal).unwrap();
        b.solve(&goal).unwrap();
        prop_assert_eq!(&a.stats, &b.stats);
        prop_assert_eq!(&a.events, &b.events);
    }

    #[test]
    fn breakdown_adds_up(n in 1u64..60) {
        let mut m = machine(Config { critical: 3, hot: 6, heap_cells: 256, ..Config::default() });
        m.solve(&format!("loop(5, {n}, 0, S)")).unwrap();
        prop_assert_eq!(m.timer.breakdown.total(), m.timer.elapsed);
    }

    #[test]
    fn random_programs_agree_across_modes(seed in any::<u64>(), critical in 1u64..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let case = gen_case(&mut rng, 3);
        let queries: Vec<Query> = case
            .queries
            .iter()
            .filter(|q| oracle_answers(&case.program, q).is_ok())
            .cloned()
            .collect();
        let default = engine_answers(&case.program, &queries, Config { jit: false, ..Config::default() });
        for mutability in [false, true] {
            let config = Config { critical, hot: critical + 1, mutability, validate: true, ..Config::default() };
            prop_assert_eq!(&engine_answers(&case.program, &queries, config), &default);
        }
    }

    #[test]
    fn speedup_inverts(old in 1e-6f64..1e6, new in 1e-6f64..1e6) {
        let s = compute_speedup(old, new).unwrap();
        prop_assert!((s * new - old).abs() <= 1e-9 * old);
        prop_assert!((compute_improvement(s) / 100.0 + 1.0 - s).abs() < 1e-9 * s.max(1.0));
    }
}
