use tracewam::bench::{self, run_suite, stats_csv, Mode};
use tracewam::machine::Config;

const SMALL: [(&str, u64); 9] = [
    ("append", 300),
    ("nreverse", 40),
    ("tak", 9),
    ("hanoi", 6),
    ("quicksort", 200),
    ("binary_trees", 6),
    ("nsieve", 1),
    ("partial_sums", 500),
    ("recursive", 2),
];

#[test]
fn every_benchmark_agrees_across_modes_under_eager_thresholds() {
    for critical in [1, 3, 17] {
        let base = Config {
            critical,
            hot: critical * 2,
            heap_cells: 512,
            validate: true,
            ..Config::default()
        };
        let specs: Vec<_> = SMALL
            .iter()
            .map(|&(n, k)| {
                let mut s = bench::suite_benchmark(n).unwrap().with_scale(k);
                s.reps = 2;
                s
            })
            .collect();
        let rows = run_suite(&specs, &Mode::ALL, &base).unwrap();
        assert_eq!(rows.len(), 27);
        for chunk in rows.chunks(3) {
            assert_eq!(chunk[0].mode, Mode::DefaultOnly);
            for r in chunk {
                assert_eq!(r.stats.solutions, chunk[0].stats.solutions, "{} {}", r.name, r.mode.name());
                assert!(r.stats.side_exits_gc <= r.stats.reclamations);
                assert!(r.stats.rebuilds <= r.stats.side_exits_elementary);
            }
            assert_eq!(chunk[0].stats.installs, 0);
            assert_eq!(chunk[1].stats.rebuilds, 0);
        }
        let csv = stats_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 28);
    }
}

#[test]
fn desk_scale_answers_match_stored_outputs() {
    for name in ["tak", "hanoi", "recursive"] {
        let mut spec = bench::suite_benchmark(name).unwrap();
        spec.reps = 1;
        let (_, stats) = bench::run_benchmark(&spec, Mode::SpecWithMutability, &Config::default()).unwrap();
        assert_eq!(Some(stats.solutions), spec.expected);
    }
}

#[test]
fn table_sizes_are_known() {
    assert_eq!(bench::table_size("nreverse"), Some(52_000));
    assert_eq!(bench::table_size("hanoi"), Some(24));
    assert_eq!(bench::suite_names().len(), 9);
}
