use dispersion::adversary::CrashPolicy;
use dispersion::config::{RobotsConfig, RunConfig};
use dispersion::engine::Placement;
use dispersion::grid::{Grid, GridSpec, Orientation};
use dispersion::protocols::ProtocolId;
use dispersion::runner;
use dispersion::trace::Trace;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (3usize..12).prop_flat_map(|w| (w..14, Just(w)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ports_are_symmetric_and_degrees_match_position((length, width) in shape(), seed in any::<u64>(), oriented in any::<bool>()) {
        let o = if oriented { Orientation::Oriented } else { Orientation::Unoriented };
        let g = Grid::build(&GridSpec::rectangle(length, width, o, seed)).unwrap();
        prop_assert_eq!(g.census(), (4, 2 * (length - 2) + 2 * (width - 2), (length - 2) * (width - 2)));
        for v in 0..g.node_count() {
            let (r, c) = g.oracle_position(v);
            let on_row_edge = r == 0 || r + 1 == width;
            let on_col_edge = c == 0 || c + 1 == length;
            prop_assert_eq!(g.degree(v), 4 - on_row_edge as u8 - on_col_edge as u8);
            for p in 1..=g.degree(v) {
                let (u, back) = g.traverse(v, p).unwrap();
                prop_assert_eq!(g.traverse(u, back).unwrap(), (v, p));
                let (ur, uc) = g.oracle_position(u);
                prop_assert_eq!(r.abs_diff(ur) + c.abs_diff(uc), 1);
            }
            prop_assert!(g.traverse(v, g.degree(v) + 1).is_err());
        }
    }

    #[test]
    fn same_port_seed_gives_the_same_grid(side in 3usize..10, seed in any::<u64>()) {
        let spec = GridSpec::square(side, Orientation::Unoriented, seed);
        prop_assert_eq!(Grid::build(&spec).unwrap().to_json(), Grid::build(&spec).unwrap().to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn runs_replay_to_the_same_digest(side in 4usize..7, fill in 1usize..=4, seed in 0u64..1000, proto in 0usize..3, crash in any::<bool>()) {
        let protocol = [ProtocolId::Alg1, ProtocolId::Alg2, ProtocolId::Alg3][proto];
        let orientation = if protocol == ProtocolId::Alg1 { Orientation::Oriented } else { Orientation::Unoriented };
        let k = (side * side * fill / 4).max(1);
        let adversary = if crash && protocol != ProtocolId::Alg2 {
            CrashPolicy::Random { p: 0.01, seed, f: k / 2 }
        } else {
            CrashPolicy::None
        };
        let cfg = RunConfig {
            grid: GridSpec::square(side, orientation, seed),
            robots: RobotsConfig { k, placement: Placement::Seeded { seed } },
            protocol,
            adversary,
            round_budget: None,
            early_stop: true,
            outputs: Default::default(),
        };
        let a = runner::execute(&cfg).unwrap();
        let b = runner::execute(&cfg).unwrap();
        prop_assert_eq!(&a.record, &b.record);
        let reread = Trace::from_jsonl(&a.trace.to_jsonl()).unwrap();
        prop_assert_eq!(reread.digest_hex(), a.record.result.trace_digest.clone());
        prop_assert_eq!(runner::recheck(&cfg, &a.record.result, &reread).unwrap(), a.record.report.clone());
        prop_assert!(a.record.passed(), "{:?}", a.record.report);
    }
}
