mod common;

use common::{random_formula, random_system, to_bits, Oracle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rebelfire_core::formula::{fire, or, start};
use rebelfire_core::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn extensions_match_reference(seed in any::<u64>()) {
        let s = random_system(seed);
        let oracle = Oracle::new(s.sys.runs(), s.sys.n(), s.sys.horizon());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        let mut ev = Evaluator::new(&s.sys);
        for _ in 0..4 {
            let f = random_formula(&mut rng, s.sys.n(), 3);
            let want = oracle.extension(&f);
            let got = to_bits(&ev.extension(&f));
            prop_assert_eq!(&got, &want, "formula {}", f);
            for p in s.sys.points().step_by(3) {
                prop_assert_eq!(eval(&s.sys, p, &f), want[s.sys.point_index(p)], "formula {} at {}", f, p);
            }
        }
    }

    #[test]
    fn fixpoint_iterations_match_reference(seed in any::<u64>()) {
        let s = random_system(seed);
        let oracle = Oracle::new(s.sys.runs(), s.sys.n(), s.sys.horizon());
        let mut ev = Evaluator::new(&s.sys);
        for phi in [start(), fire(), Formula::True, or(start(), fire())] {
            let (set, steps) = oracle.common_hope(&phi);
            let fp = ev.eventual_common_hope(&phi);
            prop_assert_eq!(to_bits(&fp.set), set);
            prop_assert_eq!(fp.iterations, steps);
        }
    }

    #[test]
    fn printed_formulas_parse_back(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(&mut rng, 3, 4);
        prop_assert_eq!(parse(&f.to_string()).unwrap(), f);
    }
}

#[test]
fn start_holds_once_recorded() {
    let mut cfg = AdversaryConfig::new(2, 0, 3);
    cfg.start.rounds = vec![1];
    let set = enumerate_runs(&*protocol::silent(), &cfg).unwrap();
    let sys = build_system(set.runs.clone(), 2, 0, 3).unwrap();
    let oracle = Oracle::new(sys.runs(), 2, 3);
    let ext = oracle.extension(&start());
    for (k, run) in sys.runs().iter().enumerate() {
        let started = run.rounds[1].occurrences.iter().any(|&(_, o)| o.label == Label::Start);
        for t in 0..=3u32 {
            let p = sys.point_index(Point { run: k as u32, t });
            assert_eq!(ext[p], started && t >= 2, "run {k} t {t}");
        }
    }
}
