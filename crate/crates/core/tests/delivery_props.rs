use macc_core::{
    level_cost, simulate, simulate_with, DemandVector, LevelParams, Rational, Scalar, SimOptions,
    SystemConfig,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = LevelParams> {
    (1usize..=3, 1usize..=4)
        .prop_flat_map(|(t, l)| {
            let max_kp = 14 - t * (l - 1);
            (Just(t), Just(l), t..=max_kp)
        })
        .prop_map(|(t, l, kp)| LevelParams::new(kp, t, l).unwrap())
        .prop_filter("keep runs short", |p| p.subpacketization() <= 4_000)
}

fn positive_rational() -> impl Strategy<Value = Rational> {
    (1i64..=50, 1i64..=9).prop_map(|(n, d)| Rational::ratio(n, d))
}

fn instance() -> impl Strategy<Value = (LevelParams, Vec<Rational>, Rational)> {
    params().prop_flat_map(|p| {
        (
            Just(p),
            prop::collection::vec(positive_rational(), p.level()),
            positive_rational(),
        )
    })
}

fn system(p: &LevelParams, n: usize, mu: Vec<Rational>, rho: Rational) -> SystemConfig<Rational> {
    let m = Rational::from_count(p.t() * n) / Rational::from_count(p.k());
    SystemConfig::new(p.k(), p.level(), n, m, mu, rho).unwrap()
}

fn demands(p: &LevelParams) -> impl Strategy<Value = (usize, Vec<usize>)> {
    let k = p.k();
    (1usize..=2 * k).prop_flat_map(move |n| (Just(n), prop::collection::vec(1..=n, k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_user_decodes_under_any_demand(
        (p, d) in params().prop_flat_map(|p| (Just(p), demands(&p)))
    ) {
        let (n, files) = d;
        let sys = system(&p, n, vec![Rational::from_int(1); p.level()], Rational::from_int(1));
        let demand = DemandVector::new(files, n).unwrap();
        // Incomplete recovery or a non-singleton residual surfaces as an error.
        let report = simulate_with(&p, &sys, &demand, &SimOptions::default());
        prop_assert!(report.is_ok(), "{:?}", report.err());
    }

    #[test]
    fn cost_equals_closed_form((p, mu, rho) in instance()) {
        let sys = system(&p, p.k(), mu, rho);
        let sim = simulate(&p, &sys, &DemandVector::worst_case(p.k(), p.k())).unwrap();
        let formula = level_cost(p.level(), &sys.memory_ratio(), &sys).unwrap();
        prop_assert_eq!(&sim.total_cost, &formula.total);
        prop_assert_eq!(&sim.broadcast_cost, &formula.r_b);
        prop_assert_eq!(&sim.direct_cost, &formula.r_c1);
        prop_assert_eq!(&sim.decode_cost, &formula.r_c2);
    }

    #[test]
    fn decode_fetches_touch_only_first_and_last_level((p, mu, rho) in instance()) {
        let sys = system(&p, p.k(), mu, rho);
        let options = SimOptions { trace: true, ..Default::default() };
        let report = simulate_with(&p, &sys, &DemandVector::worst_case(p.k(), p.k()), &options).unwrap();
        prop_assert!(report.decode_levels.iter().all(|&l| l == 1 || l == p.level()));
        let last = format!(" level={} ", p.level());
        for line in report.trace.iter().filter(|l| l.contains("kind=decode")) {
            prop_assert!(line.contains(" level=1 ") || line.contains(&last), "{}", line);
        }
    }

    #[test]
    fn breakdown_is_demand_invariant(
        (p, d) in params().prop_flat_map(|p| (Just(p), demands(&p))),
        mu in prop::collection::vec(positive_rational(), 4),
        rho in positive_rational(),
    ) {
        let (n, files) = d;
        let sys = system(&p, n, mu[..p.level()].to_vec(), rho);
        let worst = simulate(&p, &sys, &DemandVector::worst_case(p.k(), n)).unwrap();
        let other = simulate(&p, &sys, &DemandVector::new(files, n).unwrap()).unwrap();
        prop_assert_eq!(worst, other);
    }

    #[test]
    fn each_message_costs_t_side_fetches_per_end((p, mu, rho) in instance()) {
        let sys = system(&p, p.k(), mu, rho);
        let c = simulate(&p, &sys, &DemandVector::worst_case(p.k(), p.k())).unwrap();
        let per_end = p.message_count() * p.t() as u128;
        if p.level() == 1 {
            prop_assert_eq!(c.decode_packets_per_level[0], 2 * per_end);
        } else {
            prop_assert_eq!(c.decode_packets_per_level[0], per_end);
            prop_assert_eq!(c.decode_packets_per_level[p.level() - 1], per_end);
        }
        let ends = sys.mu[0].clone() + sys.mu[p.level() - 1].clone();
        let expected = Rational::from_count(per_end as usize) * ends
            / Rational::from_count(p.subpacketization() as usize);
        prop_assert_eq!(&c.decode_cost, &expected);
    }
}
