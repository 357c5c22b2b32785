use loadcov::analytic::{coverage, coverage_bounds, coverage_single_tier, g_term};
use loadcov::model::{
    activity_from_user_density, db_to_linear, split_access_fraction, Network, SeriesControl, Tier,
};
use proptest::prelude::*;

fn tier() -> impl Strategy<Value = Tier> {
    (0.01f64..10.0, 0.01f64..10.0, 0.0f64..10.0, 0.4f64..=1.0)
        .prop_map(|(power, density, db, p)| Tier::new(power, density, db_to_linear(db), p))
}

fn network() -> impl Strategy<Value = Network> {
    (prop::collection::vec(tier(), 1..=3), 3.0f64..5.0)
        .prop_map(|(tiers, alpha)| Network::open(alpha, tiers).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_bracket_value(net in network()) {
        let ctl = SeriesControl::new(1e-16, 10_000).unwrap();
        let r = coverage(&net, &ctl).unwrap();
        prop_assume!(r.converged);
        for m in 1..=5 {
            let (lo, hi) = coverage_bounds(&net, m).unwrap();
            prop_assert!(lo <= r.value && r.value <= hi, "m={} {} {} {}", m, lo, r.value, hi);
        }
    }

    #[test]
    fn terms_alternate_in_sign(net in network()) {
        for m in 1..=6u32 {
            let g = g_term(&net, m).unwrap();
            let expect = if m % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!(g == 0.0 || g.signum() == expect, "m={} g={}", m, g);
        }
    }

    #[test]
    fn single_tier_ignores_density_and_power(
        beta_db in 0.0f64..10.0,
        p in 0.4f64..=1.0,
        alpha in 3.0f64..5.0,
        density in 0.01f64..100.0,
        power in 0.01f64..100.0,
    ) {
        let beta = db_to_linear(beta_db);
        let ctl = SeriesControl::default();
        let net = Network::open(alpha, vec![Tier::new(power, density, beta, p)]).unwrap();
        let general = coverage(&net, &ctl).unwrap().value;
        let scalar = coverage_single_tier(power, density, beta, p, alpha, &ctl).unwrap().value;
        prop_assert!((general - scalar).abs() < 1e-10);
        let reference = coverage(&Network::open(alpha, vec![Tier::new(1.0, 1.0, beta, p)]).unwrap(), &ctl)
            .unwrap()
            .value;
        prop_assert!((general - reference).abs() < 1e-10);
    }

    #[test]
    fn user_load_monotone(net in network(), lu in 0.0f64..50.0, extra in 0.0f64..10.0, m in 1u32..40) {
        let base = activity_from_user_density(&net, lu, m).unwrap();
        let more_users = activity_from_user_density(&net, lu + extra, m).unwrap();
        let more_blocks = activity_from_user_density(&net, lu, m + 1).unwrap();
        for k in 0..net.len() {
            prop_assert!(more_users.activity[k] >= base.activity[k]);
            prop_assert!(more_blocks.activity[k] <= base.activity[k]);
            prop_assert!(base.activity[k] <= 1.0);
        }
        let total: f64 = base.served_fraction.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_preserves_density(t in tier(), f in 0.0f64..=1.0) {
        let (open, closed) = split_access_fraction(&t, f).unwrap();
        prop_assert_eq!(open.density + closed.density, t.density);
        prop_assert_eq!(open.power, t.power);
        prop_assert_eq!(closed.activity, t.activity);
    }

    #[test]
    fn json_round_trip(net in network()) {
        let back = Network::from_json(&net.to_json()).unwrap();
        prop_assert_eq!(back.len(), net.len());
        prop_assert_eq!(back.alpha(), net.alpha());
        for (a, b) in back.tiers().iter().zip(net.tiers()) {
            prop_assert!((a.target_sir / b.target_sir - 1.0).abs() < 1e-12);
            prop_assert_eq!(a.density, b.density);
        }
    }
}
