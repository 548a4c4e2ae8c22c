use datasale_core::oracle::{brute_solve, DiscreteMarket};
use datasale_core::{
    solve, ConsumerDistribution, IntervalSet, MarketParams, Mechanism, PriceSelection,
};
use proptest::prelude::*;

fn profit_error(
    m: &Mechanism,
    d: &ConsumerDistribution,
    p: &MarketParams,
    n: usize,
    delta: f64,
) -> f64 {
    let exact = solve(m, d, p, PriceSelection::MaxPrice).unwrap();
    let dm = DiscreteMarket::new(d, n, delta, p).unwrap();
    let o = brute_solve(m, &dm, p);
    (o.profit_a() - exact.profit_a()).abs() + (o.profit_b() - exact.profit_b()).abs()
}

#[test]
fn halving_refinement_shrinks_error() {
    let p = MarketParams::new(3.0, 1.0).unwrap();
    let u = ConsumerDistribution::uniform();
    let tilted =
        ConsumerDistribution::piecewise_linear_normalized(vec![0.0, 0.4, 1.0], vec![1.5, 0.6, 1.1])
            .unwrap();
    let cases = [
        (u.clone(), Mechanism::no_sharing()),
        (
            u.clone(),
            Mechanism::new(IntervalSet::single(0.3, 0.7).unwrap(), 0.0),
        ),
        (u.clone(), Mechanism::full_sharing(0.1)),
        (tilted.clone(), Mechanism::full_sharing(0.0)),
        (
            tilted,
            Mechanism::new(IntervalSet::single(0.0, 0.5).unwrap(), 0.0),
        ),
    ];
    for (d, m) in &cases {
        let errors: Vec<f64> = (0..4)
            .map(|k| profit_error(m, d, &p, 200 << k, 1e-2 / (1 << k) as f64))
            .collect();
        for w in errors.windows(2) {
            assert!(w[0] >= 1.5 * w[1], "{:?}: {errors:?}", m.shared);
        }
    }
}

#[test]
fn refinement_trend_holds_off_grid() {
    let p = MarketParams::new(3.0, 1.0).unwrap();
    let d =
        ConsumerDistribution::piecewise_linear_normalized(vec![0.0, 0.4, 1.0], vec![1.5, 0.6, 1.1])
            .unwrap();
    let m = Mechanism::new(IntervalSet::single(0.05, 0.2).unwrap(), 0.0);
    let coarse = profit_error(&m, &d, &p, 200, 1e-2);
    let fine = profit_error(&m, &d, &p, 3200, 6.25e-4);
    assert!(fine < coarse / 4.0, "{coarse} -> {fine}");
}

fn scenario() -> impl Strategy<Value = (ConsumerDistribution, MarketParams, Mechanism)> {
    let dist = prop::collection::vec((0.05f64..0.95, 0.2f64..2.0), 1..4).prop_flat_map(|inner| {
        (Just(inner), 0.2f64..2.0, 0.2f64..2.0).prop_map(|(inner, d0, d1)| {
            let mut pts: Vec<(f64, f64)> = inner;
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.dedup_by(|a, b| (a.0 - b.0).abs() < 0.02);
            let mut nodes = vec![0.0];
            let mut dens = vec![d0];
            for (x, y) in pts {
                nodes.push(x);
                dens.push(y);
            }
            nodes.push(1.0);
            dens.push(d1);
            ConsumerDistribution::piecewise_linear_normalized(nodes, dens).unwrap()
        })
    });
    let params =
        (0.5f64..2.0, 2.05f64..5.0).prop_map(|(t, k)| MarketParams::new(k * t, t).unwrap());
    let mech = (0.0f64..1.0, 0.0f64..1.0, -0.2f64..0.2)
        .prop_map(|(a, b, r)| Mechanism::new(IntervalSet::single(a.min(b), a.max(b)).unwrap(), r));
    (dist, params, mech)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_matches_closed_form((d, p, m) in scenario()) {
        let exact = solve(&m, &d, &p, PriceSelection::MaxPrice).unwrap();
        let dm = DiscreteMarket::new(&d, 2000, 1e-3 * p.t(), &p).unwrap();
        let o = brute_solve(&m, &dm, &p);
        let tol = 3e-3;
        prop_assert!((o.profit_a() - exact.profit_a()).abs() < tol, "A {} vs {}", o.profit_a(), exact.profit_a());
        prop_assert!((o.profit_b() - exact.profit_b()).abs() < tol, "B {} vs {}", o.profit_b(), exact.profit_b());
        prop_assert!((o.consumer_welfare - exact.consumer_welfare).abs() < tol);
    }
}
