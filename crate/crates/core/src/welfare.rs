//! Profit and welfare accounting between two outcomes of the same market.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ConsumerDistribution, IntervalSet, Linear, MarketOutcome, MarketParams};

/// Pointwise deltas below this magnitude count as ties.
pub const POINTWISE_TOLERANCE: f64 = 1e-12;
/// Largest measure of losers still compatible with a Pareto verdict.
pub const NULL_MEASURE: f64 = 1e-9;

/// Per-consumer utility change on `[lo, hi]`, affine in location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPiece {
    pub lo: f64,
    pub hi: f64,
    pub delta: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub delta_profit_a: f64,
    pub delta_profit_b: f64,
    pub delta_consumer_welfare: f64,
    pub delta_joint_profit: f64,
    pub delta_schedule: Vec<DeltaPiece>,
    pub strictly_better_set: IntervalSet,
    pub worse_set: IntervalSet,
    /// Both firms weakly gain at the candidate's transfer.
    pub is_ir: bool,
    /// Some transfer would make both firms weakly gain.
    pub ir_feasible_for_some_transfer: bool,
    pub is_pareto_improving: bool,
}

impl ComparisonReport {
    /// Utility change of the consumer at `theta`, read off the schedule.
    pub fn delta_at(&self, theta: f64) -> Option<f64> {
        self.delta_schedule
            .iter()
            .find(|p| p.lo <= theta && theta <= p.hi)
            .map(|p| p.delta.eval(theta))
    }
}

fn check_primitives(
    o: &MarketOutcome,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> Result<()> {
    if o.params != *params || o.distribution != *dist {
        return Err(Error::MismatchedPrimitives);
    }
    Ok(())
}

/// Compares `candidate` against `baseline`; positive deltas favour the candidate.
pub fn compare(
    baseline: &MarketOutcome,
    candidate: &MarketOutcome,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> Result<ComparisonReport> {
    check_primitives(baseline, dist, params)?;
    check_primitives(candidate, dist, params)?;

    let mut cuts: Vec<f64> = baseline
        .breakpoints
        .iter()
        .chain(&candidate.breakpoints)
        .copied()
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut schedule = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let utility = |o: &MarketOutcome| {
            o.segment_at(mid)
                .map(|s| s.utility(params))
                .unwrap_or(Linear::ZERO)
        };
        schedule.push(DeltaPiece {
            lo,
            hi,
            delta: utility(candidate) - utility(baseline),
        });
    }

    let better = IntervalSet::from_pairs_clamped(
        schedule
            .iter()
            .filter_map(|p| p.delta.above(POINTWISE_TOLERANCE, p.lo, p.hi)),
    );
    let worse = IntervalSet::from_pairs_clamped(
        schedule
            .iter()
            .filter_map(|p| (-p.delta).above(POINTWISE_TOLERANCE, p.lo, p.hi)),
    );

    let delta_consumer_welfare: f64 = schedule
        .iter()
        .map(|p| dist.integrate(p.lo, p.hi, p.delta))
        .sum();
    let delta_profit_a = candidate.profit_a() - baseline.profit_a();
    let delta_profit_b = candidate.profit_b() - baseline.profit_b();
    let delta_joint_profit = candidate.joint_profit() - baseline.joint_profit();

    let tol = POINTWISE_TOLERANCE * params.v().max(1.0);
    let is_ir = delta_profit_a >= -tol && delta_profit_b >= -tol;
    let strict_gain = delta_profit_a > tol || delta_profit_b > tol || delta_consumer_welfare > tol;
    let is_pareto_improving = is_ir && worse.measure() < NULL_MEASURE && strict_gain;

    Ok(ComparisonReport {
        delta_profit_a,
        delta_profit_b,
        delta_consumer_welfare,
        delta_joint_profit,
        delta_schedule: schedule,
        strictly_better_set: better,
        worse_set: worse,
        is_ir,
        ir_feasible_for_some_transfer: delta_joint_profit >= -tol,
        is_pareto_improving,
    })
}

/// Utility sampled at the midpoints of `ceil(1/grid_step)` equal cells.
pub fn consumer_welfare_curve(outcome: &MarketOutcome, grid_step: f64) -> Result<Vec<(f64, f64)>> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "grid step {grid_step} must be positive"
        )));
    }
    let n = (1.0 / grid_step).ceil().max(1.0) as usize;
    Ok((0..n)
        .map(|i| {
            let theta = (i as f64 + 0.5) / n as f64;
            (theta, outcome.utility_at(theta))
        })
        .collect())
}

/// `CW + π_A + π_B - gross surplus`; zero up to rounding for every outcome.
pub fn accounting_residual(outcome: &MarketOutcome) -> f64 {
    outcome.consumer_welfare + outcome.profit_a() + outcome.profit_b() - outcome.gross_surplus()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve, PriceSelection};
    use crate::market::Mechanism;
    use crate::mechanisms::{firm_optimal, pareto_improving};
    use proptest::prelude::*;

    fn example() -> (ConsumerDistribution, MarketParams) {
        (
            ConsumerDistribution::uniform(),
            MarketParams::new(3.0, 1.0).unwrap(),
        )
    }

    fn run(m: &Mechanism) -> MarketOutcome {
        let (u, p) = example();
        solve(m, &u, &p, PriceSelection::MaxPrice).unwrap()
    }

    #[test]
    fn full_sharing_is_never_ir() {
        let (u, p) = example();
        let base = run(&Mechanism::no_sharing());
        let full = run(&Mechanism::full_sharing(0.0));
        let rep = compare(&base, &full, &u, &p).unwrap();
        assert!((rep.delta_joint_profit + 3.0 / 16.0).abs() < 1e-12);
        assert!(!rep.is_ir && !rep.ir_feasible_for_some_transfer);
        for r in [-1.0, -0.3125, 0.0, 0.125, 0.4375, 1.0] {
            let rep = compare(&base, &full.with_transfer(r), &u, &p).unwrap();
            assert!(!rep.is_ir, "r = {r}");
        }
    }

    #[test]
    fn self_comparison_is_neutral() {
        let (u, p) = example();
        let base = run(&Mechanism::no_sharing());
        let rep = compare(&base, &base, &u, &p).unwrap();
        assert_eq!(rep.delta_profit_a, 0.0);
        assert_eq!(rep.delta_profit_b, 0.0);
        assert_eq!(rep.delta_consumer_welfare, 0.0);
        assert!(rep.is_ir && !rep.is_pareto_improving);
        assert!(rep.strictly_better_set.is_empty() && rep.worse_set.is_empty());
    }

    #[test]
    fn pareto_mechanism_verdict() {
        let (u, p) = example();
        let base = run(&Mechanism::no_sharing());
        let m = pareto_improving(0.5, &u, &p).unwrap();
        assert!((m.mechanism.transfer - 1.0 / 32.0).abs() < 1e-15);
        let cand = solve(&m.mechanism, &u, &p, PriceSelection::MaxPrice).unwrap();
        let rep = compare(&base, &cand, &u, &p).unwrap();
        assert!(rep.is_pareto_improving);
        assert!(rep.worse_set.is_empty());
        assert!(IntervalSet::single(0.2500001, 0.3749999)
            .unwrap()
            .is_subset_of(&rep.strictly_better_set, 0.0));
        assert!((rep.delta_profit_a - (3.0 / 64.0 - 1.0 / 32.0)).abs() < 1e-12);
        assert!((rep.delta_profit_b - (1.0 / 32.0 - 1.0 / 64.0)).abs() < 1e-12);
        // consumers gain ∫(2θ - 1/2) over [1/4, 3/8]
        assert!((rep.delta_consumer_welfare - 1.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_primitives_rejected() {
        let (u, p) = example();
        let base = run(&Mechanism::no_sharing());
        let other = MarketParams::new(4.0, 1.0).unwrap();
        assert!(matches!(
            compare(&base, &base, &u, &other),
            Err(Error::MismatchedPrimitives)
        ));
        let d = ConsumerDistribution::smoothed_step(0.25, 0.95, 0.01).unwrap();
        assert!(matches!(
            compare(&base, &base, &d, &p),
            Err(Error::MismatchedPrimitives)
        ));
    }

    fn riemann(curve: &[(f64, f64)], dist: &ConsumerDistribution) -> f64 {
        let h = 1.0 / curve.len() as f64;
        curve.iter().map(|&(x, u)| u * dist.pdf(x) * h).sum()
    }

    #[test]
    fn welfare_curve_examples() {
        let (u, p) = example();
        let base = run(&Mechanism::no_sharing());
        let curve = consumer_welfare_curve(&base, 1e-3).unwrap();
        assert_eq!(curve.len(), 1000);
        assert!((riemann(&curve, &u) - 2.0).abs() < 1e-3);
        assert!(curve.iter().all(|&(_, w)| w >= -1e-12));

        let full = run(&Mechanism::full_sharing(0.0));
        let curve = consumer_welfare_curve(&full, 1e-3).unwrap();
        assert!((riemann(&curve, &u) - (p.v() - 0.75 * p.t())).abs() < 1e-3);
        assert!((full.consumer_welfare - 2.25).abs() < 1e-12);

        assert!(consumer_welfare_curve(&base, 0.0).is_err());
        assert!(consumer_welfare_curve(&base, -1.0).is_err());
    }

    #[test]
    fn firm_optimal_extracts_right_half() {
        let (u, p) = example();
        let f = firm_optimal(&u, &p);
        let o = run(&f.mechanism);
        assert_eq!(o.uniform_price, f.intended_price);
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let w = o.utility_at(x);
            if x < 0.5 {
                assert!((w - (p.v() - p.t() + p.t() * x)).abs() < 1e-12, "{x}");
            } else if x > 0.5 {
                assert!(w.abs() < 1e-12, "{x}: {w}");
            }
        }
    }

    fn scenario(
    ) -> impl Strategy<Value = (ConsumerDistribution, MarketParams, Mechanism, Mechanism)> {
        let dist = prop::collection::vec(0.2f64..2.0, 3..6).prop_map(|d| {
            let k = d.len() - 1;
            let nodes = (0..=k).map(|i| i as f64 / k as f64).collect();
            ConsumerDistribution::piecewise_linear_normalized(nodes, d).unwrap()
        });
        let params =
            (0.5f64..2.0, 2.05f64..5.0).prop_map(|(t, k)| MarketParams::new(k * t, t).unwrap());
        let mech = (0.0f64..1.0, 0.0f64..1.0, -0.5f64..0.5).prop_map(|(a, b, r)| {
            Mechanism::new(IntervalSet::single(a.min(b), a.max(b)).unwrap(), r)
        });
        (dist, params, mech.clone(), mech)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn comparison_is_antisymmetric((d, p, m1, m2) in scenario()) {
            let x = solve(&m1, &d, &p, PriceSelection::MaxPrice).unwrap();
            let y = solve(&m2, &d, &p, PriceSelection::MaxPrice).unwrap();
            let xy = compare(&x, &y, &d, &p).unwrap();
            let yx = compare(&y, &x, &d, &p).unwrap();
            prop_assert_eq!(xy.delta_profit_a, -yx.delta_profit_a);
            prop_assert_eq!(xy.delta_profit_b, -yx.delta_profit_b);
            prop_assert_eq!(xy.delta_consumer_welfare, -yx.delta_consumer_welfare);
            prop_assert_eq!(xy.delta_joint_profit, -yx.delta_joint_profit);
            prop_assert_eq!(&xy.strictly_better_set, &yx.worse_set);
        }

        #[test]
        fn pareto_verdict_implies_its_conditions((d, p, m1, m2) in scenario()) {
            let x = solve(&m1, &d, &p, PriceSelection::MaxPrice).unwrap();
            let y = solve(&m2, &d, &p, PriceSelection::MaxPrice).unwrap();
            let rep = compare(&x, &y, &d, &p).unwrap();
            if rep.is_pareto_improving {
                prop_assert!(rep.worse_set.measure() < NULL_MEASURE && rep.is_ir);
                prop_assert!(rep.delta_profit_a > 0.0 || rep.delta_profit_b > 0.0 || rep.delta_consumer_welfare > 0.0);
            }
        }

        #[test]
        fn welfare_delta_matches_outcome_difference((d, p, m1, m2) in scenario()) {
            let x = solve(&m1, &d, &p, PriceSelection::MaxPrice).unwrap();
            let y = solve(&m2, &d, &p, PriceSelection::MaxPrice).unwrap();
            let rep = compare(&x, &y, &d, &p).unwrap();
            prop_assert!((rep.delta_consumer_welfare - (y.consumer_welfare - x.consumer_welfare)).abs() < 1e-9);
        }

        #[test]
        fn accounting_identity_holds((d, p, m, _) in scenario()) {
            let o = solve(&m, &d, &p, PriceSelection::MaxPrice).unwrap();
            prop_assert!(accounting_residual(&o).abs() < 1e-9);
        }

        #[test]
        fn sampled_utilities_are_nonnegative((d, p, m, _) in scenario()) {
            let o = solve(&m, &d, &p, PriceSelection::MaxPrice).unwrap();
            let curve = consumer_welfare_curve(&o, 1e-3).unwrap();
            prop_assert!(curve.iter().all(|&(_, w)| w >= -1e-12));
        }
    }
}
