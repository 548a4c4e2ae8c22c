//! Shared fixtures for the solver benchmarks.

use datasale_core::{ConsumerDistribution, IntervalSet, MarketParams, Mechanism};

/// Uniform consumers, `v = 3`, `t = 1`.
pub fn reference() -> (ConsumerDistribution, MarketParams) {
    (
        ConsumerDistribution::uniform(),
        MarketParams::new(3.0, 1.0).expect("valid parameters"),
    )
}

/// A skewed piecewise-linear market, harder for the price search.
pub fn skewed() -> (ConsumerDistribution, MarketParams) {
    let dist = ConsumerDistribution::piecewise_linear_normalized(
        vec![0.0, 0.3, 0.7, 1.0],
        vec![1.8, 0.4, 1.2, 0.6],
    )
    .expect("positive densities");
    (dist, MarketParams::new(3.4, 1.2).expect("valid parameters"))
}

/// Two shared intervals on each side of the midpoint.
pub fn split_mechanism() -> Mechanism {
    let shared = IntervalSet::from_pairs([(0.05, 0.2), (0.6, 0.8)]).expect("disjoint intervals");
    Mechanism::new(shared, 0.02)
}
