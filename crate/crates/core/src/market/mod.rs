//! Market primitives: parameters, consumer distributions, interval sets,
//! mechanisms and the pointwise pricing rules.

mod distribution;
mod interval;
mod linear;
mod mechanism;
mod outcome;
mod params;
mod pricing;

pub use distribution::{ConsumerDistribution, DistributionKind, MASS_TOLERANCE};
pub use interval::{Interval, IntervalSet};
pub use linear::Linear;
pub use mechanism::Mechanism;
pub use outcome::{MarketOutcome, Segment};
pub use params::MarketParams;
pub use pricing::{
    allocate, consumer_utility, indifferent_location, joint_gain_threshold,
    participation_cap_location, shared_prices, unshared_b_price, Allocation, Firm, Offer,
    PriceKind, Seller,
};
