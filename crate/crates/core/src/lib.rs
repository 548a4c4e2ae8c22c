//! Subgame-perfect outcomes of a Hotelling duopoly in which the firm holding
//! consumer location data may sell interval segments of it to its rival.
//!
//! Firm A (at 0) posts a uniform price to the consumers it cannot identify;
//! firm B (at 1) knows everyone's location and prices each consumer
//! individually. A data-sharing mechanism reveals an [`IntervalSet`] of
//! locations to A in exchange for a transfer.
//!
//! * [`market`] holds the primitives and the pointwise pricing rules.
//! * [`equilibrium`] finds A's best-response uniform price and solves a subgame.
//! * [`mechanisms`] builds the firm-optimal and Pareto-improving mechanisms.
//! * [`welfare`] compares outcomes for individual rationality and Pareto gains.
//! * [`optin`] checks threat-free equilibria of the consumer opt-in game.
//! * [`oracle`] is a discretized brute-force solver used for validation.

pub mod equilibrium;
pub mod error;
pub mod market;
pub mod mechanisms;
pub mod optin;
pub mod oracle;
mod search;
pub mod welfare;

pub use equilibrium::{no_sharing_price_set, solve, EquilibriumSet, PriceSelection};
pub use error::{Error, Result};
pub use market::{
    ConsumerDistribution, Interval, IntervalSet, MarketOutcome, MarketParams, Mechanism, Seller,
};
