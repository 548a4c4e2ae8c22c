//! Pointwise pricing and allocation rules.
//!
//! Firm A sits at 0 and firm B at 1. B knows every consumer's location;
//! A knows only the locations B shared with it and otherwise posts a single
//! uniform price. Ties between the firms go to B except for shared
//! consumers, who buy from the nearer firm.

use serde::{Deserialize, Serialize};

use super::linear::Linear;
use super::params::MarketParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Firm {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceKind {
    Uniform,
    Personalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub firm: Firm,
    pub price: f64,
    pub kind: PriceKind,
}

/// Who a consumer buys from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Seller {
    A,
    B,
    NoPurchase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub seller: Seller,
    pub price: f64,
}

/// Location of the consumer indifferent between A at `p_a` and B at price 0,
/// clamped to `[0, 1]`.
pub fn indifferent_location(p_a: f64, params: &MarketParams) -> f64 {
    (0.5 - p_a / (2.0 * params.t())).clamp(0.0, 1.0)
}

/// Personalized Bertrand prices when both firms know `theta`.
pub fn shared_prices(theta: f64, params: &MarketParams) -> (Offer, Offer) {
    let t = params.t();
    let a = Offer {
        firm: Firm::A,
        price: (t * (1.0 - 2.0 * theta)).max(0.0),
        kind: PriceKind::Personalized,
    };
    let b = Offer {
        firm: Firm::B,
        price: (t * (2.0 * theta - 1.0)).max(0.0),
        kind: PriceKind::Personalized,
    };
    (a, b)
}

/// B's profit-maximizing personalized price to an unshared consumer whose
/// outside options are A's uniform offer and not buying at all.
pub fn unshared_b_price(theta: f64, p_a: f64, params: &MarketParams) -> f64 {
    let t = params.t();
    let match_a = p_a + t * (2.0 * theta - 1.0);
    let participation = params.v() - t * (1.0 - theta);
    match_a.min(participation).max(0.0)
}

/// Location beyond which B's participation cap binds for unshared consumers.
/// Exceeds 1 (never binds) whenever `p_a < v - t`.
pub fn participation_cap_location(p_a: f64, params: &MarketParams) -> f64 {
    (params.v() - p_a) / params.t()
}

/// Location below which sharing a consumer strictly raises joint profit at
/// uniform price `p`: the midpoint of `[μ(p), 1/2]` for the unclamped `μ`.
pub fn joint_gain_threshold(p: f64, params: &MarketParams) -> f64 {
    0.5 - p / (4.0 * params.t())
}

/// Winner and affine price schedule in force at `theta`, with exact tie rules.
pub(crate) fn price_regime(
    theta: f64,
    shared: bool,
    p_a: f64,
    params: &MarketParams,
) -> (Seller, Linear) {
    let (v, t) = (params.v(), params.t());
    if shared {
        return if theta < 0.5 {
            (Seller::A, Linear::new(t, -2.0 * t))
        } else {
            (Seller::B, Linear::new(-t, 2.0 * t))
        };
    }
    let mu = indifferent_location(p_a, params);
    if theta < mu && v - p_a - t * theta >= 0.0 {
        return (Seller::A, Linear::constant(p_a));
    }
    let match_a = Linear::new(p_a - t, 2.0 * t);
    let participation = Linear::new(v - t, t);
    let price = if match_a.eval(theta) <= participation.eval(theta) {
        match_a
    } else {
        participation
    };
    let price = if price.eval(theta) < 0.0 {
        Linear::ZERO
    } else {
        price
    };
    // the participation cap leaves exactly zero surplus, up to rounding
    if v - price.eval(theta) - t * (1.0 - theta) >= -1e-12 * v {
        (Seller::B, price)
    } else {
        (Seller::NoPurchase, Linear::ZERO)
    }
}

/// Equilibrium purchase of consumer `theta` given A's uniform price.
pub fn allocate(theta: f64, shared: bool, p_a: f64, params: &MarketParams) -> Allocation {
    let (seller, price) = price_regime(theta, shared, p_a, params);
    Allocation {
        seller,
        price: price.eval(theta),
    }
}

/// Distance to the seller as a function of location, zero when nothing is bought.
pub(crate) fn travel(seller: Seller) -> Linear {
    match seller {
        Seller::A => Linear::new(0.0, 1.0),
        Seller::B => Linear::new(1.0, -1.0),
        Seller::NoPurchase => Linear::ZERO,
    }
}

pub fn consumer_utility(theta: f64, allocation: &Allocation, params: &MarketParams) -> f64 {
    match allocation.seller {
        Seller::NoPurchase => 0.0,
        seller => params.v() - allocation.price - params.t() * travel(seller).eval(theta),
    }
}
