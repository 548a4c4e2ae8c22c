//! Named data-sharing mechanisms and the single-consumer direct-effect analysis.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{no_sharing_price_set, solve, PriceSelection};
use crate::error::{Error, Result};
use crate::market::{
    allocate, consumer_utility, indifferent_location, joint_gain_threshold, ConsumerDistribution,
    IntervalSet, MarketOutcome, MarketParams, Mechanism, Seller,
};

/// Which part of the line a shared consumer sits in, relative to `μ(p_A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectEffectCase {
    /// `θ ∈ [1/2, 1]`: still buys from B, at a lower price.
    RightHalf,
    /// `θ ∈ [μ(p_A), 1/2)`: switches from B to A.
    SwitchRegion,
    /// `θ ∈ [0, μ(p_A))`: still buys from A, now at a higher personalized price.
    LeftOfMu,
}

/// Change from sharing the single location `θ` at a fixed uniform price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectEffectReport {
    pub case: DirectEffectCase,
    pub delta_profit_a: f64,
    pub delta_profit_b: f64,
    pub delta_consumer: f64,
    /// Travel-cost saving. Equals the sum of the three deltas: zero unless the
    /// consumer switches to the nearer firm.
    pub delta_gross_surplus: f64,
    pub joint_gain_positive: bool,
}

fn revenue(seller: Seller, price: f64) -> (f64, f64) {
    match seller {
        Seller::A => (price, 0.0),
        Seller::B => (0.0, price),
        Seller::NoPurchase => (0.0, 0.0),
    }
}

/// Direct effect of sharing consumer `theta` relative to no sharing, at
/// uniform price `p_a ∈ [0, t]`.
pub fn lemma1_classify(theta: f64, p_a: f64, params: &MarketParams) -> Result<DirectEffectReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Precondition(format!(
            "location {theta} outside [0, 1]"
        )));
    }
    if !(p_a >= 0.0 && p_a <= params.t()) {
        return Err(Error::Precondition(format!(
            "uniform price {p_a} outside [0, t = {}]",
            params.t()
        )));
    }
    let mu = indifferent_location(p_a, params);
    let case = if theta >= 0.5 {
        DirectEffectCase::RightHalf
    } else if theta >= mu {
        DirectEffectCase::SwitchRegion
    } else {
        DirectEffectCase::LeftOfMu
    };
    let before = allocate(theta, false, p_a, params);
    let after = allocate(theta, true, p_a, params);
    let (a0, b0) = revenue(before.seller, before.price);
    let (a1, b1) = revenue(after.seller, after.price);
    let delta_consumer =
        consumer_utility(theta, &after, params) - consumer_utility(theta, &before, params);
    let (delta_profit_a, delta_profit_b) = (a1 - a0, b1 - b0);
    let t = params.t();
    let delta_gross_surplus = match case {
        DirectEffectCase::SwitchRegion => t * (1.0 - 2.0 * theta),
        _ => 0.0,
    };
    Ok(DirectEffectReport {
        case,
        delta_profit_a,
        delta_profit_b,
        delta_consumer,
        delta_gross_surplus,
        joint_gain_positive: delta_profit_a + delta_profit_b > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmOptimal {
    pub mechanism: Mechanism,
    /// Uniform price of the supporting equilibrium, `v - t/2`.
    pub intended_price: f64,
    /// Whether `v > 5t / (2(1 - F(1/2)))`, the sufficient condition for
    /// optimality. The mechanism can be optimal without it.
    pub condition_satisfied: bool,
}

/// Share the left half, `([0, 1/2], 0)`, supported by A's price `v - t/2`.
pub fn firm_optimal(dist: &ConsumerDistribution, params: &MarketParams) -> FirmOptimal {
    let bound = 5.0 * params.t() / (2.0 * (1.0 - dist.cdf(0.5)));
    FirmOptimal {
        mechanism: Mechanism::new(IntervalSet::full().clip(0.0, 0.5), 0.0),
        intended_price: params.surplus_extraction_price(),
        condition_satisfied: params.v() > bound,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoImproving {
    /// Carries the midpoint of `transfer_range` as its transfer.
    pub mechanism: Mechanism,
    pub uniform_price: f64,
    /// Transfers `[r_min, r_max]` leaving both firms at least as well off as
    /// without sharing.
    pub transfer_range: (f64, f64),
}

/// Tolerance for recognizing a supplied price as a member of `P_A`.
const PRICE_MATCH: f64 = 1e-6;

pub(crate) fn check_no_sharing_price(
    p_a: f64,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> Result<()> {
    let set = no_sharing_price_set(dist, params);
    let tol = PRICE_MATCH * params.t().max(1.0);
    if set.prices().iter().any(|c| (c - p_a).abs() <= tol) {
        return Ok(());
    }
    let got =
        crate::equilibrium::uniform_price_objective(p_a, &Mechanism::no_sharing(), dist, params);
    Err(Error::NotBestResponse {
        price: p_a,
        best: set.best_objective(),
        got,
    })
}

/// Share `[μ(p_A), 1/4 + μ(p_A)/2]`: consumers who switch to A and whose
/// switch raises joint profit, keeping A's uniform price at `p_a`.
pub fn pareto_improving(
    p_a: f64,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> Result<ParetoImproving> {
    check_no_sharing_price(p_a, dist, params)?;
    let mu = indifferent_location(p_a, params);
    let shared = IntervalSet::single(mu, 0.25 + mu / 2.0)?;
    let select = PriceSelection::specified(p_a)?;
    let base = solve(&Mechanism::no_sharing(), dist, params, select)?;
    let with = solve(&Mechanism::new(shared.clone(), 0.0), dist, params, select)?;
    let r_min = base.revenue_b - with.revenue_b;
    let r_max = with.revenue_a - base.revenue_a;
    if r_min > r_max {
        return Err(Error::EmptyTransferInterval { r_min, r_max });
    }
    Ok(ParetoImproving {
        mechanism: Mechanism::new(shared, 0.5 * (r_min + r_max)),
        uniform_price: p_a,
        transfer_range: (r_min, r_max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointOptimum {
    pub mechanism: Mechanism,
    pub uniform_price: f64,
    pub joint_profit: f64,
    pub outcome: MarketOutcome,
}

/// Resolution of the generating price grid, in units of `t`.
const JOINT_GRID: usize = 1000;

/// Shared set `feasible ∩ [0, 1/2 - p/(4t)]`: every feasible consumer whose
/// sharing strictly raises pointwise joint profit at uniform price `p`.
pub fn joint_gain_set(p: f64, feasible: &IntervalSet, params: &MarketParams) -> IntervalSet {
    let threshold = joint_gain_threshold(p, params).min(0.5);
    if threshold <= 0.0 {
        IntervalSet::empty()
    } else {
        feasible.clip(0.0, threshold)
    }
}

/// Joint-profit maximizing mechanism among those sharing only `feasible`.
///
/// Each uniform price `p` on a grid over `[0, t]` (plus `v - t/2`) generates
/// the pointwise-profitable set `S(p)`; each `(S(p), 0)` is then solved with
/// A best-responding, and the best equilibrium is returned together with
/// A's equilibrium price. The transfer is left at 0.
pub fn joint_profit_maximize_over(
    feasible: &IntervalSet,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> Result<JointOptimum> {
    let t = params.t();
    let prices = (0..=JOINT_GRID)
        .map(|i| i as f64 / JOINT_GRID as f64 * t)
        .chain(std::iter::once(params.surplus_extraction_price()));
    let mut seen: Vec<IntervalSet> = Vec::new();
    let mut best: Option<MarketOutcome> = None;
    for p in prices {
        let shared = joint_gain_set(p, feasible, params);
        if seen.contains(&shared) {
            continue;
        }
        let out = solve(
            &Mechanism::new(shared.clone(), 0.0),
            dist,
            params,
            PriceSelection::MaxPrice,
        )?;
        seen.push(shared);
        if best
            .as_ref()
            .is_none_or(|b| out.joint_profit() > b.joint_profit())
        {
            best = Some(out);
        }
    }
    let outcome = best.expect("price grid is non-empty");
    Ok(JointOptimum {
        mechanism: outcome.mechanism.clone(),
        uniform_price: outcome.uniform_price,
        joint_profit: outcome.joint_profit(),
        outcome,
    })
}
