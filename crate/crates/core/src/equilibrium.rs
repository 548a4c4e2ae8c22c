//! Firm A's uniform-price best response and complete subgame outcomes.
//!
//! Once a mechanism is fixed, A's uniform price only matters for the
//! residual demand: unshared consumers left of `μ(p)`. Everything else is
//! pinned down pointwise by the pricing rules, so solving a subgame reduces
//! to a one-dimensional maximization of `p · F(residual ∩ [0, μ(p)))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    indifferent_location, ConsumerDistribution, IntervalSet, MarketOutcome, MarketParams, Mechanism,
};
use crate::search::{bisect_slope, golden_section_max};

/// Grid points per unit of `t` for the coarse scan.
const GRID_POINTS: usize = 10_000;
const REFINE_TOL: f64 = 1e-10;
/// Candidates whose objective is this close to the best are all optimal.
pub const OPTIMUM_TOLERANCE: f64 = 1e-9;
const DEDUP_TOLERANCE: f64 = 1e-7;
/// Residual mass below this is treated as no residual demand at all.
const NULL_RESIDUAL: f64 = 1e-14;

/// How A's uniform price is picked among its best responses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceSelection {
    #[default]
    MaxPrice,
    MinPrice,
    Specified(f64),
}

impl PriceSelection {
    pub fn specified(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 0.0 {
            Ok(Self::Specified(p))
        } else {
            Err(Error::InvalidPrice(p))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceCandidate {
    pub price: f64,
    pub objective: f64,
}

/// Optimal uniform prices for A against a fixed shared set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    /// Global maximizers, ascending by price.
    pub candidates: Vec<PriceCandidate>,
    /// True when no unshared consumer can ever buy from A, so every price
    /// is a best response.
    pub degenerate: bool,
}

impl EquilibriumSet {
    pub fn best_objective(&self) -> f64 {
        self.candidates
            .iter()
            .map(|c| c.objective)
            .fold(0.0, f64::max)
    }

    pub fn max_price(&self) -> Option<f64> {
        self.candidates.last().map(|c| c.price)
    }

    pub fn min_price(&self) -> Option<f64> {
        self.candidates.first().map(|c| c.price)
    }

    pub fn prices(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.price).collect()
    }
}

/// F-mass of unshared consumers left of `μ(p)`.
pub fn residual_demand(
    p: f64,
    shared: &IntervalSet,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> f64 {
    let mu = indifferent_location(p, params);
    let served = dist.cdf(mu);
    let removed = dist.mass(&shared.clip(0.0, mu));
    (served - removed).max(0.0)
}

pub fn uniform_price_objective(
    p: f64,
    mech: &Mechanism,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> f64 {
    objective(p, &mech.shared, dist, params)
}

fn objective(
    p: f64,
    shared: &IntervalSet,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> f64 {
    p * residual_demand(p, shared, dist, params)
}

/// Derivative of the objective in `p`; one-sided at kinks.
fn objective_slope(
    p: f64,
    shared: &IntervalSet,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> f64 {
    let mu = indifferent_location(p, params);
    let density = if shared.contains(mu) {
        0.0
    } else {
        dist.pdf(mu)
    };
    residual_demand(p, shared, dist, params) - p * density / (2.0 * params.t())
}

/// Best-response uniform prices of A given the shared set: a grid scan over
/// `[0, t]`, golden-section refinement around each local maximum, then a
/// slope bisection that pins the peak to machine precision.
pub fn best_response_set(
    shared: &IntervalSet,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> EquilibriumSet {
    if residual_demand(0.0, shared, dist, params) <= NULL_RESIDUAL {
        return EquilibriumSet {
            candidates: Vec::new(),
            degenerate: true,
        };
    }
    let t = params.t();
    let h = |p: f64| objective(p, shared, dist, params);
    let step = t / GRID_POINTS as f64;
    let grid: Vec<f64> = (0..=GRID_POINTS).map(|i| h(i as f64 * step)).collect();

    let mut found = Vec::new();
    for i in 1..GRID_POINTS {
        if grid[i] > 0.0 && grid[i] >= grid[i - 1] && grid[i] >= grid[i + 1] {
            let (a, b) = ((i - 1) as f64 * step, (i + 1) as f64 * step);
            let (mut x, mut fx) = golden_section_max(h, a, b, REFINE_TOL);
            let slope = |p: f64| objective_slope(p, shared, dist, params);
            if slope(a) > 0.0 && slope(b) < 0.0 {
                let xb = bisect_slope(slope, a, b);
                let fb = h(xb);
                if fb >= fx {
                    (x, fx) = (xb, fb);
                }
            }
            found.push(PriceCandidate {
                price: x,
                objective: fx,
            });
        }
    }
    let best = found.iter().map(|c| c.objective).fold(0.0, f64::max);
    found.retain(|c| c.objective >= best - OPTIMUM_TOLERANCE);
    found.sort_by(|a, b| a.price.total_cmp(&b.price));
    let mut candidates: Vec<PriceCandidate> = Vec::with_capacity(found.len());
    for c in found {
        match candidates.last_mut() {
            Some(last) if c.price - last.price < DEDUP_TOLERANCE => {
                if c.objective > last.objective {
                    *last = c;
                }
            }
            _ => candidates.push(c),
        }
    }
    EquilibriumSet {
        candidates,
        degenerate: false,
    }
}

/// The set `P_A` of optimal no-sharing uniform prices.
pub fn no_sharing_price_set(dist: &ConsumerDistribution, params: &MarketParams) -> EquilibriumSet {
    best_response_set(&IntervalSet::empty(), dist, params)
}

/// Subgame-perfect outcome of the game that starts with `mech`.
///
/// A `Specified` price that is not a best response still yields an outcome,
/// flagged with `is_equilibrium = false`.
pub fn solve(
    mech: &Mechanism,
    dist: &ConsumerDistribution,
    params: &MarketParams,
    select: PriceSelection,
) -> Result<MarketOutcome> {
    let set = best_response_set(&mech.shared, dist, params);
    solve_with_set(mech, dist, params, select, &set)
}

pub(crate) fn solve_with_set(
    mech: &Mechanism,
    dist: &ConsumerDistribution,
    params: &MarketParams,
    select: PriceSelection,
    set: &EquilibriumSet,
) -> Result<MarketOutcome> {
    let (price, is_equilibrium) = match (select, set.degenerate) {
        (PriceSelection::Specified(p), _) if !(p.is_finite() && p >= 0.0) => {
            return Err(Error::InvalidPrice(p));
        }
        (PriceSelection::Specified(p), true) => (p, true),
        (PriceSelection::Specified(p), false) => {
            let value = objective(p, &mech.shared, dist, params);
            (p, value >= set.best_objective() - OPTIMUM_TOLERANCE)
        }
        (PriceSelection::MaxPrice, true) => (params.surplus_extraction_price(), true),
        (PriceSelection::MinPrice, true) => (0.0, true),
        (PriceSelection::MaxPrice, false) => (set.max_price().expect("non-degenerate set"), true),
        (PriceSelection::MinPrice, false) => (set.min_price().expect("non-degenerate set"), true),
    };
    Ok(MarketOutcome::at_price(
        mech,
        dist,
        params,
        price,
        is_equilibrium,
    ))
}
