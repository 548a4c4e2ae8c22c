use serde::{Deserialize, Serialize};

use super::distribution::ConsumerDistribution;
use super::linear::Linear;
use super::mechanism::Mechanism;
use super::params::MarketParams;
use super::pricing::{self, allocate, Allocation, Seller};

/// Stretch of locations over which the winner and the price formula are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub seller: Seller,
    pub shared: bool,
    pub price: Linear,
}

impl Segment {
    pub fn utility(&self, params: &MarketParams) -> Linear {
        match self.seller {
            Seller::NoPurchase => Linear::ZERO,
            s => Linear::constant(params.v()) - self.price - scale(pricing::travel(s), params.t()),
        }
    }

    /// Value created net of travel cost; independent of the price paid.
    pub fn gross_surplus(&self, params: &MarketParams) -> Linear {
        match self.seller {
            Seller::NoPurchase => Linear::ZERO,
            s => Linear::constant(params.v()) - scale(pricing::travel(s), params.t()),
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }
}

fn scale(l: Linear, k: f64) -> Linear {
    Linear::new(l.intercept * k, l.slope * k)
}

/// Subgame outcome for a mechanism and A's uniform price: the allocation
/// schedule plus aggregate profits and consumer welfare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketOutcome {
    pub params: MarketParams,
    pub distribution: ConsumerDistribution,
    pub mechanism: Mechanism,
    pub uniform_price: f64,
    pub segments: Vec<Segment>,
    pub breakpoints: Vec<f64>,
    /// Sales revenue of A, before the transfer.
    pub revenue_a: f64,
    /// Sales revenue of B, before the transfer.
    pub revenue_b: f64,
    pub consumer_welfare: f64,
    /// False when `uniform_price` is not a best response for A.
    pub is_equilibrium: bool,
}

impl MarketOutcome {
    /// Fixes every consumer's personalized prices given A's uniform price and
    /// integrates profits and welfare exactly between allocation breakpoints.
    pub fn at_price(
        mechanism: &Mechanism,
        distribution: &ConsumerDistribution,
        params: &MarketParams,
        uniform_price: f64,
        is_equilibrium: bool,
    ) -> Self {
        let mu = pricing::indifferent_location(uniform_price, params);
        let cap = pricing::participation_cap_location(uniform_price, params);
        let mut cuts: Vec<f64> = [0.0, 1.0, mu, 0.5, cap]
            .into_iter()
            .chain(mechanism.shared.endpoints())
            .chain(distribution.nodes().iter().copied())
            .filter(|x| (0.0..=1.0).contains(x))
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut segments: Vec<Segment> = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let shared = mechanism.shared.contains(mid);
            let (seller, price) = pricing::price_regime(mid, shared, uniform_price, params);
            match segments.last_mut() {
                Some(last)
                    if last.seller == seller && last.shared == shared && last.price == price =>
                {
                    last.hi = hi;
                }
                _ => segments.push(Segment {
                    lo,
                    hi,
                    seller,
                    shared,
                    price,
                }),
            }
        }

        let (mut revenue_a, mut revenue_b, mut welfare) = (0.0, 0.0, 0.0);
        for s in &segments {
            let revenue = distribution.integrate(s.lo, s.hi, s.price);
            match s.seller {
                Seller::A => revenue_a += revenue,
                Seller::B => revenue_b += revenue,
                Seller::NoPurchase => {}
            }
            welfare += distribution.integrate(s.lo, s.hi, s.utility(params));
        }
        let mut breakpoints: Vec<f64> = segments.iter().map(|s| s.lo).collect();
        breakpoints.push(1.0);

        Self {
            params: *params,
            distribution: distribution.clone(),
            mechanism: mechanism.clone(),
            uniform_price,
            segments,
            breakpoints,
            revenue_a,
            revenue_b,
            consumer_welfare: welfare,
            is_equilibrium,
        }
    }

    pub fn transfer(&self) -> f64 {
        self.mechanism.transfer
    }

    pub fn profit_a(&self) -> f64 {
        self.revenue_a - self.transfer()
    }

    pub fn profit_b(&self) -> f64 {
        self.revenue_b + self.transfer()
    }

    /// Sum of both firms' profits; the transfer nets out exactly.
    pub fn joint_profit(&self) -> f64 {
        self.revenue_a + self.revenue_b
    }

    /// Same allocation with a different transfer.
    pub fn with_transfer(&self, transfer: f64) -> Self {
        let mut out = self.clone();
        out.mechanism.transfer = transfer;
        out
    }

    /// Pointwise allocation of `theta`, with the exact tie rules.
    pub fn allocation_at(&self, theta: f64) -> Allocation {
        allocate(
            theta,
            self.mechanism.shared.contains(theta),
            self.uniform_price,
            &self.params,
        )
    }

    pub fn utility_at(&self, theta: f64) -> f64 {
        pricing::consumer_utility(theta, &self.allocation_at(theta), &self.params)
    }

    /// Segment covering `theta`; the left one at a breakpoint.
    pub fn segment_at(&self, theta: f64) -> Option<&Segment> {
        self.segments.iter().find(|s| s.contains(theta))
    }

    /// `∫ (v - t·distance to seller) dF`.
    pub fn gross_surplus(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                self.distribution
                    .integrate(s.lo, s.hi, s.gross_surplus(&self.params))
            })
            .sum()
    }
}
