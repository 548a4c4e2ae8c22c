//! Discretized brute-force solver, independent of the closed-form pricing.
//!
//! Consumers live at cell midpoints carrying the cell's probability mass and
//! every price is drawn from a grid of step `δ`. Each firm's choice is found
//! by searching that grid with nothing but utility comparisons: a consumer
//! buys from whichever firm offers more utility (ties to B, or to the nearer
//! firm when both price personally), and only if that utility is
//! non-negative. Winning is monotone in the winner's own price, so "largest
//! winning grid price" is located by bisection over grid indices.
//!
//! Shared consumers face a personalized Bertrand game. The farther firm's
//! best reply to any winning price is to cut to 0, so after one round of
//! elimination the nearer firm charges the largest grid price still beating
//! its rival's price of 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Allocation, ConsumerDistribution, MarketParams, Mechanism, Seller};

type UtilityFn = fn(f64, f64, &MarketParams) -> f64;

/// Consumer grid with cell masses plus a price grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMarket {
    n: usize,
    delta: f64,
    locations: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMarket {
    pub const MIN_CELLS: usize = 100;

    pub fn new(
        dist: &ConsumerDistribution,
        n: usize,
        delta: f64,
        params: &MarketParams,
    ) -> Result<Self> {
        if n < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "{n} cells, need at least {}",
                Self::MIN_CELLS
            )));
        }
        if !(delta > 0.0 && delta <= params.t() / 100.0) {
            return Err(Error::InvalidGrid(format!(
                "price step {delta} must lie in (0, t/100 = {}]",
                params.t() / 100.0
            )));
        }
        let locations: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let weights: Vec<f64> = (0..n)
            .map(|i| dist.mass_between(i as f64 / n as f64, (i + 1) as f64 / n as f64))
            .collect();
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "cell masses sum to {total}"
            )));
        }
        Ok(Self {
            n,
            delta,
            locations,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub uniform_price: f64,
    pub revenue_a: f64,
    pub revenue_b: f64,
    pub consumer_welfare: f64,
    pub transfer: f64,
    /// Allocation of every consumer cell, in grid order.
    pub cells: Vec<Allocation>,
}

impl OracleOutcome {
    pub fn profit_a(&self) -> f64 {
        self.revenue_a - self.transfer
    }

    pub fn profit_b(&self) -> f64 {
        self.revenue_b + self.transfer
    }

    pub fn joint_profit(&self) -> f64 {
        self.revenue_a + self.revenue_b
    }
}

fn utility_a(theta: f64, price: f64, params: &MarketParams) -> f64 {
    params.v() - params.t() * theta - price
}

fn utility_b(theta: f64, price: f64, params: &MarketParams) -> f64 {
    params.v() - params.t() * (1.0 - theta) - price
}

/// Largest `k ≤ hi` with `wins(k)`, for a predicate true on a prefix.
fn largest_winning(hi: usize, wins: impl Fn(usize) -> bool) -> Option<usize> {
    if !wins(0) {
        return None;
    }
    let (mut lo, mut hi) = (0, hi);
    if wins(hi) {
        return Some(hi);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if wins(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Reusable per-market state: everything that does not depend on the mechanism.
struct Solver<'a> {
    dm: &'a DiscreteMarket,
    params: &'a MarketParams,
    /// Grid prices `0, δ, ..., Kδ ≤ t`, then `v - t/2`.
    a_prices: Vec<f64>,
    b_steps: usize,
    shared: Vec<Allocation>,
    /// Per unshared cell: index of A's highest winning uniform price.
    a_reach: Vec<Option<usize>>,
    unshared_at: HashMap<usize, Vec<Allocation>>,
}

impl<'a> Solver<'a> {
    fn new(dm: &'a DiscreteMarket, params: &'a MarketParams) -> Self {
        let k = (params.t() / dm.delta + 1e-9).floor() as usize;
        let mut a_prices: Vec<f64> = (0..=k).map(|i| i as f64 * dm.delta).collect();
        a_prices.push(params.surplus_extraction_price());
        let b_steps = (params.v() / dm.delta).ceil() as usize;
        let mut s = Self {
            dm,
            params,
            a_prices,
            b_steps,
            shared: Vec::new(),
            a_reach: Vec::new(),
            unshared_at: HashMap::new(),
        };
        s.shared = dm.locations.iter().map(|&x| s.shared_cell(x)).collect();
        s.a_reach = dm
            .locations
            .iter()
            .map(|&x| largest_winning(s.a_prices.len() - 1, |i| s.a_wins(x, s.a_prices[i])))
            .collect();
        s
    }

    /// A keeps an unshared consumer at uniform price `p` only if B cannot
    /// win the consumer even at price 0.
    fn a_wins(&self, theta: f64, p: f64) -> bool {
        let ua = utility_a(theta, p, self.params);
        ua >= 0.0 && ua > utility_b(theta, 0.0, self.params)
    }

    fn b_grid(&self, k: usize) -> f64 {
        k as f64 * self.dm.delta
    }

    fn unshared_cell(&self, theta: f64, p: f64) -> Allocation {
        let ua = utility_a(theta, p, self.params);
        let target = ua.max(0.0);
        match largest_winning(self.b_steps, |k| {
            utility_b(theta, self.b_grid(k), self.params) >= target
        }) {
            Some(k) => Allocation {
                seller: Seller::B,
                price: self.b_grid(k),
            },
            None if ua >= 0.0 => Allocation {
                seller: Seller::A,
                price: p,
            },
            None => Allocation {
                seller: Seller::NoPurchase,
                price: 0.0,
            },
        }
    }

    fn shared_cell(&self, theta: f64) -> Allocation {
        let params = self.params;
        let (near, u_near, u_far): (Seller, UtilityFn, UtilityFn) = if theta < 0.5 {
            (Seller::A, utility_a, utility_b)
        } else {
            (Seller::B, utility_b, utility_a)
        };
        let target = u_far(theta, 0.0, params).max(0.0);
        match largest_winning(self.b_steps, |k| {
            u_near(theta, self.b_grid(k), params) >= target
        }) {
            Some(k) => Allocation {
                seller: near,
                price: self.b_grid(k),
            },
            None if u_far(theta, 0.0, params) >= 0.0 => Allocation {
                seller: if near == Seller::A {
                    Seller::B
                } else {
                    Seller::A
                },
                price: 0.0,
            },
            None => Allocation {
                seller: Seller::NoPurchase,
                price: 0.0,
            },
        }
    }

    /// Index of A's revenue-maximizing candidate price; ties go to the higher price.
    fn best_price(&self, shared: &[bool]) -> usize {
        let mut mass = vec![0.0; self.a_prices.len()];
        for ((&w, reach), &s) in self.dm.weights.iter().zip(&self.a_reach).zip(shared) {
            if let (false, Some(k)) = (s, reach) {
                mass[*k] += w;
            }
        }
        let mut best = (0, f64::NEG_INFINITY);
        let mut residual = 0.0;
        let mut objective = vec![0.0; mass.len()];
        for i in (0..mass.len()).rev() {
            residual += mass[i];
            objective[i] = self.a_prices[i] * residual;
        }
        for (i, &obj) in objective.iter().enumerate() {
            if obj >= best.1 {
                best = (i, obj);
            }
        }
        best.0
    }

    fn unshared_allocations(&mut self, price_index: usize) -> &[Allocation] {
        if !self.unshared_at.contains_key(&price_index) {
            let p = self.a_prices[price_index];
            let cells = self
                .dm
                .locations
                .iter()
                .map(|&x| self.unshared_cell(x, p))
                .collect();
            self.unshared_at.insert(price_index, cells);
        }
        &self.unshared_at[&price_index]
    }

    fn solve(&mut self, mech: &Mechanism) -> OracleOutcome {
        let shared: Vec<bool> = self
            .dm
            .locations
            .iter()
            .map(|&x| mech.shared.contains(x))
            .collect();
        let idx = self.best_price(&shared);
        let p = self.a_prices[idx];
        let params = *self.params;
        let locations = self.dm.locations.clone();
        let weights = self.dm.weights.clone();
        let personal = self.shared.clone();
        let unshared = self.unshared_allocations(idx);
        let (mut ra, mut rb, mut cw) = (0.0, 0.0, 0.0);
        let mut cells = Vec::with_capacity(locations.len());
        for i in 0..locations.len() {
            let alloc = if shared[i] { personal[i] } else { unshared[i] };
            let theta = locations[i];
            let w = weights[i];
            match alloc.seller {
                Seller::A => {
                    ra += w * alloc.price;
                    cw += w * utility_a(theta, alloc.price, &params);
                }
                Seller::B => {
                    rb += w * alloc.price;
                    cw += w * utility_b(theta, alloc.price, &params);
                }
                Seller::NoPurchase => {}
            }
            cells.push(alloc);
        }
        OracleOutcome {
            uniform_price: p,
            revenue_a: ra,
            revenue_b: rb,
            consumer_welfare: cw,
            transfer: mech.transfer,
            cells,
        }
    }
}

/// Backward induction on the grids: personalized prices for every candidate
/// uniform price, then A's revenue-maximizing grid price.
pub fn brute_solve(mech: &Mechanism, dm: &DiscreteMarket, params: &MarketParams) -> OracleOutcome {
    Solver::new(dm, params).solve(mech)
}

/// Grid-found change from sharing the single consumer `theta` at fixed
/// uniform price `p_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleDirectEffect {
    pub unshared: Allocation,
    pub shared: Allocation,
    pub delta_profit_a: f64,
    pub delta_profit_b: f64,
    pub delta_consumer: f64,
}

pub fn direct_effect(
    theta: f64,
    p_a: f64,
    dm: &DiscreteMarket,
    params: &MarketParams,
) -> OracleDirectEffect {
    let s = Solver {
        dm,
        params,
        a_prices: Vec::new(),
        b_steps: (params.v() / dm.delta).ceil() as usize,
        shared: Vec::new(),
        a_reach: Vec::new(),
        unshared_at: HashMap::new(),
    };
    let before = s.unshared_cell(theta, p_a);
    let after = s.shared_cell(theta);
    let split = |a: Allocation| match a.seller {
        Seller::A => (a.price, 0.0, utility_a(theta, a.price, params)),
        Seller::B => (0.0, a.price, utility_b(theta, a.price, params)),
        Seller::NoPurchase => (0.0, 0.0, 0.0),
    };
    let (a0, b0, u0) = split(before);
    let (a1, b1, u1) = split(after);
    OracleDirectEffect {
        unshared: before,
        shared: after,
        delta_profit_a: a1 - a0,
        delta_profit_b: b1 - b0,
        delta_consumer: u1 - u0,
    }
}

/// Shapes of `M_B` searched by [`brute_mechanism_search`]; endpoints are
/// drawn from `{0, 1/k, ..., 1}` for `k = endpoints`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MechanismFamily {
    Empty,
    SingleInterval { endpoints: usize },
    TwoInterval { endpoints: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchConstraint {
    #[default]
    None,
    /// No consumer cell may lose more than `2δ` relative to no sharing.
    ConsumerParetoImproving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub mechanism: Mechanism,
    pub joint_profit: f64,
    pub outcome: OracleOutcome,
    pub evaluated: usize,
}

/// Maximum endpoint count for two-interval searches.
pub const TWO_INTERVAL_MAX_ENDPOINTS: usize = 100;

fn candidates(family: MechanismFamily) -> Result<Vec<Vec<(f64, f64)>>> {
    let grid = |k: usize| -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::InvalidGrid("endpoint count must be positive".into()));
        }
        Ok((0..=k).map(|i| i as f64 / k as f64).collect())
    };
    Ok(match family {
        MechanismFamily::Empty => vec![Vec::new()],
        MechanismFamily::SingleInterval { endpoints } => {
            let g = grid(endpoints)?;
            let mut out = vec![Vec::new()];
            for i in 0..g.len() {
                for j in i + 1..g.len() {
                    out.push(vec![(g[i], g[j])]);
                }
            }
            out
        }
        MechanismFamily::TwoInterval { endpoints } => {
            if endpoints > TWO_INTERVAL_MAX_ENDPOINTS {
                return Err(Error::InvalidGrid(format!(
                    "{endpoints} endpoints, at most {TWO_INTERVAL_MAX_ENDPOINTS} for two intervals"
                )));
            }
            let g = grid(endpoints)?;
            let mut out = vec![Vec::new()];
            for a in 0..g.len() {
                for b in a + 1..g.len() {
                    out.push(vec![(g[a], g[b])]);
                    for c in b + 1..g.len() {
                        for d in c + 1..g.len() {
                            out.push(vec![(g[a], g[b]), (g[c], g[d])]);
                        }
                    }
                }
            }
            out
        }
    })
}

/// Exhaustive search for the joint-profit maximizing mechanism in `family`,
/// each candidate evaluated by [`brute_solve`]. The first of equal optima wins.
pub fn brute_mechanism_search(
    dm: &DiscreteMarket,
    params: &MarketParams,
    family: MechanismFamily,
    constraint: SearchConstraint,
) -> Result<SearchResult> {
    let mut solver = Solver::new(dm, params);
    let baseline = solver.solve(&Mechanism::no_sharing());
    let slack = 2.0 * dm.delta;
    let admissible = |o: &OracleOutcome| match constraint {
        SearchConstraint::None => true,
        SearchConstraint::ConsumerParetoImproving => {
            dm.locations.iter().enumerate().all(|(i, &x)| {
                cell_utility(x, o.cells[i], params)
                    >= cell_utility(x, baseline.cells[i], params) - slack
            })
        }
    };
    let mut best: Option<SearchResult> = None;
    let mut evaluated = 0;
    for pairs in candidates(family)? {
        let mech = Mechanism::new(crate::market::IntervalSet::from_pairs(pairs)?, 0.0);
        let out = solver.solve(&mech);
        evaluated += 1;
        if !admissible(&out) {
            continue;
        }
        if best
            .as_ref()
            .is_none_or(|b| out.joint_profit() > b.joint_profit)
        {
            best = Some(SearchResult {
                joint_profit: out.joint_profit(),
                mechanism: mech,
                outcome: out,
                evaluated: 0,
            });
        }
    }
    let mut best = best.expect("the empty mechanism is always admissible");
    best.evaluated = evaluated;
    Ok(best)
}

fn cell_utility(theta: f64, a: Allocation, params: &MarketParams) -> f64 {
    match a.seller {
        Seller::A => utility_a(theta, a.price, params),
        Seller::B => utility_b(theta, a.price, params),
        Seller::NoPurchase => 0.0,
    }
}
