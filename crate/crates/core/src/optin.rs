//! Consumer opt-in: firms may only share consumers who opted in, and a
//! threat-free Nash equilibrium (TFNE) must survive every single consumer
//! changing their opt-in choice.
//!
//! A single consumer has zero mass, so a deviation leaves A's uniform price,
//! both profits and the shape of the chosen mechanism unchanged. The only
//! thing that moves is the deviator's own shared status, which each
//! [`MechanismRule`] decides pointwise. Deviations are therefore evaluated
//! exactly, one location at a time, instead of re-solving perturbed games.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve, PriceSelection};
use crate::error::{Error, Result};
use crate::market::{
    allocate, consumer_utility, indifferent_location, joint_gain_threshold, ConsumerDistribution,
    IntervalSet, MarketOutcome, MarketParams, Mechanism,
};
use crate::mechanisms::{check_no_sharing_price, joint_profit_maximize_over};
use crate::welfare::{compare, NULL_MEASURE};

/// Consumers who allowed their location to be shared.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OptInProfile {
    pub opted_in: IntervalSet,
}

/// How firms map an opt-in set `C` to a mechanism feasible for `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismRule {
    /// Joint-profit maximizing set within `C`, with the transfer at the
    /// midpoint of the range that keeps both firms at least at their
    /// no-sharing profits (0 if that range is empty).
    FeasibleOptimum,
    /// `C ∩ [0, 1/2]` with no transfer.
    ShareFeasibleLeftHalf,
    /// All of `C` with no transfer.
    ShareAll,
    NoSharing,
}

/// How A's uniform price is determined under the chosen mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceRule {
    BestResponse(PriceSelection),
}

impl Default for PriceRule {
    fn default() -> Self {
        Self::BestResponse(PriceSelection::MaxPrice)
    }
}

impl PriceRule {
    fn selection(&self) -> PriceSelection {
        match self {
            Self::BestResponse(s) => *s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfneCandidate {
    pub c_star: IntervalSet,
    pub mechanism_rule: MechanismRule,
    pub price_rule: PriceRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfneViolation {
    pub theta: f64,
    pub bullet: u8,
    /// Utility when `theta` opts in.
    pub utility_in: f64,
    /// Utility when `theta` stays out.
    pub utility_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfneReport {
    pub bullet1_ok: bool,
    pub bullet2_ok: bool,
    pub bullet3_ok: bool,
    pub bullet4_ok: bool,
    pub violations: Vec<TfneViolation>,
    /// `m(C*)` and `p(C*)`.
    pub mechanism: Mechanism,
    pub uniform_price: f64,
}

impl TfneReport {
    pub fn passes(&self) -> bool {
        self.bullet1_ok && self.bullet2_ok && self.bullet3_ok && self.bullet4_ok
    }
}

const TOLERANCE: f64 = 1e-12;

/// Joint-profit maximizing mechanism feasible for `c`, and A's price under it.
pub fn feasible_optimum(
    c: &IntervalSet,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> Result<(Mechanism, f64)> {
    let opt = joint_profit_maximize_over(c, dist, params)?;
    Ok((opt.mechanism, opt.uniform_price))
}

/// Transfers keeping both firms weakly above their no-sharing profits.
fn ir_range(with: &MarketOutcome, without: &MarketOutcome) -> (f64, f64) {
    (
        without.revenue_b - with.revenue_b,
        with.revenue_a - without.revenue_a,
    )
}

impl MechanismRule {
    pub fn apply(
        &self,
        c: &IntervalSet,
        dist: &ConsumerDistribution,
        params: &MarketParams,
        select: PriceSelection,
    ) -> Result<Mechanism> {
        Ok(match self {
            Self::FeasibleOptimum => {
                let (m, _) = feasible_optimum(c, dist, params)?;
                let with = solve(&m, dist, params, select)?;
                let without = solve(&Mechanism::no_sharing(), dist, params, select)?;
                let (lo, hi) = ir_range(&with, &without);
                m.with_transfer(if lo <= hi { 0.5 * (lo + hi) } else { 0.0 })
            }
            Self::ShareFeasibleLeftHalf => Mechanism::new(c.clip(0.0, 0.5), 0.0),
            Self::ShareAll => Mechanism::new(c.clone(), 0.0),
            Self::NoSharing => Mechanism::no_sharing(),
        })
    }

    /// Whether consumer `theta`, joining the opt-in set, ends up shared.
    fn shares_joiner(&self, theta: f64, uniform_price: f64, params: &MarketParams) -> bool {
        match self {
            Self::FeasibleOptimum => theta < joint_gain_threshold(uniform_price, params).min(0.5),
            Self::ShareFeasibleLeftHalf => theta <= 0.5,
            Self::ShareAll => true,
            Self::NoSharing => false,
        }
    }
}

fn utility(theta: f64, shared: bool, p: f64, params: &MarketParams) -> f64 {
    consumer_utility(theta, &allocate(theta, shared, p, params), params)
}

/// Checks the four TFNE conditions with single-consumer deviations on the
/// grid `{0, grid, 2·grid, ...} ∩ [0, 1]`.
///
/// Conditions 1 and 4 concern only the chosen mechanism at `C*`, which a
/// null deviation leaves in place, so they are evaluated once: feasibility,
/// A's price being an equilibrium price, IR against no sharing, and joint
/// profit matching the best mechanism feasible for `C*`.
pub fn tfne_check(
    cand: &TfneCandidate,
    dist: &ConsumerDistribution,
    params: &MarketParams,
    deviation_grid: f64,
) -> Result<TfneReport> {
    if !(deviation_grid > 0.0 && deviation_grid.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "deviation grid {deviation_grid} must be positive"
        )));
    }
    let select = cand.price_rule.selection();
    let mech = cand
        .mechanism_rule
        .apply(&cand.c_star, dist, params, select)?;
    let outcome = solve(&mech, dist, params, select)?;
    let p = outcome.uniform_price;
    let tol = TOLERANCE * params.v().max(1.0);

    let bullet1_ok = mech.is_feasible_for(&cand.c_star) && outcome.is_equilibrium;

    let baseline = solve(&Mechanism::no_sharing(), dist, params, select)?;
    let best = joint_profit_maximize_over(&cand.c_star, dist, params)?;
    let bullet4_ok = outcome.profit_a() >= baseline.profit_a() - tol
        && outcome.profit_b() >= baseline.profit_b() - tol
        && outcome.joint_profit() >= best.joint_profit - 1e-9;

    let mut violations = Vec::new();
    let steps = (1.0 / deviation_grid).round() as usize;
    for i in 0..=steps {
        let theta = (i as f64 * deviation_grid).min(1.0);
        if cand.c_star.contains(theta) {
            let utility_in = utility(theta, mech.shared.contains(theta), p, params);
            let utility_out = utility(theta, false, p, params);
            if utility_in < utility_out - tol {
                violations.push(TfneViolation {
                    theta,
                    bullet: 2,
                    utility_in,
                    utility_out,
                });
            }
        } else {
            let joins = cand.mechanism_rule.shares_joiner(theta, p, params);
            let utility_in = utility(theta, joins, p, params);
            let utility_out = utility(theta, false, p, params);
            if utility_out < utility_in - tol {
                violations.push(TfneViolation {
                    theta,
                    bullet: 3,
                    utility_in,
                    utility_out,
                });
            }
        }
    }
    let bullet2_ok = !violations.iter().any(|v| v.bullet == 2);
    let bullet3_ok = !violations.iter().any(|v| v.bullet == 3);
    Ok(TfneReport {
        bullet1_ok,
        bullet2_ok,
        bullet3_ok,
        bullet4_ok,
        violations,
        mechanism: mech,
        uniform_price: p,
    })
}

/// Default deviation grid for [`prop4_construct`].
pub const DEVIATION_GRID: f64 = 1e-3;

/// Opt-in equilibrium whose chosen mechanism is the Pareto-improving one:
/// exactly the consumers `[μ(p_A), 1/4 + μ(p_A)/2]` opt in.
pub fn prop4_construct(
    p_a: f64,
    dist: &ConsumerDistribution,
    params: &MarketParams,
) -> Result<TfneCandidate> {
    check_no_sharing_price(p_a, dist, params)?;
    let mu = indifferent_location(p_a, params);
    let cand = TfneCandidate {
        c_star: IntervalSet::single(mu, 0.25 + mu / 2.0)?,
        mechanism_rule: MechanismRule::FeasibleOptimum,
        price_rule: PriceRule::BestResponse(PriceSelection::specified(p_a)?),
    };
    let report = tfne_check(&cand, dist, params, DEVIATION_GRID)?;
    if !report.passes() {
        return Err(Error::NotTfne(format!("{report:?}")));
    }
    Ok(cand)
}

/// Falsification check for a consumer-improving mechanism `mech` (uniform
/// price `q_a`, feasible for `c`): true when it gives consumers strictly
/// more than the Pareto-improving mechanism yet firms would rather pick
/// another consumer-improving mechanism feasible for `c`.
///
/// Competitors are `c` intersected with the Pareto-improving set and with
/// `[μ, x]` for `x` on a grid of step `grid`.
pub fn prop5_check(
    c: &IntervalSet,
    mech: &Mechanism,
    q_a: f64,
    dist: &ConsumerDistribution,
    params: &MarketParams,
    grid: f64,
) -> Result<bool> {
    if !(grid > 0.0 && grid.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "grid step {grid} must be positive"
        )));
    }
    if !mech.is_feasible_for(c) {
        return Err(Error::Precondition(
            "mechanism shares consumers outside the opt-in set".into(),
        ));
    }
    let baseline = solve(
        &Mechanism::no_sharing(),
        dist,
        params,
        PriceSelection::MaxPrice,
    )?;
    let p_a = baseline.uniform_price;
    let candidate = solve(mech, dist, params, PriceSelection::specified(q_a)?)?;
    if !candidate.is_equilibrium {
        return Err(Error::Precondition(format!(
            "{q_a} is not an equilibrium price for the mechanism"
        )));
    }
    let improves = |o: &MarketOutcome| -> Result<bool> {
        Ok(compare(&baseline, o, dist, params)?.worse_set.measure() < NULL_MEASURE)
    };
    if !improves(&candidate)? {
        return Err(Error::Precondition(
            "mechanism hurts a positive mass of consumers".into(),
        ));
    }

    let mu = indifferent_location(p_a, params);
    let star_set = IntervalSet::single(mu, 0.25 + mu / 2.0)?;
    let star = solve(
        &Mechanism::new(star_set.clone(), 0.0),
        dist,
        params,
        PriceSelection::specified(p_a)?,
    )?;
    let tol = 1e-12 * params.v().max(1.0);
    if candidate.consumer_welfare <= star.consumer_welfare + tol {
        return Ok(false);
    }

    let steps = ((1.0 - mu) / grid).ceil() as usize;
    let competitors = std::iter::once(c.intersection(&star_set))
        .chain((0..=steps).map(|i| c.clip(mu, (mu + i as f64 * grid).min(1.0))));
    for shared in competitors {
        let o = solve(
            &Mechanism::new(shared, 0.0),
            dist,
            params,
            PriceSelection::MaxPrice,
        )?;
        if o.joint_profit() > candidate.joint_profit() + 1e-9 && improves(&o)? {
            return Ok(true);
        }
    }
    Ok(false)
}
