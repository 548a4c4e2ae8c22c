use serde::{Deserialize, Serialize};

use super::interval::IntervalSet;
use super::linear::Linear;
use crate::error::{Error, Result};

/// Total-mass tolerance accepted by the validating constructors.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Uniform,
    PiecewiseLinearDensity,
}

/// Consumer location distribution on `[0, 1]` with a continuous,
/// strictly positive, piecewise-linear density.
///
/// The density is linear between consecutive `nodes`; `densities[i]` is its
/// value at `nodes[i]`. The first node is 0 and the last is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct ConsumerDistribution {
    kind: DistributionKind,
    nodes: Vec<f64>,
    densities: Vec<f64>,
    /// CDF at each node.
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    kind: DistributionKind,
    nodes: Vec<f64>,
    densities: Vec<f64>,
}

impl TryFrom<RawDistribution> for ConsumerDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw.kind {
            DistributionKind::Uniform => Ok(Self::uniform()),
            DistributionKind::PiecewiseLinearDensity => {
                Self::piecewise_linear(raw.nodes, raw.densities)
            }
        }
    }
}

impl From<ConsumerDistribution> for RawDistribution {
    fn from(d: ConsumerDistribution) -> Self {
        RawDistribution {
            kind: d.kind,
            nodes: d.nodes,
            densities: d.densities,
        }
    }
}

impl ConsumerDistribution {
    pub fn uniform() -> Self {
        Self {
            kind: DistributionKind::Uniform,
            nodes: vec![0.0, 1.0],
            densities: vec![1.0, 1.0],
            cumulative: vec![0.0, 1.0],
        }
    }

    /// Piecewise-linear density that must already integrate to one.
    pub fn piecewise_linear(nodes: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        let dist = Self::build(nodes, densities)?;
        let total = *dist.cumulative.last().expect("at least two nodes");
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "density integrates to {total}, expected 1"
            )));
        }
        Ok(dist)
    }

    /// Piecewise-linear density rescaled to unit mass.
    pub fn piecewise_linear_normalized(nodes: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        let raw = Self::build(nodes, densities)?;
        let total = *raw.cumulative.last().expect("at least two nodes");
        let densities = raw.densities.iter().map(|d| d / total).collect();
        Self::piecewise_linear(raw.nodes, densities)
    }

    /// Mass `left_mass` spread evenly on `[0, split]` and the rest on `(split, 1]`,
    /// with the density jump at `split` replaced by a linear ramp of total
    /// `width` centred on `split`. The centred ramp preserves total mass; a
    /// mass of `width · (left - right) / 8` moves across `split`.
    pub fn smoothed_step(split: f64, left_mass: f64, width: f64) -> Result<Self> {
        if !(left_mass > 0.0 && left_mass < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "left mass must lie in (0, 1), got {left_mass}"
            )));
        }
        let (a, b) = (split - width / 2.0, split + width / 2.0);
        if !(width > 0.0 && a > 0.0 && b < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "ramp [{a}, {b}] must lie strictly inside (0, 1)"
            )));
        }
        let left = left_mass / split;
        let right = (1.0 - left_mass) / (1.0 - split);
        Self::piecewise_linear_normalized(vec![0.0, a, b, 1.0], vec![left, left, right, right])
    }

    fn build(nodes: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != densities.len() {
            return Err(Error::InvalidDistribution(format!(
                "need at least two nodes with one density each, got {} nodes and {} densities",
                nodes.len(),
                densities.len()
            )));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::InvalidDistribution(
                "nodes must start at 0 and end at 1".into(),
            ));
        }
        if nodes
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidDistribution(
                "nodes must be strictly ascending".into(),
            ));
        }
        if densities.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidDistribution(
                "density must be strictly positive everywhere (full support)".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(nodes.len());
        cumulative.push(0.0);
        for i in 0..nodes.len() - 1 {
            let h = nodes[i + 1] - nodes[i];
            let c = cumulative[i] + 0.5 * h * (densities[i] + densities[i + 1]);
            cumulative.push(c);
        }
        Ok(Self {
            kind: DistributionKind::PiecewiseLinearDensity,
            nodes,
            densities,
            cumulative,
        })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    fn piece(&self, x: f64) -> usize {
        let idx = self.nodes.partition_point(|&n| n <= x);
        idx.saturating_sub(1).min(self.nodes.len() - 2)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let i = self.piece(x);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (d0, d1) = (self.densities[i], self.densities[i + 1]);
        d0 + (d1 - d0) * (x - x0) / (x1 - x0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let i = self.piece(x);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (d0, d1) = (self.densities[i], self.densities[i + 1]);
        let s = x - x0;
        self.cumulative[i] + d0 * s + 0.5 * (d1 - d0) * s * s / (x1 - x0)
    }

    /// `F(b) - F(a)`, zero when `b <= a`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            self.cdf(b) - self.cdf(a)
        }
    }

    pub fn mass(&self, set: &IntervalSet) -> f64 {
        set.intervals()
            .iter()
            .map(|iv| self.mass_between(iv.lo, iv.hi))
            .sum()
    }

    /// `∫_a^b g(θ) f(θ) dθ` for affine `g`, exact up to rounding: the
    /// integrand is quadratic on every density piece, where Simpson's rule
    /// is exact.
    pub fn integrate(&self, a: f64, b: f64, g: Linear) -> f64 {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return 0.0;
        }
        let mut total = 0.0;
        let mut lo = a;
        for &node in self.nodes.iter().filter(|&&n| n > a && n < b) {
            total += self.simpson(lo, node, g);
            lo = node;
        }
        total + self.simpson(lo, b, g)
    }

    fn simpson(&self, a: f64, b: f64, g: Linear) -> f64 {
        let m = 0.5 * (a + b);
        let h = |x: f64| g.eval(x) * self.pdf(x);
        (b - a) / 6.0 * (h(a) + 4.0 * h(m) + h(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_basics() {
        let u = ConsumerDistribution::uniform();
        assert_eq!(u.cdf(0.25), 0.25);
        assert_eq!(u.pdf(0.7), 1.0);
        assert_eq!(u.cdf(-1.0), 0.0);
        assert_eq!(u.cdf(2.0), 1.0);
        let s = IntervalSet::from_pairs([(0.1, 0.2), (0.5, 0.9)]).unwrap();
        assert!((u.mass(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ConsumerDistribution::piecewise_linear(vec![0.0, 1.0], vec![1.0, 1.1]).is_err());
        assert!(
            ConsumerDistribution::piecewise_linear(vec![0.0, 0.5, 1.0], vec![1.0, 0.0, 1.0])
                .is_err()
        );
        assert!(
            ConsumerDistribution::piecewise_linear(vec![0.0, 0.6, 0.5, 1.0], vec![1.0; 4]).is_err()
        );
        assert!(ConsumerDistribution::piecewise_linear(vec![0.1, 1.0], vec![1.0; 2]).is_err());
        assert!(ConsumerDistribution::piecewise_linear(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ConsumerDistribution::smoothed_step(0.25, 1.2, 0.01).is_err());
        assert!(ConsumerDistribution::smoothed_step(0.001, 0.9, 0.01).is_err());
    }

    #[test]
    fn smoothed_step_keeps_masses() {
        let d = ConsumerDistribution::smoothed_step(0.25, 0.95, 0.01).unwrap();
        let (left, right) = (3.8, 0.05 / 0.75);
        assert!((d.cdf(0.245) - left * 0.245).abs() < 1e-12);
        assert!((d.cdf(0.25) - (0.95 - 0.01 * (left - right) / 8.0)).abs() < 1e-12);
        assert!((d.cdf(1.0) - 1.0).abs() < 1e-12);
        assert!((d.pdf(0.1) - 3.8).abs() < 1e-12);
        assert!((d.pdf(0.6) - 0.05 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn integrate_matches_closed_form() {
        // uniform: ∫_{1/4}^{1} (2θ - 1/2) dθ = 9/16
        let u = ConsumerDistribution::uniform();
        let v = u.integrate(0.25, 1.0, Linear::new(-0.5, 2.0));
        assert!((v - 9.0 / 16.0).abs() < 1e-15);
    }

    fn arb_dist() -> impl Strategy<Value = ConsumerDistribution> {
        (
            prop::collection::vec(0.01f64..0.99, 0..4),
            prop::collection::vec(0.1f64..3.0, 6),
        )
            .prop_map(|(mut inner, dens)| {
                inner.sort_by(f64::total_cmp);
                inner.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
                let mut nodes = vec![0.0];
                nodes.extend(inner);
                nodes.push(1.0);
                let d = dens[..nodes.len()].to_vec();
                ConsumerDistribution::piecewise_linear_normalized(nodes, d).unwrap()
            })
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_with_unit_mass(d in arb_dist(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assert!((d.cdf(1.0) - 1.0).abs() < MASS_TOLERANCE);
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(d.cdf(lo) <= d.cdf(hi));
            if hi > lo { prop_assert!(d.cdf(hi) > d.cdf(lo)); }
        }

        #[test]
        fn integrate_constant_is_mass(d in arb_dist(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = (a.min(b), a.max(b));
            let m = d.integrate(lo, hi, Linear::constant(1.0));
            prop_assert!((m - d.mass_between(lo, hi)).abs() < 1e-12);
        }

        #[test]
        fn integrate_matches_fine_midpoint_rule(d in arb_dist(), c0 in -2.0f64..2.0, c1 in -2.0f64..2.0) {
            let g = Linear::new(c0, c1);
            let n = 20_000;
            let h = 1.0 / n as f64;
            let approx: f64 = (0..n).map(|i| {
                let x = (i as f64 + 0.5) * h;
                g.eval(x) * d.pdf(x) * h
            }).sum();
            prop_assert!((d.integrate(0.0, 1.0, g) - approx).abs() < 1e-6);
        }
    }
}
