use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Consumer valuation `v` and linear transportation cost `t`.
///
/// The market is covered (`v > 2t`), so every consumer buys in equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct MarketParams {
    v: f64,
    t: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    v: f64,
    t: f64,
}

impl TryFrom<RawParams> for MarketParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        MarketParams::new(raw.v, raw.t)
    }
}

impl From<MarketParams> for RawParams {
    fn from(p: MarketParams) -> Self {
        RawParams { v: p.v, t: p.t }
    }
}

impl MarketParams {
    pub fn new(v: f64, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
        }
        if !(v.is_finite() && v > 2.0 * t) {
            return Err(Error::InvalidParams(format!(
                "market must be covered (v > 2t), got v = {v}, t = {t}"
            )));
        }
        Ok(Self { v, t })
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Uniform price that lets B extract the full surplus of every consumer
    /// in `[1/2, 1]` once A's uniform price reaches no one in `[0, 1/2)`.
    pub fn surplus_extraction_price(&self) -> f64 {
        self.v - self.t / 2.0
    }
}
