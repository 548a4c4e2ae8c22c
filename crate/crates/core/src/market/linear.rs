use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Affine function `intercept + slope * theta` of consumer location.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Linear {
    pub intercept: f64,
    pub slope: f64,
}

impl Linear {
    pub const ZERO: Linear = Linear {
        intercept: 0.0,
        slope: 0.0,
    };

    pub const fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    pub const fn constant(c: f64) -> Self {
        Self::new(c, 0.0)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.intercept + self.slope * theta
    }

    /// Sub-interval of `[lo, hi]` where the value exceeds `threshold`, if any.
    pub fn above(&self, threshold: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let (a, b) = (self.eval(lo) - threshold, self.eval(hi) - threshold);
        match (a > 0.0, b > 0.0) {
            (true, true) => Some((lo, hi)),
            (false, false) => None,
            _ => {
                let root = lo + (hi - lo) * a / (a - b);
                let root = root.clamp(lo, hi);
                if a > 0.0 {
                    Some((lo, root))
                } else {
                    Some((root, hi))
                }
            }
        }
    }
}

impl Add for Linear {
    type Output = Linear;
    fn add(self, rhs: Linear) -> Linear {
        Linear::new(self.intercept + rhs.intercept, self.slope + rhs.slope)
    }
}

impl Sub for Linear {
    type Output = Linear;
    fn sub(self, rhs: Linear) -> Linear {
        Linear::new(self.intercept - rhs.intercept, self.slope - rhs.slope)
    }
}

impl Neg for Linear {
    type Output = Linear;
    fn neg(self) -> Linear {
        Linear::new(-self.intercept, -self.slope)
    }
}
