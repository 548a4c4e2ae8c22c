use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed subinterval `[lo, hi]` of the unit line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 1.0 || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Canonical finite union of disjoint closed subintervals of `[0, 1]`.
///
/// Intervals are kept sorted; overlapping or touching intervals are merged on
/// construction, so two sets with the same points compare equal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl TryFrom<Vec<Interval>> for IntervalSet {
    type Error = Error;

    fn try_from(raw: Vec<Interval>) -> Result<Self> {
        IntervalSet::from_pairs(raw.into_iter().map(|i| (i.lo, i.hi)))
    }
}

impl From<IntervalSet> for Vec<Interval> {
    fn from(set: IntervalSet) -> Self {
        set.intervals
    }
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn full() -> Self {
        Self {
            intervals: vec![Interval { lo: 0.0, hi: 1.0 }],
        }
    }

    pub fn single(lo: f64, hi: f64) -> Result<Self> {
        Ok(Self {
            intervals: vec![Interval::new(lo, hi)?],
        })
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let intervals = pairs
            .into_iter()
            .map(|(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::normalized(intervals))
    }

    /// Builds a set from pairs that are clamped to `[0, 1]`; pairs with
    /// `lo > hi` after clamping are dropped.
    pub fn from_pairs_clamped<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let intervals = pairs
            .into_iter()
            .map(|(lo, hi)| (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)))
            .filter(|(lo, hi)| lo <= hi)
            .map(|(lo, hi)| Interval { lo, hi })
            .collect();
        Self::normalized(intervals)
    }

    fn normalized(mut intervals: Vec<Interval>) -> Self {
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        // intervals are sorted by lo, so the candidate is the last one starting at or before x
        let idx = self.intervals.partition_point(|iv| iv.lo <= x);
        idx > 0 && self.intervals[idx - 1].hi >= x
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }

    /// All interval endpoints in ascending order.
    pub fn endpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.intervals.iter().flat_map(|iv| [iv.lo, iv.hi])
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let all = self
            .intervals
            .iter()
            .chain(&other.intervals)
            .copied()
            .collect();
        Self::normalized(all)
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let a = self.intervals[i];
            let b = other.intervals[j];
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if lo <= hi {
                out.push(Interval { lo, hi });
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self::normalized(out)
    }

    /// Restriction to `[lo, hi]`.
    pub fn clip(&self, lo: f64, hi: f64) -> IntervalSet {
        if lo > hi {
            return IntervalSet::empty();
        }
        self.intersection(&IntervalSet::from_pairs_clamped([(lo, hi)]))
    }

    /// Closure of `[0, 1]` minus this set. Shared endpoints belong to both,
    /// which only matters on a null set.
    pub fn complement(&self) -> IntervalSet {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for iv in &self.intervals {
            if iv.lo > cursor {
                out.push(Interval {
                    lo: cursor,
                    hi: iv.lo,
                });
            }
            cursor = cursor.max(iv.hi);
        }
        if cursor < 1.0 || self.intervals.is_empty() {
            out.push(Interval {
                lo: cursor,
                hi: 1.0,
            });
        }
        Self::normalized(out)
    }

    /// Every interval here lies within some interval of `other`,
    /// up to `tol` at the endpoints.
    pub fn is_subset_of(&self, other: &IntervalSet, tol: f64) -> bool {
        self.intervals.iter().all(|iv| {
            other
                .intervals
                .iter()
                .any(|o| o.lo - tol <= iv.lo && iv.hi <= o.hi + tol)
        })
    }

    /// Adds the single point `x` as a degenerate interval.
    pub fn with_point(&self, x: f64) -> Result<IntervalSet> {
        let mut all = self.intervals.clone();
        all.push(Interval::new(x, x)?);
        Ok(Self::normalized(all))
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|iv| format!("[{}, {}]", iv.lo, iv.hi))
            .collect();
        write!(f, "{}", parts.join(" U "))
    }
}
