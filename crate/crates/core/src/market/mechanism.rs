use serde::{Deserialize, Serialize};

use super::interval::IntervalSet;

/// Data-sharing mechanism: B reveals the locations in `shared` to A, and A
/// pays B the transfer `transfer`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mechanism {
    pub shared: IntervalSet,
    pub transfer: f64,
}

impl Mechanism {
    pub fn new(shared: IntervalSet, transfer: f64) -> Self {
        Self { shared, transfer }
    }

    pub fn no_sharing() -> Self {
        Self::default()
    }

    pub fn full_sharing(transfer: f64) -> Self {
        Self::new(IntervalSet::full(), transfer)
    }

    pub fn with_transfer(&self, transfer: f64) -> Self {
        Self::new(self.shared.clone(), transfer)
    }

    pub fn is_feasible_for(&self, opted_in: &IntervalSet) -> bool {
        self.shared.is_subset_of(opted_in, 0.0)
    }
}
