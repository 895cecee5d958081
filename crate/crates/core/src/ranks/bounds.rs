use serde::{Deserialize, Serialize};

use super::cdf::{merged_support, StepCdf};

/// Interval `[lower, upper]` inside `[-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedSet {
    pub lower: f64,
    pub upper: f64,
}

impl IdentifiedSet {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Sharp bounds on `P(Y(1) >= Y(0)) - 1/2` given only the two margins:
///
/// `lower = max{sup_y (F0(y) - F1(y)), 0} - 1/2`,
/// `upper = min{inf_y (F0(y) - F1(y)), 0} + 1/2`.
///
/// Both step functions are constant between merged support points, so the
/// sup/inf over the real line is attained at a support point or at a left
/// limit there.
pub fn fan_park_bounds(f1: &StepCdf, f0: &StepCdf) -> IdentifiedSet {
    let mut sup = 0.0f64;
    let mut inf = 0.0f64;
    for y in merged_support(&[f1, f0]) {
        let right = f0.evaluate(y) - f1.evaluate(y);
        let left = f0.evaluate_left(y) - f1.evaluate_left(y);
        sup = sup.max(right).max(left);
        inf = inf.min(right).min(left);
    }
    IdentifiedSet {
        lower: sup.max(0.0) - 0.5,
        upper: inf.min(0.0) + 0.5,
    }
}
