use serde::{Deserialize, Serialize};

use super::check_finite;
use super::isotonic::pava_non_decreasing;
use crate::error::{Error, Result};

const CUM_TOL: f64 = 1e-12;

/// Right-continuous step distribution function.
///
/// `support` is strictly increasing and `cum[k]` is the CDF value on
/// `[support[k], support[k + 1])`. The last cumulative value is 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepCdf {
    support: Vec<f64>,
    cum: Vec<f64>,
    /// Cumulative observation counts when built from data.
    #[serde(skip)]
    counts: Option<Vec<u64>>,
}

impl PartialEq for StepCdf {
    fn eq(&self, other: &Self) -> bool {
        self.support == other.support && self.cum == other.cum
    }
}

impl StepCdf {
    pub fn new(support: Vec<f64>, cum: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidInput("step CDF needs a non-empty support".into()));
        }
        if support.len() != cum.len() {
            return Err(Error::InvalidInput(format!(
                "support has {} points but cum has {}",
                support.len(),
                cum.len()
            )));
        }
        check_finite(&support, "support")?;
        check_finite(&cum, "cum")?;
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("support must be strictly increasing".into()));
        }
        if cum.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("cumulative values must be non-decreasing".into()));
        }
        if cum[0] < 0.0 {
            return Err(Error::InvalidInput("cumulative values must be >= 0".into()));
        }
        let last = *cum.last().unwrap();
        if (last - 1.0).abs() > CUM_TOL {
            return Err(Error::InvalidInput(format!(
                "last cumulative value must be 1, got {last}"
            )));
        }
        Ok(Self { support, cum, counts: None })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    /// Cumulative counts of an empirical CDF; `None` for other constructions.
    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `F(y)`: 0 below the support, otherwise the value at the largest support
    /// point `<= y`.
    pub fn evaluate(&self, y: f64) -> f64 {
        match self.support.partition_point(|&s| s <= y) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    /// `#{i : y_i <= y}` for an empirical CDF, equal to the literal rank of
    /// any sample value `y`; `None` for other constructions.
    pub fn count_at(&self, y: f64) -> Option<u64> {
        let counts = self.counts.as_ref()?;
        Some(match self.support.partition_point(|&s| s <= y) {
            0 => 0,
            k => counts[k - 1],
        })
    }

    /// `F(y-)`, the limit from the left.
    pub fn evaluate_left(&self, y: f64) -> f64 {
        match self.support.partition_point(|&s| s < y) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    /// Probability mass at the `k`-th support point.
    pub fn mass(&self, k: usize) -> f64 {
        if k == 0 {
            self.cum[0]
        } else {
            self.cum[k] - self.cum[k - 1]
        }
    }

    /// Pushes the distribution forward through a strictly increasing map.
    pub fn map_support(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let support: Vec<f64> = self.support.iter().map(|&s| f(s)).collect();
        let mut mapped = Self::new(support, self.cum.clone())?;
        mapped.counts = self.counts.clone();
        Ok(mapped)
    }

    /// Supremum distance to another step CDF, checked at every support point
    /// of either function and at the left limits there.
    pub fn sup_distance(&self, other: &StepCdf) -> f64 {
        merged_support(&[self, other])
            .into_iter()
            .map(|y| {
                let right = (self.evaluate(y) - other.evaluate(y)).abs();
                let left = (self.evaluate_left(y) - other.evaluate_left(y)).abs();
                right.max(left)
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn merged_support(cdfs: &[&StepCdf]) -> Vec<f64> {
    let mut all: Vec<f64> = cdfs.iter().flat_map(|c| c.support.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Empirical CDF. Each cumulative value is computed as `count / n` directly,
/// so `n * F(y_i)` rounds to the literal rank of `y_i`; the integer counts are
/// kept and [`StepCdf::count_at`] returns the rank exactly.
pub fn ecdf(values: &[f64]) -> Result<StepCdf> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot build an ECDF from no values".into()));
    }
    check_finite(values, "values")?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut support = Vec::new();
    let mut cum = Vec::new();
    let mut counts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        support.push(sorted[i]);
        cum.push(j as f64 / n);
        counts.push(j as u64);
        i = j;
    }
    Ok(StepCdf { support, cum, counts: Some(counts) })
}

/// Pointwise convex combination of step CDFs on their merged support.
pub fn mixture(components: &[(f64, &StepCdf)]) -> Result<StepCdf> {
    if components.is_empty() {
        return Err(Error::InvalidInput("mixture needs at least one component".into()));
    }
    if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidInput("mixture weights must be finite and >= 0".into()));
    }
    let total: f64 = components.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > CUM_TOL {
        return Err(Error::InvalidInput(format!(
            "mixture weights must sum to 1, got {total}"
        )));
    }
    let cdfs: Vec<&StepCdf> = components.iter().map(|(_, c)| *c).collect();
    let support = merged_support(&cdfs);
    let mut cum: Vec<f64> = support
        .iter()
        .map(|&y| components.iter().map(|(w, c)| w * c.evaluate(y)).sum())
        .collect();
    // rounding can leave the top a few ulps away from 1
    *cum.last_mut().unwrap() = 1.0;
    for k in (0..cum.len().saturating_sub(1)).rev() {
        if cum[k] > cum[k + 1] {
            cum[k] = cum[k + 1];
        }
    }
    Ok(StepCdf { support, cum, counts: None })
}

/// Left-continuous generalized inverse `inf{y in support : F(y) >= u}`.
pub fn generalized_inverse(f: &StepCdf, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidInput(format!("quantile level {u} outside [0, 1]")));
    }
    let k = f.cum.partition_point(|&c| c < u);
    Ok(f.support[k.min(f.support.len() - 1)])
}

/// Repairs a raw, possibly non-monotone or out-of-range, vector of CDF values:
/// isotonic (pool-adjacent-violators) fit, clip to `[0, 1]`, then rescale so
/// the last value is exactly 1.
pub fn project_to_cdf(support: &[f64], raw: &[f64]) -> Result<StepCdf> {
    if support.is_empty() || support.len() != raw.len() {
        return Err(Error::InvalidInput(format!(
            "support ({}) and raw values ({}) must be non-empty and equally long",
            support.len(),
            raw.len()
        )));
    }
    check_finite(support, "support")?;
    check_finite(raw, "raw values")?;
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("support must be strictly increasing".into()));
    }
    let mut fitted = pava_non_decreasing(raw);
    for v in fitted.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let top = *fitted.last().unwrap();
    if top <= 0.0 {
        return Err(Error::DegenerateDistribution(
            "projected CDF has no positive mass".into(),
        ));
    }
    if top != 1.0 {
        for v in fitted.iter_mut() {
            *v /= top;
        }
        *fitted.last_mut().unwrap() = 1.0;
    }
    StepCdf::new(support.to_vec(), fitted)
}
