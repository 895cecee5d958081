use serde::Serialize;

use crate::error::{Error, Result};
use crate::ranks::check_finite;

use super::lstsq::ols_solve;

/// Default overlap constant: propensities must lie in `[c, 1 - c]`.
pub const DEFAULT_OVERLAP: f64 = 0.01;

/// Linear projection of the propensity on the covariates and the implied
/// per-unit weights `π(X)(1 - π̃(X))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfoundedWeights {
    pub omega_star: Vec<f64>,
    pub pi_tilde: Vec<f64>,
    pub weights: Vec<f64>,
    /// Units whose fitted propensity falls outside `[0, 1]`. When non-empty
    /// some weights can be negative and the weighted average is no longer
    /// convex.
    pub outside_unit_interval: Vec<usize>,
}

impl ConfoundedWeights {
    pub fn is_convex(&self) -> bool {
        self.outside_unit_interval.is_empty()
    }
}

/// `ω* = (X'X)^{-1} X'π`, `π̃ = Xω*`, weights `π(1 - π̃)`.
///
/// `x` holds the design columns as given; include a column of ones for an
/// intercept.
pub fn confounded_weights(x: &[Vec<f64>], propensity: &[f64]) -> Result<ConfoundedWeights> {
    confounded_weights_with_overlap(x, propensity, DEFAULT_OVERLAP)
}

pub fn confounded_weights_with_overlap(
    x: &[Vec<f64>],
    propensity: &[f64],
    c: f64,
) -> Result<ConfoundedWeights> {
    if !(0.0..0.5).contains(&c) {
        return Err(Error::InvalidSpec(format!(
            "overlap constant must lie in [0, 0.5), got {c}"
        )));
    }
    check_finite(propensity, "propensity")?;
    if let Some((index, &value)) = propensity
        .iter()
        .enumerate()
        .find(|(_, &p)| p < c || p > 1.0 - c)
    {
        return Err(Error::OverlapViolation { index, value, c });
    }
    let n = propensity.len();
    if x.iter().any(|col| col.len() != n) {
        return Err(Error::InvalidInput(
            "every design column must match the propensity length".into(),
        ));
    }
    for (k, col) in x.iter().enumerate() {
        check_finite(col, &format!("x{k}"))?;
    }
    let design = nalgebra::DMatrix::from_fn(n, x.len(), |i, j| x[j][i]);
    let fit = ols_solve(&design, propensity)?;
    let pi_tilde: Vec<f64> = (0..n)
        .map(|i| x.iter().zip(&fit.coef).map(|(col, b)| col[i] * b).sum())
        .collect();
    let weights = propensity
        .iter()
        .zip(&pi_tilde)
        .map(|(p, pt)| p * (1.0 - pt))
        .collect();
    // a tolerance keeps exact saturated fits at 0 or 1 from being flagged
    let outside_unit_interval = pi_tilde
        .iter()
        .enumerate()
        .filter(|(_, &pt)| !(-1e-12..=1.0 + 1e-12).contains(&pt))
        .map(|(i, _)| i)
        .collect();
    Ok(ConfoundedWeights {
        omega_star: fit.coef,
        pi_tilde,
        weights,
        outside_unit_interval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_propensity_intercept_only() {
        let ones = vec![vec![1.0; 5]];
        let out = confounded_weights(&ones, &[0.4; 5]).unwrap();
        for (pt, w) in out.pi_tilde.iter().zip(&out.weights) {
            assert!((pt - 0.4).abs() < 1e-12);
            assert!((w - 0.24).abs() < 1e-12);
        }
        assert!(out.is_convex());
    }

    #[test]
    fn saturated_binary_covariate() {
        let x = vec![vec![1.0; 6], vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]];
        let p = [0.3, 0.3, 0.3, 0.7, 0.7, 0.7];
        let out = confounded_weights(&x, &p).unwrap();
        for (i, w) in out.weights.iter().enumerate() {
            assert!((out.pi_tilde[i] - p[i]).abs() < 1e-12);
            assert!((w - 0.21).abs() < 1e-12);
        }
    }

    #[test]
    fn nonlinear_propensity_can_give_negative_weights() {
        // least squares line through (0, .98), (1, .98), (10, .02)
        let x = vec![vec![1.0; 3], vec![0.0, 1.0, 10.0]];
        let p = [0.98, 0.98, 0.02];
        let out = confounded_weights(&x, &p).unwrap();
        // closed-form slope and intercept of the 3-point fit
        let xm = 11.0 / 3.0;
        let pm = (0.98 + 0.98 + 0.02) / 3.0;
        let sxy: f64 = [0.0, 1.0, 10.0]
            .iter()
            .zip(&p)
            .map(|(xi, pi)| (xi - xm) * (pi - pm))
            .sum();
        let sxx: f64 = [0.0f64, 1.0, 10.0].iter().map(|xi| (xi - xm).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((out.omega_star[1] - slope).abs() < 1e-12);
        assert!((out.omega_star[0] - (pm - slope * xm)).abs() < 1e-12);
        assert!(!out.is_convex());
        assert!(out.weights.iter().any(|&w| w < 0.0));
    }

    #[test]
    fn overlap_is_enforced() {
        let ones = vec![vec![1.0; 3]];
        let err = confounded_weights(&ones, &[0.5, 0.005, 0.5]).unwrap_err();
        assert!(matches!(err, Error::OverlapViolation { index: 1, .. }));
        assert!(confounded_weights_with_overlap(&ones, &[0.5, 0.005, 0.5], 0.001).is_ok());
    }

    #[test]
    fn collinear_design() {
        let x = vec![vec![1.0; 3], vec![2.0; 3]];
        assert!(matches!(
            confounded_weights(&x, &[0.5; 3]),
            Err(Error::SingularDesign { .. })
        ));
    }
}
