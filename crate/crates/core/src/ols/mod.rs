//! Rank-OLS estimators with binary, transformed and confounded treatments.

mod binary;
mod confounded;
mod general;
mod lstsq;

pub use binary::{rank_ols_cov, rank_ols_nocov, rank_ols_refgroup};
pub use crate::ranks::ReferenceGroup;
pub use confounded::{
    confounded_weights, confounded_weights_with_overlap, ConfoundedWeights, DEFAULT_OVERLAP,
};
pub use general::{
    normalization_kappa, normalization_kappa_exact, rank_ols_general, transform_treatment,
    TransformKind, TreatmentTransform,
};
pub use lstsq::{ols_solve, LeastSquares, SINGULAR_TOL};

use crate::error::{Error, Result};
use crate::sample::binary_column;

/// Splits a binary treatment column and checks that both arms are populated.
pub(crate) fn treatment_groups(w: &[f64]) -> Result<(Vec<bool>, usize, usize)> {
    let g = binary_column(w, "w")?;
    let n1 = g.iter().filter(|&&t| t).count();
    let n0 = g.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::NoVariation(format!(
            "binary treatment needs both arms (n1 = {n1}, n0 = {n0})"
        )));
    }
    Ok((g, n1, n0))
}

/// Mean of `values` over units with `group[i] == arm`.
pub(crate) fn arm_mean(values: &[f64], group: &[bool], arm: bool) -> f64 {
    let (sum, count) = values
        .iter()
        .zip(group)
        .filter(|(_, &g)| g == arm)
        .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
    sum / count as f64
}
