use crate::error::{Error, Result};
use crate::ranks::{compute_ranks, reference_scores, ReferenceGroup, TiePolicy};
use crate::sample::{Estimate, Sample};

use super::lstsq::{design_with_intercept, ols_solve};
use super::{arm_mean, treatment_groups};

/// Rank-OLS of `R_i / n` on an intercept and a binary `W`, evaluated in its
/// closed difference-in-means form.
pub fn rank_ols_nocov(s: &Sample) -> Result<Estimate> {
    s.validate()?;
    let (groups, n1, n0) = treatment_groups(&s.w)?;
    let scores = reference_scores(&s.y, &groups, ReferenceGroup::All);
    let value = arm_mean(&scores, &groups, true) - arm_mean(&scores, &groups, false);
    Estimate::new(value, "rank_ols_nocov", "rank-ATE", s.n())
        .diag("n1", n1 as f64)
        .diag("n0", n0 as f64)
        .finite()
}

/// Rank-OLS with outcomes ranked inside one arm only (`R_{i,w} / n_w`).
///
/// Without ties this equals [`rank_ols_nocov`] plus `1/(2 n1)` for the treated
/// reference and minus `1/(2 n0)` for the control reference, so ties are
/// rejected.
pub fn rank_ols_refgroup(s: &Sample, reference: ReferenceGroup) -> Result<Estimate> {
    s.validate()?;
    let (groups, n1, n0) = treatment_groups(&s.w)?;
    if compute_ranks(&s.y, TiePolicy::Literal)?.has_ties() {
        return Err(Error::TiesPresent);
    }
    let scores = reference_scores(&s.y, &groups, reference);
    let value = arm_mean(&scores, &groups, true) - arm_mean(&scores, &groups, false);
    let name = match reference {
        ReferenceGroup::All => "rank_ols_nocov",
        ReferenceGroup::Treated => "rank_ols_ref_treated",
        ReferenceGroup::Control => "rank_ols_ref_control",
    };
    Estimate::new(value, name, "rank-ATE", s.n())
        .diag("n1", n1 as f64)
        .diag("n0", n0 as f64)
        .finite()
}

/// Rank-OLS with covariates. With `interact`, adds `W_i (X_i - X̄)` where `X̄`
/// is the full-sample mean.
pub fn rank_ols_cov(s: &Sample, interact: bool) -> Result<Estimate> {
    s.validate()?;
    let (groups, n1, n0) = treatment_groups(&s.w)?;
    let x: &[Vec<f64>] = s.x.as_deref().unwrap_or(&[]);
    let n = s.n();
    let response = reference_scores(&s.y, &groups, ReferenceGroup::All);

    let mut columns: Vec<Vec<f64>> = vec![s.w.clone()];
    columns.extend(x.iter().cloned());
    if interact {
        for col in x {
            let mean = col.iter().sum::<f64>() / n as f64;
            columns.push(col.iter().zip(&s.w).map(|(v, w)| w * (v - mean)).collect());
        }
    }
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let fit = ols_solve(&design_with_intercept(n, &refs), &response)?;
    let name = if interact {
        "rank_ols_interacted"
    } else {
        "rank_ols_cov"
    };
    Estimate::new(fit.coef[1], name, "rank-ATE", n)
        .diag("n1", n1 as f64)
        .diag("n0", n0 as f64)
        .diag("n_covariates", x.len() as f64)
        .diag("condition_number", fit.condition_number)
        .finite()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(y: &[f64], w: &[f64]) -> Sample {
        Sample::new(y.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn hand_examples() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]);
        let e = rank_ols_nocov(&s).unwrap();
        assert!((e.value - 0.5).abs() < 1e-15);
        assert_eq!(e.estimand, "rank-ATE");
        assert_eq!(e.diagnostics["n1"], 2.0);

        let s = sample(&[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 0.0, 1.0]);
        assert!((rank_ols_nocov(&s).unwrap().value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_treatment_has_no_variation() {
        let s = sample(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]);
        assert!(matches!(rank_ols_nocov(&s), Err(Error::NoVariation(_))));
        let s = sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 0.0]);
        assert!(matches!(rank_ols_nocov(&s), Err(Error::NonBinaryColumn { .. })));
    }

    #[test]
    fn reference_group_examples() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]);
        let t = rank_ols_refgroup(&s, ReferenceGroup::Treated).unwrap();
        let c = rank_ols_refgroup(&s, ReferenceGroup::Control).unwrap();
        assert!((t.value - 0.75).abs() < 1e-15);
        assert!((c.value - 0.25).abs() < 1e-15);
        let tied = sample(&[1.0, 1.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(
            rank_ols_refgroup(&tied, ReferenceGroup::Treated),
            Err(Error::TiesPresent)
        );
    }

    #[test]
    fn zero_covariates_reduce_to_nocov() {
        let s = sample(&[0.3, 2.0, -1.0, 4.0, 0.1], &[0.0, 1.0, 0.0, 1.0, 1.0]);
        let a = rank_ols_nocov(&s).unwrap().value;
        assert!((rank_ols_cov(&s, false).unwrap().value - a).abs() < 1e-12);
        assert!((rank_ols_cov(&s, true).unwrap().value - a).abs() < 1e-12);
    }

    #[test]
    fn balanced_covariate_leaves_coefficient_unchanged() {
        // x has zero sample covariance with w within each arm pattern
        let y = [0.5, 1.9, 3.1, 0.7, 2.2, 4.4, 1.1, 0.2];
        let w = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let x = vec![vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0]];
        let s = sample(&y, &w).with_covariates(x).unwrap();
        let base = rank_ols_nocov(&s).unwrap().value;
        assert!((rank_ols_cov(&s, false).unwrap().value - base).abs() < 1e-10);
    }

    #[test]
    fn collinear_covariate_is_singular() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0])
            .with_covariates(vec![vec![0.0, 0.0, 1.0, 1.0]])
            .unwrap();
        assert!(matches!(
            rank_ols_cov(&s, false),
            Err(Error::SingularDesign { .. })
        ));
    }

    proptest! {
        #[test]
        fn reference_identities_hold_without_ties(
            raw in prop::collection::btree_set(-10_000i32..10_000, 4..80),
            seed in 0u64..1000,
        ) {
            let y: Vec<f64> = raw.into_iter().map(|v| v as f64 / 7.0).collect();
            let n = y.len();
            // deterministic shuffle of arm labels with both arms present
            let mut w: Vec<f64> = (0..n).map(|i| (i as u64 * 2654435761 + seed).is_multiple_of(3) as u8 as f64).collect();
            w[0] = 1.0;
            w[1] = 0.0;
            let s = Sample::new(y, w).unwrap();
            let base = rank_ols_nocov(&s).unwrap();
            let n1 = base.diagnostics["n1"];
            let n0 = base.diagnostics["n0"];
            let t = rank_ols_refgroup(&s, ReferenceGroup::Treated).unwrap().value;
            let c = rank_ols_refgroup(&s, ReferenceGroup::Control).unwrap().value;
            prop_assert!((t - base.value - 1.0 / (2.0 * n1)).abs() < 1e-12);
            prop_assert!((base.value - c - 1.0 / (2.0 * n0)).abs() < 1e-12);
            prop_assert!((t - c - (1.0 / (2.0 * n1) + 1.0 / (2.0 * n0))).abs() < 1e-12);
        }

        #[test]
        fn monotone_outcome_transform_is_invisible(
            y in prop::collection::vec(-5.0f64..5.0, 6..40),
        ) {
            let n = y.len();
            let w: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            let x = vec![(0..n).map(|i| ((i * 7) % 5) as f64).collect::<Vec<_>>()];
            let ty: Vec<f64> = y.iter().map(|v| v.exp()).collect();
            let a = Sample::new(y, w.clone()).unwrap().with_covariates(x.clone()).unwrap();
            let b = Sample::new(ty, w).unwrap().with_covariates(x).unwrap();
            prop_assert_eq!(rank_ols_nocov(&a).unwrap().value, rank_ols_nocov(&b).unwrap().value);
            prop_assert_eq!(rank_ols_cov(&a, true).unwrap().value, rank_ols_cov(&b, true).unwrap().value);
        }
    }
}
