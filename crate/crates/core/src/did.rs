//! Two-period rank difference-in-differences and changes-in-changes.

use crate::error::Result;
use crate::ranks::{
    ecdf, generalized_inverse, project_to_cdf, rank_ate, reference_scores, ReferenceGroup,
    StepCdf,
};
use crate::sample::{Estimate, PanelSample};

use crate::ols::arm_mean;

fn split(values: &[f64], groups: &[bool], arm: bool) -> Vec<f64> {
    values
        .iter()
        .zip(groups)
        .filter(|(_, &g)| g == arm)
        .map(|(&v, _)| v)
        .collect()
}

/// Double difference of within-period normalized ranks:
/// `[mean_{W=1} R_1/n - mean_{W=0} R_1/n] - [mean_{W=1} R_0/n - mean_{W=0} R_0/n]`.
pub fn rank_did(p: &PanelSample) -> Result<Estimate> {
    rank_did_with_reference(p, ReferenceGroup::All)
}

/// [`rank_did`] with each period ranked against the chosen group only.
pub fn rank_did_with_reference(p: &PanelSample, reference: ReferenceGroup) -> Result<Estimate> {
    p.validate()?;
    let g = p.groups()?;
    let r1 = reference_scores(&p.y1, &g, reference);
    let r0 = reference_scores(&p.y0, &g, reference);
    let post = arm_mean(&r1, &g, true) - arm_mean(&r1, &g, false);
    let pre = arm_mean(&r0, &g, true) - arm_mean(&r0, &g, false);
    let name = match reference {
        ReferenceGroup::All => "rank_did",
        ReferenceGroup::Treated => "rank_did_ref_treated",
        ReferenceGroup::Control => "rank_did_ref_control",
    };
    let n1 = g.iter().filter(|&&t| t).count();
    Estimate::new(
        post - pre,
        name,
        "tau_r(F_Y1(1)|W=1, F_Y1(0)|W=0) - tau_r(F_Y1(0)|W=1, F_Y1(0)|W=0)",
        p.n(),
    )
    .diag("post_difference", post)
    .diag("pre_difference", pre)
    .diag("n1", n1 as f64)
    .diag("n0", (p.n() - n1) as f64)
    .finite()
}

/// Changes-in-changes estimate of the treated group's untreated post-period
/// CDF, evaluated on the control post-period support:
/// `F̂_{Y0|W=1}(Q̂_{Y0|W=0}(F̂_{Y1|W=0}(y)))`.
pub fn cic_counterfactual(p: &PanelSample) -> Result<StepCdf> {
    p.validate()?;
    let g = p.groups()?;
    let f0_treated = ecdf(&split(&p.y0, &g, true))?;
    let f0_control = ecdf(&split(&p.y0, &g, false))?;
    let f1_control = ecdf(&split(&p.y1, &g, false))?;
    let support = f1_control.support().to_vec();
    let raw = support
        .iter()
        .map(|&y| {
            let u = f1_control.evaluate(y);
            let q = generalized_inverse(&f0_control, u)?;
            Ok(f0_treated.evaluate(q))
        })
        .collect::<Result<Vec<f64>>>()?;
    project_to_cdf(&support, &raw)
}

/// Modified rank-DiD: the period-1 normalized rank is replaced by the
/// counterfactual CDF `F̂_{Y1(0)|W=1}(Y_{i1})`.
pub fn rank_mdid(p: &PanelSample, counterfactual: &StepCdf) -> Result<Estimate> {
    p.validate()?;
    let g = p.groups()?;
    let r0 = reference_scores(&p.y0, &g, ReferenceGroup::All);
    let cf: Vec<f64> = p.y1.iter().map(|&y| counterfactual.evaluate(y)).collect();
    let post = arm_mean(&cf, &g, true) - arm_mean(&cf, &g, false);
    let pre = arm_mean(&r0, &g, true) - arm_mean(&r0, &g, false);
    Estimate::new(post - pre, "rank_mdid", "rank-ATT", p.n())
        .diag("post_difference", post)
        .diag("pre_difference", pre)
        .finite()
}

/// Untreated potential-outcome CDFs by period and group. Includes the
/// counterfactual `F_{Y1(0)|W=1}`, so it only exists for simulated or
/// otherwise fully known distributions.
#[derive(Debug, Clone, Copy)]
pub struct UntreatedCdfs<'a> {
    pub post_treated: &'a StepCdf,
    pub post_control: &'a StepCdf,
    pub pre_treated: &'a StepCdf,
    pub pre_control: &'a StepCdf,
}

/// Both sides of the rank parallel-trend condition,
/// `τ_r(F_{Y1(0)|W=1}, F_{Y1(0)|W=0})` and `τ_r(F_{Y0(0)|W=1}, F_{Y0(0)|W=0})`.
pub fn check_rank_parallel_trend(cdfs: UntreatedCdfs<'_>) -> (f64, f64) {
    (
        rank_ate(cdfs.post_treated, cdfs.post_control),
        rank_ate(cdfs.pre_treated, cdfs.pre_control),
    )
}

/// The weaker-looking alternative condition that compares each group with
/// itself across periods: `τ_r(F_{Y1(0)|W=1}, F_{Y0(0)|W=1})` against
/// `τ_r(F_{Y1(0)|W=0}, F_{Y0(0)|W=0})`. It is not equivalent to the rank
/// parallel trend.
pub fn check_alternative_parallel_trend(cdfs: UntreatedCdfs<'_>) -> (f64, f64) {
    (
        rank_ate(cdfs.post_treated, cdfs.pre_treated),
        rank_ate(cdfs.post_control, cdfs.pre_control),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranks::rank_ate_pairs;
    use proptest::prelude::*;

    fn panel(y0: &[f64], y1: &[f64], w: &[f64]) -> PanelSample {
        PanelSample::new(y0.to_vec(), y1.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn identical_periods_cancel() {
        let y = [0.4, 1.5, -0.2, 3.0, 2.2];
        let p = panel(&y, &y, &[1.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(rank_did(&p).unwrap().value, 0.0);
    }

    #[test]
    fn four_unit_shift() {
        // period 0 ranks: treated {1, 3}, control {2, 4}  -> -1/4
        // period 1: treated shifted above everything: treated {3, 4}, control {1, 2} -> 1/2
        let y0 = [1.0, 2.0, 3.0, 4.0];
        let y1 = [10.0, 2.0, 13.0, 4.0];
        let w = [1.0, 0.0, 1.0, 0.0];
        let e = rank_did(&panel(&y0, &y1, &w)).unwrap();
        let pre = (1.0 + 3.0) / 8.0 - (2.0 + 4.0) / 8.0;
        let post = (3.0 + 4.0) / 8.0 - (1.0 + 2.0) / 8.0;
        assert!((e.value - (post - pre)).abs() < 1e-15);
        assert!((e.value - 0.75).abs() < 1e-15);
    }

    #[test]
    fn cic_identical_groups_returns_control_post_ecdf() {
        let y0 = [0.1, 0.5, 0.9, 0.1, 0.5, 0.9];
        let y1 = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let w = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let cf = cic_counterfactual(&panel(&y0, &y1, &w)).unwrap();
        let target = ecdf(&[1.0, 2.0, 3.0]).unwrap();
        assert!(cf.sup_distance(&target) < 1e-15);
    }

    #[test]
    fn cic_hand_trace() {
        // control: y0 {1, 2, 3}, y1 {10, 20, 30}; treated y0 {1.5, 2.5, 3.5}
        // F1c(10) = 1/3 -> Q0c(1/3) = 1 -> F0t(1) = 0
        // F1c(20) = 2/3 -> Q0c(2/3) = 2 -> F0t(2) = 1/3
        // F1c(30) = 1   -> Q0c(1)   = 3 -> F0t(3) = 2/3, rescaled to 1
        let y0 = [1.5, 2.5, 3.5, 1.0, 2.0, 3.0];
        let y1 = [0.0, 0.0, 0.0, 10.0, 20.0, 30.0];
        let w = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let cf = cic_counterfactual(&panel(&y0, &y1, &w)).unwrap();
        assert_eq!(cf.support(), &[10.0, 20.0, 30.0]);
        let want = [0.0, 0.5, 1.0];
        for (c, w) in cf.cum().iter().zip(want) {
            assert!((c - w).abs() < 1e-15);
        }
    }

    #[test]
    fn mdid_with_true_counterfactual_null_effect() {
        // no treatment effect and identical groups up to the unit labels
        let y0 = [0.1, 0.4, 0.7, 0.2, 0.5, 0.8];
        let y1 = [1.1, 1.4, 1.7, 1.2, 1.5, 1.8];
        let w = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let p = panel(&y0, &y1, &w);
        let truth = ecdf(&[1.1, 1.4, 1.7]).unwrap();
        let e = rank_mdid(&p, &truth).unwrap();
        // post: treated mean of truth = 2/3, control = (1/3 + 2/3 + 1) / 3 = 2/3
        // pre: ranks treated {1,3,5}, control {2,4,6}: -1/6
        let want = 0.0 - (9.0 / 18.0 - 12.0 / 18.0);
        assert!((e.value - want).abs() < 1e-15);
        assert_eq!(e.estimand, "rank-ATT");
    }

    #[test]
    fn parallel_trend_sides() {
        let a = ecdf(&[0.0, 1.0, 2.0]).unwrap();
        let b = ecdf(&[0.5, 1.5]).unwrap();
        let (l, r) = check_rank_parallel_trend(UntreatedCdfs {
            post_treated: &a,
            post_control: &a,
            pre_treated: &b,
            pre_control: &b,
        });
        // identical step laws are tied with probability 1/3 and 1/2
        assert!((l - 1.0 / 6.0).abs() < 1e-15);
        assert!((r - 0.25).abs() < 1e-15);
        let (l, r) = check_rank_parallel_trend(UntreatedCdfs {
            post_treated: &a,
            post_control: &b,
            pre_treated: &b,
            pre_control: &a,
        });
        assert!((l - rank_ate_pairs(&[0.0, 1.0, 2.0], &[0.5, 1.5]).unwrap()).abs() < 1e-15);
        assert!((l + r).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn did_invariant_to_per_period_monotone_maps(
            y0 in prop::collection::vec(-3.0f64..3.0, 6..40),
            shift in -2.0f64..2.0,
        ) {
            let n = y0.len();
            let w: Vec<f64> = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
            let y1: Vec<f64> = y0.iter().zip(&w).map(|(v, t)| v * 0.7 + shift * t + 0.01 * v.powi(2)).collect();
            let p = panel(&y0, &y1, &w);
            let q = panel(
                &y0.iter().map(|v| v.exp()).collect::<Vec<_>>(),
                &y1.iter().map(|v| v.powi(3) + v).collect::<Vec<_>>(),
                &w,
            );
            prop_assert_eq!(rank_did(&p).unwrap().value, rank_did(&q).unwrap().value);
            // mDiD: transform period-1 outcomes and the counterfactual support alike
            let cf = cic_counterfactual(&p);
            prop_assume!(cf.is_ok());
            let cf = cf.unwrap();
            let cf_q = cf.map_support(|v| v.powi(3) + v).unwrap();
            let q1 = panel(&y0, &q.y1, &w);
            prop_assert_eq!(rank_mdid(&p, &cf).unwrap().value, rank_mdid(&q1, &cf_q).unwrap().value);
            // and the CiC estimate itself commutes with the period-1 map
            let direct = cic_counterfactual(&q1).unwrap();
            prop_assert!(direct.sup_distance(&cf_q) < 1e-12);
        }
    }
}
