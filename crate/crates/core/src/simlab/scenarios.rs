//! Named convergence experiments. Each scenario pairs a frozen design with
//! the estimators it exercises and the population value each should reach.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ols::{TransformKind, TreatmentTransform};
use crate::ranks::ReferenceGroup;
use crate::rdd::RddConfig;

use super::dgp::{DgpParams, DgpSpec, Estimand, NoiseFamily, RandomizedBinary};
use super::fixtures;
use super::runner::{convergence_run, ConvergenceTable, Estimator};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub estimator: Estimator,
    pub estimand: Estimand,
    /// Allowed `|mean - oracle|` at the largest sample size.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub index: usize,
    pub name: &'static str,
    pub description: &'static str,
    pub spec: DgpSpec,
    pub checks: Vec<Check>,
    pub ns: Vec<usize>,
    pub reps: usize,
}

type Entry = (&'static str, &'static str, DgpSpec, Vec<Check>, Vec<usize>, usize);

fn check(estimator: Estimator, estimand: Estimand, tolerance: f64) -> Check {
    Check {
        estimator,
        estimand,
        tolerance,
    }
}

/// `Y(1)` first-order stochastically dominates `Y(0)`: exponential noise,
/// larger scale and higher mean in the treated arm.
pub fn exponential_dominance() -> DgpSpec {
    DgpSpec::new(
        "exponential_dominance",
        112,
        DgpParams::RandomizedBinary(RandomizedBinary {
            mu1: 0.3,
            mu0: 0.0,
            sigma1: 1.25,
            sigma0: 1.0,
            beta: vec![],
            noise: NoiseFamily::Exponential,
            p_treat: 0.5,
        }),
    )
}

fn rdd_config() -> RddConfig {
    RddConfig::new(0.0)
}

fn transform(kind: TransformKind) -> TreatmentTransform {
    TreatmentTransform {
        kind,
        normalize: false,
    }
}

/// All scenarios, numbered from 1 in this order.
pub fn registry() -> Vec<Scenario> {
    let refs = [ReferenceGroup::All, ReferenceGroup::Treated, ReferenceGroup::Control];
    let ladder = vec![500, 2000, 8000, 32_000];
    let list: Vec<Entry> = vec![
        (
            "randomized-shift",
            "rank-OLS under randomization, Gaussian shift",
            fixtures::gaussian_shift(),
            vec![check(Estimator::RankOls, Estimand::RankAte, 0.02)],
            ladder.clone(),
            50,
        ),
        (
            "stochastic-dominance",
            "rank-OLS when Y(1) dominates Y(0)",
            exponential_dominance(),
            vec![check(Estimator::RankOls, Estimand::RankAte, 0.02)],
            vec![500, 2000, 8000],
            50,
        ),
        (
            "covariate-adjusted",
            "rank-OLS with prognostic covariates, additive and interacted",
            fixtures::prognostic_covariates(),
            vec![
                check(Estimator::RankOlsCov { interact: false }, Estimand::RankAte, 0.02),
                check(Estimator::RankOlsCov { interact: true }, Estimand::RankAte, 0.02),
            ],
            ladder.clone(),
            50,
        ),
        (
            "confounded-strata",
            "rank-OLS with stratum dummies under stratum-level confounding",
            fixtures::confounded_strata(),
            vec![
                check(Estimator::RankOlsCov { interact: false }, Estimand::ConfoundedWeighted, 0.02),
                check(Estimator::RankOlsCov { interact: false }, Estimand::ConfoundedRegressionLimit, 0.02),
            ],
            ladder.clone(),
            50,
        ),
        (
            "three-dose",
            "rank-OLS on a three-level dose",
            fixtures::three_dose(),
            vec![check(
                Estimator::RankOlsGeneral { transform: transform(TransformKind::Identity) },
                Estimand::TransformedSlope { transform: transform(TransformKind::Identity) },
                0.02,
            )],
            ladder.clone(),
            50,
        ),
        (
            "median-split",
            "rank-OLS on a dose dichotomized at its median rank",
            fixtures::continuous_dose(),
            vec![check(
                Estimator::RankOlsGeneral {
                    transform: transform(TransformKind::DichotomizeAt { threshold: 0.5 }),
                },
                Estimand::MedianSplit,
                0.02,
            )],
            ladder.clone(),
            50,
        ),
        (
            "iv-sign-reversal",
            "rank-2SLS by reference group and complier-ranked 2SLS",
            fixtures::iv_sign_reversal(),
            refs.iter()
                .map(|&reference| {
                    check(Estimator::Rank2sls { reference }, Estimand::NaiveTwoStage { reference }, 0.02)
                })
                .chain([0.0, 0.5, 1.0].map(|zeta| {
                    check(Estimator::Rank2slsComplier { zeta }, Estimand::RankLate, 0.02)
                }))
                .collect(),
            vec![2000, 10_000, 50_000],
            50,
        ),
        (
            "panel-cic",
            "rank-DiD and changes-in-changes rank-DiD on a two-period panel",
            fixtures::example7_panel(),
            vec![
                check(Estimator::RankDid, Estimand::RankDidLimit, 0.02),
                check(Estimator::RankMdid, Estimand::RankAtt, 0.02),
            ],
            vec![1000, 5000, 20_000],
            20,
        ),
        (
            "panel-trend-violation",
            "the same panel with a treated-group latent trend",
            fixtures::trend_violator_panel(),
            vec![
                check(Estimator::RankDid, Estimand::RankDidLimit, 0.02),
                check(Estimator::RankMdid, Estimand::RankAtt, 0.02),
            ],
            vec![1000, 5000, 20_000],
            20,
        ),
        (
            "rdd-cutoff",
            "kernel rank-RDD by reference group and the modified rank-RDD",
            fixtures::rdd_separating(),
            refs.iter()
                .map(|&reference| {
                    check(
                        Estimator::RankRdd { config: rdd_config(), reference },
                        Estimand::NaiveRdd { reference },
                        0.05,
                    )
                })
                .chain([check(Estimator::RankMrdd { config: rdd_config() }, Estimand::CutoffRankAte, 0.05)])
                .collect(),
            vec![5000, 20_000, 50_000],
            20,
        ),
        (
            "confounded-violation",
            "stratum dummies when the observed outcome law varies across strata",
            fixtures::confounded_strata_violator(),
            vec![
                check(Estimator::RankOlsCov { interact: false }, Estimand::ConfoundedRegressionLimit, 0.02),
                check(Estimator::RankOlsCov { interact: false }, Estimand::ConfoundedWeighted, 0.02),
            ],
            ladder,
            50,
        ),
    ];
    list.into_iter()
        .enumerate()
        .map(|(i, (name, description, spec, checks, ns, reps))| Scenario {
            index: i + 1,
            name,
            description,
            spec,
            checks,
            ns,
            reps,
        })
        .collect()
}

/// Looks a scenario up by name or by its number.
pub fn find(key: &str) -> Result<Scenario> {
    let key = key.trim();
    let by_index = key.parse::<usize>().ok();
    registry()
        .into_iter()
        .find(|s| s.name == key || Some(s.index) == by_index)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown scenario '{key}'")))
}

impl Scenario {
    /// Runs every check, with optional overrides of the sample sizes,
    /// replication count and seed.
    pub fn run(&self, ns: Option<&[usize]>, reps: Option<usize>, seed: Option<u64>) -> Result<Vec<ConvergenceTable>> {
        let mut spec = self.spec.clone();
        if let Some(seed) = seed {
            spec.seed = seed;
        }
        let ns = ns.unwrap_or(&self.ns);
        let reps = reps.unwrap_or(self.reps);
        self.checks
            .iter()
            .map(|c| convergence_run(&spec, &c.estimator, &c.estimand, ns, reps))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::dgp::oracle_estimand;
    use crate::simlab::dist::Dist;

    #[test]
    fn lookup_by_name_and_number() {
        assert_eq!(find("1").unwrap().name, "randomized-shift");
        assert_eq!(find("panel-cic").unwrap().index, 8);
        assert!(find("0").is_err());
        assert!(find("nope").is_err());
    }

    #[test]
    fn every_check_has_an_oracle() {
        for s in registry() {
            for c in &s.checks {
                oracle_estimand(&s.spec, &c.estimand)
                    .unwrap_or_else(|e| panic!("{} {:?}: {e}", s.name, c.estimand));
            }
        }
    }

    #[test]
    fn dominance_design_dominates() {
        let DgpParams::RandomizedBinary(p) = exponential_dominance().params else { unreachable!() };
        let d1 = p.noise.with_sd(p.sigma1);
        let d0 = p.noise.with_sd(p.sigma0);
        for k in 0..400 {
            let y = -1.0 + k as f64 * 0.05;
            let f1 = Dist::cdf(&d1, y - p.mu1);
            let f0 = Dist::cdf(&d0, y - p.mu0);
            assert!(f1 <= f0 + 1e-15, "y = {y}");
        }
    }
}
