use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::did::{cic_counterfactual, rank_did, rank_mdid};
use crate::error::{Error, Result};
use crate::iv::{rank_2sls, rank_2sls_complier};
use crate::ols::{rank_ols_cov, rank_ols_general, rank_ols_nocov, rank_ols_refgroup, TreatmentTransform};
use crate::ranks::ReferenceGroup;
use crate::rdd::{rank_mrdd, rank_rdd, RddConfig};

use super::dgp::{estimand_label, oracle_estimand, DgpSpec, Estimand, Generated};
use super::rng::stream;

/// Estimators the runner can replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "estimator")]
pub enum Estimator {
    RankOls,
    RankOlsRef { reference: ReferenceGroup },
    RankOlsCov { interact: bool },
    RankOlsGeneral { transform: TreatmentTransform },
    Rank2sls { reference: ReferenceGroup },
    Rank2slsComplier { zeta: f64 },
    RankDid,
    RankMdid,
    RankRdd { config: RddConfig, reference: ReferenceGroup },
    RankMrdd { config: RddConfig },
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Estimator::RankOls => "rank_ols".into(),
            Estimator::RankOlsRef { reference } => format!("rank_ols_ref_{}", reference.as_str()),
            Estimator::RankOlsCov { interact: false } => "rank_ols_cov".into(),
            Estimator::RankOlsCov { interact: true } => "rank_ols_interacted".into(),
            Estimator::RankOlsGeneral { transform } => {
                let kind = serde_json::to_value(&transform.kind)
                    .ok()
                    .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(str::to_string))
                    .unwrap_or_default();
                let norm = if transform.normalize { "_normalized" } else { "" };
                format!("rank_ols_general_{kind}{norm}")
            }
            Estimator::Rank2sls { reference } => format!("rank_2sls_{}", reference.as_str()),
            Estimator::Rank2slsComplier { zeta } => format!("rank_2sls_complier_{zeta}"),
            Estimator::RankDid => "rank_did".into(),
            Estimator::RankMdid => "rank_mdid".into(),
            Estimator::RankRdd { reference, .. } => format!("rank_rdd_{}", reference.as_str()),
            Estimator::RankMrdd { .. } => "rank_mrdd".into(),
        }
    }

    pub fn apply(&self, data: &Generated) -> Result<f64> {
        let e = match self {
            Estimator::RankOls => rank_ols_nocov(data.sample()?)?,
            Estimator::RankOlsRef { reference: ReferenceGroup::All } => rank_ols_nocov(data.sample()?)?,
            Estimator::RankOlsRef { reference } => rank_ols_refgroup(data.sample()?, *reference)?,
            Estimator::RankOlsCov { interact } => rank_ols_cov(data.sample()?, *interact)?,
            Estimator::RankOlsGeneral { transform } => rank_ols_general(data.sample()?, transform)?,
            Estimator::Rank2sls { reference } => rank_2sls(data.sample()?, *reference)?,
            Estimator::Rank2slsComplier { zeta } => rank_2sls_complier(data.sample()?, *zeta)?,
            Estimator::RankDid => rank_did(data.panel()?)?,
            Estimator::RankMdid => {
                let p = data.panel()?;
                rank_mdid(p, &cic_counterfactual(p)?)?
            }
            Estimator::RankRdd { config, reference } => rank_rdd(data.sample()?, config, *reference)?,
            Estimator::RankMrdd { config } => rank_mrdd(data.sample()?, config)?,
        };
        Ok(e.value)
    }
}

/// Summary of the replications at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub estimator: String,
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub mean: f64,
    pub sd: f64,
    pub abs_err: f64,
    pub oracle: f64,
}

/// One replication, in long format for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub run_id: String,
    pub n: usize,
    pub rep: usize,
    /// Missing when the estimator failed on this draw.
    pub estimate: Option<f64>,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub dgp: String,
    pub estimand: String,
    pub oracle_method: super::oracle::OracleMethod,
    pub rows: Vec<ConvergenceRow>,
    pub records: Vec<ReplicationRecord>,
    /// First error message per failed replication, `(n, rep, message)`.
    pub errors: Vec<(usize, usize, String)>,
}

impl ConvergenceTable {
    pub fn last(&self) -> Option<&ConvergenceRow> {
        self.rows.last()
    }
}

/// Replicates `estimator` on fresh draws of `spec` at each `n` and compares
/// the mean with the oracle value of `estimand`.
///
/// Replication `r` at the `k`-th sample size uses stream `(k << 32) | r` of
/// the spec's seed, so results do not depend on thread scheduling.
pub fn convergence_run(
    spec: &DgpSpec,
    estimator: &Estimator,
    estimand: &Estimand,
    ns: &[usize],
    reps: usize,
) -> Result<ConvergenceTable> {
    if reps == 0 || ns.is_empty() {
        return Err(Error::InvalidSpec("need at least one n and one replication".into()));
    }
    let oracle = oracle_estimand(spec, estimand)?;
    let name = estimator.name();
    let mut rows = Vec::with_capacity(ns.len());
    let mut records = Vec::with_capacity(ns.len() * reps);
    let mut errors = Vec::new();
    for (k, &n) in ns.iter().enumerate() {
        let results: Vec<Result<f64>> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream(spec.seed, ((k as u64) << 32) | r as u64);
                let (data, _) = spec.generate_full(n, &mut rng)?;
                estimator.apply(&data)
            })
            .collect();
        let mut ok = Vec::with_capacity(reps);
        for (r, res) in results.into_iter().enumerate() {
            let estimate = match res {
                Ok(v) => {
                    ok.push(v);
                    Some(v)
                }
                Err(e) => {
                    errors.push((n, r, e.to_string()));
                    None
                }
            };
            records.push(ReplicationRecord {
                run_id: format!("{}:{}", spec.name, name),
                n,
                rep: r,
                estimate,
                oracle: oracle.value,
            });
        }
        let (mean, sd) = mean_sd(&ok);
        rows.push(ConvergenceRow {
            estimator: name.clone(),
            n,
            reps,
            failures: reps - ok.len(),
            mean,
            sd,
            abs_err: (mean - oracle.value).abs(),
            oracle: oracle.value,
        });
    }
    Ok(ConvergenceTable {
        dgp: spec.name.clone(),
        estimand: estimand_label(estimand),
        oracle_method: oracle.method,
        rows,
        records,
        errors,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let ss: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    (m, (ss / (v.len() - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::fixtures;

    #[test]
    fn runs_are_deterministic_and_ordered() {
        let spec = fixtures::gaussian_shift();
        let a = convergence_run(&spec, &Estimator::RankOls, &Estimand::RankAte, &[50, 200], 8).unwrap();
        let b = convergence_run(&spec, &Estimator::RankOls, &Estimand::RankAte, &[50, 200], 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 16);
        assert!(a.records.iter().take(8).all(|r| r.n == 50));
        assert_eq!(a.records[3].rep, 3);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // the DiD estimator on a cross-sectional design fails every time
        let spec = fixtures::gaussian_shift();
        let t = convergence_run(&spec, &Estimator::RankDid, &Estimand::RankAte, &[20], 3).unwrap();
        assert_eq!(t.rows[0].failures, 3);
        assert!(t.rows[0].mean.is_nan());
        assert_eq!(t.errors.len(), 3);
    }

    #[test]
    fn error_shrinks_with_n() {
        let spec = fixtures::gaussian_shift();
        let t = convergence_run(&spec, &Estimator::RankOls, &Estimand::RankAte, &[200, 20_000], 20).unwrap();
        assert!(t.rows[1].sd < t.rows[0].sd);
        assert!(t.rows[1].abs_err < 0.01);
    }
}
