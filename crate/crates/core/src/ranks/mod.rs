//! Ranks, empirical CDFs and the rank-ATE functional.
//!
//! Everything downstream (the OLS, IV, DiD and RDD estimators as well as the
//! simulation oracles) is written in terms of the three primitives here:
//! [`compute_ranks`], [`StepCdf`] and [`rank_ate`].

mod bounds;
mod cdf;
mod isotonic;
mod tau;

pub use bounds::{fan_park_bounds, IdentifiedSet};
pub use cdf::{ecdf, generalized_inverse, mixture, project_to_cdf, StepCdf};
pub use isotonic::pava_non_decreasing;
pub use tau::{rank_ate, rank_ate_pairs};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How tied values are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum TiePolicy {
    /// `R_i = #{j : y_j <= y_i}`; tied values share their maximal rank.
    #[default]
    Literal,
    /// Add i.i.d. `Uniform[-epsilon, epsilon]` noise drawn from a ChaCha8
    /// stream seeded with `seed`, then rank literally.
    Jitter { seed: u64, epsilon: f64 },
}

/// Integer ranks in `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankVector {
    pub ranks: Vec<usize>,
    pub n: usize,
}

impl RankVector {
    /// Ranks divided by `n`, i.e. the ECDF evaluated at each observation.
    pub fn normalized(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.ranks.iter().map(|&r| r as f64 / n).collect()
    }

    pub fn has_ties(&self) -> bool {
        let mut seen = vec![false; self.n + 1];
        for &r in &self.ranks {
            if seen[r] {
                return true;
            }
            seen[r] = true;
        }
        false
    }
}

pub(crate) fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains a non-finite value at index {i}"
        )));
    }
    Ok(())
}

/// Ranks every value among `values` (with `<=`, so ties get the max rank).
pub fn compute_ranks(values: &[f64], tie_policy: TiePolicy) -> Result<RankVector> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot rank an empty list".into()));
    }
    check_finite(values, "values")?;
    match tie_policy {
        TiePolicy::Literal => Ok(literal_ranks(values)),
        TiePolicy::Jitter { seed, epsilon } => {
            let jittered = jitter(values, seed, epsilon)?;
            Ok(literal_ranks(&jittered))
        }
    }
}

/// Adds i.i.d. `Uniform[-epsilon, epsilon]` noise from a ChaCha8 stream
/// seeded with `seed`.
pub fn jitter(values: &[f64], seed: u64, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "jitter epsilon must be positive, got {epsilon}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(values
        .iter()
        .map(|v| v + rng.random_range(-epsilon..=epsilon))
        .collect())
}

fn literal_ranks(values: &[f64]) -> RankVector {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0usize; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        for &idx in &order[start..end] {
            ranks[idx] = end;
        }
        start = end;
    }
    RankVector { ranks, n }
}

/// Ranks of every unit against the reference subset `reference[j] == true`:
/// `#{j in reference : y_j <= y_i}` for all `i`, including non-reference units.
pub(crate) fn ranks_against(values: &[f64], reference: &[bool]) -> Vec<usize> {
    let mut refs: Vec<f64> = values
        .iter()
        .zip(reference)
        .filter(|(_, &r)| r)
        .map(|(&v, _)| v)
        .collect();
    refs.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|&v| refs.partition_point(|&r| r <= v))
        .collect()
}

/// Which units serve as the ranking reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceGroup {
    #[default]
    All,
    Treated,
    Control,
}

impl ReferenceGroup {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReferenceGroup::All => "all",
            ReferenceGroup::Treated => "treated",
            ReferenceGroup::Control => "control",
        }
    }
}

impl std::str::FromStr for ReferenceGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(ReferenceGroup::All),
            "treated" | "1" => Ok(ReferenceGroup::Treated),
            "control" | "0" => Ok(ReferenceGroup::Control),
            other => Err(Error::Config(format!(
                "unknown reference group `{other}` (expected all, treated or control)"
            ))),
        }
    }
}

/// `R_i / n` for `All`, or `R_{i,w} / n_w` for the treated (`w = 1`) or
/// control (`w = 0`) reference. `groups[i]` is true for treated units.
pub(crate) fn reference_scores(y: &[f64], groups: &[bool], reference: ReferenceGroup) -> Vec<f64> {
    let mask: Vec<bool> = match reference {
        ReferenceGroup::All => vec![true; y.len()],
        ReferenceGroup::Treated => groups.to_vec(),
        ReferenceGroup::Control => groups.iter().map(|g| !g).collect(),
    };
    let m = mask.iter().filter(|&&b| b).count() as f64;
    ranks_against(y, &mask)
        .into_iter()
        .map(|r| r as f64 / m)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_ranks() {
        let r = compute_ranks(&[3.0, 1.0, 2.0], TiePolicy::Literal).unwrap();
        assert_eq!(r.ranks, vec![3, 1, 2]);
        assert!(!r.has_ties());
    }

    #[test]
    fn single_and_tied() {
        assert_eq!(
            compute_ranks(&[5.0], TiePolicy::Literal).unwrap().ranks,
            vec![1]
        );
        let tied = compute_ranks(&[1.0, 1.0], TiePolicy::Literal).unwrap();
        assert_eq!(tied.ranks, vec![2, 2]);
        assert!(tied.has_ties());
    }

    #[test]
    fn literal_matches_definition() {
        let v = [2.0, 7.0, 2.0, -1.0, 7.0, 7.0, 0.5];
        let r = compute_ranks(&v, TiePolicy::Literal).unwrap();
        for (i, &yi) in v.iter().enumerate() {
            let brute = v.iter().filter(|&&yj| yj <= yi).count();
            assert_eq!(r.ranks[i], brute);
        }
    }

    #[test]
    fn jitter_breaks_ties_reproducibly() {
        let v = [1.0, 1.0, 1.0, 2.0, 2.0];
        let p = TiePolicy::Jitter {
            seed: 7,
            epsilon: 1e-6,
        };
        let a = compute_ranks(&v, p).unwrap();
        let b = compute_ranks(&v, p).unwrap();
        assert_eq!(a, b);
        assert!(!a.has_ties());
        // jitter smaller than the gap keeps the between-level order
        assert!(a.ranks[3] > 3 && a.ranks[4] > 3);
    }

    #[test]
    fn rejects_empty_and_bad_epsilon() {
        assert!(matches!(
            compute_ranks(&[], TiePolicy::Literal),
            Err(Error::InvalidInput(_))
        ));
        assert!(compute_ranks(
            &[1.0],
            TiePolicy::Jitter {
                seed: 1,
                epsilon: 0.0
            }
        )
        .is_err());
        assert!(compute_ranks(&[f64::NAN], TiePolicy::Literal).is_err());
    }

    #[test]
    fn ranks_against_reference_group() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let treated = [false, false, true, true];
        assert_eq!(ranks_against(&y, &treated), vec![0, 0, 1, 2]);
    }
}
