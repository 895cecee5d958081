use super::check_finite;
use super::cdf::StepCdf;
use crate::error::{Error, Result};

/// Rank-ATE `P(Z1 >= Z0) - 1/2` for independent `Z1 ~ f1`, `Z0 ~ f0`, computed
/// as `sum_z f0(z) * mass1(z) - 1/2` over the support of `f1`.
///
/// A tie between the two supports counts with weight 1 (the `>=`), not 1/2.
/// Two empirical CDFs are handled in integer arithmetic, which makes the
/// result identical to [`rank_ate_pairs`] on the underlying samples.
pub fn rank_ate(f1: &StepCdf, f0: &StepCdf) -> f64 {
    if let (Some(n1), Some(n0)) = (f1.counts(), f0.counts()) {
        return rank_ate_counts(f1.support(), n1, f0.support(), n0);
    }
    let s0 = f0.support();
    let c0 = f0.cum();
    let mut k0 = 0usize;
    let mut acc = 0.0;
    for (k, &z) in f1.support().iter().enumerate() {
        while k0 < s0.len() && s0[k0] <= z {
            k0 += 1;
        }
        if k0 > 0 {
            acc += c0[k0 - 1] * f1.mass(k);
        }
    }
    acc - 0.5
}

fn rank_ate_counts(s1: &[f64], n1: &[u64], s0: &[f64], n0: &[u64]) -> f64 {
    let mut k0 = 0usize;
    let mut count: u128 = 0;
    let mut prev = 0u64;
    for (&z, &c1) in s1.iter().zip(n1) {
        while k0 < s0.len() && s0[k0] <= z {
            k0 += 1;
        }
        if k0 > 0 {
            count += n0[k0 - 1] as u128 * (c1 - prev) as u128;
        }
        prev = c1;
    }
    let total = *n1.last().unwrap() as u128 * *n0.last().unwrap() as u128;
    centered(count, total)
}

/// `count / total - 1/2` as `(2 count - total) / (2 total)`, which negates
/// exactly when the roles of the samples are swapped on tie-free data.
fn centered(count: u128, total: u128) -> f64 {
    (2 * count as i128 - total as i128) as f64 / (2 * total) as f64
}

/// Two-sample U-statistic `(1/(n1 n0)) sum_i sum_j 1{y0_j <= y1_i} - 1/2`.
///
/// Counts pairs exactly in integer arithmetic (sort + binary search), so it
/// serves as an independent route to [`rank_ate`] on empirical CDFs.
pub fn rank_ate_pairs(y1: &[f64], y0: &[f64]) -> Result<f64> {
    if y1.is_empty() || y0.is_empty() {
        return Err(Error::InvalidInput("rank_ate_pairs needs two non-empty samples".into()));
    }
    check_finite(y1, "y1")?;
    check_finite(y0, "y0")?;
    let mut sorted0 = y0.to_vec();
    sorted0.sort_by(f64::total_cmp);
    let count: u128 = y1
        .iter()
        .map(|&v| sorted0.partition_point(|&w| w <= v) as u128)
        .sum();
    let total = y1.len() as u128 * y0.len() as u128;
    Ok(centered(count, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranks::{ecdf, mixture};
    use proptest::prelude::*;

    fn brute(y1: &[f64], y0: &[f64]) -> f64 {
        let mut c = 0usize;
        for &a in y1 {
            for &b in y0 {
                if b <= a {
                    c += 1;
                }
            }
        }
        c as f64 / (y1.len() * y0.len()) as f64 - 0.5
    }

    #[test]
    fn pair_examples() {
        assert_eq!(rank_ate_pairs(&[2.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(rank_ate_pairs(&[1.0], &[2.0]).unwrap(), -0.5);
        assert_eq!(rank_ate_pairs(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), -0.25);
        assert!(rank_ate_pairs(&[], &[1.0]).is_err());
    }

    #[test]
    fn same_sample_is_not_zero_with_shared_atoms() {
        let f = ecdf(&[1.0, 2.0]).unwrap();
        let want = brute(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(want, 0.25);
        assert!((rank_ate(&f, &f) - want).abs() < 1e-15);
    }

    #[test]
    fn dominated_sample() {
        let f1 = ecdf(&[10.0, 20.0]).unwrap();
        let f0 = ecdf(&[1.0, 2.0]).unwrap();
        assert_eq!(rank_ate(&f1, &f0), 0.5);
        assert_eq!(rank_ate(&f0, &f1), -0.5);
    }

    #[test]
    fn linearity_in_both_arguments() {
        let a = ecdf(&[0.3, 1.7, 2.2, 5.0]).unwrap();
        let b = ecdf(&[-1.0, 0.3, 4.4]).unwrap();
        let c = ecdf(&[1.0, 1.5, 2.0, 2.5, 9.0]).unwrap();
        for i in 0..=20 {
            let alpha = i as f64 / 20.0;
            let m = mixture(&[(alpha, &a), (1.0 - alpha, &b)]).unwrap();
            let lhs = rank_ate(&m, &c);
            let rhs = alpha * rank_ate(&a, &c) + (1.0 - alpha) * rank_ate(&b, &c);
            assert!((lhs - rhs).abs() < 1e-12);
            let lhs = rank_ate(&c, &m);
            let rhs = alpha * rank_ate(&c, &a) + (1.0 - alpha) * rank_ate(&c, &b);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn step_form_matches_pair_count(
            y1 in prop::collection::vec(-5i32..5, 1..40),
            y0 in prop::collection::vec(-5i32..5, 1..40),
        ) {
            // integer-valued draws force plenty of ties
            let y1: Vec<f64> = y1.into_iter().map(f64::from).collect();
            let y0: Vec<f64> = y0.into_iter().map(f64::from).collect();
            let want = brute(&y1, &y0);
            let pairs = rank_ate_pairs(&y1, &y0).unwrap();
            let step = rank_ate(&ecdf(&y1).unwrap(), &ecdf(&y0).unwrap());
            prop_assert!((pairs - want).abs() < 1e-12);
            prop_assert!((step - want).abs() < 1e-12);
            prop_assert!((-0.5..=0.5).contains(&step));
            prop_assert_eq!(step, pairs);
        }

        #[test]
        fn invariant_under_increasing_maps(
            y1 in prop::collection::vec(-3.0f64..3.0, 1..30),
            y0 in prop::collection::vec(-3.0f64..3.0, 1..30),
        ) {
            let f = |v: f64| v.powi(3) + 2.0 * v;
            let t1: Vec<f64> = y1.iter().map(|&v| f(v)).collect();
            let t0: Vec<f64> = y0.iter().map(|&v| f(v)).collect();
            prop_assert_eq!(rank_ate_pairs(&y1, &y0).unwrap(), rank_ate_pairs(&t1, &t0).unwrap());
        }
    }
}
