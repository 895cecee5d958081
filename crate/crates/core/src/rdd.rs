//! Sharp regression discontinuity on ranks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranks::{reference_scores, ReferenceGroup};
use crate::sample::{Estimate, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Triangular,
    Epanechnikov,
    Uniform,
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(Kernel::Triangular),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(Error::Config(format!(
                "unknown kernel `{other}` (expected triangular, epanechnikov or uniform)"
            ))),
        }
    }
}

/// Kernel value at `u`; every kernel vanishes outside `[-1, 1]`.
pub fn kernel_weight(k: Kernel, u: f64) -> f64 {
    if !(-1.0..=1.0).contains(&u) {
        return 0.0;
    }
    match k {
        Kernel::Triangular => 1.0 - u.abs(),
        Kernel::Epanechnikov => 0.75 * (1.0 - u * u),
        Kernel::Uniform => 0.5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Bandwidth {
    Fixed { h: f64 },
    /// `h = multiplier * sd(run) * n^{-1/5}`.
    Rule { multiplier: f64 },
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Rule { multiplier: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RddConfig {
    pub cutoff: f64,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    #[serde(default)]
    pub kernel: Kernel,
}

impl RddConfig {
    pub fn new(cutoff: f64) -> Self {
        RddConfig {
            cutoff,
            bandwidth: Bandwidth::default(),
            kernel: Kernel::default(),
        }
    }

    pub fn with_bandwidth(mut self, bandwidth: Bandwidth) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    /// Resolves the bandwidth for a given running variable.
    pub fn resolve_bandwidth(&self, run: &[f64]) -> Result<f64> {
        let h = match self.bandwidth {
            Bandwidth::Fixed { h } => h,
            Bandwidth::Rule { multiplier } => {
                let n = run.len() as f64;
                let mean = run.iter().sum::<f64>() / n;
                let var = run.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
                multiplier * var.sqrt() * n.powf(-0.2)
            }
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidSpec(format!("bandwidth must be positive, got {h}")));
        }
        Ok(h)
    }
}

/// Units with positive kernel weight, split by side of the cutoff.
struct Local {
    above: Vec<(usize, f64)>,
    below: Vec<(usize, f64)>,
    bandwidth: f64,
    treated: Vec<bool>,
}

fn localize(s: &Sample, cfg: &RddConfig) -> Result<Local> {
    s.validate()?;
    if !cfg.cutoff.is_finite() {
        return Err(Error::InvalidSpec("cutoff must be finite".into()));
    }
    let run = s
        .run
        .as_deref()
        .ok_or_else(|| Error::MissingColumn("run".into()))?;
    let h = cfg.resolve_bandwidth(run)?;
    let treated: Vec<bool> = run.iter().map(|&x| x >= cfg.cutoff).collect();
    let (mut above, mut below) = (Vec::new(), Vec::new());
    for (i, &x) in run.iter().enumerate() {
        let k = kernel_weight(cfg.kernel, (x - cfg.cutoff) / h);
        if k > 0.0 {
            if treated[i] {
                above.push((i, k));
            } else {
                below.push((i, k));
            }
        }
    }
    if above.len() < 2 || below.len() < 2 {
        return Err(Error::InsufficientLocalData(format!(
            "need at least 2 weighted points per side of the cutoff, got {} above and {} below (bandwidth {h})",
            above.len(),
            below.len()
        )));
    }
    Ok(Local {
        above,
        below,
        bandwidth: h,
        treated,
    })
}

fn weighted_mean(side: &[(usize, f64)], values: &[f64]) -> f64 {
    let (num, den) = side
        .iter()
        .fold((0.0, 0.0), |(a, b), &(i, k)| (a + k * values[i], b + k));
    num / den
}

/// Kernel-weighted mean of normalized ranks above the cutoff minus the
/// same below. Units with `run >= cutoff` are treated.
pub fn rank_rdd(s: &Sample, cfg: &RddConfig, reference: ReferenceGroup) -> Result<Estimate> {
    let local = localize(s, cfg)?;
    let scores = reference_scores(&s.y, &local.treated, reference);
    let value = weighted_mean(&local.above, &scores) - weighted_mean(&local.below, &scores);
    let (name, estimand) = match reference {
        ReferenceGroup::All => (
            "rank_rdd_all",
            "tau_r(F_Y(1)|x*, F_Y) - tau_r(F_Y(0)|x*, F_Y)",
        ),
        ReferenceGroup::Treated => (
            "rank_rdd_treated",
            "tau_r(F_Y(1)|x*, F_Y|W=1) - tau_r(F_Y(0)|x*, F_Y|W=1)",
        ),
        ReferenceGroup::Control => (
            "rank_rdd_control",
            "tau_r(F_Y(1)|x*, F_Y|W=0) - tau_r(F_Y(0)|x*, F_Y|W=0)",
        ),
    };
    Estimate::new(value, name, estimand, s.n())
        .diag("bandwidth", local.bandwidth)
        .diag("n_above", local.above.len() as f64)
        .diag("n_below", local.below.len() as f64)
        .finite()
}

/// Kernel U-statistic
/// `Σ_{i above} Σ_{j below} K_i K_j I(Y_j <= Y_i) / (Σ K_i Σ K_j) - 1/2`,
/// summed over the units inside the bandwidth.
pub fn rank_mrdd(s: &Sample, cfg: &RddConfig) -> Result<Estimate> {
    let local = localize(s, cfg)?;
    let mut num = 0.0;
    for &(i, ki) in &local.above {
        let yi = s.y[i];
        let mut inner = 0.0;
        for &(j, kj) in &local.below {
            if s.y[j] <= yi {
                inner += kj;
            }
        }
        num += ki * inner;
    }
    let sa: f64 = local.above.iter().map(|p| p.1).sum();
    let sb: f64 = local.below.iter().map(|p| p.1).sum();
    let value = (num / (sa * sb)).min(1.0) - 0.5;
    Estimate::new(value, "rank_mrdd", "tau_r(F_Y(1)|x*, F_Y(0)|x*)", s.n())
        .diag("bandwidth", local.bandwidth)
        .diag("n_above", local.above.len() as f64)
        .diag("n_below", local.below.len() as f64)
        .finite()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rd(y: &[f64], run: &[f64]) -> Sample {
        let w: Vec<f64> = run.iter().map(|&x| (x >= 0.0) as u8 as f64).collect();
        Sample::new(y.to_vec(), w)
            .unwrap()
            .with_running(run.to_vec())
            .unwrap()
    }

    fn uniform(h: f64) -> RddConfig {
        RddConfig::new(0.0)
            .with_kernel(Kernel::Uniform)
            .with_bandwidth(Bandwidth::Fixed { h })
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_weight(Kernel::Triangular, 0.0), 1.0);
        assert_eq!(kernel_weight(Kernel::Epanechnikov, 1.0), 0.0);
        assert_eq!(kernel_weight(Kernel::Epanechnikov, -1.0), 0.0);
        assert_eq!(kernel_weight(Kernel::Uniform, 0.3), 0.5);
        assert_eq!(kernel_weight(Kernel::Triangular, 1.5), 0.0);
        assert_eq!(kernel_weight(Kernel::Uniform, -1.01), 0.0);
    }

    #[test]
    fn six_point_uniform_kernel() {
        let run = [-0.5, -0.3, -0.1, 0.0, 0.2, 0.4];
        let y = [3.0, 1.0, 5.0, 2.0, 6.0, 4.0];
        let s = rd(&y, &run);
        // ranks: 3,1,5,2,6,4 over n = 6; above = {2, 6, 4}, below = {3, 1, 5}
        let e = rank_rdd(&s, &uniform(10.0), ReferenceGroup::All).unwrap();
        let want = (2.0 + 6.0 + 4.0) / 18.0 - (3.0 + 1.0 + 5.0) / 18.0;
        assert!((e.value - want).abs() < 1e-15);
        // ranked among the below group only: above {1, 3, 2}/3, below {2, 1, 3}/3
        let c = rank_rdd(&s, &uniform(10.0), ReferenceGroup::Control).unwrap();
        let want = (1.0 + 3.0 + 2.0) / 9.0 - (2.0 + 1.0 + 3.0) / 9.0;
        assert!((c.value - want).abs() < 1e-15);
        // ranked among the above group: above {1, 3, 2}/3, below {1, 0, 2}/3
        let t = rank_rdd(&s, &uniform(10.0), ReferenceGroup::Treated).unwrap();
        let want = 6.0 / 9.0 - 3.0 / 9.0;
        assert!((t.value - want).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_mrdd() {
        // above: y = 2 (x = 0.1), 4 (x = 0.5); below: y = 3 (x = -0.2), 1 (x = -0.6)
        let s = rd(&[2.0, 4.0, 3.0, 1.0], &[0.1, 0.5, -0.2, -0.6]);
        let e = rank_mrdd(&s, &uniform(1.0)).unwrap();
        // pairs (2,3) 0, (2,1) 1, (4,3) 1, (4,1) 1 -> 3/4
        assert!((e.value - 0.25).abs() < 1e-15);
        // triangular weights: above 0.9, 0.5; below 0.8, 0.4
        let tri = RddConfig::new(0.0).with_bandwidth(Bandwidth::Fixed { h: 1.0 });
        let e = rank_mrdd(&s, &tri).unwrap();
        let num = 0.9 * 0.4 + 0.5 * (0.8 + 0.4);
        let want = num / (1.4 * 1.2) - 0.5;
        assert!((e.value - want).abs() < 1e-12);
    }

    #[test]
    fn full_separation_is_half() {
        let s = rd(&[10.0, 11.0, 12.0, 1.0, 2.0, 3.0], &[0.1, 0.2, 0.3, -0.1, -0.2, -0.3]);
        assert_eq!(rank_mrdd(&s, &uniform(1.0)).unwrap().value, 0.5);
    }

    #[test]
    fn sparse_side_is_rejected() {
        let s = rd(&[1.0, 2.0, 3.0, 4.0], &[-0.9, 0.1, 0.2, 0.3]);
        assert!(matches!(
            rank_rdd(&s, &uniform(0.5), ReferenceGroup::All),
            Err(Error::InsufficientLocalData(_))
        ));
        let s = Sample::new(vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(
            rank_mrdd(&s, &uniform(1.0)),
            Err(Error::MissingColumn("run".into()))
        );
    }

    #[test]
    fn boundary_point_counts_as_above() {
        let s = rd(&[1.0, 2.0, 3.0, 4.0], &[-0.2, -0.1, 0.0, 0.1]);
        let e = rank_rdd(&s, &uniform(1.0), ReferenceGroup::All).unwrap();
        assert_eq!(e.diagnostics["n_above"], 2.0);
    }

    #[test]
    fn rule_bandwidth() {
        let run: Vec<f64> = (0..32).map(|i| i as f64 - 15.5).collect();
        let cfg = RddConfig::new(0.0);
        let n = 32.0f64;
        let mean = -0.0;
        let sd = (run.iter().map(|r: &f64| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let h = cfg.resolve_bandwidth(&run).unwrap();
        assert!((h - sd * n.powf(-0.2)).abs() < 1e-12);
    }

    /// The mRDD statistic written as the above-side kernel mean of the
    /// below-side kernel-weighted rank.
    fn weighted_rank_form(y: &[f64], run: &[f64], cfg: &RddConfig) -> f64 {
        let h = cfg.resolve_bandwidth(run).unwrap();
        let k: Vec<f64> = run
            .iter()
            .map(|&x| kernel_weight(cfg.kernel, (x - cfg.cutoff) / h))
            .collect();
        let below: Vec<usize> = (0..y.len()).filter(|&j| run[j] < cfg.cutoff).collect();
        let kb: f64 = below.iter().map(|&j| k[j]).sum();
        let wrank = |v: f64| below.iter().filter(|&&j| y[j] <= v).map(|&j| k[j]).sum::<f64>() / kb;
        let above: Vec<usize> = (0..y.len()).filter(|&i| run[i] >= cfg.cutoff).collect();
        let ka: f64 = above.iter().map(|&i| k[i]).sum();
        above.iter().map(|&i| k[i] * wrank(y[i])).sum::<f64>() / ka
    }

    #[test]
    fn weighted_rank_equivalence_on_hand_data() {
        let run = [-0.8, -0.45, -0.3, -0.05, 0.0, 0.15, 0.35, 0.7, 0.95];
        let y = [0.2, 1.4, -0.3, 0.9, 2.0, 0.1, 1.1, 3.0, 0.5];
        let s = rd(&y, &run);
        for kernel in [Kernel::Triangular, Kernel::Epanechnikov, Kernel::Uniform] {
            let cfg = RddConfig::new(0.0)
                .with_kernel(kernel)
                .with_bandwidth(Bandwidth::Fixed { h: 0.9 });
            let e = rank_mrdd(&s, &cfg).unwrap();
            let alt = weighted_rank_form(&y, &run, &cfg);
            assert!((e.value + 0.5 - alt).abs() < 1e-14, "{kernel:?}");
        }
    }

    proptest! {
        #[test]
        fn mrdd_in_range_and_invariant(
            pts in prop::collection::vec((-1.0f64..1.0, -5.0f64..5.0), 8..60),
            h in 0.3f64..2.0,
        ) {
            let run: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let ty: Vec<f64> = y.iter().map(|v| v.exp()).collect();
            let cfg = RddConfig::new(0.0).with_bandwidth(Bandwidth::Fixed { h });
            let (a, b) = (rd(&y, &run), rd(&ty, &run));
            match (rank_mrdd(&a, &cfg), rank_mrdd(&b, &cfg)) {
                (Ok(x), Ok(z)) => {
                    prop_assert!((-0.5..=0.5).contains(&x.value));
                    prop_assert_eq!(x.value, z.value);
                    prop_assert!((x.value + 0.5 - weighted_rank_form(&y, &run, &cfg)).abs() < 1e-12);
                }
                (x, z) => prop_assert_eq!(x.is_err(), z.is_err()),
            }
            for r in [ReferenceGroup::All, ReferenceGroup::Treated, ReferenceGroup::Control] {
                match (rank_rdd(&a, &cfg, r), rank_rdd(&b, &cfg, r)) {
                    (Ok(x), Ok(z)) => prop_assert_eq!(x.value, z.value),
                    (x, z) => prop_assert_eq!(x.is_err(), z.is_err()),
                }
            }
        }

        #[test]
        fn shrinking_bandwidth_shrinks_local_set(
            run in prop::collection::vec(-1.0f64..1.0, 10..60),
            h in 0.05f64..1.0,
            shrink in 0.1f64..1.0,
        ) {
            let count = |h: f64| run.iter().filter(|&&x| kernel_weight(Kernel::Triangular, x / h) > 0.0).count();
            prop_assert!(count(h * shrink) <= count(h));
        }
    }
}
