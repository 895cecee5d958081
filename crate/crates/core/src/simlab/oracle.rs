use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::{phi, Dist};

/// Seed of the private stream behind Monte Carlo oracles.
const ORACLE_SEED: u64 = 0x0a11_ce5e_ed00_0001;

/// Draws per side for the pair U-statistic fallback.
pub const ORACLE_DRAWS: usize = 1_000_000;

/// Grid size for quantile-domain integration.
const GRID: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    ClosedForm,
    Enumeration,
    NumericIntegration,
    PairUStatistic,
}

impl OracleMethod {
    fn default_precision(self) -> f64 {
        match self {
            OracleMethod::ClosedForm | OracleMethod::Enumeration => 1e-9,
            OracleMethod::NumericIntegration => 1e-5,
            OracleMethod::PairUStatistic => f64::NAN,
        }
    }
}

/// A population value together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub estimand: String,
    pub value: f64,
    pub method: OracleMethod,
    /// Absolute accuracy: `1e-9` for closed forms, the quadrature bound for
    /// integrals, three Monte Carlo standard errors for the U-statistic.
    pub precision: f64,
}

impl OracleValue {
    pub(crate) fn new(estimand: &str, value: f64, method: OracleMethod) -> Self {
        OracleValue {
            estimand: estimand.to_string(),
            value,
            method,
            precision: method.default_precision(),
        }
    }

    /// Linear combination `Σ c_k v_k`; keeps the least exact method and adds
    /// up the scaled precisions.
    pub(crate) fn combine(estimand: &str, parts: &[(f64, OracleValue)]) -> Self {
        let value = parts.iter().map(|(c, v)| c * v.value).sum();
        let method = parts
            .iter()
            .map(|(_, v)| v.method)
            .max()
            .unwrap_or(OracleMethod::ClosedForm);
        let precision = parts.iter().map(|(c, v)| c.abs() * v.precision).sum();
        OracleValue {
            estimand: estimand.to_string(),
            value,
            method,
            precision,
        }
    }

    pub(crate) fn named(mut self, estimand: &str) -> Self {
        self.estimand = estimand.to_string();
        self
    }
}

/// `τ_r(F_1, F_0) = P(Y_1 >= Y_0) - 1/2` for independent draws from two
/// continuous laws.
///
/// Mixtures are split by linearity, normal pairs use
/// `Φ(Δμ / sqrt(σ_1² + σ_0²))`, equal monotone maps on both sides are
/// dropped, other laws with CDFs are integrated as `∫ F_0(Q_1(u)) du`, and
/// the rest fall back to a pair U-statistic on fresh draws.
pub fn tau_r(d1: &Dist, d0: &Dist) -> OracleValue {
    tau_inner(d1, d0).named("rank-ATE")
}

fn tau_inner(d1: &Dist, d0: &Dist) -> OracleValue {
    if let Dist::Mixture { components } = d1 {
        let parts: Vec<(f64, OracleValue)> = components
            .iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, c)| (*w, tau_inner(c, d0)))
            .collect();
        return OracleValue::combine("rank-ATE", &parts);
    }
    if let Dist::Mixture { components } = d0 {
        let parts: Vec<(f64, OracleValue)> = components
            .iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, c)| (*w, tau_inner(d1, c)))
            .collect();
        return OracleValue::combine("rank-ATE", &parts);
    }
    match (d1, d0) {
        (Dist::Normal { mean: m1, sd: s1 }, Dist::Normal { mean: m0, sd: s0 }) => {
            let z = (m1 - m0) / (s1 * s1 + s0 * s0).sqrt();
            OracleValue::new("rank-ATE", phi(z) - 0.5, OracleMethod::ClosedForm)
        }
        (Dist::LinearDensity { slope: s1 }, Dist::LinearDensity { slope: s0 }) => {
            OracleValue::new("rank-ATE", (s1 - s0) / 6.0, OracleMethod::ClosedForm)
        }
        (Dist::Transformed { base: b1, map: f1 }, Dist::Transformed { base: b0, map: f0 })
            if f1 == f0 =>
        {
            tau_inner(b1, b0)
        }
        _ if d1.has_cdf() && d0.has_cdf() => {
            let value = quantile_integral(|u| d0.cdf(d1.quantile(u))) - 0.5;
            OracleValue::new("rank-ATE", value, OracleMethod::NumericIntegration)
        }
        _ => pair_u_statistic(d1, d0),
    }
}

/// Midpoint rule on `(0, 1)` for a bounded monotone integrand.
pub(crate) fn quantile_integral(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / GRID as f64;
    let mut acc = 0.0;
    for k in 0..GRID {
        acc += f((k as f64 + 0.5) * h);
    }
    acc * h
}

/// Monte Carlo fallback on [`ORACLE_DRAWS`] draws per side.
pub fn pair_u_statistic(d1: &Dist, d0: &Dist) -> OracleValue {
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let mut y1: Vec<f64> = (0..ORACLE_DRAWS).map(|_| d1.sample(&mut rng)).collect();
    let mut y0: Vec<f64> = (0..ORACLE_DRAWS).map(|_| d0.sample(&mut rng)).collect();
    y1.sort_by(f64::total_cmp);
    y0.sort_by(f64::total_cmp);
    // F̂_0 at each Y_1 and 1 - F̂_1 (strict) at each Y_0 give the Hájek
    // projection terms of the two-sample U-statistic
    let m = y1.len() as f64;
    let n = y0.len() as f64;
    let a: Vec<f64> = y1
        .iter()
        .map(|&v| y0.partition_point(|&u| u <= v) as f64 / n)
        .collect();
    let b: Vec<f64> = y0
        .iter()
        .map(|&v| (m - y1.partition_point(|&u| u < v) as f64) / m)
        .collect();
    let mean = a.iter().sum::<f64>() / m;
    let var = |x: &[f64]| {
        let mu = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
    };
    let se = (var(&a) / m + var(&b) / n).sqrt();
    OracleValue {
        estimand: "rank-ATE".into(),
        value: mean - 0.5,
        method: OracleMethod::PairUStatistic,
        precision: 3.0 * se,
    }
}

/// Sup distance between a step CDF and a continuous CDF, checked at every
/// jump from both sides.
pub fn sup_distance_to_truth(f: &crate::ranks::StepCdf, truth: impl Fn(f64) -> f64) -> f64 {
    let mut prev = 0.0;
    let mut worst: f64 = 0.0;
    for (&y, &c) in f.support().iter().zip(f.cum()) {
        let t = truth(y);
        worst = worst.max((t - prev).abs()).max((t - c).abs());
        prev = c;
    }
    worst
}
