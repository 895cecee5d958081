use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranks::{compute_ranks, reference_scores, ReferenceGroup, TiePolicy};
use crate::sample::{Estimate, Sample};

use super::lstsq::{design_with_intercept, ols_solve};

/// Above this many units `normalization_kappa` switches from the double sum
/// to the sorted O(n log n) evaluation.
const EXACT_KAPPA_MAX_N: usize = 2048;

/// The function `h_n` applied to the treatment before the rank regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TransformKind {
    /// `h(w) = w`.
    Identity,
    /// `h(w) = R^W / n`, giving the rank-rank regression.
    Rank,
    /// `h(w) = I(R^W / n > threshold)`.
    DichotomizeAt { threshold: f64 },
    /// `h(w) = #{b in breakpoints : R^W / n > b}`, a bin index on the
    /// normalized-rank scale.
    Step { breakpoints: Vec<f64> },
    /// Tabulated step function of the raw treatment: `h(w)` is the value
    /// paired with the largest knot `<= w`, or the first value below the
    /// first knot.
    Custom { knots: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentTransform {
    #[serde(flatten)]
    pub kind: TransformKind,
    #[serde(default)]
    pub normalize: bool,
}

impl TreatmentTransform {
    pub fn new(kind: TransformKind, normalize: bool) -> Result<Self> {
        let t = TreatmentTransform { kind, normalize };
        t.validate()?;
        Ok(t)
    }

    /// Parses `identity`, `rank`, `dichotomize:<t>` or `step:<b1>,<b2>,...`.
    pub fn parse(spec: &str, normalize: bool) -> Result<Self> {
        let (name, arg) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
        let numbers = || -> Result<Vec<f64>> {
            arg.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad number '{v}' in transform")))
                })
                .collect()
        };
        let kind = match name {
            "identity" => TransformKind::Identity,
            "rank" => TransformKind::Rank,
            "dichotomize" | "dichotomize_at" => match numbers()?.as_slice() {
                [threshold] => TransformKind::DichotomizeAt { threshold: *threshold },
                _ => return Err(Error::Config("dichotomize takes one threshold".into())),
            },
            "step" => TransformKind::Step { breakpoints: numbers()? },
            other => return Err(Error::Config(format!("unknown transform '{other}'"))),
        };
        Self::new(kind, normalize)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            TransformKind::Identity | TransformKind::Rank => Ok(()),
            TransformKind::DichotomizeAt { threshold } => {
                if *threshold > 0.0 && *threshold < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "dichotomize threshold must lie in (0, 1), got {threshold}"
                    )))
                }
            }
            TransformKind::Step { breakpoints } => {
                if breakpoints.is_empty() {
                    return Err(Error::InvalidSpec("step transform needs breakpoints".into()));
                }
                if breakpoints.iter().any(|b| !b.is_finite())
                    || breakpoints.windows(2).any(|p| p[0] >= p[1])
                {
                    return Err(Error::InvalidSpec(
                        "step breakpoints must be finite and strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            TransformKind::Custom { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::InvalidSpec(
                        "custom transform needs equally many knots and values".into(),
                    ));
                }
                if knots.iter().chain(values).any(|v| !v.is_finite())
                    || knots.windows(2).any(|p| p[0] >= p[1])
                {
                    return Err(Error::InvalidSpec(
                        "custom knots must be finite and strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Integer scores `k_i` and a divisor `d` with `h_i = k_i / d`, when the
/// transform admits one. Lets the pair sums run in exact arithmetic.
struct IntegerScores {
    k: Vec<i64>,
    divisor: i64,
}

fn integer_scores(w: &[f64], t: &TreatmentTransform) -> Result<Option<IntegerScores>> {
    let n = w.len();
    let k: Vec<i64> = match &t.kind {
        TransformKind::Rank => {
            let r = compute_ranks(w, TiePolicy::Literal)?;
            return Ok(Some(IntegerScores {
                k: r.ranks.iter().map(|&v| v as i64).collect(),
                divisor: n as i64,
            }));
        }
        TransformKind::DichotomizeAt { threshold } => {
            let r = compute_ranks(w, TiePolicy::Literal)?.normalized();
            r.iter().map(|&v| (v > *threshold) as i64).collect()
        }
        TransformKind::Step { breakpoints } => {
            let r = compute_ranks(w, TiePolicy::Literal)?.normalized();
            r.iter()
                .map(|&v| breakpoints.partition_point(|&b| v > b) as i64)
                .collect()
        }
        TransformKind::Identity | TransformKind::Custom { .. } => {
            let h = raw_transform(w, t)?;
            const LIMIT: f64 = (1u64 << 40) as f64;
            if h.iter().all(|v| v.fract() == 0.0 && v.abs() < LIMIT) {
                h.iter().map(|&v| v as i64).collect()
            } else {
                return Ok(None);
            }
        }
    };
    Ok(Some(IntegerScores { k, divisor: 1 }))
}

fn raw_transform(w: &[f64], t: &TreatmentTransform) -> Result<Vec<f64>> {
    crate::ranks::check_finite(w, "w")?;
    Ok(match &t.kind {
        TransformKind::Identity => w.to_vec(),
        TransformKind::Custom { knots, values } => w
            .iter()
            .map(|&v| {
                let k = knots.partition_point(|&kn| kn <= v);
                values[k.saturating_sub(1)]
            })
            .collect(),
        _ => {
            let s = integer_scores(w, t)?.expect("rank-based transforms are integer valued");
            s.k.iter().map(|&k| k as f64 / s.divisor as f64).collect()
        }
    })
}

/// Evaluates `h_n(W_i)` for every unit, without the κ̂ rescaling.
pub fn transform_treatment(w: &[f64], t: &TreatmentTransform) -> Result<Vec<f64>> {
    t.validate()?;
    if w.is_empty() {
        return Err(Error::InvalidInput("empty treatment column".into()));
    }
    raw_transform(w, t)
}

/// `κ̂ = Σ_{W_i > W_j} (h_i - h_j) / Σ_{W_i > W_j} (h_i - h_j)²`, evaluated
/// as a literal double sum over ordered pairs.
pub fn normalization_kappa_exact(w: &[f64], t: &TreatmentTransform) -> Result<f64> {
    let h = transform_treatment(w, t)?;
    let n = w.len();
    if let Some(s) = integer_scores(w, t)? {
        let (mut num, mut den) = (0i128, 0i128);
        for i in 0..n {
            for j in 0..n {
                if w[i] > w[j] {
                    let d = (s.k[i] - s.k[j]) as i128;
                    num += d;
                    den += d * d;
                }
            }
        }
        return integer_ratio(num, den, s.divisor);
    }
    let (mut num, mut den) = (Compensated::default(), Compensated::default());
    for i in 0..n {
        for j in 0..n {
            if w[i] > w[j] {
                let d = h[i] - h[j];
                num.add(d);
                den.add(d * d);
            }
        }
    }
    float_ratio(num.value(), den.value())
}

/// Same quantity as [`normalization_kappa_exact`]; large samples use the
/// sorted evaluation. Because `h` is a function of `W`, tied-`W` pairs
/// contribute nothing and the denominator reduces to `n Σ (h_i - h̄)²`,
/// while the numerator is `Σ_i h_i (L_i - G_i)` with `L_i`/`G_i` the counts
/// of units strictly below/above `W_i`.
pub fn normalization_kappa(w: &[f64], t: &TreatmentTransform) -> Result<f64> {
    if w.len() <= EXACT_KAPPA_MAX_N {
        return normalization_kappa_exact(w, t);
    }
    let h = transform_treatment(w, t)?;
    let n = w.len();
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let balance: Vec<i64> = w
        .iter()
        .map(|&v| {
            let below = sorted.partition_point(|&s| s < v) as i64;
            let above = (n - sorted.partition_point(|&s| s <= v)) as i64;
            below - above
        })
        .collect();
    if let Some(s) = integer_scores(w, t)? {
        let num: i128 = s
            .k
            .iter()
            .zip(&balance)
            .map(|(&k, &b)| k as i128 * b as i128)
            .sum();
        let sum: i128 = s.k.iter().map(|&k| k as i128).sum();
        let sum_sq: i128 = s.k.iter().map(|&k| (k as i128) * (k as i128)).sum();
        let den = n as i128 * sum_sq - sum * sum;
        return integer_ratio(num, den, s.divisor);
    }
    let mut total = Compensated::default();
    h.iter().for_each(|&v| total.add(v));
    let mean = total.value() / n as f64;
    let (mut num, mut ss) = (Compensated::default(), Compensated::default());
    for (&hi, &b) in h.iter().zip(&balance) {
        num.add((hi - mean) * b as f64);
        ss.add((hi - mean) * (hi - mean));
    }
    float_ratio(num.value(), n as f64 * ss.value())
}

fn integer_ratio(num: i128, den: i128, divisor: i64) -> Result<f64> {
    if den <= 0 {
        return Err(Error::NoVariation("transformed treatment is constant".into()));
    }
    // h = k / d, so κ(h) = d κ(k)
    Ok((num * divisor as i128) as f64 / den as f64)
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

fn float_ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::NoVariation("transformed treatment is constant".into()));
    }
    Ok(num / den)
}

/// Rank-OLS of `R_i^Y / n` on `h_n(W_i)` (and covariates when present).
/// With `normalize`, `h_n` is multiplied by κ̂ before the regression.
pub fn rank_ols_general(s: &Sample, t: &TreatmentTransform) -> Result<Estimate> {
    s.validate()?;
    let mut h = transform_treatment(&s.w, t)?;
    let n = s.n();
    if h.iter().all(|&v| v == h[0]) {
        return Err(Error::NoVariation("transformed treatment is constant".into()));
    }
    let kappa = if t.normalize {
        let k = normalization_kappa(&s.w, t)?;
        h.iter_mut().for_each(|v| *v *= k);
        Some(k)
    } else {
        None
    };
    let groups = vec![true; n];
    let response = reference_scores(&s.y, &groups, ReferenceGroup::All);

    let (value, condition) = match s.x.as_deref() {
        None | Some([]) => (univariate_slope(&h, &response), None),
        Some(x) => {
            let mut columns: Vec<&[f64]> = vec![&h];
            columns.extend(x.iter().map(Vec::as_slice));
            let fit = ols_solve(&design_with_intercept(n, &columns), &response)?;
            (fit.coef[1], Some(fit.condition_number))
        }
    };
    let estimand = if t.normalize {
        "convex average of pairwise rank-ATEs"
    } else {
        "weighted pairwise rank-ATE"
    };
    let mut e = Estimate::new(value, "rank_ols_general", estimand, n)
        .diag("n_covariates", s.n_covariates() as f64);
    if let Some(k) = kappa {
        e = e.diag("kappa", k);
    }
    if let Some(c) = condition {
        e = e.diag("condition_number", c);
    }
    e.finite()
}

/// Simple-regression slope. A two-valued regressor takes the
/// difference-in-means route so binary treatments match `rank_ols_nocov`.
fn univariate_slope(h: &[f64], y: &[f64]) -> f64 {
    let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if h.iter().all(|&v| v == lo || v == hi) {
        let upper: Vec<bool> = h.iter().map(|&v| v == hi).collect();
        let diff = super::arm_mean(y, &upper, true) - super::arm_mean(y, &upper, false);
        return diff / (hi - lo);
    }
    let n = h.len() as f64;
    let hm = h.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (sxy, sxx) = h.iter().zip(y).fold((0.0, 0.0), |(a, b), (&hi, &yi)| {
        (a + (hi - hm) * (yi - ym), b + (hi - hm) * (hi - hm))
    });
    sxy / sxx
}
