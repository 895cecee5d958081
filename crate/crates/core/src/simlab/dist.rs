use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn phi_inv(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}

/// Strictly increasing maps applied to latent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "map")]
pub enum MonotoneMap {
    Identity,
    Affine { scale: f64, shift: f64 },
    Cube,
    Exp,
    /// Piecewise linear through strictly increasing `(knots, values)`,
    /// extended linearly past both ends.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl MonotoneMap {
    pub fn validate(&self) -> Result<()> {
        match self {
            MonotoneMap::Affine { scale, shift } if !(*scale > 0.0 && shift.is_finite()) => Err(
                Error::InvalidSpec(format!("affine map needs a positive scale, got {scale}")),
            ),
            MonotoneMap::Tabulated { knots, values } => {
                let increasing = |v: &[f64]| v.windows(2).all(|p| p[0] < p[1]);
                if knots.len() < 2 || knots.len() != values.len() || !increasing(knots) || !increasing(values) {
                    Err(Error::InvalidSpec(
                        "tabulated map needs >= 2 strictly increasing knots and values".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            MonotoneMap::Identity => x,
            MonotoneMap::Affine { scale, shift } => scale * x + shift,
            MonotoneMap::Cube => x * x * x,
            MonotoneMap::Exp => x.exp(),
            MonotoneMap::Tabulated { knots, values } => interpolate(knots, values, x),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match self {
            MonotoneMap::Identity => y,
            MonotoneMap::Affine { scale, shift } => (y - shift) / scale,
            MonotoneMap::Cube => y.cbrt(),
            MonotoneMap::Exp => {
                if y <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    y.ln()
                }
            }
            MonotoneMap::Tabulated { knots, values } => interpolate(values, knots, y),
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Continuous outcome laws with exact CDFs and quantiles (except sums).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Dist {
    Normal { mean: f64, sd: f64 },
    Laplace { location: f64, scale: f64 },
    /// `shift + Exp(rate)`.
    ShiftedExp { shift: f64, rate: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Density `1 + slope (2y - 1)` on `[0, 1]`, `|slope| <= 1`.
    LinearDensity { slope: f64 },
    Mixture { components: Vec<(f64, Dist)> },
    Transformed { base: Box<Dist>, map: MonotoneMap },
    /// Sum of independent draws; sampling only.
    Sum { terms: Vec<Dist> },
}

impl Dist {
    pub fn normal(mean: f64, sd: f64) -> Dist {
        Dist::Normal { mean, sd }
    }

    pub fn transformed(base: Dist, map: MonotoneMap) -> Dist {
        Dist::Transformed {
            base: Box::new(base),
            map,
        }
    }

    pub fn mixture(components: Vec<(f64, Dist)>) -> Dist {
        Dist::Mixture { components }
    }

    /// Independent sum, collapsing normal terms into one normal.
    pub fn sum(terms: Vec<Dist>) -> Dist {
        let (mut mean, mut var) = (0.0, 0.0);
        let mut rest = Vec::new();
        for t in terms {
            match t {
                Dist::Normal { mean: m, sd } => {
                    mean += m;
                    var += sd * sd;
                }
                other => rest.push(other),
            }
        }
        if rest.is_empty() {
            return Dist::normal(mean, var.sqrt());
        }
        if var > 0.0 || mean != 0.0 {
            rest.insert(0, Dist::normal(mean, var.sqrt()));
        }
        if rest.len() == 1 {
            rest.pop().unwrap()
        } else {
            Dist::Sum { terms: rest }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        match self {
            Dist::Normal { mean, sd } if !(mean.is_finite() && *sd > 0.0) => bad("normal needs sd > 0"),
            Dist::Laplace { location, scale } if !(location.is_finite() && *scale > 0.0) => {
                bad("laplace needs scale > 0")
            }
            Dist::ShiftedExp { shift, rate } if !(shift.is_finite() && *rate > 0.0) => {
                bad("exponential needs rate > 0")
            }
            Dist::Uniform { lo, hi } if !(lo < hi) => bad("uniform needs lo < hi"),
            Dist::LinearDensity { slope } if !(slope.abs() <= 1.0) => bad("linear density needs |slope| <= 1"),
            Dist::Mixture { components } => {
                if components.is_empty() || components.iter().any(|(w, _)| !(*w >= 0.0)) {
                    return bad("mixture needs non-negative weights");
                }
                let total: f64 = components.iter().map(|c| c.0).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad("mixture weights must sum to 1");
                }
                components.iter().try_for_each(|(_, d)| d.validate())
            }
            Dist::Transformed { base, map } => {
                map.validate()?;
                base.validate()
            }
            Dist::Sum { terms } => terms.iter().try_for_each(Dist::validate),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Dist::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Dist::Laplace { .. } => self.quantile(open_unit(rng)),
            Dist::ShiftedExp { shift, rate } => {
                let e: f64 = Exp::new(*rate).expect("validated rate").sample(rng);
                shift + e
            }
            Dist::Uniform { lo, hi } => rng.random_range(*lo..*hi),
            Dist::LinearDensity { .. } => self.quantile(open_unit(rng)),
            Dist::Mixture { components } => {
                let mut u = rng.random::<f64>();
                for (w, d) in components {
                    if u < *w {
                        return d.sample(rng);
                    }
                    u -= w;
                }
                components.last().expect("validated mixture").1.sample(rng)
            }
            Dist::Transformed { base, map } => map.apply(base.sample(rng)),
            Dist::Sum { terms } => terms.iter().map(|t| t.sample(rng)).sum(),
        }
    }

    /// Whether [`Dist::cdf`] and [`Dist::quantile`] are available.
    pub fn has_cdf(&self) -> bool {
        match self {
            Dist::Sum { .. } => false,
            Dist::Mixture { components } => components.iter().all(|(_, d)| d.has_cdf()),
            Dist::Transformed { base, .. } => base.has_cdf(),
            _ => true,
        }
    }

    /// Population CDF. Panics for `Sum`, which has none in closed form.
    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            Dist::Normal { mean, sd } => phi((y - mean) / sd),
            Dist::Laplace { location, scale } => {
                let z = (y - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Dist::ShiftedExp { shift, rate } => {
                if y <= *shift {
                    0.0
                } else {
                    -(-rate * (y - shift)).exp_m1()
                }
            }
            Dist::Uniform { lo, hi } => ((y - lo) / (hi - lo)).clamp(0.0, 1.0),
            Dist::LinearDensity { slope } => {
                let t = y.clamp(0.0, 1.0);
                t + slope * t * (t - 1.0)
            }
            Dist::Mixture { components } => components.iter().map(|(w, d)| w * d.cdf(y)).sum(),
            Dist::Transformed { base, map } => base.cdf(map.inverse(y)),
            Dist::Sum { .. } => panic!("sum distributions have no closed-form CDF"),
        }
    }

    /// Population quantile for `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Dist::Normal { mean, sd } => mean + sd * phi_inv(u),
            Dist::Laplace { location, scale } => {
                if u < 0.5 {
                    location + scale * (2.0 * u).ln()
                } else {
                    location - scale * (2.0 * (1.0 - u)).ln()
                }
            }
            Dist::ShiftedExp { shift, rate } => shift - (-u).ln_1p() / rate,
            Dist::Uniform { lo, hi } => lo + u * (hi - lo),
            Dist::LinearDensity { slope } => {
                // root of slope y^2 + (1 - slope) y - u = 0 in [0, 1]
                let b = 1.0 - slope;
                2.0 * u / (b + (b * b + 4.0 * slope * u).sqrt())
            }
            Dist::Transformed { base, map } => map.apply(base.quantile(u)),
            Dist::Mixture { .. } => bisect_quantile(self, u),
            Dist::Sum { .. } => panic!("sum distributions have no closed-form quantile"),
        }
    }
}

/// Uniform draw from the open interval `(0, 1)`.
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn bisect_quantile(d: &Dist, u: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    while d.cdf(lo) > u {
        lo *= 2.0;
    }
    while d.cdf(hi) < u {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d.cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}
