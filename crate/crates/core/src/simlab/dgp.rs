use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ols::{ols_solve, TransformKind, TreatmentTransform};
use crate::ranks::{ReferenceGroup, StepCdf};
use crate::sample::{PanelSample, Sample};

use super::dist::{open_unit, phi, Dist, MonotoneMap};
use super::oracle::{quantile_integral, tau_r, OracleMethod, OracleValue};
use super::rng::stream;

/// Unit-variance, mean-zero noise families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    #[default]
    Gaussian,
    Laplace,
    Exponential,
}

impl NoiseFamily {
    /// Mean-zero law with standard deviation `sd`.
    pub fn with_sd(self, sd: f64) -> Dist {
        match self {
            NoiseFamily::Gaussian => Dist::normal(0.0, sd),
            NoiseFamily::Laplace => Dist::Laplace {
                location: 0.0,
                scale: sd / std::f64::consts::SQRT_2,
            },
            NoiseFamily::Exponential => Dist::ShiftedExp {
                shift: -sd,
                rate: 1.0 / sd,
            },
        }
    }
}

/// `Y(w) = μ_w + β'X + σ_w ε_w` with `X ~ N(0, I)` and `W ~ Bernoulli(p)`
/// independent of everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedBinary {
    pub mu1: f64,
    pub mu0: f64,
    pub sigma1: f64,
    pub sigma0: f64,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseFamily,
    pub p_treat: f64,
}

/// A covariate cell of the confounded design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub prob: f64,
    pub propensity: f64,
    /// Slope of the treated outcome density `1 + c (2y - 1)` on `[0, 1]`.
    pub treated_slope: f64,
    /// Slope of the untreated outcome density. When absent it is chosen as
    /// `-π c / (1 - π)`, which makes the observed outcome uniform in every
    /// stratum.
    #[serde(default)]
    pub control_slope: Option<f64>,
    /// Location shift of both potential outcomes in this stratum.
    #[serde(default)]
    pub offset: f64,
}

impl Stratum {
    pub fn control_slope(&self) -> f64 {
        self.control_slope.unwrap_or(
            -self.propensity * self.treated_slope / (1.0 - self.propensity),
        )
    }

    /// `(Y(1), Y(0))` laws in the stratum.
    pub fn laws(&self) -> (Dist, Dist) {
        let place = |slope: f64| shifted(&Dist::LinearDensity { slope }, self.offset);
        (place(self.treated_slope), place(self.control_slope()))
    }
}

/// Discrete covariate with stratum-specific propensities. The regression
/// uses stratum dummies as covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundedBinary {
    pub strata: Vec<Stratum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum DoseLaw {
    Discrete {
        levels: Vec<f64>,
        probs: Vec<f64>,
        means: Vec<f64>,
    },
    /// `W ~ Uniform(lo, hi)` with mean outcome `Σ_k c_k W^k`.
    Uniform { lo: f64, hi: f64, mean_poly: Vec<f64> },
}

/// `Y = μ(W) + σ ε` with a multi-valued or continuous treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralTreatment {
    pub dose: DoseLaw,
    pub sigma: f64,
    #[serde(default)]
    pub noise: NoiseFamily,
}

/// Always-takers, never-takers and compliers with a binary instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvTypes {
    pub pi_a: f64,
    pub pi_n: f64,
    pub pi_c: f64,
    pub p_instrument: f64,
    /// `Y(1)` of always-takers.
    pub always: Dist,
    /// `Y(0)` of never-takers.
    pub never: Dist,
    pub complier_treated: Dist,
    pub complier_untreated: Dist,
}

/// Two periods with `Y_t(0) = f_t(U + trend W t)`; treated units in the
/// second period get `Y_1(1) = f_1(U + trend W + effect)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCic {
    pub p_treat: f64,
    pub u_treated: Dist,
    pub u_control: Dist,
    pub f0: MonotoneMap,
    pub f1: MonotoneMap,
    pub effect: f64,
    /// Extra latent shift of the treated group in the second period;
    /// nonzero values break the rank parallel trend.
    #[serde(default)]
    pub treated_trend: f64,
}

/// `X ~ Uniform(lo, hi)`, `W = I(X >= cutoff)`,
/// `Y(w) = α_w + γ_w X³ + σ_w ε` with Gaussian `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RddSharp {
    pub lo: f64,
    pub hi: f64,
    pub cutoff: f64,
    pub alpha1: f64,
    pub alpha0: f64,
    pub gamma1: f64,
    pub gamma0: f64,
    pub sigma1: f64,
    pub sigma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "coupling")]
pub enum Coupling {
    Comonotone,
    Antimonotone,
    Independent,
    /// `Y(1) = Y(0) + s` with `s` drawn from `shifts` (probability, shift).
    ShiftMixture { shifts: Vec<(f64, f64)> },
}

/// An explicit joint law of `(Y(1), Y(0))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledPotentials {
    pub y0: Dist,
    /// Margin of `Y(1)`; must be absent for shift mixtures, where it is
    /// implied.
    #[serde(default)]
    pub y1: Option<Dist>,
    #[serde(flatten)]
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DgpParams {
    RandomizedBinary(RandomizedBinary),
    ConfoundedBinary(ConfoundedBinary),
    GeneralTreatment(GeneralTreatment),
    IvTypes(IvTypes),
    PanelCic(PanelCic),
    RddSharp(RddSharp),
    CoupledPotentials(CoupledPotentials),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub seed: u64,
    pub params: DgpParams,
}

/// Simulated data as the estimators see it.
#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Cross(Sample),
    Panel(PanelSample),
}

impl Generated {
    pub fn sample(&self) -> Result<&Sample> {
        match self {
            Generated::Cross(s) => Ok(s),
            Generated::Panel(_) => Err(Error::InvalidSpec("panel DGP has no cross-section".into())),
        }
    }

    pub fn panel(&self) -> Result<&PanelSample> {
        match self {
            Generated::Panel(p) => Ok(p),
            Generated::Cross(_) => Err(Error::InvalidSpec("cross-sectional DGP has no panel".into())),
        }
    }
}

/// Per-unit potential outcomes kept for oracle checks. Entries that the
/// design never defines are NaN.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PotentialTable {
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
}

/// Population quantities the oracles can compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "estimand")]
pub enum Estimand {
    /// `τ_r(F_{Y(1)}, F_{Y(0)})`.
    RankAte,
    /// Propensity-weighted average of stratum rank-ATEs with weights
    /// `π(X)(1 - π̃(X))`.
    ConfoundedWeighted,
    /// Probability limit of rank-OLS with stratum dummies, evaluated
    /// directly from the observed-outcome CDF.
    ConfoundedRegressionLimit,
    /// Limit of rank-OLS on `h(W)`.
    TransformedSlope { transform: TreatmentTransform },
    /// `τ_r(F_{Y|W>m}, F_{Y|W<m})` at the treatment median `m`.
    MedianSplit,
    RankLate,
    NaiveTwoStage { reference: ReferenceGroup },
    RankAtt,
    RankDidLimit,
    CutoffRankAte,
    NaiveRdd { reference: ReferenceGroup },
    /// `P(Y(1) >= Y(0)) - 1/2` under the coupling.
    TauStar,
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{what} must lie in [0, 1], got {p}")))
    }
}

fn check_simplex(p: &[f64], what: &str) -> Result<()> {
    p.iter().try_for_each(|&v| check_prob(v, what))?;
    if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSpec(format!("{what} must sum to 1")));
    }
    Ok(())
}

fn categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (k, p) in probs.iter().enumerate() {
        if u < *p {
            return k;
        }
        u -= p;
    }
    probs.len() - 1
}

fn shifted(d: &Dist, s: f64) -> Dist {
    match d {
        Dist::Normal { mean, sd } => Dist::normal(mean + s, *sd),
        other if s == 0.0 => other.clone(),
        other => Dist::transformed(other.clone(), MonotoneMap::Affine { scale: 1.0, shift: s }),
    }
}

fn mapped(d: Dist, f: &MonotoneMap) -> Dist {
    match f {
        MonotoneMap::Identity => d,
        m => Dist::transformed(d, m.clone()),
    }
}

impl DgpSpec {
    pub fn new(name: &str, seed: u64, params: DgpParams) -> Self {
        DgpSpec {
            name: name.to_string(),
            seed,
            params,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.params {
            DgpParams::RandomizedBinary(_) => "randomized_binary",
            DgpParams::ConfoundedBinary(_) => "confounded_binary",
            DgpParams::GeneralTreatment(_) => "general_treatment",
            DgpParams::IvTypes(_) => "iv_types",
            DgpParams::PanelCic(_) => "panel_cic",
            DgpParams::RddSharp(_) => "rdd_sharp",
            DgpParams::CoupledPotentials(_) => "coupled_potentials",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.params {
            DgpParams::RandomizedBinary(p) => {
                check_prob(p.p_treat, "p_treat")?;
                if !(p.sigma1 > 0.0 && p.sigma0 > 0.0) {
                    return Err(Error::InvalidSpec("noise scales must be positive".into()));
                }
                Ok(())
            }
            DgpParams::ConfoundedBinary(p) => {
                if p.strata.is_empty() {
                    return Err(Error::InvalidSpec("need at least one stratum".into()));
                }
                let probs: Vec<f64> = p.strata.iter().map(|s| s.prob).collect();
                check_simplex(&probs, "stratum probabilities")?;
                for s in &p.strata {
                    if !(s.propensity > 0.0 && s.propensity < 1.0) {
                        return Err(Error::InvalidSpec("propensities must lie in (0, 1)".into()));
                    }
                    Dist::LinearDensity { slope: s.treated_slope }.validate()?;
                    Dist::LinearDensity { slope: s.control_slope() }.validate()?;
                }
                Ok(())
            }
            DgpParams::GeneralTreatment(p) => {
                if !(p.sigma > 0.0) {
                    return Err(Error::InvalidSpec("sigma must be positive".into()));
                }
                match &p.dose {
                    DoseLaw::Discrete { levels, probs, means } => {
                        if levels.len() < 2 || levels.len() != probs.len() || levels.len() != means.len() {
                            return Err(Error::InvalidSpec(
                                "discrete doses need >= 2 levels with matching probs and means".into(),
                            ));
                        }
                        if levels.windows(2).any(|w| w[0] >= w[1]) {
                            return Err(Error::InvalidSpec("dose levels must increase".into()));
                        }
                        check_simplex(probs, "dose probabilities")
                    }
                    DoseLaw::Uniform { lo, hi, .. } if !(lo < hi) => {
                        Err(Error::InvalidSpec("uniform dose needs lo < hi".into()))
                    }
                    DoseLaw::Uniform { .. } => Ok(()),
                }
            }
            DgpParams::IvTypes(p) => {
                check_simplex(&[p.pi_a, p.pi_n, p.pi_c], "type shares")?;
                check_prob(p.p_instrument, "p_instrument")?;
                if p.pi_c <= 0.0 {
                    return Err(Error::InvalidSpec("complier share must be positive".into()));
                }
                for d in [&p.always, &p.never, &p.complier_treated, &p.complier_untreated] {
                    d.validate()?;
                }
                Ok(())
            }
            DgpParams::PanelCic(p) => {
                check_prob(p.p_treat, "p_treat")?;
                p.u_treated.validate()?;
                p.u_control.validate()?;
                p.f0.validate()?;
                p.f1.validate()
            }
            DgpParams::RddSharp(p) => {
                if !(p.lo < p.cutoff && p.cutoff < p.hi) {
                    return Err(Error::InvalidSpec("cutoff must lie inside (lo, hi)".into()));
                }
                if !(p.sigma1 > 0.0 && p.sigma0 > 0.0) {
                    return Err(Error::InvalidSpec("noise scales must be positive".into()));
                }
                Ok(())
            }
            DgpParams::CoupledPotentials(p) => {
                p.y0.validate()?;
                match (&p.coupling, &p.y1) {
                    (Coupling::ShiftMixture { shifts }, None) => {
                        let probs: Vec<f64> = shifts.iter().map(|s| s.0).collect();
                        check_simplex(&probs, "shift probabilities")
                    }
                    (Coupling::ShiftMixture { .. }, Some(_)) => Err(Error::InvalidSpec(
                        "shift mixtures imply the treated margin; omit y1".into(),
                    )),
                    (_, Some(d)) => d.validate(),
                    (_, None) => Err(Error::InvalidSpec("coupling needs a y1 margin".into())),
                }
            }
        }
    }

    /// Draws `n` units from the spec's own seed.
    pub fn generate(&self, n: usize) -> Result<Generated> {
        Ok(self.generate_full(n, &mut stream(self.seed, 0))?.0)
    }

    /// Draws `n` units from `rng`, also returning the potential outcomes.
    pub fn generate_full(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<(Generated, PotentialTable)> {
        self.validate()?;
        if n < 2 {
            return Err(Error::InvalidSpec(format!("need n >= 2, got {n}")));
        }
        let mut table = PotentialTable {
            y1: Vec::with_capacity(n),
            y0: Vec::with_capacity(n),
        };
        let generated = match &self.params {
            DgpParams::RandomizedBinary(p) => {
                let e1 = p.noise.with_sd(p.sigma1);
                let e0 = p.noise.with_sd(p.sigma0);
                let d = p.beta.len();
                let mut x = vec![Vec::with_capacity(n); d];
                let (mut y, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n));
                for _ in 0..n {
                    let mut index = 0.0;
                    for (k, b) in p.beta.iter().enumerate() {
                        let v = Dist::normal(0.0, 1.0).sample(rng);
                        x[k].push(v);
                        index += b * v;
                    }
                    let t = rng.random::<f64>() < p.p_treat;
                    let y1 = p.mu1 + index + e1.sample(rng);
                    let y0 = p.mu0 + index + e0.sample(rng);
                    table.y1.push(y1);
                    table.y0.push(y0);
                    y.push(if t { y1 } else { y0 });
                    w.push(t as u8 as f64);
                }
                let s = Sample::new(y, w)?;
                Generated::Cross(if d > 0 { s.with_covariates(x)? } else { s })
            }
            DgpParams::ConfoundedBinary(p) => {
                let probs: Vec<f64> = p.strata.iter().map(|s| s.prob).collect();
                let k = p.strata.len();
                let mut x = vec![Vec::with_capacity(n); k - 1];
                let (mut y, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n));
                for _ in 0..n {
                    let s = categorical(rng, &probs);
                    let st = &p.strata[s];
                    for (j, col) in x.iter_mut().enumerate() {
                        col.push((s == j + 1) as u8 as f64);
                    }
                    let t = rng.random::<f64>() < st.propensity;
                    let (d1, d0) = st.laws();
                    let (y1, y0) = (d1.sample(rng), d0.sample(rng));
                    table.y1.push(y1);
                    table.y0.push(y0);
                    y.push(if t { y1 } else { y0 });
                    w.push(t as u8 as f64);
                }
                let s = Sample::new(y, w)?;
                Generated::Cross(if k > 1 { s.with_covariates(x)? } else { s })
            }
            DgpParams::GeneralTreatment(p) => {
                let e = p.noise.with_sd(p.sigma);
                let (mut y, mut w) = (Vec::with_capacity(n), Vec::with_capacity(n));
                for _ in 0..n {
                    let (dose, mean) = match &p.dose {
                        DoseLaw::Discrete { levels, probs, means } => {
                            let k = categorical(rng, probs);
                            (levels[k], means[k])
                        }
                        DoseLaw::Uniform { lo, hi, mean_poly } => {
                            let v = rng.random_range(*lo..*hi);
                            (v, poly(mean_poly, v))
                        }
                    };
                    w.push(dose);
                    y.push(mean + e.sample(rng));
                }
                table.y1 = vec![f64::NAN; n];
                table.y0 = vec![f64::NAN; n];
                Generated::Cross(Sample::new(y, w)?)
            }
            DgpParams::IvTypes(p) => {
                let shares = [p.pi_a, p.pi_n, p.pi_c];
                let (mut y, mut w, mut z) = (Vec::new(), Vec::new(), Vec::new());
                for _ in 0..n {
                    let g = categorical(rng, &shares);
                    let zi = rng.random::<f64>() < p.p_instrument;
                    let (y1, y0) = match g {
                        0 => (p.always.sample(rng), f64::NAN),
                        1 => (f64::NAN, p.never.sample(rng)),
                        _ => (p.complier_treated.sample(rng), p.complier_untreated.sample(rng)),
                    };
                    let wi = g == 0 || (g == 2 && zi);
                    table.y1.push(y1);
                    table.y0.push(y0);
                    y.push(if wi { y1 } else { y0 });
                    w.push(wi as u8 as f64);
                    z.push(zi as u8 as f64);
                }
                Generated::Cross(Sample::new(y, w)?.with_instrument(z)?)
            }
            DgpParams::PanelCic(p) => {
                let (mut y0v, mut y1v, mut w) = (Vec::new(), Vec::new(), Vec::new());
                for _ in 0..n {
                    let t = rng.random::<f64>() < p.p_treat;
                    let u = if t { &p.u_treated } else { &p.u_control }.sample(rng);
                    let trend = if t { p.treated_trend } else { 0.0 };
                    let untreated = p.f1.apply(u + trend);
                    let treated = p.f1.apply(u + trend + p.effect);
                    y0v.push(p.f0.apply(u));
                    table.y1.push(if t { treated } else { f64::NAN });
                    table.y0.push(untreated);
                    y1v.push(if t { treated } else { untreated });
                    w.push(t as u8 as f64);
                }
                Generated::Panel(PanelSample::new(y0v, y1v, w)?)
            }
            DgpParams::RddSharp(p) => {
                let (mut y, mut w, mut run) = (Vec::new(), Vec::new(), Vec::new());
                for _ in 0..n {
                    let x = rng.random_range(p.lo..p.hi);
                    let c = x * x * x;
                    let y1 = p.alpha1 + p.gamma1 * c + p.sigma1 * Dist::normal(0.0, 1.0).sample(rng);
                    let y0 = p.alpha0 + p.gamma0 * c + p.sigma0 * Dist::normal(0.0, 1.0).sample(rng);
                    let t = x >= p.cutoff;
                    table.y1.push(y1);
                    table.y0.push(y0);
                    y.push(if t { y1 } else { y0 });
                    w.push(t as u8 as f64);
                    run.push(x);
                }
                Generated::Cross(Sample::new(y, w)?.with_running(run)?)
            }
            DgpParams::CoupledPotentials(p) => {
                let (mut y, mut w) = (Vec::new(), Vec::new());
                for _ in 0..n {
                    let (y1, y0) = draw_coupled(p, rng);
                    let t = rng.random::<f64>() < 0.5;
                    table.y1.push(y1);
                    table.y0.push(y0);
                    y.push(if t { y1 } else { y0 });
                    w.push(t as u8 as f64);
                }
                Generated::Cross(Sample::new(y, w)?)
            }
        };
        Ok((generated, table))
    }
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn draw_coupled(p: &CoupledPotentials, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match &p.coupling {
        Coupling::ShiftMixture { shifts } => {
            let y0 = p.y0.sample(rng);
            let probs: Vec<f64> = shifts.iter().map(|s| s.0).collect();
            (y0 + shifts[categorical(rng, &probs)].1, y0)
        }
        coupling => {
            let y1 = p.y1.as_ref().expect("validated margin");
            match coupling {
                Coupling::Comonotone => {
                    let u = open_unit(rng);
                    (y1.quantile(u), p.y0.quantile(u))
                }
                Coupling::Antimonotone => {
                    let u = open_unit(rng);
                    (y1.quantile(u), p.y0.quantile(1.0 - u))
                }
                _ => (y1.sample(rng), p.y0.sample(rng)),
            }
        }
    }
}

impl CoupledPotentials {
    /// The `Y(1)` margin, explicit or implied by the shift mixture.
    pub fn y1_margin(&self) -> Dist {
        match (&self.coupling, &self.y1) {
            (Coupling::ShiftMixture { shifts }, _) => Dist::mixture(
                shifts.iter().map(|&(p, s)| (p, shifted(&self.y0, s))).collect(),
            ),
            (_, Some(d)) => d.clone(),
            (_, None) => self.y0.clone(),
        }
    }
}

/// Discretizes a continuous law onto `atoms` equally likely quantiles.
pub fn population_step_cdf(d: &Dist, atoms: usize) -> Result<StepCdf> {
    let values: Vec<f64> = (0..atoms)
        .map(|k| d.quantile((k as f64 + 0.5) / atoms as f64))
        .collect();
    crate::ranks::ecdf(&values)
}

impl PanelCic {
    /// `(F_{Y1(0)|W=1}, F_{Y1(0)|W=0}, F_{Y0(0)|W=1}, F_{Y0(0)|W=0})`.
    pub fn untreated_laws(&self) -> [Dist; 4] {
        [
            mapped(shifted(&self.u_treated, self.treated_trend), &self.f1),
            mapped(self.u_control.clone(), &self.f1),
            mapped(self.u_treated.clone(), &self.f0),
            mapped(self.u_control.clone(), &self.f0),
        ]
    }

    /// `F_{Y1(1)|W=1}`.
    pub fn treated_law(&self) -> Dist {
        mapped(shifted(&self.u_treated, self.treated_trend + self.effect), &self.f1)
    }
}

impl IvTypes {
    /// Observed outcome law of the reference group used to rank.
    fn reference_law(&self, reference: ReferenceGroup) -> Dist {
        let q = self.p_instrument;
        let parts: Vec<(f64, Dist)> = match reference {
            ReferenceGroup::All => vec![
                (self.pi_a, self.always.clone()),
                (self.pi_n, self.never.clone()),
                (q * self.pi_c, self.complier_treated.clone()),
                ((1.0 - q) * self.pi_c, self.complier_untreated.clone()),
            ],
            ReferenceGroup::Treated => vec![
                (self.pi_a, self.always.clone()),
                (q * self.pi_c, self.complier_treated.clone()),
            ],
            ReferenceGroup::Control => vec![
                (self.pi_n, self.never.clone()),
                ((1.0 - q) * self.pi_c, self.complier_untreated.clone()),
            ],
        };
        let total: f64 = parts.iter().map(|p| p.0).sum();
        Dist::mixture(
            parts
                .into_iter()
                .filter(|p| p.0 > 0.0)
                .map(|(w, d)| (w / total, d))
                .collect(),
        )
    }
}

impl RddSharp {
    fn cutoff_law(&self, treated: bool) -> Dist {
        let c = self.cutoff.powi(3);
        if treated {
            Dist::normal(self.alpha1 + self.gamma1 * c, self.sigma1)
        } else {
            Dist::normal(self.alpha0 + self.gamma0 * c, self.sigma0)
        }
    }

    /// `τ_r(N, F_ref)` for a normal `N`, integrating over the running variable.
    fn tau_against_reference(&self, target: &Dist, reference: ReferenceGroup) -> f64 {
        const GRID: usize = 20_000;
        let (lo, hi) = match reference {
            ReferenceGroup::All => (self.lo, self.hi),
            ReferenceGroup::Treated => (self.cutoff, self.hi),
            ReferenceGroup::Control => (self.lo, self.cutoff),
        };
        let Dist::Normal { mean: m, sd: s } = *target else {
            unreachable!("cutoff laws are normal")
        };
        let step = (hi - lo) / GRID as f64;
        let mut acc = 0.0;
        for k in 0..GRID {
            let x = lo + (k as f64 + 0.5) * step;
            let (mean, sd) = if x >= self.cutoff {
                (self.alpha1 + self.gamma1 * x.powi(3), self.sigma1)
            } else {
                (self.alpha0 + self.gamma0 * x.powi(3), self.sigma0)
            };
            acc += phi((m - mean) / (s * s + sd * sd).sqrt()) - 0.5;
        }
        acc / GRID as f64
    }
}

fn unsupported(spec: &DgpSpec, e: &Estimand) -> Error {
    Error::InvalidSpec(format!("estimand {e:?} is not defined for a {} DGP", spec.kind()))
}

/// Limit of `h_n` under a discrete dose law: the normalized rank tends to
/// `F_W(w)` (ties share the upper rank).
fn population_transform(levels: &[f64], probs: &[f64], t: &TreatmentTransform) -> Result<Vec<f64>> {
    let cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    Ok(match &t.kind {
        TransformKind::Identity => levels.to_vec(),
        TransformKind::Rank => cdf,
        TransformKind::DichotomizeAt { threshold } => {
            cdf.iter().map(|&f| (f > *threshold) as u8 as f64).collect()
        }
        TransformKind::Step { breakpoints } => cdf
            .iter()
            .map(|&f| breakpoints.partition_point(|&b| f > b) as f64)
            .collect(),
        TransformKind::Custom { .. } => crate::ols::transform_treatment(levels, t)?,
    })
}

/// Population value of `estimand` under `spec`.
pub fn oracle_estimand(spec: &DgpSpec, estimand: &Estimand) -> Result<OracleValue> {
    spec.validate()?;
    let label = estimand_label(estimand);
    let out = match (&spec.params, estimand) {
        (DgpParams::RandomizedBinary(p), Estimand::RankAte) => {
            let spread = p.beta.iter().map(|b| b * b).sum::<f64>().sqrt();
            let margin = |mu: f64, sd: f64| {
                let noise = p.noise.with_sd(sd);
                if spread == 0.0 {
                    shifted(&noise, mu)
                } else {
                    Dist::sum(vec![Dist::normal(mu, spread), noise])
                }
            };
            let (d1, d0) = (margin(p.mu1, p.sigma1), margin(p.mu0, p.sigma0));
            tau_r(&d1, &d0)
        }
        (DgpParams::ConfoundedBinary(p), Estimand::RankAte) => {
            let d1 = Dist::mixture(p.strata.iter().map(|s| (s.prob, s.laws().0)).collect());
            let d0 = Dist::mixture(p.strata.iter().map(|s| (s.prob, s.laws().1)).collect());
            tau_r(&d1, &d0)
        }
        (DgpParams::ConfoundedBinary(p), Estimand::ConfoundedWeighted) => {
            let pi_tilde = projected_propensity(p)?;
            let mut parts = Vec::new();
            let mut total = 0.0;
            for (s, pt) in p.strata.iter().zip(&pi_tilde) {
                let weight = s.prob * s.propensity * (1.0 - pt);
                total += weight;
                let (d1, d0) = s.laws();
                let tau = tau_r(&d1, &d0);
                parts.push((weight, tau));
            }
            for part in parts.iter_mut() {
                part.0 /= total;
            }
            OracleValue::combine(&label, &parts)
        }
        (DgpParams::ConfoundedBinary(p), Estimand::ConfoundedRegressionLimit) => {
            confounded_regression_limit(p)?
        }
        (DgpParams::GeneralTreatment(p), Estimand::TransformedSlope { transform }) => {
            let DoseLaw::Discrete { levels, probs, means } = &p.dose else {
                return Err(Error::InvalidSpec(
                    "transformed-slope oracle needs a discrete dose law".into(),
                ));
            };
            transform.validate()?;
            let h = population_transform(levels, probs, transform)?;
            let noise = p.noise.with_sd(p.sigma);
            let (mut num, mut den, mut kappa_num) = (Vec::new(), 0.0, 0.0);
            for a in 0..levels.len() {
                for b in 0..a {
                    let pp = probs[a] * probs[b];
                    let dh = h[a] - h[b];
                    let tau = tau_r(&shifted(&noise, means[a]), &shifted(&noise, means[b]));
                    num.push((pp * dh, tau));
                    den += pp * dh * dh;
                    kappa_num += pp * dh;
                }
            }
            if den <= 0.0 {
                return Err(Error::NoVariation("population transform is constant".into()));
            }
            let scale = if transform.normalize {
                // h is multiplied by κ = kappa_num / den, dividing the slope by κ
                1.0 / kappa_num
            } else {
                1.0 / den
            };
            for part in num.iter_mut() {
                part.0 *= scale;
            }
            let mut v = OracleValue::combine(&label, &num);
            if v.method == OracleMethod::ClosedForm {
                v.method = OracleMethod::Enumeration;
            }
            v
        }
        (DgpParams::GeneralTreatment(p), Estimand::MedianSplit) => median_split(p)?,
        (DgpParams::IvTypes(p), Estimand::RankLate) => {
            tau_r(&p.complier_treated, &p.complier_untreated)
        }
        (DgpParams::IvTypes(p), Estimand::NaiveTwoStage { reference }) => {
            let f = p.reference_law(*reference);
            OracleValue::combine(
                &label,
                &[
                    (1.0, tau_r(&p.complier_treated, &f)),
                    (-1.0, tau_r(&p.complier_untreated, &f)),
                ],
            )
        }
        (DgpParams::PanelCic(p), Estimand::RankAtt) => {
            let [post_treated, ..] = p.untreated_laws();
            tau_r(&p.treated_law(), &post_treated)
        }
        (DgpParams::PanelCic(p), Estimand::RankDidLimit) => {
            let [_, post_control, pre_treated, pre_control] = p.untreated_laws();
            OracleValue::combine(
                &label,
                &[
                    (1.0, tau_r(&p.treated_law(), &post_control)),
                    (-1.0, tau_r(&pre_treated, &pre_control)),
                ],
            )
        }
        (DgpParams::RddSharp(p), Estimand::CutoffRankAte) => {
            tau_r(&p.cutoff_law(true), &p.cutoff_law(false))
        }
        (DgpParams::RddSharp(p), Estimand::NaiveRdd { reference }) => {
            let v = p.tau_against_reference(&p.cutoff_law(true), *reference)
                - p.tau_against_reference(&p.cutoff_law(false), *reference);
            OracleValue::new(&label, v, OracleMethod::NumericIntegration)
        }
        (DgpParams::CoupledPotentials(p), Estimand::RankAte) => tau_r(&p.y1_margin(), &p.y0),
        (DgpParams::CoupledPotentials(p), Estimand::TauStar) => tau_star(p),
        _ => return Err(unsupported(spec, estimand)),
    };
    Ok(out.named(&label))
}

pub fn estimand_label(e: &Estimand) -> String {
    match e {
        Estimand::RankAte => "rank-ATE".into(),
        Estimand::ConfoundedWeighted => "weighted conditional rank-ATE".into(),
        Estimand::ConfoundedRegressionLimit => "rank-OLS limit with stratum dummies".into(),
        Estimand::TransformedSlope { .. } => "transformed-treatment rank-OLS limit".into(),
        Estimand::MedianSplit => "median-split rank-ATE".into(),
        Estimand::RankLate => "rank-LATE".into(),
        Estimand::NaiveTwoStage { reference } => {
            format!("rank-2SLS limit (ref {})", reference.as_str())
        }
        Estimand::RankAtt => "rank-ATT".into(),
        Estimand::RankDidLimit => "rank-DiD limit".into(),
        Estimand::CutoffRankAte => "cutoff rank-ATE".into(),
        Estimand::NaiveRdd { reference } => format!("rank-RDD limit (ref {})", reference.as_str()),
        Estimand::TauStar => "tau*".into(),
    }
}

/// Population projection of the propensity on an intercept and stratum
/// dummies, weighted by the stratum probabilities.
fn projected_propensity(p: &ConfoundedBinary) -> Result<Vec<f64>> {
    let k = p.strata.len();
    let design = nalgebra::DMatrix::from_fn(k, k, |i, j| {
        let v = if j == 0 { 1.0 } else { (i == j) as u8 as f64 };
        v * p.strata[i].prob.sqrt()
    });
    let rhs: Vec<f64> = p
        .strata
        .iter()
        .map(|s| s.propensity * s.prob.sqrt())
        .collect();
    let fit = ols_solve(&design, &rhs)?;
    Ok((0..k)
        .map(|i| fit.coef[0] + if i > 0 { fit.coef[i] } else { 0.0 })
        .collect())
}

/// Rank-OLS with saturated stratum dummies converges to
/// `Σ_x p_x π_x (1 - π_x) [E M(Y(1)) - E M(Y(0)) | x] / Σ_x p_x π_x (1 - π_x)`
/// where `M` is the observed-outcome CDF. Equals the weighted average of
/// stratum rank-ATEs only when the observed outcome has the same law in
/// every stratum.
fn confounded_regression_limit(p: &ConfoundedBinary) -> Result<OracleValue> {
    let laws: Vec<(Dist, Dist)> = p.strata.iter().map(Stratum::laws).collect();
    let m = |y: f64| -> f64 {
        p.strata
            .iter()
            .zip(&laws)
            .map(|(s, (a, b))| s.prob * (s.propensity * a.cdf(y) + (1.0 - s.propensity) * b.cdf(y)))
            .sum()
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (s, (a, b)) in p.strata.iter().zip(&laws) {
        let weight = s.prob * s.propensity * (1.0 - s.propensity);
        let diff = quantile_integral(|u| m(a.quantile(u))) - quantile_integral(|u| m(b.quantile(u)));
        num += weight * diff;
        den += weight;
    }
    Ok(OracleValue::new(
        "rank-OLS limit with stratum dummies",
        num / den,
        OracleMethod::NumericIntegration,
    ))
}

/// `τ_r(F_{Y|W>m}, F_{Y|W<m})` for a uniform dose and Gaussian noise, as a
/// midpoint double integral of `Φ((μ(a) - μ(b)) / (σ √2)) - 1/2`.
fn median_split(p: &GeneralTreatment) -> Result<OracleValue> {
    let DoseLaw::Uniform { lo, hi, mean_poly } = &p.dose else {
        return Err(Error::InvalidSpec("median-split oracle needs a uniform dose".into()));
    };
    if p.noise != NoiseFamily::Gaussian {
        return Err(Error::InvalidSpec("median-split oracle needs Gaussian noise".into()));
    }
    const GRID: usize = 1500;
    let mid = 0.5 * (lo + hi);
    let step = (mid - lo) / GRID as f64;
    let upper: Vec<f64> = (0..GRID)
        .map(|k| poly(mean_poly, mid + (k as f64 + 0.5) * step))
        .collect();
    let lower: Vec<f64> = (0..GRID)
        .map(|k| poly(mean_poly, lo + (k as f64 + 0.5) * step))
        .collect();
    let scale = p.sigma * std::f64::consts::SQRT_2;
    let mut acc = 0.0;
    for a in &upper {
        for b in &lower {
            acc += phi((a - b) / scale);
        }
    }
    let mut v = OracleValue::new(
        "median-split rank-ATE",
        acc / (GRID * GRID) as f64 - 0.5,
        OracleMethod::NumericIntegration,
    );
    v.precision = 1e-6;
    Ok(v)
}

fn tau_star(p: &CoupledPotentials) -> OracleValue {
    let y1 = p.y1_margin();
    match &p.coupling {
        Coupling::Independent => tau_r(&y1, &p.y0),
        Coupling::ShiftMixture { shifts } => {
            let v: f64 = shifts.iter().filter(|s| s.1 >= 0.0).map(|s| s.0).sum();
            OracleValue::new("tau*", v - 0.5, OracleMethod::Enumeration)
        }
        Coupling::Comonotone => OracleValue::new(
            "tau*",
            quantile_integral(|u| (y1.quantile(u) >= p.y0.quantile(u)) as u8 as f64) - 0.5,
            OracleMethod::NumericIntegration,
        ),
        Coupling::Antimonotone => OracleValue::new(
            "tau*",
            quantile_integral(|u| (y1.quantile(u) >= p.y0.quantile(1.0 - u)) as u8 as f64) - 0.5,
            OracleMethod::NumericIntegration,
        ),
    }
}
