//! Frozen simulation designs.

use crate::ranks::ReferenceGroup;

use super::dgp::*;
use super::dist::{Dist, MonotoneMap};

/// `Y(1) ~ N(1, 1)`, `Y(0) ~ N(0, 1)`, half treated.
pub fn gaussian_shift() -> DgpSpec {
    DgpSpec::new(
        "gaussian_shift",
        101,
        DgpParams::RandomizedBinary(RandomizedBinary {
            mu1: 1.0,
            mu0: 0.0,
            sigma1: 1.0,
            sigma0: 1.0,
            beta: vec![],
            noise: NoiseFamily::Gaussian,
            p_treat: 0.5,
        }),
    )
}

/// Same margins as [`gaussian_shift`], with two prognostic covariates
/// carrying 59% of the outcome variance.
pub fn prognostic_covariates() -> DgpSpec {
    DgpSpec::new(
        "prognostic_covariates",
        102,
        DgpParams::RandomizedBinary(RandomizedBinary {
            mu1: 1.0,
            mu0: 0.0,
            sigma1: 0.64,
            sigma0: 0.64,
            beta: vec![0.6, 0.48],
            noise: NoiseFamily::Gaussian,
            p_treat: 0.4,
        }),
    )
}

/// Three strata with propensities 0.2, 0.5, 0.7. Untreated slopes are
/// implied so that the observed outcome is uniform on `[0, 1]` in every
/// stratum.
pub fn confounded_strata() -> DgpSpec {
    DgpSpec::new(
        "confounded_strata",
        103,
        DgpParams::ConfoundedBinary(ConfoundedBinary {
            strata: strata(0.0),
        }),
    )
}

/// [`confounded_strata`] with the first stratum moved up by one, so the
/// observed outcome law differs across strata.
pub fn confounded_strata_violator() -> DgpSpec {
    DgpSpec::new(
        "confounded_strata_violator",
        104,
        DgpParams::ConfoundedBinary(ConfoundedBinary {
            strata: strata(1.0),
        }),
    )
}

fn strata(first_offset: f64) -> Vec<Stratum> {
    let mut s: Vec<Stratum> = [(0.3, 0.2, 0.9), (0.4, 0.5, 0.3), (0.3, 0.7, -0.3)]
        .into_iter()
        .map(|(prob, propensity, treated_slope)| Stratum {
            prob,
            propensity,
            treated_slope,
            control_slope: None,
            offset: 0.0,
        })
        .collect();
    s[0].offset = first_offset;
    s
}

/// Doses 0, 1, 2 with mean outcomes 0, 0.4, 1.5 and unit Gaussian noise.
pub fn three_dose() -> DgpSpec {
    DgpSpec::new(
        "three_dose",
        105,
        DgpParams::GeneralTreatment(GeneralTreatment {
            dose: DoseLaw::Discrete {
                levels: vec![0.0, 1.0, 2.0],
                probs: vec![0.3, 0.45, 0.25],
                means: vec![0.0, 0.4, 1.5],
            },
            sigma: 1.0,
            noise: NoiseFamily::Gaussian,
        }),
    )
}

/// `W ~ U(0, 1)`, `Y = 1.5 W² + N(0, 1)`.
pub fn continuous_dose() -> DgpSpec {
    DgpSpec::new(
        "continuous_dose",
        106,
        DgpParams::GeneralTreatment(GeneralTreatment {
            dose: DoseLaw::Uniform {
                lo: 0.0,
                hi: 1.0,
                mean_poly: vec![0.0, 0.0, 1.5],
            },
            sigma: 1.0,
            noise: NoiseFamily::Gaussian,
        }),
    )
}

fn iv_candidate(s1c: f64, m1c: f64, loc: f64) -> IvTypes {
    IvTypes {
        pi_a: 0.25,
        pi_n: 0.15,
        pi_c: 0.6,
        p_instrument: 0.5,
        always: Dist::normal(loc, 0.2),
        never: Dist::normal(loc - 0.25, 0.2),
        complier_treated: Dist::normal(m1c, s1c),
        complier_untreated: Dist::normal(0.0, 0.2),
    }
}

/// Oracle gaps a separating IV design must clear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvSeparation {
    pub rank_late: f64,
    pub naive: [f64; 3],
}

impl IvSeparation {
    pub fn of(p: &IvTypes) -> Self {
        let spec = DgpSpec::new("scan", 0, DgpParams::IvTypes(p.clone()));
        let value = |e: Estimand| oracle_estimand(&spec, &e).expect("valid candidate").value;
        IvSeparation {
            rank_late: value(Estimand::RankLate),
            naive: [ReferenceGroup::All, ReferenceGroup::Treated, ReferenceGroup::Control]
                .map(|reference| value(Estimand::NaiveTwoStage { reference })),
        }
    }

    /// Positive rank-LATE, negative full-sample naive limit, and reference
    /// variants at least 0.02 apart.
    pub fn separates(&self) -> bool {
        let [a, t, c] = self.naive;
        let spread = (a - t).abs().min((a - c).abs()).min((t - c).abs());
        self.rank_late >= 0.05 && a <= -0.05 && spread >= 0.02
    }
}

/// Scans complier treated spread, complier treated mean and the location
/// of always/never-takers, returning the first design that separates.
pub fn scan_iv_sign_reversal() -> Option<(IvTypes, IvSeparation)> {
    for s1c in [1.0, 2.0, 3.0] {
        for m1c in [0.25, 0.5, 0.75] {
            for loc in [-0.25, -0.5, -1.0] {
                let p = iv_candidate(s1c, m1c, loc);
                let sep = IvSeparation::of(&p);
                if sep.separates() {
                    return Some((p, sep));
                }
            }
        }
    }
    None
}

/// Constructed design where full-sample rank-2SLS is negative while the
/// complier rank-ATE is positive: compliers gain a spread-out treated
/// outcome, and always-takers sit below the untreated compliers.
pub fn iv_sign_reversal() -> DgpSpec {
    DgpSpec::new(
        "iv_sign_reversal",
        107,
        DgpParams::IvTypes(iv_candidate(3.0, 0.5, -0.5)),
    )
}

/// `U | W=1 ~ N(1, 1)`, `U | W=0 ~ N(0, 1)`, `f_0(u) = u`, `f_1(u) = u³`,
/// unit effect on the latent scale.
pub fn example7_panel() -> DgpSpec {
    panel("example7_panel", 108, 0.0)
}

/// [`example7_panel`] with an extra treated latent trend of 0.5.
pub fn trend_violator_panel() -> DgpSpec {
    panel("trend_violator_panel", 109, 0.5)
}

fn panel(name: &str, seed: u64, treated_trend: f64) -> DgpSpec {
    DgpSpec::new(
        name,
        seed,
        DgpParams::PanelCic(PanelCic {
            p_treat: 0.5,
            u_treated: Dist::normal(1.0, 1.0),
            u_control: Dist::normal(0.0, 1.0),
            f0: MonotoneMap::Identity,
            f1: MonotoneMap::Cube,
            effect: 1.0,
            treated_trend,
        }),
    )
}

/// Cutoff at 0 with a cubic trend in the running variable and unequal noise
/// on the two sides, so ranking against the whole sample mixes in outcome
/// levels from far from the cutoff.
pub fn rdd_separating() -> DgpSpec {
    DgpSpec::new(
        "rdd_separating",
        110,
        DgpParams::RddSharp(RddSharp {
            lo: -1.0,
            hi: 1.0,
            cutoff: 0.0,
            alpha1: 1.0,
            alpha0: 0.0,
            gamma1: 4.0,
            gamma0: 4.0,
            sigma1: 2.0,
            sigma0: 0.5,
        }),
    )
}

/// 90% of units lose 0.1, the rest gain 5: positive rank-ATE, negative τ*.
pub fn hand_paradox() -> DgpSpec {
    DgpSpec::new(
        "hand_paradox",
        111,
        DgpParams::CoupledPotentials(CoupledPotentials {
            y0: Dist::normal(0.0, 1.0),
            y1: None,
            coupling: Coupling::ShiftMixture {
                shifts: vec![(0.9, -0.1), (0.1, 5.0)],
            },
        }),
    )
}

/// Margin pair `k` of the coupled family (`k` in `0..20`).
pub fn coupled_margins(k: usize) -> (Dist, Dist) {
    let shift = [0.0, 0.5, 1.0, -0.7, 2.0][k % 5];
    let y0 = match k / 5 {
        0 => Dist::normal(0.0, 1.0),
        1 => Dist::Laplace { location: 0.0, scale: 1.0 },
        2 => Dist::ShiftedExp { shift: -1.0, rate: 1.0 },
        _ => Dist::mixture(vec![(0.7, Dist::normal(-0.5, 0.6)), (0.3, Dist::normal(1.5, 0.8))]),
    };
    let y1 = match k / 5 {
        0 => Dist::normal(shift, 1.0 + 0.2 * (k % 3) as f64),
        1 => Dist::normal(shift, 1.5),
        2 => Dist::Uniform { lo: shift - 1.5, hi: shift + 1.5 },
        _ => Dist::transformed(Dist::normal(shift, 1.0), MonotoneMap::Cube),
    };
    (y1, y0)
}

/// Margin pair `k` joined by `coupling`.
pub fn coupled(k: usize, coupling: Coupling) -> DgpSpec {
    let (y1, y0) = coupled_margins(k);
    DgpSpec::new(
        &format!("coupled_{k}"),
        200 + k as u64,
        DgpParams::CoupledPotentials(CoupledPotentials {
            y0,
            y1: Some(y1),
            coupling,
        }),
    )
}

/// Every named fixture.
pub fn all() -> Vec<DgpSpec> {
    vec![
        gaussian_shift(),
        prognostic_covariates(),
        confounded_strata(),
        confounded_strata_violator(),
        three_dose(),
        continuous_dose(),
        iv_sign_reversal(),
        example7_panel(),
        trend_violator_panel(),
        rdd_separating(),
        hand_paradox(),
    ]
}

pub fn by_name(name: &str) -> Option<DgpSpec> {
    all().into_iter().find(|s| s.name == name)
}
