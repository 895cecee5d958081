use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranks::IdentifiedSet;

use super::dgp::{oracle_estimand, DgpParams, DgpSpec, Estimand};
use super::dist::Dist;

/// Margin-based rank-ATE, coupling-based `τ*` and the margin bounds on `τ*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParadoxReport {
    pub tau_r: f64,
    pub tau_star: f64,
    pub bounds: IdentifiedSet,
    /// Oracle accuracy of `tau_star`.
    pub precision: f64,
}

impl ParadoxReport {
    pub fn signs_differ(&self) -> bool {
        self.tau_r * self.tau_star < 0.0
    }
}

const BOUND_GRID: usize = 1 << 14;

/// Bounds on `P(Y(1) >= Y(0)) - 1/2` from two continuous margins, with the
/// sup and inf of `F_0 - F_1` taken over the quantiles of both laws.
pub fn population_bounds(y1: &Dist, y0: &Dist) -> IdentifiedSet {
    let (mut sup, mut inf) = (0.0f64, 0.0f64);
    for k in 0..BOUND_GRID {
        let u = (k as f64 + 0.5) / BOUND_GRID as f64;
        for y in [y1.quantile(u), y0.quantile(u)] {
            let d = y0.cdf(y) - y1.cdf(y);
            sup = sup.max(d);
            inf = inf.min(d);
        }
    }
    IdentifiedSet {
        lower: sup - 0.5,
        upper: inf + 0.5,
    }
}

/// Computes `τ_r`, `τ*` and the bounds for a coupled design, failing if the
/// bounds miss `τ*` by more than the oracle precision.
pub fn hand_paradox_demo(spec: &DgpSpec) -> Result<ParadoxReport> {
    let DgpParams::CoupledPotentials(p) = &spec.params else {
        return Err(Error::InvalidSpec(format!(
            "paradox demo needs coupled potentials, got {}",
            spec.kind()
        )));
    };
    let tau_r = oracle_estimand(spec, &Estimand::RankAte)?.value;
    let star = oracle_estimand(spec, &Estimand::TauStar)?;
    let bounds = population_bounds(&p.y1_margin(), &p.y0);
    let tol = star.precision;
    if star.value < bounds.lower - tol || star.value > bounds.upper + tol {
        return Err(Error::InvalidSpec(format!(
            "tau* = {} outside [{}, {}]",
            star.value, bounds.lower, bounds.upper
        )));
    }
    Ok(ParadoxReport {
        tau_r,
        tau_star: star.value,
        bounds,
        precision: tol,
    })
}
