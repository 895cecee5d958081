//! Rank-2SLS with a binary instrument and the complier-ranked variant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ranks::{ecdf, mixture, project_to_cdf, reference_scores, ReferenceGroup, StepCdf};
use crate::sample::{binary_column, Estimate, Sample};

/// Lower clamp applied to the estimated complier share.
pub const MIN_COMPLIER_SHARE: f64 = 1e-6;

/// Default weight on the treated complier CDF in the mixed reference.
pub const DEFAULT_ZETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplierShares {
    pub pi_a: f64,
    pub pi_n: f64,
    pub pi_c: f64,
    /// True when the plug-in complier share was raised to the floor.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplierCdfs {
    pub f1c: StepCdf,
    pub f0c: StepCdf,
    pub shares: ComplierShares,
}

/// Unit indices split by `(W, Z)` cell; `cells[w][z]`.
struct Cells {
    cells: [[Vec<usize>; 2]; 2],
    w: Vec<bool>,
    z: Vec<bool>,
}

impl Cells {
    fn new(s: &Sample) -> Result<Self> {
        s.validate()?;
        let z = s
            .z
            .as_deref()
            .ok_or_else(|| Error::MissingColumn("z".into()))?;
        let z = binary_column(z, "z")?;
        let w = binary_column(&s.w, "w")?;
        let n1 = z.iter().filter(|&&v| v).count();
        if n1 == 0 || n1 == z.len() {
            return Err(Error::NoVariation(format!(
                "instrument needs both arms (n_z1 = {n1}, n_z0 = {})",
                z.len() - n1
            )));
        }
        let mut cells: [[Vec<usize>; 2]; 2] = Default::default();
        for i in 0..w.len() {
            cells[w[i] as usize][z[i] as usize].push(i);
        }
        Ok(Cells { cells, w, z })
    }

    fn count(&self, w: usize, z: usize) -> f64 {
        self.cells[w][z].len() as f64
    }

    fn arm(&self, z: usize) -> f64 {
        self.count(0, z) + self.count(1, z)
    }

    fn values(&self, y: &[f64], w: usize, z: usize) -> Vec<f64> {
        self.cells[w][z].iter().map(|&i| y[i]).collect()
    }

    /// `mean(v | Z = 1) - mean(v | Z = 0)`.
    fn itt(&self, v: &[f64]) -> f64 {
        let (mut s1, mut s0) = (0.0, 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if self.z[i] {
                s1 += vi;
            } else {
                s0 += vi;
            }
        }
        s1 / self.arm(1) - s0 / self.arm(0)
    }

    fn first_stage(&self) -> f64 {
        self.count(1, 1) / self.arm(1) - self.count(1, 0) / self.arm(0)
    }

    fn shares(&self) -> ComplierShares {
        let pi_a = self.count(1, 0) / self.arm(0);
        let pi_n = self.count(0, 1) / self.arm(1);
        let raw = self.first_stage();
        let pi_c = raw.clamp(MIN_COMPLIER_SHARE, 1.0);
        ComplierShares {
            pi_a,
            pi_n,
            pi_c,
            clamped: pi_c != raw,
        }
    }
}

fn wald(cells: &Cells, outcome: &[f64], name: &str, estimand: &str) -> Result<Estimate> {
    let first = cells.first_stage();
    if !(first > 0.0) {
        return Err(Error::WeakOrWrongSignedFirstStage { first_stage: first });
    }
    let itt = cells.itt(outcome);
    Estimate::new(itt / first, name, estimand, outcome.len())
        .diag("first_stage", first)
        .diag("reduced_form", itt)
        .diag("n_z1", cells.arm(1))
        .diag("n_z0", cells.arm(0))
        .finite()
}

/// Wald ratio of normalized outcome ranks. Ranking against the full sample,
/// the treated or the control units gives three different limits.
pub fn rank_2sls(s: &Sample, reference: ReferenceGroup) -> Result<Estimate> {
    let cells = Cells::new(s)?;
    let scores = reference_scores(&s.y, &cells.w, reference);
    let (name, estimand) = match reference {
        ReferenceGroup::All => (
            "rank_2sls_all",
            "tau_r(F_Y(1)|c, F_Y) - tau_r(F_Y(0)|c, F_Y)",
        ),
        ReferenceGroup::Treated => (
            "rank_2sls_treated",
            "tau_r(F_Y(1)|c, F_Y|W=1) - tau_r(F_Y(0)|c, F_Y|W=1)",
        ),
        ReferenceGroup::Control => (
            "rank_2sls_control",
            "tau_r(F_Y(1)|c, F_Y|W=0) - tau_r(F_Y(0)|c, F_Y|W=0)",
        ),
    };
    wald(&cells, &scores, name, estimand)
}

/// Plug-in type shares `π_a = n_10/n_{Z=0}`, `π_n = n_01/n_{Z=1}` and
/// `π_c = n_11/n_{Z=1} - n_10/n_{Z=0}`, the last floored at
/// [`MIN_COMPLIER_SHARE`].
pub fn estimate_complier_shares(s: &Sample) -> Result<ComplierShares> {
    Ok(Cells::new(s)?.shares())
}

/// Signed combinations
/// `((π_a + π_c)/π_c) F_11 - (π_a/π_c) F_10` and
/// `((π_n + π_c)/π_c) F_00 - (π_n/π_c) F_01`
/// evaluated on `support`, before any projection. A `None` cell must have
/// zero weight.
pub fn complier_cdf_combination(
    support: &[f64],
    cell_cdfs: [[Option<&StepCdf>; 2]; 2],
    shares: &ComplierShares,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ComplierShares { pi_a, pi_n, pi_c, .. } = *shares;
    let combine = |main: Option<&StepCdf>, main_w: f64, other: Option<&StepCdf>, other_w: f64, what: &str| {
        let main = main.ok_or_else(|| Error::InsufficientCells(format!("{what}: main cell is empty")))?;
        if other.is_none() && other_w != 0.0 {
            return Err(Error::InsufficientCells(format!(
                "{what}: a cell with positive share is empty"
            )));
        }
        Ok(support
            .iter()
            .map(|&y| {
                main_w * main.evaluate(y) - other.map_or(0.0, |f| other_w * f.evaluate(y))
            })
            .collect::<Vec<f64>>())
    };
    let raw1 = combine(
        cell_cdfs[1][1],
        (pi_a + pi_c) / pi_c,
        cell_cdfs[1][0],
        pi_a / pi_c,
        "treated compliers",
    )?;
    let raw0 = combine(
        cell_cdfs[0][0],
        (pi_n + pi_c) / pi_c,
        cell_cdfs[0][1],
        pi_n / pi_c,
        "untreated compliers",
    )?;
    Ok((raw1, raw0))
}

/// Complier potential-outcome CDFs from the four `(W, Z)` cell ECDFs,
/// evaluated on the merged outcome support and projected onto valid CDFs.
pub fn estimate_complier_cdfs(s: &Sample) -> Result<ComplierCdfs> {
    let cells = Cells::new(s)?;
    let shares = cells.shares();
    let mut cdfs: [[Option<StepCdf>; 2]; 2] = Default::default();
    for (w, row) in cdfs.iter_mut().enumerate() {
        for (z, slot) in row.iter_mut().enumerate() {
            let v = cells.values(&s.y, w, z);
            if !v.is_empty() {
                *slot = Some(ecdf(&v)?);
            }
        }
    }
    let mut support = s.y.clone();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let refs = [
        [cdfs[0][0].as_ref(), cdfs[0][1].as_ref()],
        [cdfs[1][0].as_ref(), cdfs[1][1].as_ref()],
    ];
    let (raw1, raw0) = complier_cdf_combination(&support, refs, &shares)?;
    Ok(ComplierCdfs {
        f1c: project_to_cdf(&support, &raw1)?,
        f0c: project_to_cdf(&support, &raw0)?,
        shares,
    })
}

/// 2SLS on `M(Y_i)` with `M = ζ F̂_{Y(1)|c} + (1 - ζ) F̂_{Y(0)|c}`; the
/// limit is the rank-ATE among compliers for every `ζ`.
pub fn rank_2sls_complier(s: &Sample, zeta: f64) -> Result<Estimate> {
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::InvalidSpec(format!("zeta must lie in [0, 1], got {zeta}")));
    }
    let cells = Cells::new(s)?;
    let c = estimate_complier_cdfs(s)?;
    let m = mixture(&[(zeta, &c.f1c), (1.0 - zeta, &c.f0c)])?;
    let transformed: Vec<f64> = s.y.iter().map(|&y| m.evaluate(y)).collect();
    let mut e = wald(&cells, &transformed, "rank_2sls_complier", "rank-LATE")?
        .diag("zeta", zeta)
        .diag("pi_a", c.shares.pi_a)
        .diag("pi_n", c.shares.pi_n)
        .diag("pi_c", c.shares.pi_c);
    if c.shares.clamped {
        e.warnings
            .push(format!("complier share clamped to {MIN_COMPLIER_SHARE}"));
    }
    Ok(e)
}
