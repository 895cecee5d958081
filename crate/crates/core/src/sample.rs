//! Columnar datasets and the estimate record every estimator returns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranks::check_finite;

/// Cross-sectional sample `(Y_i, W_i, X_i)` plus the optional instrument,
/// running variable and pre-period outcome columns.
///
/// Covariates are stored column-wise: `x[k][i]` is covariate `k` of unit `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Sample {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub x: Option<Vec<Vec<f64>>>,
    pub z: Option<Vec<f64>>,
    pub run: Option<Vec<f64>>,
    pub y_pre: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(y: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let s = Sample {
            y,
            w,
            ..Default::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_covariates(mut self, x: Vec<Vec<f64>>) -> Result<Self> {
        self.x = Some(x);
        self.validate()?;
        Ok(self)
    }

    pub fn with_instrument(mut self, z: Vec<f64>) -> Result<Self> {
        self.z = Some(z);
        self.validate()?;
        Ok(self)
    }

    pub fn with_running(mut self, run: Vec<f64>) -> Result<Self> {
        self.run = Some(run);
        self.validate()?;
        Ok(self)
    }

    pub fn with_pre_period(mut self, y_pre: Vec<f64>) -> Result<Self> {
        self.y_pre = Some(y_pre);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.as_ref().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 units, got {n}")));
        }
        check_finite(&self.y, "y")?;
        let check = |name: &str, col: &[f64]| -> Result<()> {
            if col.len() != n {
                return Err(Error::InvalidInput(format!(
                    "column {name} has length {} but y has {n}",
                    col.len()
                )));
            }
            check_finite(col, name)
        };
        check("w", &self.w)?;
        if let Some(x) = &self.x {
            for (k, col) in x.iter().enumerate() {
                check(&format!("x{k}"), col)?;
            }
        }
        if let Some(z) = &self.z {
            check("z", z)?;
        }
        if let Some(r) = &self.run {
            check("run", r)?;
        }
        if let Some(p) = &self.y_pre {
            check("y_pre", p)?;
        }
        Ok(())
    }
}

/// Returns the 0/1 column as booleans, or `NonBinaryColumn` at the first
/// offending row.
pub(crate) fn binary_column(col: &[f64], name: &str) -> Result<Vec<bool>> {
    col.iter()
        .enumerate()
        .map(|(row, &v)| {
            if v == 1.0 {
                Ok(true)
            } else if v == 0.0 {
                Ok(false)
            } else {
                Err(Error::NonBinaryColumn {
                    column: name.to_string(),
                    row,
                    value: v,
                })
            }
        })
        .collect()
}

/// Two-period panel: `y0` before treatment, `y1` after, `w` the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSample {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub w: Vec<f64>,
}

impl PanelSample {
    pub fn new(y0: Vec<f64>, y1: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let p = PanelSample { y0, y1, w };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.w.len();
        if n < 2 || self.y0.len() != n || self.y1.len() != n {
            return Err(Error::InvalidInput(format!(
                "panel columns must share a length >= 2 (y0 {}, y1 {}, w {n})",
                self.y0.len(),
                self.y1.len()
            )));
        }
        check_finite(&self.y0, "y0")?;
        check_finite(&self.y1, "y1")?;
        check_finite(&self.w, "w")?;
        binary_column(&self.w, "w")?;
        Ok(())
    }

    pub(crate) fn groups(&self) -> Result<Vec<bool>> {
        let g = binary_column(&self.w, "w")?;
        let n1 = g.iter().filter(|&&t| t).count();
        if n1 == 0 || n1 == g.len() {
            return Err(Error::NoVariation("panel needs both treated and control units".into()));
        }
        Ok(g)
    }
}

impl TryFrom<&Sample> for PanelSample {
    type Error = Error;

    fn try_from(s: &Sample) -> Result<Self> {
        let y0 = s
            .y_pre
            .clone()
            .ok_or_else(|| Error::MissingColumn("y_pre".into()))?;
        PanelSample::new(y0, s.y.clone(), s.w.clone())
    }
}

/// A point estimate tagged with what it estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub estimator: String,
    pub estimand: String,
    pub n: usize,
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Estimate {
    pub(crate) fn new(value: f64, estimator: &str, estimand: &str, n: usize) -> Self {
        Estimate {
            value,
            estimator: estimator.to_string(),
            estimand: estimand.to_string(),
            n,
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub(crate) fn diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub(crate) fn finite(self) -> Result<Self> {
        if self.value.is_finite() {
            Ok(self)
        } else {
            Err(Error::DegenerateDistribution(format!(
                "{} produced a non-finite value",
                self.estimator
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Sample::new(vec![1.0], vec![0.0]).is_err());
        assert!(Sample::new(vec![1.0, 2.0], vec![0.0]).is_err());
        assert!(Sample::new(vec![1.0, f64::NAN], vec![0.0, 1.0]).is_err());
        let s = Sample::new(vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert!(s.clone().with_covariates(vec![vec![1.0]]).is_err());
        assert_eq!(s.with_covariates(vec![vec![1.0, 2.0]]).unwrap().n_covariates(), 1);
    }

    #[test]
    fn binary_check() {
        assert_eq!(binary_column(&[0.0, 1.0], "w").unwrap(), vec![false, true]);
        assert!(matches!(
            binary_column(&[0.0, 2.0], "w"),
            Err(Error::NonBinaryColumn { row: 1, .. })
        ));
    }

    #[test]
    fn panel_requires_both_groups() {
        let p = PanelSample::new(vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(p.groups(), Err(Error::NoVariation(_))));
    }
}
