use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Designs whose smallest/largest singular value ratio falls below this are
/// rejected as rank deficient.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    /// Ratio of largest to smallest singular value of the design.
    pub condition_number: f64,
}

/// Least squares through a Householder QR factorization of the design.
pub fn ols_solve(design: &DMatrix<f64>, response: &[f64]) -> Result<LeastSquares> {
    let (n, p) = design.shape();
    if p == 0 {
        return Err(Error::InvalidInput("design has no columns".into()));
    }
    if n < p {
        return Err(Error::InvalidInput(format!(
            "design has {n} rows but {p} columns"
        )));
    }
    if response.len() != n {
        return Err(Error::InvalidInput(format!(
            "response has length {} but design has {n} rows",
            response.len()
        )));
    }
    let qr = design.clone().qr();
    let r = qr.r();
    // R shares its singular values with the design
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > SINGULAR_TOL * smax) {
        return Err(Error::SingularDesign {
            smallest_singular_value: smin,
        });
    }
    let rhs = qr.q().transpose() * DVector::from_column_slice(response);
    let coef = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::SingularDesign {
            smallest_singular_value: smin,
        })?;
    Ok(LeastSquares {
        coef: coef.iter().copied().collect(),
        condition_number: smax / smin,
    })
}

/// Builds an `n x (1 + columns.len())` design with a leading intercept.
pub(crate) fn design_with_intercept(n: usize, columns: &[&[f64]]) -> DMatrix<f64> {
    let p = 1 + columns.len();
    DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intercept_only_is_the_mean() {
        let x = DMatrix::from_element(3, 1, 1.0);
        let fit = ols_solve(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_binary() {
        let w = [0.0, 0.0, 1.0, 1.0];
        let x = design_with_intercept(4, &[&w]);
        let fit = ols_solve(&x, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(fit.coef[0].abs() < 1e-12);
        assert!((fit.coef[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0];
        let x = design_with_intercept(4, &[&a, &b]);
        assert!(matches!(
            ols_solve(&x, &[1.0, 0.0, 1.0, 0.0]),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn matches_normal_equations_and_orthogonal_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, p) = (200, 5);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fit = ols_solve(&x, &y).unwrap();

        // normal equations: (X'X) b = X'y, solved by Cholesky
        let yv = DVector::from_vec(y.clone());
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &yv;
        let b = xtx.cholesky().unwrap().solve(&xty);
        for k in 0..p {
            assert!((fit.coef[k] - b[k]).abs() < 1e-8);
        }

        let resid = yv - &x * DVector::from_vec(fit.coef.clone());
        let scale = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..p {
            assert!(x.column(k).dot(&resid).abs() < 1e-8 * scale * (n as f64).sqrt());
        }
        assert!(fit.condition_number >= 1.0);
    }
}
