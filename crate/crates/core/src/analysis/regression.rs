use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `y_i - (slope x_i + intercept)`
    pub residuals: Vec<f64>,
    /// Standard error of the slope with n - 2 degrees of freedom.
    pub slope_std_error: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!("x has {} values, y has {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("regression needs >= 3 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all x values identical".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_std_error = (rss / (n - 2) as f64 / sxx).sqrt();
    Ok(LinearFit { slope, intercept, residuals, slope_std_error })
}

/// Denominator of the residual variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NrfDof {
    /// n - 1, as for the plain variance.
    #[default]
    NMinusOne,
    /// n - 2, accounting for the two regression parameters.
    NMinusTwo,
}

/// Variance of `y` divided by its variance around the regression on `x`.
///
/// Returns `f64::INFINITY` (with a warning) when the residuals vanish.
pub fn noise_reduction_factor(x: &[f64], y: &[f64], dof: NrfDof) -> Result<f64> {
    let fit = linear_regression(x, y)?;
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let var_y = y.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0);
    let denom = match dof {
        NrfDof::NMinusOne => n - 1.0,
        NrfDof::NMinusTwo => n - 2.0,
    };
    let var_red = fit.residuals.iter().map(|r| r * r).sum::<f64>() / denom;
    // residuals at rounding level count as exact
    if var_red <= 1e-28 * var_y.max(f64::MIN_POSITIVE) {
        warn!("residual variance is zero; NRF is unbounded");
        return Ok(f64::INFINITY);
    }
    Ok(var_y / var_red)
}

/// Weighted polynomial least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    /// Coefficients in increasing order of power.
    pub coefficients: Vec<f64>,
    /// Covariance from the stated errors, times `covariance_scale`.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    /// 1 unless rescaled by [`PolyFit::with_birge_scaling`].
    pub covariance_scale: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Value and 1 sigma band at `x` by linear propagation.
    pub fn band(&self, x: f64) -> (f64, f64) {
        let basis: Vec<f64> = (0..self.coefficients.len()).map(|k| x.powi(k as i32)).collect();
        let mut var = 0.0;
        for (i, bi) in basis.iter().enumerate() {
            for (j, bj) in basis.iter().enumerate() {
                var += bi * self.covariance[i][j] * bj;
            }
        }
        (self.eval(x), var.max(0.0).sqrt())
    }

    /// Inflates the covariance by the reduced chi^2 when it exceeds 1.
    pub fn with_birge_scaling(mut self) -> Self {
        let k = self.chi2_reduced();
        if k > 1.0 {
            for row in &mut self.covariance {
                for v in row.iter_mut() {
                    *v *= k;
                }
            }
            self.covariance_scale *= k;
        }
        self
    }

    pub fn chi2_reduced(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

/// Fits `sum_k c_k x^k`, k <= degree, with 1 sigma errors `sigma`.
///
/// `x` is centred internally for conditioning.
pub fn poly_fit(x: &[f64], y: &[f64], sigma: &[f64], degree: usize) -> Result<PolyFit> {
    let n = x.len();
    if y.len() != n || sigma.len() != n {
        return Err(Error::Usage("x, y and sigma lengths differ".into()));
    }
    let p = degree + 1;
    if n < p {
        return Err(Error::InsufficientData(format!("degree {degree} fit needs >= {p} points, got {n}")));
    }
    if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Usage("errors must be finite and > 0".into()));
    }
    let x0 = x.iter().sum::<f64>() / n as f64;
    let scale = x.iter().map(|v| (v - x0).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(n, p, |i, k| ((x[i] - x0) / scale).powi(k as i32) / sigma[i]);
    let b = DVector::from_fn(n, |i, _| y[i] / sigma[i]);
    let ata = a.transpose() * &a;
    let inv = ata
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Degenerate(format!("degree {degree} fit is singular (too few distinct x)")))?;
    let u = &inv * (a.transpose() * &b);
    let chi2 = (&a * &u - &b).norm_squared();
    // back to raw powers of x: c = T u with T the binomial shift/scale map
    let mut t = DMatrix::zeros(p, p);
    for k in 0..p {
        let sk = scale.powi(-(k as i32));
        for j in 0..=k {
            t[(j, k)] = binomial(k, j) * (-x0).powi((k - j) as i32) * sk;
        }
    }
    let c = &t * u;
    let cov = &t * inv * t.transpose();
    Ok(PolyFit {
        coefficients: c.iter().copied().collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        chi2,
        dof: n - p,
        covariance_scale: 1.0,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
