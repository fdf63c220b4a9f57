//! Per-node simple linear regression `y = beta0 + beta1 * x` by OLS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit {
    pub beta0: f64,
    pub beta1: f64,
    pub residuals: Vec<f64>,
    /// Per-observation gradient of the squared residual, `-2 r (1, x)`.
    pub scores: Vec<[f64; 2]>,
    pub rss: f64,
}

impl LinearFit {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            intercept: self.beta0,
            slope: self.beta1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub intercept: f64,
    pub slope: f64,
}

impl Coefficients {
    pub fn predict_one(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Closed-form centered least squares. Returns `(beta0, beta1)`.
fn solve(y: &[f64], x: &[f64]) -> Result<(f64, f64)> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has {n} entries, x has {}",
            x.len()
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let xbar = x.iter().sum::<f64>() / nf;
    let ybar = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut scale = 0.0f64;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - xbar;
        sxx += dx * dx;
        sxy += dx * (yi - ybar);
        scale = scale.max(xi.abs());
    }
    let floor = nf * (16.0 * f64::EPSILON * scale).powi(2);
    if sxx <= floor {
        return Err(Error::DegenerateRegressor);
    }
    let beta1 = sxy / sxx;
    Ok((ybar - beta1 * xbar, beta1))
}

pub fn fit_ols(y: &[f64], x: &[f64]) -> Result<LinearFit> {
    let (beta0, beta1) = solve(y, x)?;
    let residuals: Vec<f64> = y
        .iter()
        .zip(x)
        .map(|(&yi, &xi)| yi - beta0 - beta1 * xi)
        .collect();
    let scores = residuals
        .iter()
        .zip(x)
        .map(|(&r, &xi)| [-2.0 * r, -2.0 * r * xi])
        .collect();
    let rss = residuals.iter().map(|r| r * r).sum();
    Ok(LinearFit {
        beta0,
        beta1,
        residuals,
        scores,
        rss,
    })
}

/// RSS of the OLS fit without materializing residual vectors.
pub(crate) fn ols_rss(y: &[f64], x: &[f64]) -> Option<f64> {
    let (b0, b1) = solve(y, x).ok()?;
    Some(
        y.iter()
            .zip(x)
            .map(|(&yi, &xi)| {
                let r = yi - b0 - b1 * xi;
                r * r
            })
            .sum(),
    )
}

/// Score of observation `i`: `(-2 r_i, -2 r_i x_i)`.
pub fn score_row(fit: &LinearFit, i: usize) -> Result<[f64; 2]> {
    fit.scores.get(i).copied().ok_or(Error::IndexOutOfRange {
        index: i,
        len: fit.n(),
    })
}

pub fn predict(fit: &LinearFit, x: &[f64]) -> Vec<f64> {
    let c = fit.coefficients();
    x.iter().map(|&xi| c.predict_one(xi)).collect()
}
