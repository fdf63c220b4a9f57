//! Conditional-inference linear statistic `T = vec(Σ g_i h_iᵀ)` and its
//! exact moments under the permutation null.
//!
//! Vectorization is column-major over the `P × Q` cross-product: entry
//! `(p, q)` of `Σ g_i h_iᵀ` lands at index `q * P + p`.

use crate::error::{Error, Result};
use crate::linalg::SymEigen;
use crate::special::{chi2_sf, normal_two_sided};
use crate::transform::{GofMatrix, SplitTransform};

use super::{Law, TestOutcome};

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMoments {
    pub mu: Vec<f64>,
    /// Row-major `PQ × PQ`.
    pub sigma: Vec<f64>,
}

impl ConditionalMoments {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

fn check_rows(gof: &GofMatrix, g: &SplitTransform) -> Result<()> {
    if gof.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "gof has {} rows, split transform has {}",
            gof.n(),
            g.n()
        )));
    }
    Ok(())
}

pub fn linear_statistic(gof: &GofMatrix, g: &SplitTransform) -> Result<Vec<f64>> {
    check_rows(gof, g)?;
    let (p, q) = (g.p(), gof.k());
    let mut t = vec![0.0; p * q];
    for i in 0..gof.n() {
        let gi = g.row(i);
        let hi = gof.row(i);
        for (qq, &h) in hi.iter().enumerate() {
            if h == 0.0 {
                continue;
            }
            for (pp, &gv) in gi.iter().enumerate() {
                t[qq * p + pp] += gv * h;
            }
        }
    }
    Ok(t)
}

/// Permutation moments of `T` with unit weights:
/// `μ = vec((Σ g_i) h̄ᵀ)`,
/// `Σ = n/(n−1) V(h) ⊗ Σ g_i g_iᵀ − 1/(n−1) V(h) ⊗ (Σ g_i)(Σ g_i)ᵀ`,
/// with `V(h)` the maximum-likelihood covariance of the rows of h.
pub fn conditional_moments(gof: &GofMatrix, g: &SplitTransform) -> Result<ConditionalMoments> {
    check_rows(gof, g)?;
    let n = gof.n();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let (p, q) = (g.p(), gof.k());

    let mut h_mean = vec![0.0; q];
    let mut g_sum = vec![0.0; p];
    let mut g_cross = vec![0.0; p * p];
    for i in 0..n {
        for (m, &h) in h_mean.iter_mut().zip(gof.row(i)) {
            *m += h;
        }
        let gi = g.row(i);
        for a in 0..p {
            g_sum[a] += gi[a];
            if gi[a] == 0.0 {
                continue;
            }
            for b in 0..p {
                g_cross[a * p + b] += gi[a] * gi[b];
            }
        }
    }
    h_mean.iter_mut().for_each(|m| *m /= nf);

    let mut h_cov = vec![0.0; q * q];
    for i in 0..n {
        let hi = gof.row(i);
        for a in 0..q {
            let da = hi[a] - h_mean[a];
            for b in 0..q {
                h_cov[a * q + b] += da * (hi[b] - h_mean[b]);
            }
        }
    }
    h_cov.iter_mut().for_each(|v| *v /= nf);

    let mut mu = vec![0.0; p * q];
    for qq in 0..q {
        for pp in 0..p {
            mu[qq * p + pp] = g_sum[pp] * h_mean[qq];
        }
    }

    let dim = p * q;
    let mut sigma = vec![0.0; dim * dim];
    let c1 = nf / (nf - 1.0);
    let c2 = 1.0 / (nf - 1.0);
    for qa in 0..q {
        for qb in 0..q {
            let v = h_cov[qa * q + qb];
            for pa in 0..p {
                for pb in 0..p {
                    let inner = c1 * g_cross[pa * p + pb] - c2 * g_sum[pa] * g_sum[pb];
                    sigma[(qa * p + pa) * dim + qb * p + pb] = v * inner;
                }
            }
        }
    }
    Ok(ConditionalMoments { mu, sigma })
}

fn check_dim(t: &[f64], m: &ConditionalMoments) -> Result<()> {
    if t.len() != m.dim() || m.sigma.len() != m.dim() * m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "statistic has length {}, moments have dimension {}",
            t.len(),
            m.dim()
        )));
    }
    Ok(())
}

/// Quadratic form `(t−μ)ᵀ Σ⁺ (t−μ)` against chi-square with df = rank(Σ).
pub fn c_quad(t: &[f64], m: &ConditionalMoments) -> Result<TestOutcome> {
    check_dim(t, m)?;
    let dim = m.dim();
    let eig = SymEigen::new(&m.sigma, dim);
    let support = eig.support();
    if support.is_empty() {
        return Ok(TestOutcome::degenerate());
    }
    let d: Vec<f64> = t.iter().zip(&m.mu).map(|(a, b)| a - b).collect();
    let stat: f64 = support
        .iter()
        .map(|&k| {
            let proj: f64 = eig.vector(k).zip(&d).map(|(u, di)| u * di).sum();
            proj * proj / eig.values[k]
        })
        .sum();
    let df = support.len();
    Ok(TestOutcome::new(stat, chi2_sf(stat, df as f64), Law::Chi2 { df }))
}

/// `|t−μ| / √Σ` against the two-sided standard normal. One-dimensional only.
pub fn c_max(t: &[f64], m: &ConditionalMoments) -> Result<TestOutcome> {
    check_dim(t, m)?;
    if m.dim() != 1 {
        return Err(Error::UnsupportedConfiguration(format!(
            "c_max needs a one-dimensional statistic, got {}",
            m.dim()
        )));
    }
    let var = m.sigma[0];
    if !(var > f64::MIN_POSITIVE) {
        return Ok(TestOutcome::degenerate());
    }
    let z = (t[0] - m.mu[0]) / var.sqrt();
    Ok(TestOutcome::new(z.abs(), normal_two_sided(z), Law::Normal))
}
