//! Score-based fluctuation test: the supLM functional of the cumulative,
//! decorrelated score process ordered by a numeric split variable.
//!
//! p-values come from a seeded Monte-Carlo simulation of the limiting
//! functional `sup_{t ∈ [π, 1−π]} ‖B(t)‖² / (t(1−t))` of a K-dimensional
//! Brownian bridge on a 1000-point grid with 20000 replicates. One table per
//! K holds the simulated suprema for every symmetric trimming on the grid, so
//! every node size maps onto a single cached simulation.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::dataset::{sort_order, SplitColumn};
use crate::error::{Error, Result};
use crate::linalg::{mat_vec, SymEigen};
use crate::rng::{derive_seed, RngStream};
use crate::special::ln_gamma;
use crate::transform::GofMatrix;

use super::{Law, TestOutcome};

pub const SUPLM_GRID: usize = 1000;
pub const SUPLM_REPLICATES: usize = 20_000;
pub const SUPLM_SEED: u64 = 0x00C0_FFEE_5EED_2019;
/// Below this many simulated exceedances the tail is extrapolated.
const TAIL_COUNT: usize = 20;
const MAX_CACHED_K: usize = 8;

/// Cumulative decorrelated score process of one split variable.
#[derive(Clone, Debug)]
pub struct FluctuationProcess {
    /// Row-major `(n+1) × k`; row `i` is `V̂^{-1/2} Σ_{j<i} s_(j)` over the
    /// centered scores sorted by the split variable. Row 0 is zero.
    pub cumulative: Vec<f64>,
    /// Row-major `k × k` (pseudo-)inverse square root of `V̂ = (1/n) Σ s_i s_iᵀ`.
    pub vhat_root_inv: Vec<f64>,
    pub n: usize,
    pub k: usize,
    /// Numerical rank of `V̂`.
    pub rank: usize,
}

impl FluctuationProcess {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.cumulative[i * self.k..(i + 1) * self.k]
    }

    /// `‖W(i/n)‖²` with `W(i/n) = row(i) / √n`.
    pub fn squared_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum::<f64>() / self.n as f64
    }
}

/// Maximized weighted fluctuation of one variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupLm {
    pub statistic: f64,
    /// Split index `i`: the first `i` sorted observations form the left segment.
    pub argmax: usize,
    /// Effective dimension (rank of `V̂`); 0 means nothing to test.
    pub k: usize,
    pub from: usize,
    pub to: usize,
}

/// Builds the process. Columns are centered first; OLS scores already sum to
/// zero, dichotomized ones do not.
pub fn fluctuation_process(gof: &GofMatrix, col: &SplitColumn) -> Result<FluctuationProcess> {
    let z = col.as_numeric()?;
    let (n, k) = (gof.n(), gof.k());
    if z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "gof has {n} rows, split column has {}",
            z.len()
        )));
    }
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if z.iter().all(|&v| v == z[0]) {
        return Err(Error::ConstantColumn);
    }
    let nf = n as f64;
    let means: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| gof.get(i, j)).sum::<f64>() / nf)
        .collect();
    let centered = |i: usize| -> Vec<f64> { (0..k).map(|j| gof.get(i, j) - means[j]).collect() };

    let mut vhat = vec![0.0; k * k];
    for i in 0..n {
        let s = centered(i);
        for a in 0..k {
            for b in 0..k {
                vhat[a * k + b] += s[a] * s[b];
            }
        }
    }
    vhat.iter_mut().for_each(|v| *v /= nf);
    let eig = SymEigen::new(&vhat, k);
    let rank = eig.support().len();
    let root_inv = eig.pseudo_power(-0.5);

    let order = sort_order(z);
    let mut cumulative = vec![0.0; (n + 1) * k];
    let mut raw = vec![0.0; k];
    for (i, &row) in order.iter().enumerate() {
        for (acc, s) in raw.iter_mut().zip(centered(row)) {
            *acc += s;
        }
        let w = mat_vec(&root_inv, &raw);
        cumulative[(i + 1) * k..(i + 2) * k].copy_from_slice(&w);
    }
    Ok(FluctuationProcess {
        cumulative,
        vhat_root_inv: root_inv,
        n,
        k,
        rank,
    })
}

pub fn suplm_statistic(gof: &GofMatrix, col: &SplitColumn, min_segment: usize) -> Result<SupLm> {
    let process = fluctuation_process(gof, col)?;
    suplm_of_process(&process, min_segment)
}

pub fn suplm_of_process(process: &FluctuationProcess, min_segment: usize) -> Result<SupLm> {
    let n = process.n;
    let from = min_segment.max(1);
    let to = n.saturating_sub(min_segment).min(n.saturating_sub(1));
    if from > to {
        return Err(Error::NoAdmissibleSplit);
    }
    if process.rank == 0 {
        return Ok(SupLm {
            statistic: 0.0,
            argmax: from,
            k: 0,
            from,
            to,
        });
    }
    let nf = n as f64;
    let mut best = f64::NEG_INFINITY;
    let mut argmax = from;
    for i in from..=to {
        let t = i as f64 / nf;
        let value = process.squared_norm(i) / (t * (1.0 - t));
        if value > best {
            best = value;
            argmax = i;
        }
    }
    Ok(SupLm {
        statistic: best,
        argmax,
        k: process.rank,
        from,
        to,
    })
}

/// Full test: statistic plus Monte-Carlo p-value. Singular `V̂` is degenerate.
pub fn suplm_test(gof: &GofMatrix, col: &SplitColumn, min_segment: usize) -> Result<TestOutcome> {
    let s = suplm_statistic(gof, col, min_segment)?;
    if s.k == 0 {
        return Ok(TestOutcome::degenerate());
    }
    let n = gof.n();
    let p = suplm_pvalue(s.statistic, s.k, min_segment, n);
    let nf = n as f64;
    Ok(TestOutcome::new(
        s.statistic,
        p,
        Law::SupLm {
            k: s.k,
            from: s.from as f64 / nf,
            to: s.to as f64 / nf,
        },
    ))
}

/// Grid index of the lower trimming fraction `min_segment / n`.
pub(crate) fn trim_index(min_segment: usize, n: usize) -> usize {
    let pi = min_segment as f64 / n as f64;
    ((pi * SUPLM_GRID as f64 - 1e-9).ceil() as usize).clamp(1, SUPLM_GRID / 2)
}

/// p-value of the supLM limit law with `k` dimensions and trimming
/// `min_segment / n`. Nonincreasing in `statistic`.
///
/// Beyond the 20th largest simulated value the empirical tail is continued
/// with the analytic large-`c` approximation of the bridge functional,
/// rescaled to meet the empirical tail, so that very strong signals keep
/// distinct p-values instead of all tying at zero.
pub fn suplm_pvalue(statistic: f64, k: usize, min_segment: usize, n: usize) -> f64 {
    if k == 0 || !(statistic > 0.0) {
        return 1.0;
    }
    let lo = trim_index(min_segment, n);
    with_table(k, |t| tail_probability(t.column(lo), statistic, k, lo))
}

fn tail_probability(column: &[f32], statistic: f64, k: usize, lo: usize) -> f64 {
    let r = column.len();
    let below = column.partition_point(|&v| (v as f64) < statistic);
    let count = r - below;
    if count >= TAIL_COUNT {
        return count as f64 / r as f64;
    }
    let anchor = column[r - TAIL_COUNT] as f64;
    let pi = lo as f64 / SUPLM_GRID as f64;
    let ratio = tail_approximation(statistic, k, pi) / tail_approximation(anchor, k, pi);
    let ratio = if ratio.is_finite() { ratio.clamp(0.0, 1.0) } else { 0.0 };
    TAIL_COUNT as f64 / r as f64 * ratio
}

/// Large-`c` approximation of `P(sup ‖B(t)‖²/(t(1−t)) > c)` over `[π, 1−π]`.
fn tail_approximation(c: f64, k: usize, pi: f64) -> f64 {
    let kf = k as f64;
    let log_density = 0.5 * kf * c.ln() - 0.5 * c - 0.5 * kf * 2f64.ln() - ln_gamma(0.5 * kf);
    let span = (((1.0 - pi) / pi).powi(2)).ln();
    log_density.exp() * ((1.0 - kf / c) * span + 4.0 / c)
}

struct NullTable {
    /// `SUPLM_GRID/2` sorted columns of `SUPLM_REPLICATES` suprema; column
    /// `lo - 1` holds the supremum over grid points `lo ..= GRID - lo`.
    data: Vec<f32>,
}

impl NullTable {
    fn column(&self, lo: usize) -> &[f32] {
        let start = (lo - 1) * SUPLM_REPLICATES;
        &self.data[start..start + SUPLM_REPLICATES]
    }

    fn simulate(k: usize) -> Self {
        let half = SUPLM_GRID / 2;
        let seed = derive_seed(&[SUPLM_SEED, k as u64]);
        let per_rep: Vec<Vec<f32>> = (0..SUPLM_REPLICATES)
            .into_par_iter()
            .map(|rep| bridge_suprema(k, &mut RngStream::new(seed, rep as u64)))
            .collect();
        let mut data = vec![0f32; half * SUPLM_REPLICATES];
        for (rep, sup) in per_rep.iter().enumerate() {
            for (lo0, &v) in sup.iter().enumerate() {
                data[lo0 * SUPLM_REPLICATES + rep] = v;
            }
        }
        drop(per_rep);
        data.par_chunks_mut(SUPLM_REPLICATES)
            .for_each(|c| c.sort_unstable_by(f32::total_cmp));
        Self { data }
    }
}

/// One discretized bridge path; entry `lo - 1` is its supremum over the
/// grid points `lo ..= GRID - lo`.
fn bridge_suprema(k: usize, rng: &mut RngStream) -> Vec<f32> {
    let grid = SUPLM_GRID;
    let scale = 1.0 / (grid as f64).sqrt();
    let mut walk = vec![0.0; (grid + 1) * k];
    for step in 1..=grid {
        for d in 0..k {
            walk[step * k + d] = walk[(step - 1) * k + d] + scale * rng.standard_normal();
        }
    }
    let end = walk[grid * k..].to_vec();
    let functional = |i: usize| -> f64 {
        let t = i as f64 / grid as f64;
        let norm: f64 = (0..k).map(|d| (walk[i * k + d] - t * end[d]).powi(2)).sum();
        norm / (t * (1.0 - t))
    };
    let half = grid / 2;
    let mut out = vec![0f32; half];
    let mut running = functional(half);
    out[half - 1] = running as f32;
    for lo in (1..half).rev() {
        running = running.max(functional(lo)).max(functional(grid - lo));
        out[lo - 1] = running as f32;
    }
    out
}

static TABLES: [OnceLock<NullTable>; MAX_CACHED_K] = [const { OnceLock::new() }; MAX_CACHED_K];

fn with_table<T>(k: usize, f: impl FnOnce(&NullTable) -> T) -> T {
    if k <= MAX_CACHED_K {
        f(TABLES[k - 1].get_or_init(|| NullTable::simulate(k)))
    } else {
        f(&NullTable::simulate(k))
    }
}
