//! Chi-square test of independence between sign classes of each gof column
//! and the bins of a categorized split variable. Per-column statistics and
//! degrees of freedom are summed.

use crate::error::{Error, Result};
use crate::special::chi2_sf;
use crate::transform::{GofMatrix, SplitTransform};

use super::{Law, TestOutcome};

/// Pearson X² and df of a 2 × P table given as per-bin `(count of class 0,
/// count of class 1)`. Empty bins are dropped; an empty class row makes the
/// table uninformative (X² = 0, df = 0).
pub fn two_row_statistic(table: &[[f64; 2]]) -> (f64, usize) {
    let cols: Vec<[f64; 2]> = table
        .iter()
        .copied()
        .filter(|c| c[0] + c[1] > 0.0)
        .collect();
    let row = [
        cols.iter().map(|c| c[0]).sum::<f64>(),
        cols.iter().map(|c| c[1]).sum::<f64>(),
    ];
    if cols.len() < 2 || row[0] == 0.0 || row[1] == 0.0 {
        return (0.0, 0);
    }
    let total = row[0] + row[1];
    let mut x2 = 0.0;
    for c in &cols {
        let col_total = c[0] + c[1];
        for l in 0..2 {
            let e = row[l] * col_total / total;
            x2 += (c[l] - e).powi(2) / e;
        }
    }
    (x2, cols.len() - 1)
}

pub fn chisq_statistic(gof: &GofMatrix, g: &SplitTransform) -> Result<TestOutcome> {
    if !gof.is_dichotomized() {
        return Err(Error::UnsupportedConfiguration(
            "chi-square engine needs a dichotomized gof matrix".into(),
        ));
    }
    if gof.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "gof has {} rows, split transform has {}",
            gof.n(),
            g.n()
        )));
    }
    let bins = g.bin_of_rows();
    let mut stat = 0.0;
    let mut df = 0;
    for j in 0..gof.k() {
        let mut table = vec![[0.0; 2]; g.p()];
        for (i, &b) in bins.iter().enumerate() {
            let class = usize::from(gof.get(i, j) > 0.5);
            table[b][class] += 1.0;
        }
        let (x2, d) = two_row_statistic(&table);
        stat += x2;
        df += d;
    }
    if df == 0 {
        return Ok(TestOutcome::degenerate());
    }
    Ok(TestOutcome::new(stat, chi2_sf(stat, df as f64), Law::Chi2 { df }))
}
