//! The h transformation of the response side (residuals or scores, optionally
//! dichotomized) and the g transformation of a split variable (linear,
//! quartile-categorized, or split-point indicators).

use serde::{Deserialize, Serialize};

use crate::dataset::{quartiles_of, SplitColumn, SplitValues};
use crate::error::{Error, Result};
use crate::linmod::LinearFit;

/// Row-major `n × k` goodness-of-fit matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GofMatrix {
    values: Vec<f64>,
    n: usize,
    k: usize,
    dichotomized: bool,
}

impl GofMatrix {
    pub fn from_rows(rows: &[Vec<f64>], dichotomized: bool) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("ragged or empty gof rows".into()));
        }
        Ok(Self {
            values: rows.concat(),
            n: rows.len(),
            k,
            dichotomized,
        })
    }

    pub fn from_column(col: &[f64]) -> Self {
        Self {
            values: col.to_vec(),
            n: col.len(),
            k: 1,
            dichotomized: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_dichotomized(&self) -> bool {
        self.dichotomized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Indicator of nonnegativity, elementwise. Zero maps to 1.
    pub fn dichotomize(&self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|&v| if v >= 0.0 { 1.0 } else { 0.0 })
                .collect(),
            n: self.n,
            k: self.k,
            dichotomized: true,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

pub fn make_gof(fit: &LinearFit, use_scores: bool, dichotomize: bool) -> GofMatrix {
    let gof = if use_scores {
        GofMatrix {
            values: fit.scores.iter().flatten().copied().collect(),
            n: fit.n(),
            k: 2,
            dichotomized: false,
        }
    } else {
        GofMatrix::from_column(&fit.residuals)
    };
    if dichotomize {
        gof.dichotomize()
    } else {
        gof
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// g(z) = z
    Lin,
    /// One-hot quartile bins (or levels).
    Cat,
    /// One indicator per admissible split point.
    Max,
}

impl SplitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitMode::Lin => "lin",
            SplitMode::Cat => "cat",
            SplitMode::Max => "max",
        }
    }
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lin" => Ok(SplitMode::Lin),
            "cat" => Ok(SplitMode::Cat),
            "max" => Ok(SplitMode::Max),
            other => Err(Error::InvalidConfig(format!(
                "unknown split mode `{other}` (expected lin, cat or max)"
            ))),
        }
    }
}

/// Row-major `n × p` design of the g transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitTransform {
    pub mode: SplitMode,
    design: Vec<f64>,
    n: usize,
    p: usize,
    /// Quartile breakpoints of a categorized numeric column.
    pub bin_breaks: Option<[f64; 3]>,
    /// Split values `c`; column `j` is `1{z > c_j}`.
    pub candidate_splits: Option<Vec<f64>>,
}

impl SplitTransform {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.design[i * self.p + j]
    }

    /// Bin index of every row for a one-hot design.
    pub(crate) fn bin_of_rows(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.row(i).iter().position(|&v| v == 1.0).unwrap_or(0))
            .collect()
    }

    fn one_hot(mode: SplitMode, bins: &[usize], n_bins: usize) -> Result<Self> {
        // drop bins no observation falls into
        let mut counts = vec![0usize; n_bins];
        for &b in bins {
            counts[b] += 1;
        }
        let mut remap = vec![usize::MAX; n_bins];
        let mut p = 0;
        for (b, &c) in counts.iter().enumerate() {
            if c > 0 {
                remap[b] = p;
                p += 1;
            }
        }
        if p < 2 {
            return Err(Error::ConstantColumn);
        }
        let mut design = vec![0.0; bins.len() * p];
        for (i, &b) in bins.iter().enumerate() {
            design[i * p + remap[b]] = 1.0;
        }
        Ok(Self {
            mode,
            design,
            n: bins.len(),
            p,
            bin_breaks: None,
            candidate_splits: None,
        })
    }
}

/// Quartile bin of `v`: intervals (-inf,q1], (q1,q2], (q2,q3], (q3,inf).
pub(crate) fn quartile_bin(v: f64, breaks: &[f64; 3]) -> usize {
    breaks.iter().take_while(|&&b| v > b).count()
}

pub fn make_split_transform(
    col: &SplitColumn,
    mode: SplitMode,
    min_segment: usize,
) -> Result<SplitTransform> {
    match (&col.values, mode) {
        (SplitValues::Categorical { codes, levels }, SplitMode::Cat) => {
            let bins: Vec<usize> = codes.iter().map(|&c| c as usize).collect();
            SplitTransform::one_hot(SplitMode::Cat, &bins, levels.len())
        }
        (SplitValues::Categorical { .. }, _) => Err(Error::CategoricalInput(col.name.clone())),
        (SplitValues::Numeric(v), SplitMode::Lin) => Ok(SplitTransform {
            mode,
            design: v.clone(),
            n: v.len(),
            p: 1,
            bin_breaks: None,
            candidate_splits: None,
        }),
        (SplitValues::Numeric(v), SplitMode::Cat) => {
            let breaks = quartiles_of(v)?;
            let bins: Vec<usize> = v.iter().map(|&x| quartile_bin(x, &breaks)).collect();
            let mut t = SplitTransform::one_hot(SplitMode::Cat, &bins, 4)?;
            t.bin_breaks = Some(breaks);
            Ok(t)
        }
        (SplitValues::Numeric(v), SplitMode::Max) => {
            let n = v.len();
            let min_segment = min_segment.max(1);
            let mut sorted = v.clone();
            sorted.sort_by(f64::total_cmp);
            let mut cands = Vec::new();
            for i in 0..n.saturating_sub(1) {
                let left = i + 1;
                if sorted[i] < sorted[i + 1] && left >= min_segment && n - left >= min_segment {
                    cands.push(sorted[i]);
                }
            }
            if cands.is_empty() {
                return Err(Error::NoAdmissibleSplit);
            }
            let p = cands.len();
            let mut design = vec![0.0; n * p];
            for (i, &x) in v.iter().enumerate() {
                for (j, &c) in cands.iter().enumerate() {
                    if x > c {
                        design[i * p + j] = 1.0;
                    }
                }
            }
            Ok(SplitTransform {
                mode,
                design,
                n,
                p,
                bin_breaks: None,
                candidate_splits: Some(cands),
            })
        }
    }
}
