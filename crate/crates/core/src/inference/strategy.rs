//! One point of the {residuals, scores} × {raw, dichotomized} × {lin, cat, max}
//! factorial, its binding to a test engine, and variable selection by minimum
//! p-value.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitColumn};
use crate::error::{Error, Result};
use crate::linmod::LinearFit;
use crate::transform::{make_gof, make_split_transform, SplitMode};

use super::conditional::{c_max, c_quad, conditional_moments, linear_statistic};
use super::contingency::chisq_statistic;
use super::fluctuation::suplm_test;
use super::TestOutcome;

/// Trimming / minimal segment size used when none is configured:
/// `max(10, ⌈0.1·n⌉)`.
pub fn default_min_segment(n: usize) -> usize {
    10.max((n as f64 * 0.1).ceil() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub use_scores: bool,
    pub dichotomize: bool,
    pub split_mode: SplitMode,
    pub alpha: f64,
    /// `None` uses [`default_min_segment`] of the node size.
    pub min_segment: Option<usize>,
}

impl StrategyConfig {
    pub fn new(use_scores: bool, dichotomize: bool, split_mode: SplitMode) -> Self {
        Self {
            use_scores,
            dichotomize,
            split_mode,
            alpha: 0.05,
            min_segment: None,
        }
    }

    pub fn ctree() -> Self {
        Self::new(true, false, SplitMode::Lin)
    }

    pub fn mob() -> Self {
        Self::new(true, false, SplitMode::Max)
    }

    pub fn guide() -> Self {
        Self::new(false, true, SplitMode::Cat)
    }

    pub fn guide_scores() -> Self {
        Self::new(true, true, SplitMode::Cat)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_min_segment(mut self, min_segment: usize) -> Self {
        self.min_segment = Some(min_segment);
        self
    }

    pub fn min_segment_for(&self, n: usize) -> usize {
        self.min_segment.unwrap_or_else(|| default_min_segment(n))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.min_segment == Some(0) {
            return Err(Error::InvalidConfig("min_segment must be at least 1".into()));
        }
        Ok(())
    }

    /// Explicit triple, e.g. `scores:dich:cat`.
    pub fn triple(&self) -> String {
        format!(
            "{}:{}:{}",
            if self.use_scores { "scores" } else { "residuals" },
            if self.dichotomize { "dich" } else { "raw" },
            self.split_mode.as_str()
        )
    }

    /// Canonical name if the triple has one, else the triple itself.
    pub fn label(&self) -> String {
        NamedStrategy::ALL
            .iter()
            .find(|s| s.matches(self))
            .map(|s| s.name.to_string())
            .unwrap_or_else(|| self.triple())
    }
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self::ctree()
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Accepts a strategy name (case-insensitive) or a triple
/// `{residuals|scores}:{raw|dich}:{lin|cat|max}`.
impl FromStr for StrategyConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        if let Some(named) = NamedStrategy::ALL.iter().find(|n| n.name == key) {
            return Ok(named.config());
        }
        let parts: Vec<&str> = key.split(':').collect();
        if parts.len() == 3 {
            let use_scores = match parts[0] {
                "scores" | "score" => Some(true),
                "residuals" | "residual" | "resid" => Some(false),
                _ => None,
            };
            let dichotomize = match parts[1] {
                "dich" | "yes" => Some(true),
                "raw" | "no" | "nodich" => Some(false),
                _ => None,
            };
            let mode = parts[2].parse::<SplitMode>().ok();
            if let (Some(u), Some(d), Some(m)) = (use_scores, dichotomize, mode) {
                return Ok(StrategyConfig::new(u, d, m));
            }
        }
        Err(Error::InvalidConfig(format!(
            "unknown strategy `{s}`; valid names: {}, or a triple \
             {{residuals|scores}}:{{raw|dich}}:{{lin|cat|max}}",
            NamedStrategy::names().join(", ")
        )))
    }
}

/// Named corners of the factorial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NamedStrategy {
    pub name: &'static str,
    pub use_scores: bool,
    pub dichotomize: bool,
    pub split_mode: SplitMode,
}

impl NamedStrategy {
    pub const ALL: &'static [NamedStrategy] = &[
        Self::of("ctree", true, false, SplitMode::Lin),
        Self::of("mob", true, false, SplitMode::Max),
        Self::of("guide", false, true, SplitMode::Cat),
        Self::of("guide+scores", true, true, SplitMode::Cat),
        Self::of("ctree+cat", true, false, SplitMode::Cat),
        Self::of("ctree+dich", true, true, SplitMode::Lin),
        Self::of("mob+dich", true, true, SplitMode::Max),
        // aliases; these coincide with rows above
        Self::of("ctree+max", true, false, SplitMode::Max),
        Self::of("mob+cat", true, false, SplitMode::Cat),
    ];

    /// The four strategies compared throughout the simulations.
    pub const HEADLINE: [&'static str; 4] = ["ctree", "mob", "guide", "guide+scores"];

    const fn of(name: &'static str, use_scores: bool, dichotomize: bool, split_mode: SplitMode) -> Self {
        Self {
            name,
            use_scores,
            dichotomize,
            split_mode,
        }
    }

    pub fn config(&self) -> StrategyConfig {
        StrategyConfig::new(self.use_scores, self.dichotomize, self.split_mode)
    }

    fn matches(&self, c: &StrategyConfig) -> bool {
        self.use_scores == c.use_scores
            && self.dichotomize == c.dichotomize
            && self.split_mode == c.split_mode
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|s| s.name).collect()
    }
}

fn degenerate_on_structure(r: Result<TestOutcome>) -> Result<TestOutcome> {
    match r {
        Err(Error::ConstantColumn | Error::NoAdmissibleSplit | Error::InsufficientData { .. }) => {
            Ok(TestOutcome::degenerate())
        }
        other => other,
    }
}

/// Tests the association between the node fit and one split variable.
/// Structural degeneracies (constant column, no admissible split, too few
/// rows) yield a degenerate outcome with p = 1.
pub fn run_strategy(config: &StrategyConfig, fit: &LinearFit, col: &SplitColumn) -> Result<TestOutcome> {
    if col.len() != fit.n() {
        return Err(Error::DimensionMismatch(format!(
            "fit has {} rows, column `{}` has {}",
            fit.n(),
            col.name,
            col.len()
        )));
    }
    let gof = make_gof(fit, config.use_scores, config.dichotomize);
    let mode = match col.kind() {
        crate::dataset::ColumnKind::Categorical => SplitMode::Cat,
        crate::dataset::ColumnKind::Numeric => config.split_mode,
    };
    let min_segment = config.min_segment_for(fit.n());
    let outcome = degenerate_on_structure((|| match mode {
        SplitMode::Lin => {
            let g = make_split_transform(col, SplitMode::Lin, min_segment)?;
            let t = linear_statistic(&gof, &g)?;
            let m = conditional_moments(&gof, &g)?;
            if m.dim() == 1 {
                c_max(&t, &m)
            } else {
                c_quad(&t, &m)
            }
        }
        SplitMode::Max => suplm_test(&gof, col, min_segment),
        SplitMode::Cat => {
            let g = make_split_transform(col, SplitMode::Cat, min_segment)?;
            if config.dichotomize {
                chisq_statistic(&gof, &g)
            } else {
                let t = linear_statistic(&gof, &g)?;
                let m = conditional_moments(&gof, &g)?;
                c_quad(&t, &m)
            }
        }
    })())?;
    Ok(outcome.named(col.name.clone()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub outcomes: Vec<TestOutcome>,
    /// Index of the minimum p-value if it is below alpha.
    pub chosen: Option<usize>,
    /// Index of the minimum p-value among non-degenerate outcomes, regardless
    /// of alpha. Ties go to the smallest index.
    pub argmin: Option<usize>,
}

impl Selection {
    pub fn min_p(&self) -> Option<f64> {
        self.argmin.map(|j| self.outcomes[j].p_value)
    }

    pub fn chosen_name(&self) -> Option<&str> {
        self.chosen.map(|j| self.outcomes[j].variable.as_str())
    }
}

/// Runs the strategy on every split variable and picks the minimum p-value.
/// No multiplicity adjustment.
pub fn select_variable(config: &StrategyConfig, fit: &LinearFit, data: &Dataset) -> Result<Selection> {
    let outcomes = data
        .z
        .par_iter()
        .map(|col| run_strategy(config, fit, col))
        .collect::<Result<Vec<_>>>()?;
    Ok(selection_from(outcomes, config.alpha))
}

pub(crate) fn selection_from(outcomes: Vec<TestOutcome>, alpha: f64) -> Selection {
    let mut argmin: Option<usize> = None;
    for (j, o) in outcomes.iter().enumerate() {
        if o.is_degenerate() {
            continue;
        }
        if argmin.map_or(true, |b| o.p_value < outcomes[b].p_value) {
            argmin = Some(j);
        }
    }
    let chosen = argmin.filter(|&j| outcomes[j].p_value < alpha);
    Selection {
        outcomes,
        chosen,
        argmin,
    }
}
