//! Association tests between a node's goodness-of-fit matrix and each split
//! variable, and the strategy layer that picks one test per configuration.
//!
//! Three engines:
//! - [`conditional`]: permutation-conditional linear statistic with
//!   quadratic-form or max-type standardization;
//! - [`fluctuation`]: supLM functional of the decorrelated cumulative score
//!   process;
//! - [`contingency`]: chi-square test of sign classes against bins.

pub mod conditional;
pub mod contingency;
pub mod fluctuation;
pub mod strategy;

use serde::{Deserialize, Serialize};

pub use conditional::{c_max, c_quad, conditional_moments, linear_statistic, ConditionalMoments};
pub use contingency::chisq_statistic;
pub use fluctuation::{fluctuation_process, suplm_pvalue, suplm_statistic, FluctuationProcess, SupLm};
pub use strategy::{
    default_min_segment, run_strategy, select_variable, NamedStrategy, Selection, StrategyConfig,
};

/// Reference distribution a p-value was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum Law {
    Chi2 { df: usize },
    /// Two-sided standard normal.
    Normal,
    /// supLM limit with `k` dimensions, trimmed to `[from, to]`.
    SupLm { k: usize, from: f64, to: f64 },
    /// Nothing to test; p = 1.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub variable: String,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(flatten)]
    pub law: Law,
}

impl TestOutcome {
    pub(crate) fn new(statistic: f64, p_value: f64, law: Law) -> Self {
        Self {
            variable: String::new(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            law,
        }
    }

    pub fn degenerate() -> Self {
        Self::new(0.0, 1.0, Law::Degenerate)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.variable = name.into();
        self
    }

    pub fn df(&self) -> Option<usize> {
        match self.law {
            Law::Chi2 { df } => Some(df),
            Law::Normal => Some(1),
            Law::SupLm { k, .. } => Some(k),
            Law::Degenerate => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.law, Law::Degenerate)
    }
}
