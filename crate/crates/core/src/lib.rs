//! Model-based recursive partitioning with simple linear node models.
//!
//! Each node fits `y = β0 + β1·x` by OLS, tests every split variable for
//! association with the fit's residuals or scores, splits on the variable
//! with the smallest p-value and recurses. Testing strategies are points of
//! a small factorial: the goodness-of-fit measure (residuals or scores),
//! optional dichotomization, and the split-variable transformation (linear,
//! quartile bins, or split-point indicators), each bound to a
//! conditional-inference, fluctuation, or chi-square engine.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod inference;
mod linalg;
pub mod linmod;
pub mod prune;
pub mod rng;
pub mod sim;
pub mod special;
pub mod transform;
pub mod tree;

pub use dataset::{load_csv, read_csv, ColumnKind, Dataset, Schema, SplitColumn, SplitValues};
pub use error::{Error, Result};
pub use inference::{select_variable, run_strategy, Law, NamedStrategy, Selection, StrategyConfig, TestOutcome};
pub use linmod::{fit_ols, Coefficients, LinearFit};
pub use rng::RngStream;
pub use transform::SplitMode;
pub use tree::{grow, GrowControl, Split, SplitRule, Tree, TreeNode};
