//! Simulation harness: the "stump" and "tree" data-generating processes, a
//! continuous-change stump variant, the adjusted Rand index, and a study
//! runner producing per-replication and per-cell tables.
//!
//! Every dataset is generated from a seed derived from
//! `(study seed, scenario, variation, ξ, δ, replication)` only, so all
//! strategies in a study see identical datasets (paired comparison).
//! Within a dataset each variable draws from its own sub-stream.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitColumn};
use crate::error::{Error, Result};
use crate::inference::{select_variable, StrategyConfig};
use crate::linmod::fit_ols;
use crate::prune::{cv_prune, CvOptions};
use crate::rng::{derive_seed, RngStream};
use crate::tree::{grow, GrowControl};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Stump,
    Tree,
    StumpContinuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variation {
    Intercept,
    Slope,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruning {
    Pre,
    Post,
}

macro_rules! text_enum {
    ($t:ty, $($v:ident => $s:literal),+) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($s => Ok(Self::$v),)+
                    other => Err(Error::InvalidConfig(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($t).to_ascii_lowercase(),
                        [$($s),+].join(", ")
                    ))),
                }
            }
        }
    };
}

text_enum!(Scenario, Stump => "stump", Tree => "tree", StumpContinuous => "stump_continuous");
text_enum!(Variation, Intercept => "intercept", Slope => "slope", Both => "both");
text_enum!(Pruning, Pre => "pre", Post => "post");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub variation: Variation,
    pub xi: f64,
    pub delta: f64,
    pub n: usize,
    /// Noise split variables; the true ones come first.
    pub j_noise: usize,
}

impl ScenarioConfig {
    pub fn stump(variation: Variation, xi: f64, delta: f64) -> Self {
        Self {
            scenario: Scenario::Stump,
            variation,
            xi,
            delta,
            n: 250,
            j_noise: 9,
        }
    }

    pub fn stump_continuous(variation: Variation, delta: f64) -> Self {
        Self {
            scenario: Scenario::StumpContinuous,
            xi: 0.0,
            ..Self::stump(variation, 0.0, delta)
        }
    }

    /// Two true split variables and eight noise variables.
    pub fn tree(xi: f64, delta: f64) -> Self {
        Self {
            scenario: Scenario::Tree,
            variation: Variation::Both,
            xi,
            delta,
            n: 250,
            j_noise: 8,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn n_true(&self) -> usize {
        match self.scenario {
            Scenario::Tree => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario == Scenario::Tree && self.variation != Variation::Both {
            return Err(Error::InvalidConfig(
                "the tree scenario has both coefficients varying".into(),
            ));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidConfig(format!("delta must be ≥ 0, got {}", self.delta)));
        }
        if !(self.xi > -1.0 && self.xi < 1.0) {
            return Err(Error::InvalidConfig(format!("xi must lie in (-1, 1), got {}", self.xi)));
        }
        if self.n < 3 {
            return Err(Error::InvalidConfig(format!("n must be at least 3, got {}", self.n)));
        }
        Ok(())
    }
}

/// Columns drawn from sub-streams of `rng`: 0 → x, 1 → ε, 1+j → Z_j.
/// Z_j is U(−1, 1) for the true variables and for even j, N(0, 1) for odd
/// noise j.
struct Draws {
    x: Vec<f64>,
    eps: Vec<f64>,
    z: Vec<Vec<f64>>,
}

fn draw(config: &ScenarioConfig, rng: &RngStream) -> Draws {
    let n = config.n;
    let uniform = |s: u64| -> Vec<f64> {
        let mut r = rng.substream(s);
        (0..n).map(|_| r.uniform(-1.0, 1.0)).collect()
    };
    let normal = |s: u64| -> Vec<f64> {
        let mut r = rng.substream(s);
        (0..n).map(|_| r.standard_normal()).collect()
    };
    let n_z = config.n_true() + config.j_noise;
    let z = (1..=n_z)
        .map(|j| {
            if j <= config.n_true() || j % 2 == 0 {
                uniform(1 + j as u64)
            } else {
                normal(1 + j as u64)
            }
        })
        .collect();
    Draws {
        x: uniform(0),
        eps: normal(1),
        z,
    }
}

fn assemble(draws: Draws, beta: impl Fn(usize) -> (f64, f64)) -> Dataset {
    let y = (0..draws.x.len())
        .map(|i| {
            let (b0, b1) = beta(i);
            b0 + b1 * draws.x[i] + draws.eps[i]
        })
        .collect();
    let z = draws
        .z
        .into_iter()
        .enumerate()
        .map(|(j, v)| SplitColumn::numeric(format!("z{}", j + 1), v))
        .collect();
    Dataset::new(y, draws.x, z).expect("generated columns are consistent")
}

/// Abrupt change at `Z1 = ξ`: the intercept moves −δ → +δ, the slope
/// +δ → −δ; a coefficient that does not vary is fixed at 0 (intercept) or
/// 1 (slope).
pub fn gen_stump(config: &ScenarioConfig, rng: &RngStream) -> Dataset {
    let d = draw(config, rng);
    let z1 = d.z[0].clone();
    let (xi, delta, v) = (config.xi, config.delta, config.variation);
    assemble(d, |i| {
        let s = if z1[i] <= xi { -1.0 } else { 1.0 };
        stump_beta(v, s * delta)
    })
}

fn stump_beta(v: Variation, shift: f64) -> (f64, f64) {
    match v {
        Variation::Intercept => (shift, 1.0),
        Variation::Slope => (0.0, -shift),
        Variation::Both => (shift, -shift),
    }
}

/// Coefficients linear in Z1: intercept `+δ·Z1`, slope `−δ·Z1`.
pub fn gen_stump_continuous(config: &ScenarioConfig, rng: &RngStream) -> Dataset {
    let d = draw(config, rng);
    let z1 = d.z[0].clone();
    let (delta, v) = (config.delta, config.variation);
    assemble(d, |i| stump_beta(v, delta * z1[i]))
}

/// Three regimes: `Z2 ≤ ξ` → (0, +δ); `Z2 > ξ, Z1 ≤ ξ` → (−δ, −δ);
/// `Z2 > ξ, Z1 > ξ` → (+δ, −δ).
pub fn gen_tree(config: &ScenarioConfig, rng: &RngStream) -> Dataset {
    let d = draw(config, rng);
    let (z1, z2) = (d.z[0].clone(), d.z[1].clone());
    let (xi, delta) = (config.xi, config.delta);
    assemble(d, |i| {
        if z2[i] <= xi {
            (0.0, delta)
        } else if z1[i] <= xi {
            (-delta, -delta)
        } else {
            (delta, -delta)
        }
    })
}

pub fn generate(config: &ScenarioConfig, rng: &RngStream) -> Dataset {
    match config.scenario {
        Scenario::Stump => gen_stump(config, rng),
        Scenario::StumpContinuous => gen_stump_continuous(config, rng),
        Scenario::Tree => gen_tree(config, rng),
    }
}

/// Regime labels of the generating process; a single group when δ = 0 or
/// the change is continuous.
pub fn true_partition(config: &ScenarioConfig, data: &Dataset) -> Vec<usize> {
    let n = data.n();
    if config.delta == 0.0 || config.scenario == Scenario::StumpContinuous {
        return vec![0; n];
    }
    let z = |j: usize| data.z[j].as_numeric().expect("generated columns are numeric");
    match config.scenario {
        Scenario::Tree => {
            let (z1, z2) = (z(0), z(1));
            (0..n)
                .map(|i| {
                    if z2[i] <= config.xi {
                        0
                    } else if z1[i] <= config.xi {
                        1
                    } else {
                        2
                    }
                })
                .collect()
        }
        _ => z(0).iter().map(|&v| usize::from(v > config.xi)).collect(),
    }
}

fn choose2(k: f64) -> f64 {
    k * (k - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. Identical partitions score 1 even
/// when the chance correction is undefined.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "label vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut ra: HashMap<usize, f64> = HashMap::new();
    let mut rb: HashMap<usize, f64> = HashMap::new();
    for (&i, &j) in a.iter().zip(b) {
        *joint.entry((i, j)).or_default() += 1.0;
        *ra.entry(i).or_default() += 1.0;
        *rb.entry(j).or_default() += 1.0;
    }
    let index: f64 = joint.values().map(|&c| choose2(c)).sum();
    let sa: f64 = ra.values().map(|&c| choose2(c)).sum();
    let sb: f64 = rb.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(n as f64);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Outcome of one strategy on one generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub scenario: Scenario,
    pub strategy: String,
    pub variation: Variation,
    pub xi: f64,
    pub delta: f64,
    pub rep: usize,
    /// Root-node `(variable, p-value)` for every split variable.
    pub p_values: Vec<(String, f64)>,
    /// Smallest p-value if below alpha.
    pub chosen: Option<String>,
    /// Smallest p-value regardless of alpha.
    pub argmin: Option<String>,
    pub ari: Option<f64>,
    pub leaves: Option<usize>,
}

impl ReplicationRecord {
    pub fn p_value(&self, variable: &str) -> Option<f64> {
        self.p_values.iter().find(|(v, _)| v == variable).map(|(_, p)| *p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub variations: Vec<Variation>,
    pub xis: Vec<f64>,
    pub deltas: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    /// `None` uses the scenario default (9 for stumps, 8 for the tree).
    pub j_noise: Option<usize>,
    /// `(label, configuration)` pairs.
    pub strategies: Vec<(String, StrategyConfig)>,
    pub control: GrowControl,
    /// Tree scenario only; stumps are evaluated at the root.
    pub pruning: Pruning,
    pub folds: usize,
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(scenario: Scenario, strategies: &[&str]) -> Result<Self> {
        let strategies = strategies
            .iter()
            .map(|s| Ok((s.to_string(), s.parse::<StrategyConfig>()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scenario,
            variations: vec![Variation::Both],
            xis: vec![0.0],
            deltas: vec![0.0],
            n: 250,
            replications: 100,
            j_noise: None,
            strategies,
            control: GrowControl::default(),
            pruning: Pruning::Pre,
            folds: 10,
            seed: 1,
        })
    }

    fn cell(&self, variation: Variation, xi: f64, delta: f64) -> ScenarioConfig {
        let mut c = match self.scenario {
            Scenario::Stump => ScenarioConfig::stump(variation, xi, delta),
            Scenario::StumpContinuous => ScenarioConfig {
                xi,
                ..ScenarioConfig::stump_continuous(variation, delta)
            },
            Scenario::Tree => ScenarioConfig {
                variation,
                ..ScenarioConfig::tree(xi, delta)
            },
        }
        .with_n(self.n);
        if let Some(j) = self.j_noise {
            c.j_noise = j;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.variations.is_empty() || self.xis.is_empty() || self.deltas.is_empty() {
            return Err(Error::InvalidConfig(
                "study grid needs at least one strategy, variation, xi and delta".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be positive".into()));
        }
        if self.pruning == Pruning::Post && self.folds < 2 {
            return Err(Error::InvalidConfig("post-pruning needs at least 2 folds".into()));
        }
        self.control.validate()?;
        for &v in &self.variations {
            for &xi in &self.xis {
                for &d in &self.deltas {
                    self.cell(v, xi, d).validate()?;
                }
            }
        }
        Ok(())
    }
}

/// Seed of the dataset for one grid cell and replication.
pub fn cell_seed(seed: u64, config: &ScenarioConfig, rep: usize) -> u64 {
    derive_seed(&[
        seed,
        config.scenario as u64,
        config.variation as u64,
        config.xi.to_bits(),
        config.delta.to_bits(),
        rep as u64,
    ])
}

fn run_one(
    study: &StudyConfig,
    cell: &ScenarioConfig,
    rep: usize,
    data: &Dataset,
    label: &str,
    strategy: &StrategyConfig,
) -> Result<ReplicationRecord> {
    let mut strategy = strategy.clone();
    strategy.alpha = study.control.alpha;
    if study.control.min_segment.is_some() {
        strategy.min_segment = study.control.min_segment;
    }
    let (outcomes, chosen, argmin, ari, leaves) = match cell.scenario {
        Scenario::Tree => {
            let tree = match study.pruning {
                Pruning::Pre => grow(data, &strategy, &study.control)?,
                Pruning::Post => {
                    let options = CvOptions {
                        folds: study.folds,
                        seed: derive_seed(&[cell_seed(study.seed, cell, rep), 0xC5]),
                        one_se: false,
                    };
                    cv_prune(data, &strategy, &study.control, &options)?.tree
                }
            };
            let labels = tree.training_labels();
            let ari = adjusted_rand_index(&true_partition(cell, data), &labels)?;
            let root = &tree.root;
            let selection = crate::inference::strategy::selection_from(root.outcomes.clone(), strategy.alpha);
            (root.outcomes.clone(), selection.chosen, selection.argmin, Some(ari), Some(tree.n_leaves()))
        }
        _ => {
            let fit = fit_ols(&data.y, &data.x)?;
            let s = select_variable(&strategy, &fit, data)?;
            (s.outcomes, s.chosen, s.argmin, None, None)
        }
    };
    let name = |j: Option<usize>| j.map(|j| outcomes[j].variable.clone());
    Ok(ReplicationRecord {
        scenario: cell.scenario,
        strategy: label.to_string(),
        variation: cell.variation,
        xi: cell.xi,
        delta: cell.delta,
        rep,
        chosen: name(chosen),
        argmin: name(argmin),
        p_values: outcomes.iter().map(|o| (o.variable.clone(), o.p_value)).collect(),
        ari,
        leaves,
    })
}

/// Runs every (strategy, variation, ξ, δ, replication). Output is sorted by
/// strategy (in the given order), variation, ξ, δ, replication and does not
/// depend on the thread count.
pub fn run_study(study: &StudyConfig) -> Result<Vec<ReplicationRecord>> {
    study.validate()?;
    let mut tasks = Vec::new();
    for &v in &study.variations {
        for &xi in &study.xis {
            for &d in &study.deltas {
                let cell = study.cell(v, xi, d);
                for rep in 0..study.replications {
                    tasks.push((cell.clone(), rep));
                }
            }
        }
    }
    log::info!(
        "running {} datasets x {} strategies",
        tasks.len(),
        study.strategies.len()
    );
    let per_task: Vec<Vec<ReplicationRecord>> = tasks
        .par_iter()
        .map(|(cell, rep)| {
            let data = generate(cell, &RngStream::new(cell_seed(study.seed, cell, *rep), 0));
            study
                .strategies
                .iter()
                .map(|(label, s)| run_one(study, cell, *rep, &data, label, s))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(per_task.len() * study.strategies.len());
    for k in 0..study.strategies.len() {
        records.extend(per_task.iter().map(|r| r[k].clone()));
    }
    Ok(records)
}

/// Aggregates over the replications of one (strategy, variation, ξ, δ) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub scenario: Scenario,
    pub strategy: String,
    pub variation: Variation,
    pub xi: f64,
    pub delta: f64,
    pub reps: usize,
    /// Fraction where z1 has the smallest p-value and it is below alpha.
    pub selection_probability: f64,
    /// Fraction where z1 has the smallest p-value.
    pub argmin_probability: f64,
    /// Fraction where any variable is significant.
    pub rejection_rate: f64,
    pub mean_p: f64,
    pub mean_ari: Option<f64>,
    pub mean_leaves: Option<f64>,
}

pub const TRUE_VARIABLE: &str = "z1";

pub fn summarize(records: &[ReplicationRecord]) -> Vec<CellSummary> {
    let mut order: Vec<(String, Variation, u64, u64)> = Vec::new();
    let mut groups: HashMap<(String, Variation, u64, u64), Vec<&ReplicationRecord>> = HashMap::new();
    for r in records {
        let key = (r.strategy.clone(), r.variation, r.xi.to_bits(), r.delta.to_bits());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &groups[&key];
            let m = rs.len() as f64;
            let frac = |f: &dyn Fn(&ReplicationRecord) -> bool| rs.iter().filter(|r| f(r)).count() as f64 / m;
            let mean_opt = |f: &dyn Fn(&ReplicationRecord) -> Option<f64>| {
                let v: Vec<f64> = rs.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            CellSummary {
                scenario: rs[0].scenario,
                strategy: key.0.clone(),
                variation: key.1,
                xi: rs[0].xi,
                delta: rs[0].delta,
                reps: rs.len(),
                selection_probability: frac(&|r| r.chosen.as_deref() == Some(TRUE_VARIABLE)),
                argmin_probability: frac(&|r| r.argmin.as_deref() == Some(TRUE_VARIABLE)),
                rejection_rate: frac(&|r| r.chosen.is_some()),
                mean_p: mean_opt(&|r| r.p_value(TRUE_VARIABLE)).unwrap_or(f64::NAN),
                mean_ari: mean_opt(&|r| r.ari),
                mean_leaves: mean_opt(&|r| r.leaves.map(|l| l as f64)),
            }
        })
        .collect()
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

/// Long format: one row per replication and split variable.
pub fn write_records<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario", "strategy", "variation", "xi", "delta", "rep", "variable", "p_value", "chosen", "ari", "leaves",
    ])?;
    for r in records {
        let base = [
            r.scenario.to_string(),
            r.strategy.clone(),
            r.variation.to_string(),
            r.xi.to_string(),
            r.delta.to_string(),
            r.rep.to_string(),
        ];
        let tail = [opt(&r.chosen), opt(&r.ari), opt(&r.leaves)];
        if r.p_values.is_empty() {
            let row: Vec<String> = base.iter().cloned().chain([String::new(), String::new()]).chain(tail.clone()).collect();
            w.write_record(&row)?;
        }
        for (v, p) in &r.p_values {
            let row: Vec<String> = base.iter().cloned().chain([v.clone(), p.to_string()]).chain(tail.clone()).collect();
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn write_summary<W: Write>(summary: &[CellSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scenario",
        "strategy",
        "variation",
        "xi",
        "delta",
        "reps",
        "selection_probability",
        "argmin_probability",
        "rejection_rate",
        "mean_p",
        "mean_ari",
        "mean_leaves",
    ])?;
    for s in summary {
        w.write_record([
            s.scenario.to_string(),
            s.strategy.clone(),
            s.variation.to_string(),
            s.xi.to_string(),
            s.delta.to_string(),
            s.reps.to_string(),
            s.selection_probability.to_string(),
            s.argmin_probability.to_string(),
            s.rejection_rate.to_string(),
            s.mean_p.to_string(),
            opt(&s.mean_ari),
            opt(&s.mean_leaves),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn write_records_file(records: &[ReplicationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, std::io::BufWriter::new(f))
}

pub fn write_summary_file(summary: &[CellSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_summary(summary, std::io::BufWriter::new(f))
}
