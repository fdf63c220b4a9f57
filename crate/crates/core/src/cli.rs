//! Command-line interface: `fit`, `simulate` and `prune`.
//!
//! Exit codes: 0 success, 1 domain error (bad data, invalid values),
//! 2 usage error (unknown or malformed flags). Machine-readable output
//! always goes to files; stdout carries a human-readable summary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_csv, Schema};
use crate::error::{Error, Result};
use crate::inference::StrategyConfig;
use crate::prune::{cv_prune_tree, ic_prune, CvOptions, IcOptions, InfoCriterion};
use crate::sim::{self, Pruning, Scenario, StudyConfig, Variation};
use crate::tree::{grow, GrowControl, Tree};

pub const SEED_ENV: &str = "URP_SEED";

#[derive(Parser, Debug)]
#[command(name = "urp", version, about = "Model-based recursive partitioning with linear model trees")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Grow a tree on a CSV file.
    Fit(FitArgs),
    /// Run a simulation study and write per-replication and per-cell CSVs.
    Simulate(SimulateArgs),
    /// Post-prune a tree by cross-validated cost-complexity or AIC/BIC.
    Prune(PruneArgs),
}

#[derive(Args, Debug)]
pub struct GrowArgs {
    /// Strategy name or explicit triple {residuals|scores}:{raw|dich}:{lin|cat|max}.
    #[arg(long, default_value = "ctree")]
    pub strategy: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20)]
    pub min_node_size: usize,
    /// Trimming for supLM and split indicators (default max(10, ⌈0.1·n⌉) per node).
    #[arg(long)]
    pub min_segment: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub max_depth: usize,
    /// Split on the smallest p-value regardless of alpha.
    #[arg(long)]
    pub no_preprune: bool,
}

impl GrowArgs {
    fn control(&self) -> GrowControl {
        GrowControl {
            alpha: self.alpha,
            min_node_size: self.min_node_size,
            min_segment: self.min_segment,
            max_depth: self.max_depth,
            prepruning: !self.no_preprune,
        }
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    #[arg(long)]
    pub regressor: String,
    /// Split variables, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub split: Vec<String>,
    /// Split variables to read as categorical.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    #[command(flatten)]
    pub grow: GrowArgs,
    #[arg(long, default_value = "tree.json")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Stump,
    Tree,
    StumpContinuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariationArg {
    Intercept,
    Slope,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PruningArg {
    Pre,
    Post,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "stump")]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "both")]
    pub variation: Vec<VariationArg>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub xi: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub delta: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 250)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "ctree,mob,guide,guide+scores")]
    pub strategies: Vec<String>,
    #[arg(long, value_enum, default_value = "pre")]
    pub pruning: PruningArg,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 20)]
    pub min_node_size: usize,
    #[arg(long, default_value_t = 5)]
    pub max_depth: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    /// Long-format output, one row per replication and variable.
    #[arg(long, default_value = "simulation.csv")]
    pub out: PathBuf,
    /// Aggregated output, one row per strategy and grid cell.
    #[arg(long, default_value = "summary.csv")]
    pub summary: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cc,
    Aic,
    Bic,
}

#[derive(Args, Debug)]
pub struct PruneArgs {
    /// Tree JSON written by `fit`.
    #[arg(long)]
    pub tree: PathBuf,
    /// The CSV the tree was grown on.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "cc")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    /// Choose the simplest subtree within one standard error of the best.
    #[arg(long)]
    pub one_se: bool,
    /// Parameters charged per split by AIC/BIC.
    #[arg(long, default_value_t = 1.0)]
    pub split_df: f64,
    #[arg(long, default_value = "pruned.json")]
    pub out: PathBuf,
    /// Alpha path table (cost-complexity only).
    #[arg(long, default_value = "alpha_path.csv")]
    pub path: PathBuf,
}

fn write_file(path: &PathBuf, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let strategy: StrategyConfig = args.grow.strategy.parse()?;
    let split: Vec<&str> = args.split.iter().map(String::as_str).collect();
    let categorical: Vec<&str> = args.categorical.iter().map(String::as_str).collect();
    let schema = Schema::new(&args.response, &args.regressor, &split).with_categorical(&categorical);
    let data = load_csv(&args.data, &schema)?;
    let tree = grow(&data, &strategy, &args.grow.control())?;
    write_file(&args.out, tree.to_json().as_bytes())?;
    write!(out, "{tree}").map_err(|e| Error::io("<stdout>", e))?;
    writeln!(out, "tree written to {}", args.out.display()).map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let scenario = match args.scenario {
        ScenarioArg::Stump => Scenario::Stump,
        ScenarioArg::Tree => Scenario::Tree,
        ScenarioArg::StumpContinuous => Scenario::StumpContinuous,
    };
    let names: Vec<&str> = args.strategies.iter().map(String::as_str).collect();
    let mut study = StudyConfig::new(scenario, &names)?;
    study.variations = args
        .variation
        .iter()
        .map(|v| match v {
            VariationArg::Intercept => Variation::Intercept,
            VariationArg::Slope => Variation::Slope,
            VariationArg::Both => Variation::Both,
        })
        .collect();
    study.xis = args.xi.clone();
    study.deltas = args.delta.clone();
    study.replications = args.reps;
    study.n = args.n;
    study.pruning = match args.pruning {
        PruningArg::Pre => Pruning::Pre,
        PruningArg::Post => Pruning::Post,
    };
    study.folds = args.folds;
    study.seed = args.seed;
    study.control = GrowControl {
        alpha: args.alpha,
        min_node_size: args.min_node_size,
        max_depth: args.max_depth,
        ..GrowControl::default()
    };
    let records = sim::run_study(&study)?;
    let summary = sim::summarize(&records);
    sim::write_records_file(&records, &args.out)?;
    sim::write_summary_file(&summary, &args.summary)?;
    let io = |e| Error::io("<stdout>", e);
    writeln!(
        out,
        "{:<14} {:<10} {:>5} {:>5} {:>5} {:>9} {:>9} {:>8} {:>8}",
        "strategy", "variation", "xi", "delta", "reps", "sel.prob", "argmin", "mean_p", "ari"
    )
    .map_err(io)?;
    for s in &summary {
        writeln!(
            out,
            "{:<14} {:<10} {:>5} {:>5} {:>5} {:>9.3} {:>9.3} {:>8.4} {:>8}",
            s.strategy,
            s.variation.as_str(),
            s.xi,
            s.delta,
            s.reps,
            s.selection_probability,
            s.argmin_probability,
            s.mean_p,
            s.mean_ari.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into())
        )
        .map_err(io)?;
    }
    writeln!(out, "records written to {}, summary to {}", args.out.display(), args.summary.display()).map_err(io)?;
    Ok(())
}

fn cmd_prune(args: &PruneArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.tree).map_err(|e| Error::io(&args.tree, e))?;
    let schema = Tree::schema_of_json(&text)?;
    let data = load_csv(&args.data, &schema)?;
    let tree = Tree::from_json(&text, &data)?;
    let io = |e| Error::io("<stdout>", e);
    let pruned = match args.method {
        MethodArg::Cc => {
            let options = CvOptions {
                folds: args.folds,
                seed: args.seed,
                one_se: args.one_se,
            };
            let result = cv_prune_tree(&tree, &data, &options)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["alpha", "alpha_eval", "leaves", "cv_loss", "cv_se"])?;
            for e in &result.alpha_path {
                w.write_record([
                    e.alpha.to_string(),
                    e.alpha_eval.to_string(),
                    e.leaves.to_string(),
                    e.cv_loss.to_string(),
                    e.cv_se.to_string(),
                ])?;
            }
            let table = w.into_inner().map_err(|e| Error::io(&args.path, e.into_error()))?;
            write_file(&args.path, &table)?;
            writeln!(
                out,
                "chosen alpha {} over {} usable folds; path written to {}",
                result.chosen_alpha,
                result.usable_folds,
                args.path.display()
            )
            .map_err(io)?;
            result.tree
        }
        MethodArg::Aic | MethodArg::Bic => {
            let criterion = if args.method == MethodArg::Aic {
                InfoCriterion::Aic
            } else {
                InfoCriterion::Bic
            };
            let options = IcOptions {
                params_per_split: args.split_df,
                ..IcOptions::default()
            };
            ic_prune(&tree, criterion, &options)
        }
    };
    write_file(&args.out, pruned.to_json().as_bytes())?;
    write!(out, "{pruned}").map_err(io)?;
    writeln!(out, "pruned tree written to {}", args.out.display()).map_err(io)?;
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let work = |out: &mut dyn Write| match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Prune(a) => cmd_prune(a, out),
    };
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
            let mut buffer = Vec::new();
            let result = pool.install(|| work(&mut buffer));
            out.write_all(&buffer).map_err(|e| Error::io("<stdout>", e))?;
            result
        }
        None => work(out),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
