//! Command implementations behind the `l2p` binary.
//!
//! Every command collects its outputs in memory and writes them at the end;
//! if any write fails the files already written are removed again.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use l2p_core::baselines::KnnConfig;
use l2p_core::classifier::{train_forest, ForestConfig, RandomForest};
use l2p_core::cv::{cross_validate, CvConfig, CvReport};
use l2p_core::data::{ccdf_points, generate_synthetic, kurtosis, load_csv, parse_csv, Dataset, SyntheticConfig};
use l2p_core::estimator::EstimatorRegistry;
use l2p_core::metrics::roc_auc;
use l2p_core::pairs::PairingPolicy;
use l2p_core::placement::{Explanation, L2pConfig, L2pModel, TieRule, VoteMode};
use l2p_core::robustness::{robustness_sweep, MechanismKind, SweepConfig};
use l2p_core::seed;

/// Number of context instances listed on each side in explanations.
pub const EXPLAIN_TOP_N: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "l2p", version, about = "Pairwise placement estimator for heavy-tailed targets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dataset summary: size, kurtosis and CCDF points.
    Summary(SummaryArgs),
    /// Stratified cross-validation of l2p, knn and the random baseline.
    Cv(CvArgs),
    /// Train on one file and place the instances of another.
    Predict(PredictArgs),
    /// Train the preference forest and save it as JSON.
    Train(TrainArgs),
    /// Placement AUC under corrupted oracle verdicts.
    Robustness(RobustnessArgs),
    /// Write a synthetic heavy-tailed dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "target")]
    pub target_column: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Full,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VoteArg {
    Plain,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MechanismArg {
    Random,
    Distance,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, value_enum, default_value_t = PairingArg::Full)]
    pub pairing: PairingArg,
    /// Pairs per instance for sampled pairing.
    #[arg(long, default_value_t = 40)]
    pub ns: usize,
    /// Rank neighbours among the `ns` pairs.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = VoteArg::Plain)]
    pub vote: VoteArg,
}

impl Default for ModelArgs {
    fn default() -> Self {
        Self {
            seed: 0,
            trees: 100,
            max_depth: None,
            pairing: PairingArg::Full,
            ns: 40,
            k: 8,
            vote: VoteArg::Plain,
        }
    }
}

impl ModelArgs {
    pub fn forest(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.trees,
            max_depth: self.max_depth,
            ..ForestConfig::default()
        }
    }

    pub fn pairing_policy(&self) -> PairingPolicy {
        match self.pairing {
            PairingArg::Full => PairingPolicy::Full,
            PairingArg::Sampled => PairingPolicy::Sampled {
                n_s: self.ns,
                k: self.k,
            },
        }
    }

    pub fn vote_mode(&self) -> VoteMode {
        match self.vote {
            VoteArg::Plain => VoteMode::Plain,
            VoteArg::Weighted => VoteMode::Weighted,
        }
    }

    pub fn l2p_config(&self) -> L2pConfig {
        L2pConfig {
            learner: Arc::new(self.forest()),
            pairing: self.pairing_policy(),
            vote_mode: self.vote_mode(),
            tie_rule: TieRule::AverageMidpoints,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SummaryArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub strata: usize,
    /// Neighbours for the knn baseline.
    #[arg(long, default_value_t = 5)]
    pub knn_k: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Instances to place; a target column, if present, is ignored.
    #[arg(long)]
    pub query: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Forest saved by `train`; skips training.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long)]
    pub explain: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub mechanism: MechanismArg,
    /// Comma-separated parameter values (p_c or alpha).
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub strata: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1.5)]
    pub tail_index: f64,
    /// Noise sd relative to the latent score's sd.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// Files produced by a command, written together.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, path: impl Into<PathBuf>, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add(path, text);
        Ok(())
    }

    /// Writes every file; on the first failure removes the ones written.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            let res = path
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map_or(Ok(()), fs::create_dir_all)
                .and_then(|_| fs::write(path, bytes));
            if let Err(e) = res {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e).with_context(|| format!("writing {}", path.display()));
            }
            written.push(path.clone());
        }
        Ok(written)
    }
}

fn csv_bytes<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?)
}

fn load(input: &InputArgs) -> Result<Dataset> {
    load_csv(&input.input, &input.target_column)
        .with_context(|| format!("loading {}", input.input.display()))
}

#[derive(Debug, Serialize)]
pub struct SummaryReport {
    pub n: usize,
    pub d: usize,
    pub target: String,
    pub distinct_targets: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub kurtosis: f64,
}

pub fn summarize(dataset: &Dataset) -> Result<SummaryReport> {
    let t = dataset.targets();
    Ok(SummaryReport {
        n: dataset.len(),
        d: dataset.dim(),
        target: dataset.target_name.clone(),
        distinct_targets: dataset.distinct_targets(),
        min: t.iter().copied().fold(f64::INFINITY, f64::min),
        max: t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: t.iter().sum::<f64>() / t.len() as f64,
        kurtosis: kurtosis(&t)?,
    })
}

/// `summary.json` and `ccdf.csv`.
pub fn cmd_summary(args: &SummaryArgs) -> Result<Vec<PathBuf>> {
    let dataset = load(&args.input)?;
    let report = summarize(&dataset).context("target kurtosis")?;
    let mut out = Outputs::default();
    out.add_json(args.out_dir.join("summary.json"), &report)?;
    out.add(
        args.out_dir.join("ccdf.csv"),
        csv_bytes(&["value", "ccdf"], ccdf_points(&dataset.targets())?)?,
    );
    out.commit()
}

/// Cross-validation report plus its plot-point files.
pub fn run_cv(dataset: &Dataset, args: &CvArgs) -> Result<CvReport> {
    let registry = EstimatorRegistry::with_defaults(args.model.l2p_config(), KnnConfig { k: args.knn_k });
    let cfg = CvConfig {
        folds: args.folds,
        strata: args.strata,
        seed: args.model.seed,
    };
    Ok(cross_validate(dataset, &registry.all(), &cfg)?)
}

#[derive(Debug, Serialize)]
struct CvSummary<'a> {
    #[serde(flatten)]
    report: &'a CvReport,
    forest: ForestConfig,
    pairing: PairingPolicy,
    vote: VoteMode,
}

/// `cv_summary.json`, `cv_predictions.csv`, `ccdf_actual.csv` and per method
/// `qq_<m>.csv`, `roc_<m>.csv`, `ccdf_<m>.csv`.
pub fn cmd_cv(args: &CvArgs) -> Result<Vec<PathBuf>> {
    let dataset = load(&args.input)?;
    let report = run_cv(&dataset, args)?;
    let dir = &args.out_dir;
    let mut out = Outputs::default();
    out.add_json(
        dir.join("cv_summary.json"),
        &CvSummary {
            report: &report,
            forest: args.model.forest(),
            pairing: args.model.pairing_policy(),
            vote: args.model.vote_mode(),
        },
    )?;

    let actual = dataset.targets();
    out.add(dir.join("ccdf_actual.csv"), csv_bytes(&["value", "ccdf"], ccdf_points(&actual)?)?);
    for m in &report.methods {
        out.add(
            dir.join(format!("qq_{}.csv", m.name)),
            csv_bytes(&["q_actual", "q_predicted"], &m.pooled.qq)?,
        );
        let roc = roc_auc(&actual, &m.predictions)?;
        let rows = roc.points.iter().map(|p| (p.fpr, p.tpr, p.threshold));
        out.add(
            dir.join(format!("roc_{}.csv", m.name)),
            csv_bytes(&["fpr", "tpr", "threshold"], rows)?,
        );
        out.add(
            dir.join(format!("ccdf_{}.csv", m.name)),
            csv_bytes(&["value", "ccdf"], ccdf_points(&m.predictions)?)?,
        );
    }

    let mut header = vec!["id", "actual"];
    header.extend(report.methods.iter().map(|m| m.name.as_str()));
    let rows = dataset.instances.iter().enumerate().map(|(pos, inst)| {
        let mut row = vec![inst.id.to_string(), inst.target.to_string()];
        row.extend(report.methods.iter().map(|m| m.predictions[pos].to_string()));
        row
    });
    out.add(dir.join("cv_predictions.csv"), csv_bytes(&header, rows)?);
    out.commit()
}

/// Query file with or without a target column.
fn load_queries(path: &Path, target_column: &str) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let with_target = parse_csv(&text, Some(target_column));
    match with_target {
        Err(l2p_core::Error::MissingTargetColumn(_)) => parse_csv(&text, None),
        other => other,
    }
    .with_context(|| format!("parsing {}", path.display()))
}

/// Same seed fan-out as `L2pModel::fit`, so a saved forest reproduces an
/// in-process fit.
pub fn fit_forest(train: &Dataset, model: &ModelArgs) -> Result<RandomForest> {
    let pairs = model
        .pairing_policy()
        .build(train, seed::derive(model.seed, "pairing", 0))?;
    Ok(train_forest(&pairs, &model.forest(), seed::derive(model.seed, "classifier", 0))?)
}

#[derive(Debug, Serialize)]
pub struct QueryExplanation {
    pub query_id: usize,
    pub tied_regions: Vec<usize>,
    #[serde(flatten)]
    pub explanation: Explanation,
}

/// Placement of each query, in query order.
pub fn run_predict(args: &PredictArgs) -> Result<Vec<(usize, f64, QueryExplanation)>> {
    let train = load(&args.input)?;
    let queries = load_queries(&args.query, &args.input.target_column)?;
    if queries.dim() != train.dim() {
        bail!(
            "query file has {} feature columns, training file has {}",
            queries.dim(),
            train.dim()
        );
    }
    let fitted = match &args.model_file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let forest = RandomForest::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
            L2pModel::from_model(Box::new(forest), &train, args.model.vote_mode(), TieRule::AverageMidpoints)?
        }
        None => L2pModel::fit(&args.model.l2p_config(), &train, args.model.seed)?,
    };
    queries
        .instances
        .iter()
        .map(|q| {
            let placement = fitted.place(&q.features)?;
            let explanation = QueryExplanation {
                query_id: q.id,
                tied_regions: placement.tied_regions.clone(),
                explanation: fitted.explain(&placement, EXPLAIN_TOP_N),
            };
            Ok((q.id, placement.predicted_value, explanation))
        })
        .collect()
}

/// `predictions.csv` and, with `--explain`, `explanations.json`.
pub fn cmd_predict(args: &PredictArgs) -> Result<Vec<PathBuf>> {
    let results = run_predict(args)?;
    let mut out = Outputs::default();
    out.add(
        args.out_dir.join("predictions.csv"),
        csv_bytes(&["query_id", "predicted"], results.iter().map(|(id, p, _)| (id, p)))?,
    );
    if args.explain {
        let records: Vec<&QueryExplanation> = results.iter().map(|r| &r.2).collect();
        out.add_json(args.out_dir.join("explanations.json"), &records)?;
    }
    out.commit()
}

pub fn cmd_train(args: &TrainArgs) -> Result<Vec<PathBuf>> {
    let train = load(&args.input)?;
    let forest = fit_forest(&train, &args.model)?;
    let mut out = Outputs::default();
    out.add(&args.output, forest.to_json()?);
    out.commit()
}

/// `robustness_<mechanism>.csv`.
pub fn cmd_robustness(args: &RobustnessArgs) -> Result<Vec<PathBuf>> {
    let dataset = load(&args.input)?;
    let kind = match args.mechanism {
        MechanismArg::Random => MechanismKind::Random,
        MechanismArg::Distance => MechanismKind::Distance,
    };
    let curve = robustness_sweep(
        &dataset,
        kind,
        &args.grid,
        &SweepConfig {
            n_folds: args.folds,
            n_strata: args.strata,
            seed: args.seed,
        },
    )?;
    let rows = curve.points.iter().map(|p| (p.parameter, p.realized_accuracy, p.auc));
    let mut out = Outputs::default();
    out.add(
        args.out_dir.join(format!("robustness_{}.csv", kind.name())),
        csv_bytes(&["parameter", "realized_accuracy", "auc"], rows)?,
    );
    out.commit()
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    let dataset = generate_synthetic(&SyntheticConfig {
        n: args.n,
        d: args.d,
        tail_index: args.tail_index,
        noise_scale: args.noise,
        seed: args.seed,
    })?;
    let mut out = Outputs::default();
    out.add(&args.output, dataset.to_csv()?);
    out.commit()
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Summary(a) => cmd_summary(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Train(a) => cmd_train(a),
        Command::Robustness(a) => cmd_robustness(a),
        Command::Synth(a) => cmd_synth(a),
    }
}
