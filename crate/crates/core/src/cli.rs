//! `avalign` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aggregation::{aggregate, recall_at_k, scatter_data, Covariate, Direction, SimilarityMatrix};
use crate::avt;
use crate::error::Error;
use crate::fixtures::{synth_dataset, Dims, SynthConfig};
use crate::ground_truth::{load_ground_truth, pair_concepts, GroundTruthSet, LoadOptions, SimilarityTable, DEFAULT_PAIR_THRESHOLD};
use crate::metrics::Metric;
use crate::parallel::Execution;
use crate::pipeline::{evaluate, BaselineSource, DirectorySource, EvalOptions, EvalOutcome, Resolution, Softmax, TensorSource};
use crate::report::{self, BaselineComparison, Counts, RunSettings, Summary};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::ThreadPool(_) => EXIT_INTERNAL,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "avalign", version, about = "Score word-object alignment tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score tensors against ground truth and write reports.
    Eval(EvalArgs),
    /// Score uniform random tensors against ground truth.
    Baseline(EvalArgs),
    /// Derive word-object concept pairs from a similarity table.
    Pairs(PairsArgs),
    /// Recall@k in both retrieval directions.
    Recall(RecallArgs),
    /// Per-class scatter points and linear fit from a records CSV.
    Scatter(ScatterArgs),
    /// Write a synthetic dataset with planted alignments.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UpsampleArg {
    Nearest,
    Linear,
    Coarse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SoftmaxArg {
    Space,
    Time,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    AsObject,
    AsWord,
    GsObject,
    GsWord,
    All,
}

impl MetricArg {
    fn metrics(self) -> Vec<Metric> {
        match self {
            MetricArg::AsObject => vec![Metric::AsObject],
            MetricArg::AsWord => vec![Metric::AsWord],
            MetricArg::GsObject => vec![Metric::GsObject],
            MetricArg::GsWord => vec![Metric::GsWord],
            MetricArg::All => Metric::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovariateArg {
    ObjectSize,
    WordDuration,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Ground truth, JSON lines.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory of `<sample_id>.avt` tensors.
    #[arg(long)]
    pub tensors: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "nearest")]
    pub upsample: UpsampleArg,
    #[arg(long, value_enum, default_value = "none")]
    pub softmax: SoftmaxArg,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f32,
    /// Pairs whose similarity is at or below this are dropped.
    #[arg(long, default_value_t = DEFAULT_PAIR_THRESHOLD, allow_negative_numbers = true)]
    pub threshold: f64,
    /// Master seed for baseline tensors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Abort on any invalid record or missing tensor.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, value_enum, default_value = "all")]
    pub metric: MetricArg,
    /// Also write cross-class confusion scores.
    #[arg(long)]
    pub confusion: bool,
    /// (eval) Also score random baseline tensors for comparison.
    #[arg(long)]
    pub with_baseline: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PairsArgs {
    /// One noun per line.
    #[arg(long)]
    pub nouns: PathBuf,
    /// One object label per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// `word<TAB>label<TAB>similarity` lines.
    #[arg(long)]
    pub sims: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PAIR_THRESHOLD, allow_negative_numbers = true)]
    pub threshold: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RecallArgs {
    /// Square similarity matrix, one row per speech query.
    #[arg(long)]
    pub sims: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ScatterArgs {
    /// `records.csv` written by `eval`.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, value_enum)]
    pub covariate: CovariateArg,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Tensor grid, `WxHxN`.
    #[arg(long, default_value = "14x14x64")]
    pub dims: String,
    /// Ground-truth resolution, `WxHxN`.
    #[arg(long, default_value = "224x224x640")]
    pub eval_dims: String,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub frame_ms: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Eval(args) => cmd_eval(&args, false),
        Command::Baseline(args) => cmd_eval(&args, true),
        Command::Pairs(args) => cmd_pairs(&args),
        Command::Recall(args) => cmd_recall(&args),
        Command::Scatter(args) => cmd_scatter(&args),
        Command::Synth(args) => cmd_synth(&args),
    }
}

fn eval_options(args: &EvalArgs) -> CliResult<EvalOptions> {
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    if !(-1.0..=1.0).contains(&args.threshold) {
        return Err(CliError::usage("--threshold must lie in [-1, 1]"));
    }
    Ok(EvalOptions {
        resolution: match args.upsample {
            UpsampleArg::Nearest => Resolution::Nearest,
            UpsampleArg::Linear => Resolution::Linear,
            UpsampleArg::Coarse => Resolution::Coarse,
        },
        softmax: match args.softmax {
            SoftmaxArg::Space => Softmax::Space,
            SoftmaxArg::Time => Softmax::Time,
            SoftmaxArg::None => Softmax::None,
        },
        temperature: args.temperature,
        metrics: args.metric.metrics(),
        confusion: args.confusion,
        strict: args.strict,
        execution: Execution::from_workers(workers),
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

pub fn cmd_eval(args: &EvalArgs, baseline_only: bool) -> CliResult<()> {
    let opts = eval_options(args)?;
    let load = LoadOptions {
        strict: args.strict,
        threshold: args.threshold,
    };
    let gt = load_ground_truth(&args.gt, &load)?;

    let directory = args.tensors.as_ref().map(DirectorySource::new);
    if !baseline_only {
        match &args.tensors {
            None => return Err(CliError::usage("eval needs --tensors")),
            Some(dir) if !dir.is_dir() => {
                return Err(CliError::from(Error::Empty(format!("{} is not a directory", dir.display()))))
            }
            _ => {}
        }
    }
    let baseline_source = BaselineSource {
        master_seed: args.seed,
        shapes: directory.clone(),
    };
    let source: &dyn TensorSource = match (&directory, baseline_only) {
        (Some(dir), false) => dir,
        _ => &baseline_source,
    };

    let outcome = evaluate(&gt.samples, source, &opts)?;
    let baseline = if args.with_baseline && !baseline_only {
        let b = evaluate(&gt.samples, &baseline_source, &opts)?;
        Some(BaselineComparison {
            seed: args.seed,
            totals: aggregate(&b.records)?.totals,
        })
    } else {
        None
    };

    let summary = build_summary(args, &opts, &gt, &outcome, baseline, baseline_only)?;
    write_reports(&args.out, &outcome, &summary, opts.confusion)?;
    log::info!(
        "scored {} pairs in {} samples; reports in {}",
        outcome.records.len(),
        outcome.samples_scored,
        args.out.display()
    );
    Ok(())
}

fn build_summary(
    args: &EvalArgs,
    opts: &EvalOptions,
    gt: &GroundTruthSet,
    outcome: &EvalOutcome,
    baseline: Option<BaselineComparison>,
    baseline_only: bool,
) -> CliResult<Summary> {
    let agg = aggregate(&outcome.records)?;
    let scored: BTreeSet<&str> = agg.classes.iter().map(|c| c.class_id.as_str()).collect();
    let empty_classes = gt
        .samples
        .iter()
        .flat_map(|s| s.entries.iter().map(|e| e.class_id.as_str()))
        .filter(|c| !scored.contains(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();
    let fits = report::metric_fits(&outcome.records, &opts.metrics);
    let baseline = if baseline_only {
        Some(BaselineComparison {
            seed: args.seed,
            totals: agg.totals,
        })
    } else {
        baseline
    };
    let settings = RunSettings {
        mode: if baseline_only { "baseline" } else { "eval" }.to_owned(),
        upsample: format!("{:?}", args.upsample).to_lowercase(),
        softmax: format!("{:?}", args.softmax).to_lowercase(),
        temperature: args.temperature,
        threshold: args.threshold,
        seed: args.seed,
        metrics: opts.metrics.clone(),
        strict: args.strict,
    };
    let counts = Counts {
        samples_in_ground_truth: gt.samples.len(),
        samples_scored: outcome.samples_scored,
        samples_missing: outcome.missing.len(),
        samples_failed: outcome.failed.len(),
        pairs_scored: outcome.records.len(),
        pairs_skipped: gt.skipped.len(),
        pairs_below_threshold: gt.below_threshold,
    };
    Ok(Summary::new(settings, counts, agg, empty_classes, fits, baseline))
}

fn write_reports(out: &Path, outcome: &EvalOutcome, summary: &Summary, confusion: bool) -> CliResult<()> {
    ensure_dir(out)?;
    report::write_records_csv(create(&out.join("records.csv"))?, &outcome.records)?;
    report::write_classes_csv(create(&out.join("classes.csv"))?, &summary.classes)?;
    if confusion {
        report::write_confusion_csv(create(&out.join("confusion.csv"))?, &outcome.confusion)?;
    }
    write_text(&out.join("summary.json"), &summary.to_json()?)
}

fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

pub fn cmd_pairs(args: &PairsArgs) -> CliResult<()> {
    let nouns = read_lines(&args.nouns)?;
    let labels = read_lines(&args.labels)?;
    let sims = SimilarityTable::read_tsv(&args.sims)?;
    let pairs = pair_concepts(&nouns, &labels, &sims, args.threshold)?;
    let json = serde_json::to_string_pretty(&pairs).map_err(Error::from)? + "\n";
    match &args.out {
        Some(path) => write_text(path, &json),
        None => std::io::stdout()
            .write_all(json.as_bytes())
            .map_err(|e| CliError::internal(e.to_string())),
    }
}

pub fn cmd_recall(args: &RecallArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.sims).map_err(|e| Error::Io {
        path: args.sims.clone(),
        source: e,
    })?;
    let sims = SimilarityMatrix::parse(&text, &args.sims).map_err(|e| match e {
        Error::InvalidArgument(m) => CliError::from(Error::Empty(m)),
        other => CliError::from(other),
    })?;
    let result = serde_json::json!({
        "n": sims.size(),
        "k": args.k,
        "speech_to_image": recall_at_k(&sims, args.k, Direction::SpeechToImage)?,
        "image_to_speech": recall_at_k(&sims, args.k, Direction::ImageToSpeech)?,
    });
    println!("{}", serde_json::to_string_pretty(&result).map_err(Error::from)?);
    Ok(())
}

pub fn cmd_scatter(args: &ScatterArgs) -> CliResult<()> {
    let metric = match args.metric.metrics()[..] {
        [m] => m,
        _ => return Err(CliError::usage("scatter needs a single --metric")),
    };
    let covariate = match args.covariate {
        CovariateArg::ObjectSize => Covariate::ObjectSize,
        CovariateArg::WordDuration => Covariate::WordDuration,
    };
    let records = report::read_records_csv(&args.records)?;
    let scatter = scatter_data(&records, covariate, metric, args.bins)?;
    ensure_dir(&args.out)?;
    let stem = format!("scatter_{}_{}", metric.name(), covariate.name());
    report::write_scatter_csv(create(&args.out.join(format!("{stem}.csv")))?, &scatter)?;
    let fit = serde_json::json!({
        "metric": metric,
        "covariate": covariate,
        "points": scatter.points.len(),
        "fit": scatter.fit,
    });
    let text = serde_json::to_string_pretty(&fit).map_err(Error::from)? + "\n";
    write_text(&args.out.join(format!("{stem}_fit.json")), &text)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let coarse: Dims = args.dims.parse()?;
    let eval: Dims = args.eval_dims.parse()?;
    let cfg = SynthConfig {
        coarse,
        eval,
        eval_frame_ms: args.frame_ms,
        samples: args.samples,
        seed: args.seed,
    };
    let samples = synth_dataset(&cfg)?;
    let tensor_dir = args.out.join("tensors");
    ensure_dir(&tensor_dir)?;

    let mut gt = create(&args.out.join("gt.jsonl"))?;
    let mut planted = create(&args.out.join("planted.csv"))?;
    let io = |e: std::io::Error| CliError::internal(e.to_string());
    writeln!(planted, "sample_id,class,word,p").map_err(io)?;
    for s in &samples {
        let line = serde_json::to_string(&s.record).map_err(Error::from)?;
        writeln!(gt, "{line}").map_err(io)?;
        for (pair, p) in s.record.pairs.iter().zip(&s.planted) {
            writeln!(planted, "{},{},{},{p}", s.record.sample_id, pair.class, pair.word).map_err(io)?;
        }
        avt::write(tensor_dir.join(format!("{}.avt", s.record.sample_id)), &s.tensor)
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    gt.flush().map_err(io)?;
    planted.flush().map_err(io)?;
    Ok(())
}
