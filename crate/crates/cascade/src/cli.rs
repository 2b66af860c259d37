//! `cascade` command line.
//!
//! Data goes to `--out` files; stdout only carries short summaries.
//! Exit codes: 0 success, 1 invalid input, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use cascade_core::calibration::{fraction_for_target_accuracy, threshold_for_fraction};
use cascade_core::model::{validate_alignment, AnswerMatch, ModelRun, RunSet};
use cascade_core::switcher::{
    self, average_concavity, bucket_profile, churn_by_quantile, hump, log_spaced_edges, pair_stats,
    percentile_accuracy, switcher_curve, uncertainty_histogram, CorrectnessBucket, Direction,
    DEFAULT_GRID_STEP,
};
use cascade_core::synth::{generate, SynthConfig};
use cascade_core::uncertainty::{compute_scores, ScoreMap, UncertaintyKind};
use clap::{Args, Parser, Subcommand};

use crate::log::{load_prediction_log, LoadOptions};
use crate::policy::save_policy;
use crate::reports;
use crate::service::{self, ServiceConfig};
use crate::synth_io::{load_synth_config, write_synth_output};
use crate::table::{write_table, Table};

/// Environment variable selecting the log level (error, warn, info, debug).
pub const LOG_LEVEL_ENV: &str = "CASCADE_LOG_LEVEL";

#[derive(Debug, Parser)]
#[command(name = "cascade", version, about = "Uncertainty-based deferral analysis and routing for small/large model pairs")]
pub struct Cli {
    /// Compare answers after lowercasing and stripping punctuation and articles.
    #[arg(long, global = true)]
    pub normalize_answers: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Scoring {
    /// Uncertainty kind used to rank examples.
    #[arg(long, default_value = "margin", value_parser = parse_kind)]
    pub kind: UncertaintyKind,
    /// Retrainings of the small model (committee and churn kinds).
    #[arg(long)]
    pub committee: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairInputs {
    /// Small-model prediction log.
    #[arg(long)]
    pub small: PathBuf,
    /// Large-model prediction log.
    #[arg(long)]
    pub large: PathBuf,
    #[command(flatten)]
    pub scoring: Scoring,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub inputs: PairInputs,
    #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-example uncertainty scores of one run.
    Score {
        #[arg(long)]
        small: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long)]
        out: PathBuf,
    },
    /// Switcher curve: accuracy against deferred fraction.
    Curve(CurveArgs),
    /// Peak of the switcher curve over the better endpoint.
    Hump(CurveArgs),
    /// Mean gain of the switcher curve over random routing.
    Concavity(CurveArgs),
    /// Joint-correctness bucket shares by uncertainty threshold.
    Buckets {
        #[command(flatten)]
        inputs: PairInputs,
        #[arg(long, default_value = "at-most", value_parser = parse_direction)]
        direction: Direction,
        /// Number of score-quantile thresholds.
        #[arg(long, default_value_t = 100)]
        buckets: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of several runs within percentiles of the small run's uncertainty.
    Percentiles {
        /// Run whose uncertainty defines the percentiles (also reported).
        #[arg(long)]
        small: PathBuf,
        /// Further runs to report.
        #[arg(long)]
        runs: Vec<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long, default_value_t = 100)]
        buckets: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retraining churn of a committee within uncertainty quantiles.
    ChurnTable {
        /// Retrainings whose churn is measured (at least 2).
        #[arg(long)]
        runs: Vec<PathBuf>,
        /// Run whose uncertainty defines the quantiles; defaults to the first --runs.
        #[arg(long)]
        small: Option<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gap, disagreement, hump and concavity for every (small, large) pair.
    Pairs {
        #[arg(long, required = true)]
        small: Vec<PathBuf>,
        #[arg(long, required = true)]
        large: Vec<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        /// Keep pairs whose accuracy gap is at least this.
        #[arg(long, requires = "gap_hi")]
        gap_lo: Option<f64>,
        /// Keep pairs whose accuracy gap is at most this.
        #[arg(long, requires = "gap_lo")]
        gap_hi: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-binned histogram of uncertainty within one correctness bucket.
    Histogram {
        #[command(flatten)]
        inputs: PairInputs,
        /// small-correct, small-wrong, only-partner-correct or both-wrong.
        #[arg(long, default_value = "small-correct", value_parser = parse_bucket)]
        subset: CorrectnessBucket,
        /// Number of log-spaced bins.
        #[arg(long, default_value_t = 20)]
        buckets: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a deferral threshold and write a policy file.
    Calibrate {
        #[arg(long)]
        small: PathBuf,
        /// Needed with --target-accuracy.
        #[arg(long)]
        large: Option<PathBuf>,
        #[command(flatten)]
        scoring: Scoring,
        /// Share of calibration examples to defer.
        #[arg(long, conflicts_with = "target_accuracy", required_unless_present = "target_accuracy")]
        fraction: Option<f64>,
        /// Defer the smallest share reaching this switcher accuracy.
        #[arg(long, requires = "large")]
        target_accuracy: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic small/large committees as prediction logs.
    Synth {
        /// JSON generator config; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the deferral router.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<UncertaintyKind, String> {
    s.parse().map_err(|e: cascade_core::Error| e.to_string())
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse().map_err(|e: cascade_core::Error| e.to_string())
}

fn parse_bucket(s: &str) -> Result<CorrectnessBucket, String> {
    s.parse().map_err(|e: cascade_core::Error| e.to_string())
}

type CliResult<T> = anyhow::Result<T>;

struct Context {
    answer_match: AnswerMatch,
}

impl Context {
    fn load(&self, path: &Path) -> CliResult<ModelRun> {
        let options = LoadOptions { answer_match: self.answer_match, ..LoadOptions::default() };
        Ok(load_prediction_log(path, &options)?)
    }

    fn load_all(&self, paths: &[PathBuf]) -> CliResult<Vec<ModelRun>> {
        paths.iter().map(|p| self.load(p)).collect()
    }

    fn committee(&self, paths: &[PathBuf]) -> CliResult<Option<RunSet>> {
        if paths.is_empty() {
            return Ok(None);
        }
        Ok(Some(validate_alignment(self.load_all(paths)?)?))
    }

    fn scores(&self, reference: &ModelRun, scoring: &Scoring) -> CliResult<ScoreMap> {
        let committee = self.committee(&scoring.committee)?;
        Ok(compute_scores(scoring.kind, reference, committee.as_ref())?)
    }

    fn pair(&self, inputs: &PairInputs) -> CliResult<(ModelRun, ModelRun, ScoreMap)> {
        let small = self.load(&inputs.small)?;
        let large = self.load(&inputs.large)?;
        let scores = self.scores(&small, &inputs.scoring)?;
        Ok((small, large, scores))
    }
}

fn write_out(table: &Table, out: &Path) -> CliResult<()> {
    write_table(table, out)?;
    Ok(())
}

/// Thresholds at `buckets + 1` evenly spaced ranks of the sorted scores.
fn quantile_thresholds(scores: &ScoreMap, buckets: usize) -> Vec<f64> {
    let sorted: Vec<f64> = scores.most_certain_first().into_iter().map(|(_, s)| s).collect();
    let n = sorted.len();
    let mut out: Vec<f64> = (0..=buckets)
        .map(|i| sorted[((i * (n - 1)) as f64 / buckets as f64).round() as usize])
        .collect();
    out.dedup();
    out
}

/// `[0]` followed by log-spaced edges between the smallest positive and the
/// largest score.
fn histogram_edges(scores: &ScoreMap, bins: usize) -> CliResult<Vec<f64>> {
    let positive: Vec<f64> = scores.iter().map(|(_, s)| s).filter(|&s| s > 0.0).collect();
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    let mut edges = vec![0.0];
    if positive.is_empty() {
        edges.push(1.0);
    } else if lo == hi {
        edges.push(hi);
    } else {
        edges.extend(log_spaced_edges(lo, hi, bins)?);
    }
    Ok(edges)
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    let ctx = Context {
        answer_match: if cli.normalize_answers { AnswerMatch::Normalized } else { AnswerMatch::Exact },
    };
    match cli.command {
        Command::Score { small, scoring, out } => {
            let run = ctx.load(&small)?;
            let scores = ctx.scores(&run, &scoring)?;
            write_out(&reports::scores_table(&scores), &out)?;
            writeln!(stdout, "scored {} examples of {} ({})", scores.len(), run.model_id, scores.kind)?;
        }
        Command::Curve(args) => {
            let (small, large, scores) = ctx.pair(&args.inputs)?;
            let curve = switcher_curve(&small, &large, &scores, args.grid_step)?;
            write_out(&reports::curve_table(&curve), &args.out)?;
            writeln!(
                stdout,
                "{} points; small accuracy {:.4}, large accuracy {:.4}",
                curve.fractions.len(),
                curve.small_accuracy,
                curve.large_accuracy
            )?;
        }
        Command::Hump(args) => {
            let (small, large, scores) = ctx.pair(&args.inputs)?;
            let curve = switcher_curve(&small, &large, &scores, args.grid_step)?;
            let h = hump(&curve);
            write_out(&reports::hump_table(&curve, &h), &args.out)?;
            writeln!(
                stdout,
                "hump {:+.4} at fraction {:.2} (peak accuracy {:.4})",
                h.hump_size, h.peak_fraction, h.peak_accuracy
            )?;
        }
        Command::Concavity(args) => {
            let (small, large, scores) = ctx.pair(&args.inputs)?;
            let curve = switcher_curve(&small, &large, &scores, args.grid_step)?;
            let c = average_concavity(&curve);
            write_out(&reports::concavity_table(&curve, c), &args.out)?;
            writeln!(stdout, "average concavity {c:+.4}")?;
        }
        Command::Buckets { inputs, direction, buckets, out } => {
            if buckets == 0 {
                anyhow::bail!("--buckets must be positive");
            }
            let (small, large, scores) = ctx.pair(&inputs)?;
            let thresholds = quantile_thresholds(&scores, buckets);
            let profile = bucket_profile(&small, &large, &scores, &thresholds, direction)?;
            write_out(&reports::bucket_table(&profile), &out)?;
            writeln!(stdout, "{} thresholds ({direction})", profile.rows.len())?;
        }
        Command::Percentiles { small, runs, scoring, buckets, out } => {
            let reference = ctx.load(&small)?;
            let scores = ctx.scores(&reference, &scoring)?;
            let mut all = vec![reference];
            all.extend(ctx.load_all(&runs)?);
            let table = percentile_accuracy(&all, &scores, buckets)?;
            write_out(&reports::percentile_table(&table), &out)?;
            writeln!(stdout, "{} buckets over {} runs", table.rows.len(), all.len())?;
        }
        Command::ChurnTable { runs, small, scoring, out } => {
            if runs.len() < 2 {
                anyhow::bail!("need ≥ 2 runs for a churn table, got {}", runs.len());
            }
            let target = validate_alignment(ctx.load_all(&runs)?)?;
            let reference = match &small {
                Some(path) => ctx.load(path)?,
                None => target.runs()[0].clone(),
            };
            let scores = ctx.scores(&reference, &scoring)?;
            let table = churn_by_quantile(&target, &scores)?;
            write_out(&reports::churn_table(&table), &out)?;
            let means: Vec<String> = table
                .rows
                .iter()
                .map(|r| r.churn.map_or("-".into(), |(m, _)| format!("{:.4}", m)))
                .collect();
            writeln!(stdout, "churn by quantile over {} pairs: {}", table.num_pairs, means.join(" "))?;
        }
        Command::Pairs { small, large, scoring, grid_step, gap_lo, gap_hi, out } => {
            let smalls = ctx.load_all(&small)?;
            let larges = ctx.load_all(&large)?;
            let explicit = ctx.committee(&scoring.committee)?;
            let gap_filter = gap_lo.zip(gap_hi);
            let mut stats = Vec::new();
            let mut considered = 0usize;
            for s in &smalls {
                let committee = match (&explicit, scoring.kind.needs_committee()) {
                    (Some(c), _) => Some(c.clone()),
                    (None, true) => {
                        let others: Vec<ModelRun> =
                            smalls.iter().filter(|o| !o.same_identity(s)).cloned().collect();
                        if others.is_empty() {
                            None
                        } else {
                            Some(validate_alignment(others)?)
                        }
                    }
                    (None, false) => None,
                };
                let scores = compute_scores(scoring.kind, s, committee.as_ref())?;
                for l in &larges {
                    considered += 1;
                    let curve = switcher_curve(s, l, &scores, grid_step)?;
                    if let Some(p) = pair_stats(s, l, &curve, gap_filter)? {
                        stats.push(p);
                    }
                }
            }
            write_out(&reports::pairs_table(&stats), &out)?;
            let (mean_hump, _) = switcher::mean_and_standard_error(&stats.iter().map(|p| p.hump_size).collect::<Vec<_>>());
            let (mean_conc, _) =
                switcher::mean_and_standard_error(&stats.iter().map(|p| p.average_concavity).collect::<Vec<_>>());
            writeln!(
                stdout,
                "{} of {considered} pairs kept; mean hump {mean_hump:+.4}, mean concavity {mean_conc:+.4}",
                stats.len()
            )?;
        }
        Command::Histogram { inputs, subset, buckets, out } => {
            if buckets == 0 {
                anyhow::bail!("--buckets must be positive");
            }
            let (small, large, scores) = ctx.pair(&inputs)?;
            let edges = histogram_edges(&scores, buckets)?;
            let hist = uncertainty_histogram(&small, &large, &scores, subset, &edges)?;
            write_out(&reports::histogram_table(&hist), &out)?;
            writeln!(stdout, "{} examples in {}", hist.total(), subset.as_str())?;
        }
        Command::Calibrate { small, large, scoring, fraction, target_accuracy, grid_step, out } => {
            let reference = ctx.load(&small)?;
            let scores = ctx.scores(&reference, &scoring)?;
            let fraction = match (fraction, target_accuracy, large) {
                (Some(f), _, _) => f,
                (None, Some(target), Some(large)) => {
                    let large = ctx.load(&large)?;
                    let curve = switcher_curve(&reference, &large, &scores, grid_step)?;
                    fraction_for_target_accuracy(&curve, target)
                        .ok_or_else(|| anyhow::anyhow!("target accuracy {target} is not reached at any deferral fraction"))?
                }
                _ => anyhow::bail!("--target-accuracy needs --large"),
            };
            let policy = threshold_for_fraction(&scores, fraction)?;
            save_policy(&policy, &out)?;
            writeln!(
                stdout,
                "threshold {} defers {:.4} of {} calibration examples",
                policy.threshold,
                policy.expected_deferral_fraction,
                scores.len()
            )?;
        }
        Command::Synth { config, seed, out } => {
            let mut cfg = match &config {
                Some(path) => load_synth_config(path)?,
                None => SynthConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let output = generate(&cfg)?;
            let manifest = write_synth_output(&output, &out, "synthetic")?;
            writeln!(
                stdout,
                "wrote {} runs of {} examples to {}",
                manifest.runs.len(),
                cfg.n_examples,
                out.display()
            )?;
        }
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config)?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(&config, async {
                let _ = tokio::signal::ctrl_c().await;
            }))?;
        }
    }
    Ok(())
}

/// Installs the stderr logger configured by `CASCADE_LOG_LEVEL`.
pub fn init_logging() {
    let level = std::env::var(LOG_LEVEL_ENV).unwrap_or_else(|_| "warn".to_string());
    let filter = tracing_subscriber::EnvFilter::try_new(&level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}
