//! Command-line front end for the augmentation pipeline.
//!
//! Four subcommands: `augment` runs the boost pipeline and writes the
//! augmented dataset plus a JSON run report, `diagnose` embeds datasets into
//! a shared 2D space and reports hull overlap and skewness, `sweep` measures
//! downstream accuracy across augmentation sizes and modes, and `eval`
//! trains and scores a single classifier.
//!
//! Settings merge as flag > environment > `--config` file > built-in
//! default, and every report echoes the effective configuration. Exit codes:
//! 0 success, 1 runtime failure, 2 configuration error.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use boostaug_core::{
    augment, connect_external_scorer, evaluate, joint_clouds, load_absc_dataset, load_tc_dataset,
    run_report, shift_report, sweep_n, train_classifier, write_dataset, BoostRunConfig,
    CheckpointMetric, CloudSource, Dataset, EmbedMethod, Error, EvalResult, ExternalScorerSpec,
    FilterStage, Lexicon, PerplexityMode, PointCloud, Resources, Result, RunReport, ScorerSpec,
    ShiftReport, Strategy, SurrogateTrainConfig, SweepConfig, SweepMode, SweepResult, Task,
};

const BUILTIN_SYNONYMS: &str = include_str!("../../../resources/synonyms.tsv");
const BUILTIN_MISSPELLINGS: &str = include_str!("../../../resources/misspellings.tsv");

const ENV_SYNONYMS: &str = "BOOSTAUG_SYNONYMS";
const ENV_MISSPELLINGS: &str = "BOOSTAUG_MISSPELLINGS";

#[derive(Parser)]
#[command(name = "boostaug", version, about = "Augment-then-filter text augmentation pipeline")]
struct Cli {
    /// Global RNG seed; all outputs are byte-deterministic given it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// JSON config file with flat keys mirroring the flag names.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment a dataset and write the survivors plus a run report.
    Augment(AugmentArgs),
    /// Embed datasets into one 2D space and report overlap and skewness.
    Diagnose(DiagnoseArgs),
    /// Measure downstream metrics across augmentation sizes and modes.
    Sweep(SweepArgs),
    /// Train on one dataset, evaluate on another, print the metrics.
    Eval(EvalArgs),
}

/// Knobs shared by `augment` and `sweep`.
#[derive(Args)]
struct PipelineArgs {
    /// Augmentation backend: eda, spelling, split, or embed_sub.
    #[arg(long)]
    backend: Option<String>,

    /// Fold count for cross-boosting (must exceed 3).
    #[arg(long)]
    k: Option<usize>,

    /// Candidate pool size as a multiple of the per-example budget.
    #[arg(long)]
    pool_multiplier: Option<usize>,

    /// Emit only augmented examples, without the originals.
    #[arg(long)]
    no_originals: bool,

    /// Comma-separated filter stages to disable
    /// (label, perplexity, confidence_rank, confidence_threshold).
    #[arg(long, value_delimiter = ',')]
    disable: Option<Vec<String>>,

    /// Scorer: "lightweight", "exec:<command>", or an http(s) endpoint.
    #[arg(long)]
    scorer: Option<String>,

    /// External scorer response timeout in seconds.
    #[arg(long)]
    scorer_timeout_secs: Option<u64>,

    /// Synonym lexicon path (word<TAB>alt1,alt2); built-in table otherwise.
    #[arg(long)]
    synonyms: Option<PathBuf>,

    /// Misspelling lexicon path; built-in table otherwise.
    #[arg(long)]
    misspellings: Option<PathBuf>,

    /// Per-token transform probability in [0, 1].
    #[arg(long)]
    transform_prob: Option<f64>,

    /// Generation attempts per requested candidate.
    #[arg(long)]
    max_attempts: Option<usize>,

    /// Allow transforms to touch aspect tokens (rejected for absc runs).
    #[arg(long)]
    no_protect_aspect: bool,

    /// EDA op weights as replace,insert,swap,delete.
    #[arg(long, value_delimiter = ',')]
    eda_weights: Option<Vec<f64>>,

    /// Confidence cut: survivors must exceed this maximum posterior.
    #[arg(long)]
    confidence_threshold: Option<f64>,

    /// Perplexity cut: candidates at or above are dumped ("inf" disables).
    #[arg(long)]
    perplexity_limit: Option<String>,

    /// Perplexity cut mode: absolute or relative.
    #[arg(long)]
    perplexity_mode: Option<String>,

    /// Relative mode multiple of the training-median perplexity.
    #[arg(long)]
    relative_ratio: Option<f64>,

    /// Surrogate n-gram order fallback (1, 2, or 3).
    #[arg(long)]
    ngram_order: Option<usize>,

    /// Surrogate additive-smoothing fallback.
    #[arg(long)]
    smoothing_alpha: Option<f64>,

    /// Surrogate grid-selection metric: accuracy or macro_f1.
    #[arg(long)]
    checkpoint_metric: Option<String>,
}

#[derive(Args)]
struct AugmentArgs {
    /// Input dataset path.
    #[arg(long)]
    input: PathBuf,

    /// Dataset task: tc or absc.
    #[arg(long)]
    task: Option<String>,

    /// Boosting mode: cross or mono.
    #[arg(long)]
    mode: Option<String>,

    /// Surviving augmentation instances per original example.
    #[arg(long)]
    n: Option<usize>,

    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,

    /// Run report JSON path.
    #[arg(long)]
    report: Option<PathBuf>,

    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Reference dataset for pair mode.
    #[arg(long)]
    a: Option<PathBuf>,

    /// Diagnosed dataset for pair mode.
    #[arg(long)]
    b: Option<PathBuf>,

    /// Cloud label for --a: train, test, or augmented.
    #[arg(long, default_value = "train")]
    label_a: String,

    /// Cloud label for --b.
    #[arg(long, default_value = "test")]
    label_b: String,

    /// Training dataset for triple mode.
    #[arg(long)]
    train: Option<PathBuf>,

    /// Augmented dataset for triple mode.
    #[arg(long)]
    augmented: Option<PathBuf>,

    /// Test dataset for triple mode.
    #[arg(long)]
    test: Option<PathBuf>,

    /// Dataset task: tc or absc.
    #[arg(long)]
    task: Option<String>,

    /// Embedding method (deterministic; tsne needs a plug-in).
    #[arg(long, default_value = "deterministic")]
    method: String,

    /// Shift report JSON path.
    #[arg(long)]
    report: PathBuf,

    /// Embedded-points TSV path.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Training dataset path.
    #[arg(long)]
    train: PathBuf,

    /// Test dataset path.
    #[arg(long)]
    test: PathBuf,

    /// Dataset task: tc or absc.
    #[arg(long)]
    task: Option<String>,

    /// Comma-separated per-example budgets to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4, 8])]
    n: Vec<usize>,

    /// Number of seeds per cell, counting up from --seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,

    /// Comma-separated modes: none, boostaug, monoaug, raw_backend.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,

    /// Output TSV path.
    #[arg(long)]
    out: PathBuf,

    /// Optional JSON report path (rows plus effective config).
    #[arg(long)]
    report: Option<PathBuf>,

    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Training dataset path.
    #[arg(long)]
    train: PathBuf,

    /// Test dataset path.
    #[arg(long)]
    test: PathBuf,

    /// Dataset task: tc or absc.
    #[arg(long)]
    task: Option<String>,

    /// Optional JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// `--config` file contents: every key mirrors a flag name and overrides the
/// built-in default, while explicit flags override the file.
#[derive(Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    task: Option<String>,
    backend: Option<String>,
    mode: Option<String>,
    k: Option<usize>,
    n: Option<usize>,
    pool_multiplier: Option<usize>,
    include_originals: Option<bool>,
    disable: Option<Vec<String>>,
    scorer: Option<String>,
    scorer_timeout_secs: Option<u64>,
    synonyms: Option<PathBuf>,
    misspellings: Option<PathBuf>,
    transform_prob: Option<f64>,
    max_attempts: Option<usize>,
    protect_aspect: Option<bool>,
    eda_weights: Option<Vec<f64>>,
    confidence_threshold: Option<f64>,
    perplexity_limit: Option<serde_json::Value>,
    perplexity_mode: Option<String>,
    relative_ratio: Option<f64>,
    ngram_order: Option<usize>,
    smoothing_alpha: Option<f64>,
    checkpoint_metric: Option<String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let raw = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fully merged settings for a pipeline run, echoed into reports. The
/// worker count is deliberately absent: outputs are independent of `--jobs`,
/// so it is not part of the reproducibility envelope.
#[derive(Serialize)]
struct EffectiveConfig {
    task: Task,
    scorer: String,
    scorer_timeout_secs: u64,
    synonyms: String,
    misspellings: String,
    run: BoostRunConfig,
}

fn parse_ppl_limit(raw: &str) -> Result<f64> {
    if raw.trim().eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::config(format!("perplexity limit must be a number or \"inf\", got {raw:?}")))
}

fn ppl_limit_from_json(value: &serde_json::Value) -> Result<f64> {
    match value {
        serde_json::Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::config(format!("perplexity-limit out of range: {n}"))),
        serde_json::Value::String(s) => parse_ppl_limit(s),
        other => Err(Error::config(format!(
            "perplexity-limit must be a number or \"inf\", got {other}"
        ))),
    }
}

fn parse_stages(names: &[String]) -> Result<BTreeSet<FilterStage>> {
    names
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse())
        .collect()
}

fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{what} path does not exist: {}",
            path.display()
        )))
    }
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from)
}

/// Lexicon resolved from flag > env > config file > built-in table.
fn resolve_lexicon(
    flag: Option<&Path>,
    env_var: &str,
    file: Option<&Path>,
    builtin: &str,
    what: &str,
) -> Result<(Lexicon, String)> {
    let env = env_path(env_var);
    let chosen = flag.or(env.as_deref()).or(file);
    match chosen {
        Some(path) => {
            require_exists(path, what)?;
            Ok((Lexicon::load(path)?, path.display().to_string()))
        }
        None => Ok((
            Lexicon::parse(builtin, format!("builtin:{what}"))?,
            "builtin".to_string(),
        )),
    }
}

struct ResolvedPipeline {
    run: BoostRunConfig,
    task: Task,
    resources: Resources,
    scorer_text: String,
    scorer_timeout: Duration,
    synonyms_origin: String,
    misspellings_origin: String,
}

impl ResolvedPipeline {
    fn effective(&self) -> EffectiveConfig {
        EffectiveConfig {
            task: self.task,
            scorer: self.scorer_text.clone(),
            scorer_timeout_secs: self.scorer_timeout.as_secs(),
            synonyms: self.synonyms_origin.clone(),
            misspellings: self.misspellings_origin.clone(),
            run: self.run.clone(),
        }
    }

    /// Connects or instantiates the scorer; external scorers need the label
    /// set of the dataset they will judge.
    fn scorer(&self, dataset: &Dataset) -> Result<ScorerSpec> {
        if self.scorer_text == "lightweight" {
            return Ok(ScorerSpec::Lightweight(self.run.surrogate.clone()));
        }
        match ExternalScorerSpec::parse(&self.scorer_text) {
            Some(spec) => {
                let model =
                    connect_external_scorer(&spec, dataset.labels().clone(), self.scorer_timeout)?;
                Ok(ScorerSpec::External(model))
            }
            None => Err(Error::config(format!(
                "unknown scorer {:?}; expected \"lightweight\", \"exec:<command>\", or an http(s) URL",
                self.scorer_text
            ))),
        }
    }
}

/// Merges defaults, config file, environment, and flags into one run config.
fn resolve_pipeline(
    file: &FileConfig,
    args: &PipelineArgs,
    task: Option<&str>,
    mode: Option<&str>,
    n: Option<usize>,
    seed: u64,
) -> Result<ResolvedPipeline> {
    let mut run = BoostRunConfig::default();
    run.seed = seed;

    let task: Task = match task.map(str::to_owned).or_else(|| file.task.clone()) {
        Some(s) => s.parse()?,
        None => Task::Tc,
    };
    if let Some(s) = mode.map(str::to_owned) {
        run.mode = s.parse()?;
    } else if let Some(s) = &file.mode {
        run.mode = s.parse()?;
    }
    if let Some(k) = args.k.or(file.k) {
        run.k = k;
    }
    if let Some(n) = n.or(file.n) {
        run.filter.keep_per_example = n;
    }
    if let Some(m) = args.pool_multiplier.or(file.pool_multiplier) {
        run.pool_multiplier = m;
    }
    if args.no_originals {
        run.include_originals = false;
    } else if let Some(keep) = file.include_originals {
        run.include_originals = keep;
    }

    if let Some(s) = args.backend.clone().or_else(|| file.backend.clone()) {
        run.transform.strategy = s.parse::<Strategy>()?;
    }
    if let Some(p) = args.transform_prob.or(file.transform_prob) {
        run.transform.token_transform_prob = p;
    }
    if let Some(a) = args.max_attempts.or(file.max_attempts) {
        run.transform.max_attempts = a;
    }
    if args.no_protect_aspect {
        run.transform.protect_aspect = false;
    } else if let Some(protect) = file.protect_aspect {
        run.transform.protect_aspect = protect;
    }
    if let Some(w) = args.eda_weights.clone().or_else(|| file.eda_weights.clone()) {
        if w.len() != 4 {
            return Err(Error::config(format!(
                "eda-weights needs 4 values (replace,insert,swap,delete), got {}",
                w.len()
            )));
        }
        run.transform.eda_op_weights.synonym_replace = w[0];
        run.transform.eda_op_weights.random_insert = w[1];
        run.transform.eda_op_weights.random_swap = w[2];
        run.transform.eda_op_weights.random_delete = w[3];
    }

    if let Some(t) = args.confidence_threshold.or(file.confidence_threshold) {
        run.filter.confidence_threshold = t;
    }
    if let Some(raw) = &args.perplexity_limit {
        run.filter.perplexity_limit = parse_ppl_limit(raw)?;
    } else if let Some(value) = &file.perplexity_limit {
        run.filter.perplexity_limit = ppl_limit_from_json(value)?;
    }
    if let Some(s) = args.perplexity_mode.clone().or_else(|| file.perplexity_mode.clone()) {
        run.filter.perplexity_mode = match s.as_str() {
            "absolute" => PerplexityMode::Absolute,
            "relative" => PerplexityMode::Relative,
            other => {
                return Err(Error::config(format!(
                    "unknown perplexity mode {other:?}; expected absolute or relative"
                )))
            }
        };
    }
    if let Some(r) = args.relative_ratio.or(file.relative_ratio) {
        run.filter.relative_ratio = r;
    }
    if let Some(names) = args.disable.as_deref().or(file.disable.as_deref()) {
        let off = parse_stages(names)?;
        for stage in off {
            run.filter.enabled.remove(&stage);
        }
    }

    if let Some(order) = args.ngram_order.or(file.ngram_order) {
        run.surrogate.ngram_order = order;
    }
    if let Some(alpha) = args.smoothing_alpha.or(file.smoothing_alpha) {
        run.surrogate.smoothing_alpha = alpha;
    }
    if let Some(s) = args
        .checkpoint_metric
        .clone()
        .or_else(|| file.checkpoint_metric.clone())
    {
        run.surrogate.checkpoint_metric = s.parse::<CheckpointMetric>()?;
    }

    let (synonyms, synonyms_origin) = resolve_lexicon(
        args.synonyms.as_deref(),
        ENV_SYNONYMS,
        file.synonyms.as_deref(),
        BUILTIN_SYNONYMS,
        "synonyms",
    )?;
    let (misspellings, misspellings_origin) = resolve_lexicon(
        args.misspellings.as_deref(),
        ENV_MISSPELLINGS,
        file.misspellings.as_deref(),
        BUILTIN_MISSPELLINGS,
        "misspellings",
    )?;

    let scorer_text = args
        .scorer
        .clone()
        .or_else(|| file.scorer.clone())
        .unwrap_or_else(|| "lightweight".to_string());
    let scorer_timeout =
        Duration::from_secs(args.scorer_timeout_secs.or(file.scorer_timeout_secs).unwrap_or(30));

    run.validate()?;
    Ok(ResolvedPipeline {
        run,
        task,
        resources: Resources::new(synonyms, misspellings),
        scorer_text,
        scorer_timeout,
        synonyms_origin,
        misspellings_origin,
    })
}

fn load_dataset(path: &Path, task: Task) -> Result<Dataset> {
    require_exists(path, "dataset")?;
    match task {
        Task::Tc => load_tc_dataset(path),
        Task::Absc => load_absc_dataset(path),
    }
}

fn write_file(path: &Path, body: String) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value).expect("report serializes");
    body.push('\n');
    write_file(path, body)
}

#[derive(Serialize)]
struct AugmentReport {
    effective_config: EffectiveConfig,
    run: RunReport,
}

fn cmd_augment(args: &AugmentArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let pipeline = resolve_pipeline(
        file,
        &args.pipeline,
        args.task.as_deref(),
        args.mode.as_deref(),
        args.n,
        seed,
    )?;
    let dataset = load_dataset(&args.input, pipeline.task)?;
    let scorer = pipeline.scorer(&dataset)?;
    let out = augment(&dataset, &pipeline.run, &pipeline.resources, &scorer)?;
    write_dataset(&out.dataset, &args.out)?;
    let report = run_report(&out, &pipeline.run);
    println!(
        "wrote {}: {} examples ({} survivors from {} candidates)",
        args.out.display(),
        out.dataset.len(),
        report.totals.counts.survived,
        report.totals.counts.generated,
    );
    if let Some(path) = &args.report {
        write_json(
            path,
            &AugmentReport {
                effective_config: pipeline.effective(),
                run: report,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseEcho {
    task: Task,
    seed: u64,
    method: String,
    inputs: Vec<(CloudSource, String)>,
}

#[derive(Serialize)]
struct DiagnoseReport {
    effective_config: DiagnoseEcho,
    reports: Vec<ShiftReport>,
}

fn parse_cloud_source(s: &str) -> Result<CloudSource> {
    match s {
        "train" => Ok(CloudSource::Train),
        "test" => Ok(CloudSource::Test),
        "augmented" => Ok(CloudSource::Augmented),
        other => Err(Error::config(format!(
            "unknown cloud label {other:?}; expected train, test, or augmented"
        ))),
    }
}

fn write_points_tsv(path: &Path, clouds: &[PointCloud]) -> Result<()> {
    let mut out = String::from("source\tx\ty\n");
    for cloud in clouds {
        for (x, y) in &cloud.points {
            out.push_str(&format!("{}\t{x}\t{y}\n", cloud.source));
        }
    }
    write_file(path, out)
}

fn cmd_diagnose(args: &DiagnoseArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let task: Task = match args.task.clone().or_else(|| file.task.clone()) {
        Some(s) => s.parse()?,
        None => Task::Tc,
    };
    let method: EmbedMethod = args.method.parse()?;

    let pair = args.a.is_some() || args.b.is_some();
    let triple = args.train.is_some() || args.augmented.is_some() || args.test.is_some();
    let inputs: Vec<(PathBuf, CloudSource)> = match (pair, triple) {
        (true, false) => {
            let (Some(a), Some(b)) = (&args.a, &args.b) else {
                return Err(Error::config("pair mode needs both --a and --b"));
            };
            vec![
                (a.clone(), parse_cloud_source(&args.label_a)?),
                (b.clone(), parse_cloud_source(&args.label_b)?),
            ]
        }
        (false, true) => {
            let (Some(train), Some(augmented), Some(test)) =
                (&args.train, &args.augmented, &args.test)
            else {
                return Err(Error::config(
                    "triple mode needs --train, --augmented, and --test",
                ));
            };
            vec![
                (train.clone(), CloudSource::Train),
                (augmented.clone(), CloudSource::Augmented),
                (test.clone(), CloudSource::Test),
            ]
        }
        _ => {
            return Err(Error::config(
                "pass either --a/--b or --train/--augmented/--test",
            ))
        }
    };

    let mut datasets = Vec::new();
    for (path, _) in &inputs {
        datasets.push(load_dataset(path, task)?);
    }
    let with_sources: Vec<(&Dataset, CloudSource)> = datasets
        .iter()
        .zip(inputs.iter())
        .map(|(ds, (_, source))| (ds, *source))
        .collect();
    let clouds = joint_clouds(&with_sources, method, seed)?;

    let reports = if clouds.len() == 2 {
        vec![shift_report(&clouds[0], &clouds[1])?]
    } else {
        // Test is the reference cloud for both paper-style comparisons.
        vec![
            shift_report(&clouds[2], &clouds[1])?,
            shift_report(&clouds[2], &clouds[0])?,
        ]
    };

    for r in &reports {
        println!(
            "{} vs {}: overlap {:.6}, global skewness {:.6}",
            r.source_b, r.source_a, r.overlap_rate, r.global_skewness
        );
    }
    write_json(
        &args.report,
        &DiagnoseReport {
            effective_config: DiagnoseEcho {
                task,
                seed,
                method: args.method.clone(),
                inputs: inputs
                    .iter()
                    .map(|(p, s)| (*s, p.display().to_string()))
                    .collect(),
            },
            reports,
        },
    )?;
    if let Some(path) = &args.points {
        write_points_tsv(path, &clouds)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepEcho {
    #[serde(flatten)]
    pipeline: EffectiveConfig,
    n_values: Vec<usize>,
    modes: Vec<SweepMode>,
    seeds: Vec<u64>,
}

#[derive(Serialize)]
struct SweepReport {
    effective_config: SweepEcho,
    rows: SweepResult,
}

fn cmd_sweep(args: &SweepArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let pipeline = resolve_pipeline(file, &args.pipeline, args.task.as_deref(), None, None, seed)?;
    let train = load_dataset(&args.train, pipeline.task)?;
    let test = load_dataset(&args.test, pipeline.task)?;
    let scorer = pipeline.scorer(&train)?;

    let modes: Vec<SweepMode> = match &args.modes {
        Some(names) => names
            .iter()
            .map(|s| s.trim().parse())
            .collect::<Result<_>>()?,
        None => vec![
            SweepMode::None,
            SweepMode::RawBackend,
            SweepMode::MonoAug,
            SweepMode::BoostAug,
        ],
    };
    let sweep = SweepConfig {
        n_values: args.n.clone(),
        modes: modes.clone(),
        seeds: (seed..seed + args.seeds).collect(),
    };
    let result = sweep_n(&train, &test, &sweep, &pipeline.run, &pipeline.resources, &scorer)?;
    write_file(&args.out, result.to_tsv())?;
    println!("wrote {}: {} rows", args.out.display(), result.rows.len());
    if let Some(path) = &args.report {
        write_json(
            path,
            &SweepReport {
                effective_config: SweepEcho {
                    pipeline: pipeline.effective(),
                    n_values: sweep.n_values.clone(),
                    modes,
                    seeds: sweep.seeds.clone(),
                },
                rows: result,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalEcho {
    task: Task,
    seed: u64,
    train: String,
    test: String,
}

#[derive(Serialize)]
struct EvalReport {
    effective_config: EvalEcho,
    result: EvalResult,
}

fn cmd_eval(args: &EvalArgs, file: &FileConfig, seed: u64) -> Result<()> {
    let task: Task = match args.task.clone().or_else(|| file.task.clone()) {
        Some(s) => s.parse()?,
        None => Task::Tc,
    };
    let train = load_dataset(&args.train, task)?;
    let test = load_dataset(&args.test, task)?;
    let mut surrogate = SurrogateTrainConfig::default();
    if let Some(order) = file.ngram_order {
        surrogate.ngram_order = order;
    }
    if let Some(alpha) = file.smoothing_alpha {
        surrogate.smoothing_alpha = alpha;
    }
    if let Some(s) = &file.checkpoint_metric {
        surrogate.checkpoint_metric = s.parse::<CheckpointMetric>()?;
    }
    let classifier = train_classifier(&train, &train.empty_like(), &surrogate, seed)?;
    let result = evaluate(&classifier, &test)?;
    println!("accuracy\t{:.6}", result.accuracy);
    println!("macro_f1\t{:.6}", result.macro_f1);
    if let Some(path) = &args.report {
        write_json(
            path,
            &EvalReport {
                effective_config: EvalEcho {
                    task,
                    seed,
                    train: args.train.display().to_string(),
                    test: args.test.display().to_string(),
                },
                result,
            },
        )?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let jobs = cli.jobs.or(file.jobs).unwrap_or(0);
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::config(format!("cannot size the worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Augment(args) => cmd_augment(args, &file, seed),
        Command::Diagnose(args) => cmd_diagnose(args, &file, seed),
        Command::Sweep(args) => cmd_sweep(args, &file, seed),
        Command::Eval(args) => cmd_eval(args, &file, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
