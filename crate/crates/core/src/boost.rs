//! Cross-boosting orchestration.
//!
//! A boost run splits the training set into k folds and walks them: in
//! iteration i, fold i is the boost fold, one seeded-drawn fold is held out
//! for surrogate checkpoint selection, and the remaining k−2 folds train the
//! surrogate. Each boost-fold example generates a candidate pool and the
//! surrogate filters it — so no example is ever judged by a model that saw
//! it during training. The mono variant drops the fold machinery and filters
//! everything with one surrogate trained on the full set.
//!
//! Candidate generation streams are keyed by (run seed, example id) only, so
//! cross and mono runs draw identical pools for every example; when the two
//! modes score identically, their survivor sets match exactly.
//!
//! Iterations run in parallel and examples fan out within each iteration;
//! output order is canonicalized afterwards, so results are independent of
//! the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{
    detokenize, find_token_subsequence, generate, tokenize, AugmentationCandidate, Resources,
    Strategy, TransformConfig,
};
use crate::corpus::{make_fold_plan, Dataset, Example, Task, TokenSpan};
use crate::error::{Error, Result};
use crate::filters::{filter_chain_detailed, training_median_perplexity, FilterConfig,
    FilterStage, PerplexityMode, StageCounts};
use crate::seeding::{self, STREAM_SURROGATE};
use crate::surrogate::{
    train_lightweight, ScoreTriple, ScorerSpec, SurrogateModel, TrainProvenance,
    SurrogateTrainConfig,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostMode {
    Cross,
    Mono,
}

impl std::fmt::Display for BoostMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoostMode::Cross => "cross",
            BoostMode::Mono => "mono",
        })
    }
}

impl std::str::FromStr for BoostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross" => Ok(BoostMode::Cross),
            "mono" => Ok(BoostMode::Mono),
            other => Err(Error::config(format!(
                "unknown boost mode {other:?}; expected cross or mono"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostRunConfig {
    pub k: usize,
    pub seed: u64,
    pub transform: TransformConfig,
    pub filter: FilterConfig,
    pub surrogate: SurrogateTrainConfig,
    pub mode: BoostMode,
    /// Candidate pool size per example, in units of `keep_per_example`.
    pub pool_multiplier: usize,
    pub include_originals: bool,
}

impl Default for BoostRunConfig {
    fn default() -> Self {
        BoostRunConfig {
            k: 5,
            seed: 0,
            transform: TransformConfig::default(),
            filter: FilterConfig::default(),
            surrogate: SurrogateTrainConfig::default(),
            mode: BoostMode::Cross,
            pool_multiplier: 2,
            include_originals: true,
        }
    }
}

impl BoostRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == BoostMode::Cross && self.k <= 3 {
            return Err(Error::config(format!(
                "cross boosting needs k > 3 folds, got k = {}",
                self.k
            )));
        }
        if self.pool_multiplier == 0 {
            return Err(Error::config("pool_multiplier must be at least 1"));
        }
        self.transform.validate()?;
        self.filter.validate()?;
        self.surrogate.validate()
    }

    fn pool_size(&self) -> Result<usize> {
        self.pool_multiplier
            .checked_mul(self.filter.keep_per_example)
            .ok_or_else(|| Error::config("pool_multiplier * keep_per_example overflows"))
    }
}

/// Per-iteration record: which folds played which role, what the surrogate
/// saw, and the filter counts. `train_example_ids` are ids in the input
/// dataset; the no-overlap guarantee is checked against them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub boost_fold: Option<usize>,
    pub validation_fold: Option<usize>,
    pub train_example_ids: Vec<usize>,
    pub surrogate: Option<TrainProvenance>,
    pub counts: StageCounts,
}

/// Links an output example back to its origin and the iteration that scored
/// it. `output_id` indexes [`AugmentedDataset::dataset`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub output_id: usize,
    pub origin_id: usize,
    pub backend: Strategy,
    pub fold_iteration: usize,
    pub draw_index: usize,
    pub score: ScoreTriple,
}

#[derive(Clone, Debug)]
pub struct AugmentedDataset {
    pub dataset: Dataset,
    pub provenance: Vec<ProvenanceRecord>,
    pub iterations: Vec<IterationStats>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub boost_fold: Option<usize>,
    pub validation_fold: Option<usize>,
    pub validation_metric: Option<f64>,
    pub selected_order: Option<usize>,
    pub selected_alpha: Option<f64>,
    pub counts: StageCounts,
    pub survivor_rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportTotals {
    pub counts: StageCounts,
    pub survivor_rate: f64,
    pub output_examples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config_echo: BoostRunConfig,
    pub per_iteration: Vec<IterationReport>,
    pub totals: ReportTotals,
}

fn survivor_rate(counts: &StageCounts) -> f64 {
    if counts.generated == 0 {
        0.0
    } else {
        counts.survived as f64 / counts.generated as f64
    }
}

/// Summarizes a completed run for the JSON report artifact.
pub fn run_report(run: &AugmentedDataset, config: &BoostRunConfig) -> RunReport {
    let per_iteration: Vec<IterationReport> = run
        .iterations
        .iter()
        .map(|it| IterationReport {
            iteration: it.iteration,
            boost_fold: it.boost_fold,
            validation_fold: it.validation_fold,
            validation_metric: it.surrogate.as_ref().and_then(|p| p.validation_metric),
            selected_order: it.surrogate.as_ref().map(|p| p.selected_order),
            selected_alpha: it.surrogate.as_ref().map(|p| p.selected_alpha),
            counts: it.counts,
            survivor_rate: survivor_rate(&it.counts),
        })
        .collect();
    let mut totals = StageCounts::default();
    for it in &run.iterations {
        totals.merge(&it.counts);
    }
    RunReport {
        config_echo: config.clone(),
        per_iteration,
        totals: ReportTotals {
            counts: totals,
            survivor_rate: survivor_rate(&totals),
            output_examples: run.dataset.len(),
        },
    }
}

fn check_task_config(dataset: &Dataset, config: &BoostRunConfig) -> Result<()> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::config("cannot augment an empty dataset"));
    }
    if dataset.task() == Task::Absc && !config.transform.protect_aspect {
        return Err(Error::config(
            "aspect-based datasets require protect_aspect = true",
        ));
    }
    Ok(())
}

struct IterationInput<'a> {
    iteration: usize,
    boost_fold: Option<usize>,
    validation_fold: Option<usize>,
    boost_ids: Vec<usize>,
    train_ids: Vec<usize>,
    valid_ids: Vec<usize>,
    train_folds: Vec<usize>,
    dataset: &'a Dataset,
    config: &'a BoostRunConfig,
    resources: &'a Resources,
    scorer: &'a ScorerSpec,
}

struct IterationOutput {
    stats: IterationStats,
    survivors: Vec<AugmentationCandidate>,
}

fn run_iteration(input: IterationInput<'_>) -> Result<IterationOutput> {
    let IterationInput {
        iteration,
        boost_fold,
        validation_fold,
        boost_ids,
        train_ids,
        valid_ids,
        train_folds,
        dataset,
        config,
        resources,
        scorer,
    } = input;

    for label in dataset.labels().iter() {
        let covered = train_ids
            .iter()
            .any(|&id| dataset.get(id).expect("plan ids in range").label == label);
        if !covered {
            return Err(if boost_fold.is_some() {
                Error::FoldMissingLabel {
                    iteration,
                    folds: train_folds.clone(),
                    label: label.to_string(),
                }
            } else {
                Error::MissingLabel {
                    label: label.to_string(),
                }
            });
        }
    }

    let train_subset = dataset.subset(&train_ids)?;
    let model: Arc<dyn SurrogateModel> = match scorer {
        ScorerSpec::Lightweight(train_config) => {
            let valid_subset = if valid_ids.is_empty() {
                dataset.empty_like()
            } else {
                dataset.subset(&valid_ids)?
            };
            let seed = seeding::mix(&[config.seed, STREAM_SURROGATE, iteration as u64]);
            let mut model = train_lightweight(&train_subset, &valid_subset, train_config, seed)?;
            model.set_fold_context(iteration, train_ids.clone());
            Arc::new(model)
        }
        ScorerSpec::External(model) => Arc::clone(model),
    };

    let needs_median = config.filter.perplexity_mode == PerplexityMode::Relative
        && config.filter.is_enabled(FilterStage::Perplexity);
    let median = if needs_median {
        Some(training_median_perplexity(model.as_ref(), &train_subset)?)
    } else {
        None
    };

    let pool_size = config.pool_size()?;
    let outcomes: Vec<(Vec<AugmentationCandidate>, StageCounts)> = boost_ids
        .par_iter()
        .map(|&id| {
            let example = dataset.get(id).expect("plan ids in range");
            let mut pool = generate(
                example,
                pool_size,
                &config.transform,
                resources,
                Some(model.as_ref()),
                config.seed,
            )?;
            for cand in &mut pool {
                cand.fold_iteration = iteration;
            }
            let outcome =
                filter_chain_detailed(example, pool, model.as_ref(), &config.filter, median)?;
            Ok((outcome.survivors, outcome.counts))
        })
        .collect::<Result<_>>()?;

    let mut counts = StageCounts::default();
    let mut survivors = Vec::new();
    for (kept, example_counts) in outcomes {
        counts.merge(&example_counts);
        survivors.extend(kept);
    }

    Ok(IterationOutput {
        stats: IterationStats {
            iteration,
            boost_fold,
            validation_fold,
            train_example_ids: train_ids,
            surrogate: model.provenance().cloned(),
            counts,
        },
        survivors,
    })
}

/// Turns surviving candidates into examples and assembles the output
/// dataset in canonical order: ascending origin id, the original first
/// (when kept), then its candidates in draw order.
fn assemble(
    dataset: &Dataset,
    mut survivors: Vec<AugmentationCandidate>,
    iterations: Vec<IterationStats>,
    include_originals: bool,
) -> Result<AugmentedDataset> {
    survivors.sort_by_key(|c| (c.origin_id, c.draw_index));
    let mut examples = Vec::new();
    let mut provenance = Vec::new();
    let mut next = survivors.into_iter().peekable();
    for origin in dataset.examples() {
        if include_originals {
            let mut copy = origin.clone();
            copy.id = examples.len();
            examples.push(copy);
        }
        while next.peek().is_some_and(|c| c.origin_id == origin.id) {
            let cand = next.next().expect("peeked");
            let output_id = examples.len();
            let (aspect, aspect_span) = match &origin.aspect {
                None => (None, None),
                Some(raw) => {
                    let aspect_tokens = tokenize(raw);
                    let text_tokens = tokenize(&cand.text);
                    let start = find_token_subsequence(&text_tokens, &aspect_tokens)
                        .ok_or_else(|| Error::AspectLost {
                            origin_id: origin.id,
                            aspect: raw.clone(),
                        })?;
                    let span = TokenSpan {
                        start,
                        end: start + aspect_tokens.len(),
                    };
                    // Candidate text is token-normalized, so the stored
                    // aspect must be as well or spans will not round-trip.
                    (Some(detokenize(&aspect_tokens)), Some(span))
                }
            };
            examples.push(Example {
                id: output_id,
                text: cand.text,
                label: origin.label.clone(),
                aspect,
                aspect_span,
            });
            provenance.push(ProvenanceRecord {
                output_id,
                origin_id: cand.origin_id,
                backend: cand.backend,
                fold_iteration: cand.fold_iteration,
                draw_index: cand.draw_index,
                score: cand.score.expect("survivors are scored"),
            });
        }
    }
    let dataset = Dataset::new(dataset.task(), examples, dataset.labels().clone())?;
    Ok(AugmentedDataset {
        dataset,
        provenance,
        iterations,
    })
}

/// Runs k-fold cross-boosting over `dataset`.
pub fn boost_augment(
    dataset: &Dataset,
    config: &BoostRunConfig,
    resources: &Resources,
    scorer: &ScorerSpec,
) -> Result<AugmentedDataset> {
    check_task_config(dataset, config)?;
    let plan = make_fold_plan(dataset, config.k, config.seed)?;
    let outputs: Vec<IterationOutput> = plan
        .iterations()
        .par_iter()
        .enumerate()
        .map(|(iteration, roles)| {
            run_iteration(IterationInput {
                iteration,
                boost_fold: Some(roles.boost_fold),
                validation_fold: Some(roles.validation_fold),
                boost_ids: plan.fold_members(roles.boost_fold),
                train_ids: plan.members_of(&roles.train_folds),
                valid_ids: plan.fold_members(roles.validation_fold),
                train_folds: roles.train_folds.clone(),
                dataset,
                config,
                resources,
                scorer,
            })
            .map_err(|e| match e {
                e @ Error::FoldMissingLabel { .. } => e,
                other => Error::Iteration {
                    iteration,
                    source: Box::new(other),
                },
            })
        })
        .collect::<Result<_>>()?;

    let mut survivors = Vec::new();
    let mut iterations = Vec::with_capacity(outputs.len());
    for output in outputs {
        survivors.extend(output.survivors);
        iterations.push(output.stats);
    }
    assemble(dataset, survivors, iterations, config.include_originals)
}

/// The ablation without cross-boosting: one surrogate trained on the full
/// set filters candidates for all of its own training examples.
pub fn mono_augment(
    dataset: &Dataset,
    config: &BoostRunConfig,
    resources: &Resources,
    scorer: &ScorerSpec,
) -> Result<AugmentedDataset> {
    check_task_config(dataset, config)?;
    if config.k != BoostRunConfig::default().k {
        log::warn!("mono mode ignores the fold count (k = {})", config.k);
    }
    let all_ids: Vec<usize> = (0..dataset.len()).collect();
    let output = run_iteration(IterationInput {
        iteration: 0,
        boost_fold: None,
        validation_fold: None,
        boost_ids: all_ids.clone(),
        train_ids: all_ids,
        valid_ids: Vec::new(),
        train_folds: Vec::new(),
        dataset,
        config,
        resources,
        scorer,
    })?;
    assemble(
        dataset,
        output.survivors,
        vec![output.stats],
        config.include_originals,
    )
}

/// Dispatches on `config.mode`.
pub fn augment(
    dataset: &Dataset,
    config: &BoostRunConfig,
    resources: &Resources,
    scorer: &ScorerSpec,
) -> Result<AugmentedDataset> {
    match config.mode {
        BoostMode::Cross => boost_augment(dataset, config, resources, scorer),
        BoostMode::Mono => mono_augment(dataset, config, resources, scorer),
    }
}
