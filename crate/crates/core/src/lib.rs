//! Augment-to-filter text augmentation.
//!
//! The pipeline generates noisy augmentation candidates with cheap surface
//! backends, scores every candidate with a surrogate classifier and language
//! model, and keeps only candidates that survive a label-consistency check, a
//! perplexity gate, confidence ranking, and a confidence threshold. Cross
//! boosting trains one surrogate per fold iteration so no example is ever
//! filtered by a surrogate that saw it during training; mono boosting trains a
//! single surrogate on the full training set and is kept as an ablation.
//!
//! The crate is organised around the pipeline stages:
//!
//! - [`corpus`]: dataset loading, fold planning, serialization
//! - [`backends`]: candidate generation (EDA ops, misspellings, splits,
//!   embedding-neighbour substitution)
//! - [`surrogate`]: the scorer trait, the self-contained lightweight scorer,
//!   and the external scorer protocol client
//! - [`filters`]: the augment-to-filter chain
//! - [`boost`]: fold orchestration and provenance
//! - [`shiftmetrics`]: convex-hull overlap and skewness diagnostics
//! - [`evalharness`]: downstream evaluation and sweeps
//!
//! Every run is reproducible: all randomness flows from caller-supplied seeds
//! through per-example derived streams, and reports serialize with stable
//! field and row order.

pub mod backends;
pub mod boost;
pub mod corpus;
mod error;
pub mod evalharness;
pub mod filters;
mod seeding;
pub mod shiftmetrics;
pub mod surrogate;

pub use backends::{
    detokenize, generate, tokenize, AugmentationCandidate, EdaOpWeights, Lexicon, Resources,
    Strategy, TransformConfig,
};
pub use boost::{
    augment, boost_augment, mono_augment, run_report, AugmentedDataset, BoostMode,
    BoostRunConfig, IterationReport, IterationStats, ProvenanceRecord, ReportTotals, RunReport,
};
pub use corpus::{
    load_absc_dataset, load_tc_dataset, make_fold_plan, write_dataset, Dataset, Example, FoldPlan,
    FoldRoles, LabelSet, Task, TokenSpan,
};
pub use error::{Error, Result};
pub use evalharness::{
    accuracy_of, evaluate, macro_f1_of, per_class_f1_of, sweep_n, train_classifier, Classifier,
    EvalResult, SweepConfig, SweepMode, SweepResult, SweepRow,
};
pub use filters::{
    apply_confidence_threshold, apply_label_constraint, apply_perplexity_filter, confidence_rank,
    filter_chain, filter_chain_detailed, training_median_perplexity, FilterConfig, FilterOutcome,
    FilterStage, PerplexityMode, StageCounts,
};
pub use shiftmetrics::{
    convex_hull, embed_2d, embed_2d_with, feature_vectors, global_skewness, hull_overlap_rate,
    joint_clouds, polygon_area, shift_report, skewness, CloudSource, ConvexPolygon, EmbedMethod,
    Embedder, Featurizer, PointCloud, ShiftReport, Skewness,
};
pub use surrogate::{
    confidence, connect_external_scorer, pseudo_perplexity, train_lightweight, CheckpointMetric,
    ExternalScorerSpec, LightweightModel, ScoreTriple, ScorerSpec, ScriptedScorer,
    SurrogateModel, SurrogateTrainConfig, TrainProvenance,
};
