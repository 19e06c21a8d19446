//! Surrogate scorers.
//!
//! A surrogate answers one question per candidate: how plausible is this
//! text (pseudo-perplexity) and how confidently does it belong to each class
//! (a confidence distribution plus the implied predicted label). The filter
//! chain consumes exactly this triple, so anything that can produce it can
//! drive the pipeline: the built-in lightweight scorer trained per fold, or
//! an external process speaking the line-delimited JSON protocol.

mod external;
mod lightweight;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSet;
use crate::error::{Error, Result};

pub use external::{connect_external_scorer, ExecScorer, ExternalScorerSpec, HttpScorer};
pub use lightweight::{
    train_lightweight, CheckpointMetric, LightweightModel, NbClassifier, NgramLm,
    SurrogateTrainConfig, GRID_ALPHAS, GRID_ORDERS,
};

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// One scoring result.
///
/// Invariants, enforced at construction: perplexity is finite and at least
/// 1; confidence entries lie in `[0, 1]` and sum to 1 within 1e-9; the
/// predicted label is the confidence argmax with ties going to the
/// lowest-index label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub perplexity: f64,
    pub confidence: Vec<f64>,
    pub predicted_label: String,
}

impl ScoreTriple {
    pub fn new(perplexity: f64, confidence: Vec<f64>, labels: &LabelSet) -> Result<Self> {
        Self::check(perplexity, &confidence, labels)?;
        let predicted = labels
            .get(argmax_lowest(&confidence))
            .expect("length checked")
            .to_string();
        Ok(ScoreTriple {
            perplexity,
            confidence,
            predicted_label: predicted,
        })
    }

    /// Builds a triple from an externally declared label, verifying that the
    /// label matches the argmax rule.
    pub fn with_declared_label(
        perplexity: f64,
        confidence: Vec<f64>,
        label: &str,
        labels: &LabelSet,
    ) -> Result<Self> {
        let triple = Self::new(perplexity, confidence, labels)?;
        if triple.predicted_label != label {
            return Err(Error::Scorer(format!(
                "declared label {label:?} does not match the confidence argmax {:?}",
                triple.predicted_label
            )));
        }
        Ok(triple)
    }

    fn check(perplexity: f64, confidence: &[f64], labels: &LabelSet) -> Result<()> {
        if !perplexity.is_finite() || perplexity < 1.0 {
            return Err(Error::Scorer(format!(
                "perplexity must be finite and >= 1, got {perplexity}"
            )));
        }
        if confidence.len() != labels.len() {
            return Err(Error::Scorer(format!(
                "confidence has {} entries for {} labels",
                confidence.len(),
                labels.len()
            )));
        }
        for (i, c) in confidence.iter().enumerate() {
            if !c.is_finite() || !(0.0..=1.0).contains(c) {
                return Err(Error::Scorer(format!(
                    "confidence[{i}] must be in [0, 1], got {c}"
                )));
            }
        }
        let sum: f64 = confidence.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Scorer(format!(
                "confidence sums to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(())
    }

    pub fn max_confidence(&self) -> f64 {
        self.confidence[argmax_lowest(&self.confidence)]
    }
}

/// Where a trained surrogate came from: which fold iteration it serves,
/// which example ids it saw, and what the model selection chose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainProvenance {
    pub fold_iteration: Option<usize>,
    pub train_fold_ids: Vec<usize>,
    pub validation_metric: Option<f64>,
    pub selected_order: usize,
    pub selected_alpha: f64,
    pub seed: u64,
}

pub trait SurrogateModel: Send + Sync {
    fn labels(&self) -> &LabelSet;

    /// Scores one text. `aspect` feeds the classifier for aspect-based
    /// tasks; perplexity reads only the text.
    fn score(&self, text: &str, aspect: Option<&str>) -> Result<ScoreTriple>;

    /// Substitution proposals for a token, scored descending. `None` means
    /// this scorer cannot propose (external scorers, unknown tokens).
    fn propose_substitutes(&self, _token: &str) -> Option<Vec<(String, f64)>> {
        None
    }

    fn provenance(&self) -> Option<&TrainProvenance> {
        None
    }
}

/// Pseudo-perplexity of `text` under the model. Reads only the text, so it
/// is invariant to labels and aspects.
pub fn pseudo_perplexity(model: &dyn SurrogateModel, text: &str) -> Result<f64> {
    model.score(text, None).map(|s| s.perplexity)
}

/// Confidence distribution for `text`, aligned with `model.labels()`.
pub fn confidence(
    model: &dyn SurrogateModel,
    text: &str,
    aspect: Option<&str>,
) -> Result<Vec<f64>> {
    model.score(text, aspect).map(|s| s.confidence)
}

/// Scorer that replays a fixed table of triples keyed by exact text.
/// Useful for deterministic pipeline replays and for testing that two
/// scorer transports produce identical downstream results.
pub struct ScriptedScorer {
    labels: LabelSet,
    table: std::collections::HashMap<String, ScoreTriple>,
}

impl ScriptedScorer {
    pub fn new(
        labels: LabelSet,
        entries: impl IntoIterator<Item = (String, ScoreTriple)>,
    ) -> ScriptedScorer {
        ScriptedScorer {
            labels,
            table: entries.into_iter().collect(),
        }
    }
}

impl SurrogateModel for ScriptedScorer {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn score(&self, text: &str, _aspect: Option<&str>) -> Result<ScoreTriple> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| Error::Scorer(format!("no scripted score for {text:?}")))
    }
}

/// How the boost loop obtains its scorer: train the lightweight model per
/// fold iteration, or reuse one externally connected scorer for every
/// iteration (the protocol has no training request).
#[derive(Clone)]
pub enum ScorerSpec {
    Lightweight(SurrogateTrainConfig),
    External(Arc<dyn SurrogateModel>),
}

impl std::fmt::Debug for ScorerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScorerSpec::Lightweight(cfg) => f.debug_tuple("Lightweight").field(cfg).finish(),
            ScorerSpec::External(_) => f.write_str("External(..)"),
        }
    }
}

impl Default for ScorerSpec {
    fn default() -> Self {
        ScorerSpec::Lightweight(SurrogateTrainConfig::default())
    }
}
