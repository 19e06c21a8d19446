//! The augment-to-filter chain.
//!
//! Candidates are scored once, then pass through up to four stages in a
//! fixed order: predicted-label constraint, perplexity gate, confidence
//! ranking down to the per-example budget, and the confidence threshold.
//! Individual stages can be disabled for ablations, but the per-example
//! budget always applies: with ranking disabled, truncation falls back to
//! draw order, so the chain never emits more than `keep_per_example`.
//!
//! Both gates dump on the boundary: a candidate at exactly the perplexity
//! limit or exactly the confidence threshold is removed.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backends::AugmentationCandidate;
use crate::corpus::{Dataset, Example};
use crate::error::{Error, Result};
use crate::surrogate::SurrogateModel;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    Label,
    Perplexity,
    ConfidenceRank,
    ConfidenceThreshold,
}

impl FilterStage {
    pub const ALL: [FilterStage; 4] = [
        FilterStage::Label,
        FilterStage::Perplexity,
        FilterStage::ConfidenceRank,
        FilterStage::ConfidenceThreshold,
    ];
}

impl std::str::FromStr for FilterStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label" => Ok(FilterStage::Label),
            "perplexity" => Ok(FilterStage::Perplexity),
            "confidence_rank" => Ok(FilterStage::ConfidenceRank),
            "confidence_threshold" => Ok(FilterStage::ConfidenceThreshold),
            other => Err(Error::config(format!(
                "unknown filter stage {other:?}; expected label, perplexity, \
                 confidence_rank, or confidence_threshold"
            ))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerplexityMode {
    /// Compare against `perplexity_limit` directly.
    Absolute,
    /// Compare against `relative_ratio` times the median perplexity of the
    /// iteration's training texts under the same scorer.
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub confidence_threshold: f64,
    /// `+inf` disables the absolute cut; serialized as the string `"inf"`.
    #[serde(with = "ppl_limit_serde")]
    pub perplexity_limit: f64,
    pub perplexity_mode: PerplexityMode,
    pub relative_ratio: f64,
    /// The per-example survivor budget, Ñ.
    pub keep_per_example: usize,
    pub enabled: BTreeSet<FilterStage>,
}

/// JSON has no literal for infinity, so the off-switch value round-trips as
/// the string `"inf"`; finite limits stay plain numbers.
mod ppl_limit_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() && *value > 0.0 {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Number(x) => Ok(x),
            Raw::Text(s) if s.trim().eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "perplexity_limit must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            confidence_threshold: 0.99,
            perplexity_limit: 5.0,
            perplexity_mode: PerplexityMode::Absolute,
            relative_ratio: 2.0,
            keep_per_example: 8,
            enabled: FilterStage::ALL.into_iter().collect(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence_threshold)
            || self.confidence_threshold.is_nan()
        {
            return Err(Error::config(format!(
                "confidence_threshold must be in [0, 1], got {}",
                self.confidence_threshold
            )));
        }
        if !(self.perplexity_limit > 0.0) {
            return Err(Error::config(format!(
                "perplexity_limit must be positive, got {}",
                self.perplexity_limit
            )));
        }
        if !(self.relative_ratio > 0.0) {
            return Err(Error::config(format!(
                "relative_ratio must be positive, got {}",
                self.relative_ratio
            )));
        }
        if self.keep_per_example == 0 {
            return Err(Error::config("keep_per_example must be at least 1"));
        }
        Ok(())
    }

    pub fn is_enabled(&self, stage: FilterStage) -> bool {
        self.enabled.contains(&stage)
    }
}

/// Per-stage bookkeeping. `generated` always equals the removals plus
/// `survived`.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub generated: usize,
    pub removed_by_label: usize,
    pub removed_by_perplexity: usize,
    pub removed_by_rank: usize,
    pub removed_by_threshold: usize,
    pub survived: usize,
}

impl StageCounts {
    pub fn removed_total(&self) -> usize {
        self.removed_by_label
            + self.removed_by_perplexity
            + self.removed_by_rank
            + self.removed_by_threshold
    }

    pub fn merge(&mut self, other: &StageCounts) {
        self.generated += other.generated;
        self.removed_by_label += other.removed_by_label;
        self.removed_by_perplexity += other.removed_by_perplexity;
        self.removed_by_rank += other.removed_by_rank;
        self.removed_by_threshold += other.removed_by_threshold;
        self.survived += other.survived;
    }
}

#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub survivors: Vec<AugmentationCandidate>,
    pub counts: StageCounts,
}

fn require_scores(cands: &[AugmentationCandidate]) -> Result<()> {
    for c in cands {
        if c.score.is_none() {
            return Err(Error::Unscored {
                origin_id: c.origin_id,
                draw_index: c.draw_index,
            });
        }
    }
    Ok(())
}

/// Keeps candidates whose predicted label equals the origin's ground truth.
/// Order preserved.
pub fn apply_label_constraint(
    cands: Vec<AugmentationCandidate>,
    truth: &str,
) -> Result<Vec<AugmentationCandidate>> {
    require_scores(&cands)?;
    Ok(cands
        .into_iter()
        .filter(|c| c.predicted_label() == Some(truth))
        .collect())
}

/// Keeps candidates strictly below the effective perplexity limit; a
/// candidate at or above the limit is dumped. Relative mode scales the
/// supplied training-median perplexity by `relative_ratio`.
pub fn apply_perplexity_filter(
    cands: Vec<AugmentationCandidate>,
    config: &FilterConfig,
    training_median: Option<f64>,
) -> Result<Vec<AugmentationCandidate>> {
    require_scores(&cands)?;
    let limit = match config.perplexity_mode {
        PerplexityMode::Absolute => config.perplexity_limit,
        PerplexityMode::Relative => {
            config.relative_ratio * training_median.ok_or(Error::MissingMedian)?
        }
    };
    Ok(cands
        .into_iter()
        .filter(|c| c.perplexity().expect("scored") < limit)
        .collect())
}

/// Sorts by max confidence descending (ties: lower perplexity, then draw
/// order) and truncates to `keep`.
pub fn confidence_rank(
    cands: Vec<AugmentationCandidate>,
    keep: usize,
) -> Result<Vec<AugmentationCandidate>> {
    require_scores(&cands)?;
    let mut ranked = cands;
    ranked.sort_by(|a, b| {
        let ca = a.max_confidence().expect("scored");
        let cb = b.max_confidence().expect("scored");
        cb.partial_cmp(&ca)
            .expect("confidence is finite")
            .then_with(|| {
                let pa = a.perplexity().expect("scored");
                let pb = b.perplexity().expect("scored");
                pa.partial_cmp(&pb).expect("perplexity is finite")
            })
            .then_with(|| a.draw_index.cmp(&b.draw_index))
    });
    ranked.truncate(keep);
    Ok(ranked)
}

/// Keeps candidates whose max confidence is strictly above the threshold;
/// a candidate at the threshold is dumped.
pub fn apply_confidence_threshold(
    cands: Vec<AugmentationCandidate>,
    config: &FilterConfig,
) -> Result<Vec<AugmentationCandidate>> {
    require_scores(&cands)?;
    Ok(cands
        .into_iter()
        .filter(|c| c.max_confidence().expect("scored") > config.confidence_threshold)
        .collect())
}

/// Median pseudo-perplexity of a dataset's texts under `model`; the
/// reference point for relative perplexity filtering.
pub fn training_median_perplexity(model: &dyn SurrogateModel, dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::config(
            "median perplexity needs a non-empty dataset",
        ));
    }
    let mut ppls = Vec::with_capacity(dataset.len());
    for ex in dataset.examples() {
        ppls.push(model.score(&ex.text, None)?.perplexity);
    }
    ppls.sort_by(|a, b| a.partial_cmp(b).expect("perplexities are finite"));
    let n = ppls.len();
    Ok(if n % 2 == 1 {
        ppls[n / 2]
    } else {
        (ppls[n / 2 - 1] + ppls[n / 2]) / 2.0
    })
}

/// Runs the full chain for one example's candidate pool and reports
/// per-stage counts.
///
/// Candidates that already carry a score are not re-scored, so scripted
/// triples pass through untouched. `training_median` is only consulted in
/// relative perplexity mode.
pub fn filter_chain_detailed(
    example: &Example,
    raw_cands: Vec<AugmentationCandidate>,
    model: &dyn SurrogateModel,
    config: &FilterConfig,
    training_median: Option<f64>,
) -> Result<FilterOutcome> {
    config.validate()?;
    let mut cands = raw_cands;
    for c in &mut cands {
        if c.score.is_none() {
            let triple = model
                .score(&c.text, example.aspect.as_deref())
                .map_err(|e| Error::CandidateScoring {
                    origin_id: c.origin_id,
                    draw_index: c.draw_index,
                    source: Box::new(e),
                })?;
            c.score = Some(triple);
        }
    }
    let mut counts = StageCounts {
        generated: cands.len(),
        ..StageCounts::default()
    };
    if config.is_enabled(FilterStage::Label) {
        let before = cands.len();
        cands = apply_label_constraint(cands, &example.label)?;
        counts.removed_by_label = before - cands.len();
    }
    if config.is_enabled(FilterStage::Perplexity) {
        let before = cands.len();
        cands = apply_perplexity_filter(cands, config, training_median)?;
        counts.removed_by_perplexity = before - cands.len();
    }
    {
        let before = cands.len();
        if config.is_enabled(FilterStage::ConfidenceRank) {
            cands = confidence_rank(cands, config.keep_per_example)?;
        } else {
            cands.truncate(config.keep_per_example);
        }
        counts.removed_by_rank = before - cands.len();
    }
    if config.is_enabled(FilterStage::ConfidenceThreshold) {
        let before = cands.len();
        cands = apply_confidence_threshold(cands, config)?;
        counts.removed_by_threshold = before - cands.len();
    }
    counts.survived = cands.len();
    Ok(FilterOutcome {
        survivors: cands,
        counts,
    })
}

/// [`filter_chain_detailed`] without the bookkeeping.
pub fn filter_chain(
    example: &Example,
    raw_cands: Vec<AugmentationCandidate>,
    model: &dyn SurrogateModel,
    config: &FilterConfig,
    training_median: Option<f64>,
) -> Result<Vec<AugmentationCandidate>> {
    filter_chain_detailed(example, raw_cands, model, config, training_median)
        .map(|outcome| outcome.survivors)
}
