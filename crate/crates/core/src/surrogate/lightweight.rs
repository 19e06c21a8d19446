//! Self-contained surrogate: an additively smoothed n-gram language model
//! for pseudo-perplexity, a multinomial naive Bayes classifier for
//! confidence, and a co-occurrence neighbour table for substitution
//! proposals. Fits in milliseconds on desk-scale corpora and stands behind
//! the same contract as an external transformer scorer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::backends::tokenize;
use crate::corpus::{Dataset, LabelSet};
use crate::error::{Error, Result};
use crate::evalharness::{accuracy_of, macro_f1_of};
use crate::surrogate::{argmax_lowest, ScoreTriple, SurrogateModel, TrainProvenance};

/// Grid searched during checkpoint selection.
pub const GRID_ORDERS: [usize; 3] = [1, 2, 3];
pub const GRID_ALPHAS: [f64; 3] = [0.1, 0.5, 1.0];

const COOC_WINDOW: usize = 2;
const PROPOSAL_LIMIT: usize = 10;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointMetric {
    Accuracy,
    MacroF1,
}

impl std::fmt::Display for CheckpointMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckpointMetric::Accuracy => "accuracy",
            CheckpointMetric::MacroF1 => "macro_f1",
        })
    }
}

impl std::str::FromStr for CheckpointMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(CheckpointMetric::Accuracy),
            "macro_f1" => Ok(CheckpointMetric::MacroF1),
            other => Err(Error::config(format!(
                "unknown checkpoint metric {other:?}; expected accuracy or macro_f1"
            ))),
        }
    }
}

/// Surrogate training settings. The optimizer fields (`learning_rate`,
/// `batch_size`, `max_sequence_length`, `l2_lambda`, `max_epochs`) are
/// pass-through values for external scorers and config echo; the lightweight
/// scorer consumes `ngram_order` and `smoothing_alpha` as its fallback
/// hyperparameters when no validation fold is available, plus
/// `checkpoint_metric` for grid selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_sequence_length: usize,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    pub checkpoint_metric: CheckpointMetric,
    pub ngram_order: usize,
    pub smoothing_alpha: f64,
}

impl Default for SurrogateTrainConfig {
    fn default() -> Self {
        SurrogateTrainConfig {
            learning_rate: 1e-5,
            batch_size: 16,
            max_sequence_length: 80,
            l2_lambda: 1e-8,
            max_epochs: 10,
            checkpoint_metric: CheckpointMetric::Accuracy,
            ngram_order: 2,
            smoothing_alpha: 1.0,
        }
    }
}

impl SurrogateTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if self.max_sequence_length == 0 {
            return Err(Error::config("max_sequence_length must be positive"));
        }
        if !(self.l2_lambda > 0.0) || !self.l2_lambda.is_finite() {
            return Err(Error::config("l2_lambda must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be positive"));
        }
        if !GRID_ORDERS.contains(&self.ngram_order) {
            return Err(Error::config(format!(
                "ngram_order must be 1, 2, or 3, got {}",
                self.ngram_order
            )));
        }
        if !(self.smoothing_alpha > 0.0) || !self.smoothing_alpha.is_finite() {
            return Err(Error::config("smoothing_alpha must be positive"));
        }
        Ok(())
    }
}

const BOS: u32 = 0;
const EOS: u32 = 1;
const UNK: u32 = 2;
const WORD_BASE: u32 = 3;

#[derive(Clone, Debug, Default)]
struct ContextCounts {
    total: u64,
    events: HashMap<u32, u64>,
}

/// Additively smoothed n-gram language model with begin/end markers and an
/// OOV token. The smoothing event space is the training vocabulary plus the
/// end marker and the OOV token.
#[derive(Clone, Debug)]
pub struct NgramLm {
    order: usize,
    alpha: f64,
    vocab: HashMap<String, u32>,
    counts: HashMap<Vec<u32>, ContextCounts>,
}

impl NgramLm {
    pub fn fit(sentences: &[Vec<String>], order: usize, alpha: f64) -> Result<NgramLm> {
        if !GRID_ORDERS.contains(&order) {
            return Err(Error::config(format!("ngram order must be 1..=3, got {order}")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::config("smoothing alpha must be positive"));
        }
        let mut vocab: HashMap<String, u32> = HashMap::new();
        for sentence in sentences {
            for token in sentence {
                let next = WORD_BASE + vocab.len() as u32;
                vocab.entry(token.clone()).or_insert(next);
            }
        }
        let mut counts: HashMap<Vec<u32>, ContextCounts> = HashMap::new();
        for sentence in sentences {
            let padded = Self::pad(sentence, order, &vocab);
            for i in (order - 1)..padded.len() {
                let context = padded[i + 1 - order..i].to_vec();
                let slot = counts.entry(context).or_default();
                slot.total += 1;
                *slot.events.entry(padded[i]).or_insert(0) += 1;
            }
        }
        Ok(NgramLm {
            order,
            alpha,
            vocab,
            counts,
        })
    }

    fn pad(sentence: &[String], order: usize, vocab: &HashMap<String, u32>) -> Vec<u32> {
        let mut padded = vec![BOS; order - 1];
        padded.extend(
            sentence
                .iter()
                .map(|t| vocab.get(t).copied().unwrap_or(UNK)),
        );
        padded.push(EOS);
        padded
    }

    /// Vocabulary size plus the two predictable specials (end marker, OOV).
    pub fn effective_vocab(&self) -> usize {
        self.vocab.len() + 2
    }

    /// exp of the negative mean log conditional probability over the token
    /// events plus the end marker.
    pub fn pseudo_perplexity(&self, tokens: &[String]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let padded = Self::pad(tokens, self.order, &self.vocab);
        let v = self.effective_vocab() as f64;
        let mut log_sum = 0.0;
        let mut events = 0usize;
        for i in (self.order - 1)..padded.len() {
            let context = &padded[i + 1 - self.order..i];
            let (count, total) = match self.counts.get(context) {
                Some(c) => (c.events.get(&padded[i]).copied().unwrap_or(0), c.total),
                None => (0, 0),
            };
            let p = (count as f64 + self.alpha) / (total as f64 + self.alpha * v);
            log_sum += p.ln();
            events += 1;
        }
        Ok((-log_sum / events as f64).exp())
    }
}

/// Multinomial naive Bayes over token counts with additive smoothing; priors
/// from class document frequencies; OOV tokens share one smoothed event.
#[derive(Clone, Debug)]
pub struct NbClassifier {
    alpha: f64,
    vocab: HashMap<String, usize>,
    class_docs: Vec<u64>,
    class_tokens: Vec<u64>,
    word_counts: Vec<HashMap<usize, u64>>,
    n_docs: u64,
}

impl NbClassifier {
    pub fn fit(docs: &[(Vec<String>, usize)], labels: &LabelSet, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::config("smoothing alpha must be positive"));
        }
        let c = labels.len();
        let mut vocab: HashMap<String, usize> = HashMap::new();
        let mut class_docs = vec![0u64; c];
        let mut class_tokens = vec![0u64; c];
        let mut word_counts: Vec<HashMap<usize, u64>> = vec![HashMap::new(); c];
        for (tokens, label) in docs {
            class_docs[*label] += 1;
            for token in tokens {
                let next = vocab.len();
                let id = *vocab.entry(token.clone()).or_insert(next);
                class_tokens[*label] += 1;
                *word_counts[*label].entry(id).or_insert(0) += 1;
            }
        }
        for (idx, &n) in class_docs.iter().enumerate() {
            if n == 0 {
                return Err(Error::MissingLabel {
                    label: labels.get(idx).expect("index in range").to_string(),
                });
            }
        }
        Ok(NbClassifier {
            alpha,
            vocab,
            class_docs,
            class_tokens,
            word_counts,
            n_docs: docs.len() as u64,
        })
    }

    /// Normalized class posterior for a bag of tokens.
    pub fn posterior(&self, tokens: &[String]) -> Vec<f64> {
        let c = self.class_docs.len();
        let v = (self.vocab.len() + 1) as f64;
        let mut log_post = vec![0.0f64; c];
        for (cls, lp) in log_post.iter_mut().enumerate() {
            *lp = (self.class_docs[cls] as f64 / self.n_docs as f64).ln();
            let denom = self.class_tokens[cls] as f64 + self.alpha * v;
            for token in tokens {
                let count = self
                    .vocab
                    .get(token)
                    .and_then(|id| self.word_counts[cls].get(id))
                    .copied()
                    .unwrap_or(0);
                *lp += ((count as f64 + self.alpha) / denom).ln();
            }
        }
        let m = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = log_post.iter().map(|lp| (lp - m).exp()).collect();
        let sum: f64 = out.iter().sum();
        for p in &mut out {
            *p /= sum;
        }
        out
    }
}

/// Token co-occurrence profiles within a two-token window, kept as exact
/// integer counts keyed by (side, neighbour). Similarity is the cosine of
/// two profiles, computed from integer dot products so equal profiles
/// compare equal across runs and platforms.
#[derive(Clone, Debug)]
pub struct CoocNeighbors {
    profiles: HashMap<String, HashMap<(bool, u32), u64>>,
    vocab_sorted: Vec<String>,
}

impl CoocNeighbors {
    pub fn fit(sentences: &[Vec<String>]) -> CoocNeighbors {
        let mut ids: HashMap<String, u32> = HashMap::new();
        for sentence in sentences {
            for token in sentence {
                let next = ids.len() as u32;
                ids.entry(token.clone()).or_insert(next);
            }
        }
        let mut profiles: HashMap<String, HashMap<(bool, u32), u64>> = HashMap::new();
        for sentence in sentences {
            for (i, token) in sentence.iter().enumerate() {
                let profile = profiles.entry(token.clone()).or_default();
                for offset in 1..=COOC_WINDOW {
                    if i >= offset {
                        let id = ids[&sentence[i - offset]];
                        *profile.entry((false, id)).or_insert(0) += 1;
                    }
                    if i + offset < sentence.len() {
                        let id = ids[&sentence[i + offset]];
                        *profile.entry((true, id)).or_insert(0) += 1;
                    }
                }
            }
        }
        let mut vocab_sorted: Vec<String> = profiles.keys().cloned().collect();
        vocab_sorted.sort_unstable();
        CoocNeighbors {
            profiles,
            vocab_sorted,
        }
    }

    fn dot(a: &HashMap<(bool, u32), u64>, b: &HashMap<(bool, u32), u64>) -> u128 {
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        small
            .iter()
            .filter_map(|(k, &va)| large.get(k).map(|&vb| va as u128 * vb as u128))
            .sum()
    }

    /// Top neighbours of `token` by profile cosine, descending, ties broken
    /// lexicographically. `None` for tokens outside the training vocabulary.
    pub fn propose(&self, token: &str, limit: usize) -> Option<Vec<(String, f64)>> {
        let target = self.profiles.get(token)?;
        let target_norm = Self::dot(target, target);
        if target_norm == 0 {
            return Some(Vec::new());
        }
        let mut sims: Vec<(String, f64)> = Vec::new();
        for other in &self.vocab_sorted {
            if other == token {
                continue;
            }
            let profile = &self.profiles[other];
            let dot = Self::dot(target, profile);
            if dot == 0 {
                continue;
            }
            let norm = Self::dot(profile, profile);
            let sim = dot as f64 / ((target_norm as f64).sqrt() * (norm as f64).sqrt());
            sims.push((other.clone(), sim));
        }
        sims.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("cosines are finite")
                .then_with(|| a.0.cmp(&b.0))
        });
        sims.truncate(limit);
        Some(sims)
    }
}

/// The trained lightweight surrogate.
#[derive(Clone, Debug)]
pub struct LightweightModel {
    labels: LabelSet,
    lm: NgramLm,
    nb: NbClassifier,
    cooc: CoocNeighbors,
    provenance: TrainProvenance,
}

impl LightweightModel {
    pub(crate) fn set_fold_context(&mut self, iteration: usize, train_fold_ids: Vec<usize>) {
        self.provenance.fold_iteration = Some(iteration);
        self.provenance.train_fold_ids = train_fold_ids;
    }
}

impl SurrogateModel for LightweightModel {
    fn labels(&self) -> &LabelSet {
        &self.labels
    }

    fn score(&self, text: &str, aspect: Option<&str>) -> Result<ScoreTriple> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let perplexity = self.lm.pseudo_perplexity(&tokens)?;
        let mut clf_tokens = tokens;
        if let Some(aspect) = aspect {
            clf_tokens.extend(tokenize(aspect));
        }
        let confidence = self.nb.posterior(&clf_tokens);
        ScoreTriple::new(perplexity, confidence, &self.labels)
    }

    fn propose_substitutes(&self, token: &str) -> Option<Vec<(String, f64)>> {
        self.cooc.propose(token, PROPOSAL_LIMIT)
    }

    fn provenance(&self) -> Option<&TrainProvenance> {
        Some(&self.provenance)
    }
}

fn classifier_tokens(dataset: &Dataset) -> Vec<(Vec<String>, usize)> {
    dataset
        .examples()
        .iter()
        .map(|ex| {
            let mut tokens = tokenize(&ex.text);
            if let Some(aspect) = &ex.aspect {
                tokens.extend(tokenize(aspect));
            }
            let label = dataset
                .labels()
                .index_of(&ex.label)
                .expect("validated at construction");
            (tokens, label)
        })
        .collect()
}

fn metric_of(metric: CheckpointMetric, preds: &[usize], golds: &[usize], classes: usize) -> f64 {
    match metric {
        CheckpointMetric::Accuracy => accuracy_of(preds, golds),
        CheckpointMetric::MacroF1 => macro_f1_of(preds, golds, classes),
    }
}

/// Trains the lightweight surrogate.
///
/// With a non-empty validation set, the hyperparameters are chosen from
/// [`GRID_ORDERS`] x [`GRID_ALPHAS`] by the checkpoint metric on the
/// validation set; ties prefer lower mean validation perplexity, then the
/// earlier grid position. With an empty validation set the grid is skipped
/// and `config.ngram_order` / `config.smoothing_alpha` are used directly.
pub fn train_lightweight(
    train: &Dataset,
    valid: &Dataset,
    config: &SurrogateTrainConfig,
    seed: u64,
) -> Result<LightweightModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::config("cannot train a surrogate on an empty dataset"));
    }
    if train.labels() != valid.labels() {
        return Err(Error::config(
            "training and validation sets must share one label set",
        ));
    }
    for label in train.labels().iter() {
        if !train.examples().iter().any(|ex| ex.label == label) {
            return Err(Error::MissingLabel {
                label: label.to_string(),
            });
        }
    }

    let lm_sentences: Vec<Vec<String>> = train
        .examples()
        .iter()
        .map(|ex| tokenize(&ex.text))
        .collect();
    let train_docs = classifier_tokens(train);
    let valid_docs = classifier_tokens(valid);
    let golds: Vec<usize> = valid_docs.iter().map(|(_, label)| *label).collect();
    let valid_sentences: Vec<Vec<String>> = valid
        .examples()
        .iter()
        .map(|ex| tokenize(&ex.text))
        .collect();

    let (nb, lm, order, alpha, metric) = if valid.is_empty() {
        let nb = NbClassifier::fit(&train_docs, train.labels(), config.smoothing_alpha)?;
        let lm = NgramLm::fit(&lm_sentences, config.ngram_order, config.smoothing_alpha)?;
        (nb, lm, config.ngram_order, config.smoothing_alpha, None)
    } else {
        let mut best: Option<(f64, f64, NbClassifier, NgramLm, usize, f64)> = None;
        for order in GRID_ORDERS {
            for alpha in GRID_ALPHAS {
                let nb = NbClassifier::fit(&train_docs, train.labels(), alpha)?;
                let lm = NgramLm::fit(&lm_sentences, order, alpha)?;
                let preds: Vec<usize> = valid_docs
                    .iter()
                    .map(|(tokens, _)| argmax_lowest(&nb.posterior(tokens)))
                    .collect();
                let metric = metric_of(
                    config.checkpoint_metric,
                    &preds,
                    &golds,
                    train.labels().len(),
                );
                let mut ppl_sum = 0.0;
                for sentence in &valid_sentences {
                    ppl_sum += lm.pseudo_perplexity(sentence)?;
                }
                let mean_ppl = ppl_sum / valid_sentences.len() as f64;
                let better = match &best {
                    None => true,
                    Some((best_metric, best_ppl, ..)) => {
                        metric > *best_metric || (metric == *best_metric && mean_ppl < *best_ppl)
                    }
                };
                if better {
                    best = Some((metric, mean_ppl, nb, lm, order, alpha));
                }
            }
        }
        let (metric, _, nb, lm, order, alpha) = best.expect("grid is non-empty");
        (nb, lm, order, alpha, Some(metric))
    };

    let cooc = CoocNeighbors::fit(&lm_sentences);
    Ok(LightweightModel {
        labels: train.labels().clone(),
        lm,
        nb,
        cooc,
        provenance: TrainProvenance {
            fold_iteration: None,
            train_fold_ids: Vec::new(),
            validation_metric: metric,
            selected_order: order,
            selected_alpha: alpha,
            seed,
        },
    })
}
