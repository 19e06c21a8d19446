//! Candidate generation backends.
//!
//! All backends work on the same token stream: whitespace chunks with leading
//! and trailing ASCII punctuation peeled off as single-character tokens.
//! Candidates are rebuilt with single spaces, so candidate text is always in
//! token-normalized form.
//!
//! One call applies one transform. The EDA backend draws one of its four ops
//! (synonym replace, random insert, random swap, random delete) by weight per
//! call; the other backends are single-op. Token selection is an independent
//! Bernoulli draw per token at `token_transform_prob`.
//!
//! When an example carries an aspect and `protect_aspect` is on, the aspect
//! tokens are never selected, never swapped, never deleted, and insertions
//! cannot land inside the block, so the aspect survives contiguously in every
//! candidate.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::seeding::{self, STREAM_GENERATE};
use crate::surrogate::{ScoreTriple, SurrogateModel};

/// Splits on whitespace, then peels leading and trailing ASCII punctuation
/// off each chunk as single-character tokens. Interior punctuation stays
/// attached (`don't`, `5.99`).
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_spans(text)
        .into_iter()
        .map(|(token, _, _)| token)
        .collect()
}

/// Like [`tokenize`], with the byte range each token occupies in `text`.
pub(crate) fn tokenize_with_spans(text: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut chunk_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                peel_chunk(text, s, i, &mut out);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    if let Some(s) = chunk_start {
        peel_chunk(text, s, text.len(), &mut out);
    }
    out
}

fn peel_chunk(text: &str, start: usize, end: usize, out: &mut Vec<(String, usize, usize)>) {
    let chars: Vec<(usize, char)> = text[start..end].char_indices().collect();
    let mut lo = 0;
    let mut hi = chars.len();
    let mut trailing = Vec::new();
    while lo < hi && chars[lo].1.is_ascii_punctuation() {
        let (off, ch) = chars[lo];
        out.push((ch.to_string(), start + off, start + off + ch.len_utf8()));
        lo += 1;
    }
    while hi > lo && chars[hi - 1].1.is_ascii_punctuation() {
        let (off, ch) = chars[hi - 1];
        trailing.push((ch.to_string(), start + off, start + off + ch.len_utf8()));
        hi -= 1;
    }
    if lo < hi {
        let s = start + chars[lo].0;
        let e = start + chars[hi - 1].0 + chars[hi - 1].1.len_utf8();
        out.push((text[s..e].to_string(), s, e));
    }
    out.extend(trailing.into_iter().rev());
}

/// Joins tokens with single spaces.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}

/// First index where `needle` occurs as a contiguous token run.
pub(crate) fn find_token_subsequence(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| &haystack[i..i + needle.len()] == needle)
}

/// Word-to-alternatives table loaded from `word<TAB>alt1,alt2,...` lines.
/// Blank lines and lines starting with `#` are skipped. Repeated words
/// extend the earlier entry.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: HashMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn empty() -> Self {
        Lexicon::default()
    }

    pub fn from_entries<W, A>(entries: impl IntoIterator<Item = (W, Vec<A>)>) -> Self
    where
        W: Into<String>,
        A: Into<String>,
    {
        let mut map: HashMap<String, Vec<String>> = HashMap::new();
        for (word, alts) in entries {
            map.entry(word.into())
                .or_default()
                .extend(alts.into_iter().map(Into::into));
        }
        Lexicon { entries: map }
    }

    /// Parses lexicon text. `origin` names the source in errors.
    pub fn parse(src: &str, origin: impl Into<PathBuf>) -> Result<Self> {
        let origin = origin.into();
        let mut entries: HashMap<String, Vec<String>> = HashMap::new();
        for (i, line) in src.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, alts) = line.split_once('\t').ok_or_else(|| {
                Error::parse(&origin, lineno, "expected word<TAB>alt1,alt2,...")
            })?;
            let word = word.trim();
            if word.is_empty() {
                return Err(Error::parse(&origin, lineno, "empty word"));
            }
            let mut parsed = Vec::new();
            for alt in alts.split(',') {
                let alt = alt.trim();
                if alt.is_empty() {
                    return Err(Error::parse(&origin, lineno, "empty alternative"));
                }
                parsed.push(alt.to_string());
            }
            if parsed.is_empty() {
                return Err(Error::parse(&origin, lineno, "no alternatives"));
            }
            entries.entry(word.to_string()).or_default().extend(parsed);
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse(&src, path)
    }

    pub fn alternatives(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Lexicons the backends draw from.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub synonyms: Lexicon,
    pub misspellings: Lexicon,
}

impl Resources {
    pub fn new(synonyms: Lexicon, misspellings: Lexicon) -> Self {
        Resources {
            synonyms,
            misspellings,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Eda,
    Spelling,
    Split,
    EmbedSub,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Eda => "eda",
            Strategy::Spelling => "spelling",
            Strategy::Split => "split",
            Strategy::EmbedSub => "embed_sub",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eda" => Ok(Strategy::Eda),
            "spelling" => Ok(Strategy::Spelling),
            "split" => Ok(Strategy::Split),
            "embed_sub" => Ok(Strategy::EmbedSub),
            other => Err(Error::config(format!(
                "unknown strategy {other:?}; expected eda, spelling, split, or embed_sub"
            ))),
        }
    }
}

/// Relative weights for the four EDA ops. One op is drawn per call.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdaOpWeights {
    pub synonym_replace: f64,
    pub random_insert: f64,
    pub random_swap: f64,
    pub random_delete: f64,
}

impl Default for EdaOpWeights {
    fn default() -> Self {
        EdaOpWeights {
            synonym_replace: 1.0,
            random_insert: 1.0,
            random_swap: 1.0,
            random_delete: 1.0,
        }
    }
}

impl EdaOpWeights {
    fn as_array(&self) -> [f64; 4] {
        [
            self.synonym_replace,
            self.random_insert,
            self.random_swap,
            self.random_delete,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    /// Per-token selection probability.
    pub token_transform_prob: f64,
    pub strategy: Strategy,
    pub eda_op_weights: EdaOpWeights,
    /// Attempt budget per requested candidate before generation gives up.
    pub max_attempts: usize,
    /// Keep aspect tokens untouched and contiguous.
    pub protect_aspect: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            token_transform_prob: 0.1,
            strategy: Strategy::Eda,
            eda_op_weights: EdaOpWeights::default(),
            max_attempts: 4,
            protect_aspect: true,
        }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.token_transform_prob.is_finite()
            || !(0.0..=1.0).contains(&self.token_transform_prob)
        {
            return Err(Error::config(format!(
                "token_transform_prob must be in [0, 1], got {}",
                self.token_transform_prob
            )));
        }
        let weights = self.eda_op_weights.as_array();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::config(
                "eda op weights must be finite and non-negative",
            ));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("eda op weights must not all be zero"));
        }
        if self.max_attempts == 0 {
            return Err(Error::config("max_attempts must be at least 1"));
        }
        Ok(())
    }
}

/// One generated variant of a training example. `draw_index` is the position
/// in the kept draw order for its origin example; scores appear once a
/// surrogate has run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationCandidate {
    pub text: String,
    pub origin_id: usize,
    pub backend: Strategy,
    pub fold_iteration: usize,
    pub draw_index: usize,
    pub score: Option<ScoreTriple>,
}

impl AugmentationCandidate {
    fn unscored(example: &Example, backend: Strategy, text: String) -> Self {
        AugmentationCandidate {
            text,
            origin_id: example.id,
            backend,
            fold_iteration: 0,
            draw_index: 0,
            score: None,
        }
    }

    pub fn perplexity(&self) -> Option<f64> {
        self.score.as_ref().map(|s| s.perplexity)
    }

    pub fn max_confidence(&self) -> Option<f64> {
        self.score.as_ref().map(|s| s.max_confidence())
    }

    pub fn predicted_label(&self) -> Option<&str> {
        self.score.as_ref().map(|s| s.predicted_label.as_str())
    }
}

fn protected_range(example: &Example, config: &TransformConfig) -> Option<Range<usize>> {
    if !config.protect_aspect {
        return None;
    }
    example.aspect_span.map(|s| s.start..s.end)
}

fn is_protected(protected: &Option<Range<usize>>, index: usize) -> bool {
    protected.as_ref().is_some_and(|r| r.contains(&index))
}

fn select_indices(
    len: usize,
    protected: &Option<Range<usize>>,
    prob: f64,
    rng: &mut impl Rng,
) -> Vec<usize> {
    (0..len)
        .filter(|&i| !is_protected(protected, i))
        .filter(|_| rng.random_bool(prob))
        .collect()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum EdaOp {
    SynonymReplace,
    RandomInsert,
    RandomSwap,
    RandomDelete,
}

fn draw_eda_op(weights: &EdaOpWeights, rng: &mut impl Rng) -> EdaOp {
    const OPS: [EdaOp; 4] = [
        EdaOp::SynonymReplace,
        EdaOp::RandomInsert,
        EdaOp::RandomSwap,
        EdaOp::RandomDelete,
    ];
    let w = weights.as_array();
    let total: f64 = w.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (op, wi) in OPS.iter().zip(w) {
        if x < wi {
            return *op;
        }
        x -= wi;
    }
    EdaOp::RandomDelete
}

fn op_synonym_replace(
    tokens: &mut [String],
    selected: &[usize],
    lexicon: &Lexicon,
    rng: &mut impl Rng,
) {
    for &i in selected {
        if let Some(alts) = lexicon.alternatives(&tokens[i]) {
            if let Some(alt) = alts.choose(rng) {
                tokens[i] = alt.clone();
            }
        }
    }
}

fn op_random_insert(
    tokens: &mut Vec<String>,
    selected: &[usize],
    protected: &mut Option<Range<usize>>,
    lexicon: &Lexicon,
    rng: &mut impl Rng,
) {
    let insertions: Vec<String> = selected
        .iter()
        .filter_map(|&i| lexicon.alternatives(&tokens[i]).and_then(|a| a.choose(rng)))
        .cloned()
        .collect();
    for word in insertions {
        let mut pos = rng.random_range(0..=tokens.len());
        if let Some(r) = protected {
            if pos > r.start && pos < r.end {
                pos = r.end;
            }
            if pos <= r.start {
                r.start += 1;
                r.end += 1;
            }
        }
        tokens.insert(pos, word);
    }
}

fn op_random_swap(
    tokens: &mut [String],
    selected: &[usize],
    protected: &Option<Range<usize>>,
    rng: &mut impl Rng,
) {
    for &i in selected {
        let partners: Vec<usize> = (0..tokens.len())
            .filter(|&j| j != i && !is_protected(protected, j))
            .collect();
        if let Some(&j) = partners.choose(rng) {
            tokens.swap(i, j);
        }
    }
}

fn op_random_delete(
    tokens: &mut Vec<String>,
    selected: &[usize],
    protected: &mut Option<Range<usize>>,
    rng: &mut impl Rng,
) {
    if selected.is_empty() {
        return;
    }
    if selected.len() == tokens.len() {
        // Everything was selected (so nothing is protected); keep one
        // seeded survivor instead of emptying the text.
        let survivor = *selected.choose(rng).expect("non-empty");
        let word = tokens[survivor].clone();
        tokens.clear();
        tokens.push(word);
        return;
    }
    for &i in selected.iter().rev() {
        tokens.remove(i);
        if let Some(r) = protected {
            if i < r.start {
                r.start -= 1;
                r.end -= 1;
            }
        }
    }
}

/// Applies one EDA op drawn by weight.
pub fn eda_transform(
    example: &Example,
    config: &TransformConfig,
    synonyms: &Lexicon,
    rng: &mut impl Rng,
) -> AugmentationCandidate {
    let mut tokens = tokenize(&example.text);
    let mut protected = protected_range(example, config);
    let op = draw_eda_op(&config.eda_op_weights, rng);
    let selected = select_indices(tokens.len(), &protected, config.token_transform_prob, rng);
    match op {
        EdaOp::SynonymReplace => op_synonym_replace(&mut tokens, &selected, synonyms, rng),
        EdaOp::RandomInsert => {
            op_random_insert(&mut tokens, &selected, &mut protected, synonyms, rng)
        }
        EdaOp::RandomSwap => op_random_swap(&mut tokens, &selected, &protected, rng),
        EdaOp::RandomDelete => op_random_delete(&mut tokens, &selected, &mut protected, rng),
    }
    AugmentationCandidate::unscored(example, Strategy::Eda, detokenize(&tokens))
}

/// Replaces selected tokens with dictionary misspellings.
pub fn spelling_transform(
    example: &Example,
    config: &TransformConfig,
    misspellings: &Lexicon,
    rng: &mut impl Rng,
) -> AugmentationCandidate {
    let mut tokens = tokenize(&example.text);
    let protected = protected_range(example, config);
    let selected = select_indices(tokens.len(), &protected, config.token_transform_prob, rng);
    op_synonym_replace(&mut tokens, &selected, misspellings, rng);
    AugmentationCandidate::unscored(example, Strategy::Spelling, detokenize(&tokens))
}

/// Splits selected tokens of at least four characters at a seeded interior
/// position.
pub fn split_transform(
    example: &Example,
    config: &TransformConfig,
    rng: &mut impl Rng,
) -> AugmentationCandidate {
    let mut tokens = tokenize(&example.text);
    let mut protected = protected_range(example, config);
    let selected = select_indices(tokens.len(), &protected, config.token_transform_prob, rng);
    for &i in selected.iter().rev() {
        let chars: Vec<char> = tokens[i].chars().collect();
        if chars.len() < 4 {
            continue;
        }
        let cut = rng.random_range(1..chars.len());
        let left: String = chars[..cut].iter().collect();
        let right: String = chars[cut..].iter().collect();
        tokens.splice(i..=i, [left, right]);
        if let Some(r) = &mut protected {
            if i < r.start {
                r.start += 1;
                r.end += 1;
            }
        }
    }
    AugmentationCandidate::unscored(example, Strategy::Split, detokenize(&tokens))
}

/// Replaces selected tokens with scorer-proposed neighbours, drawn with
/// probability proportional to the proposal score.
pub fn embed_substitute_transform(
    example: &Example,
    config: &TransformConfig,
    scorer: &dyn SurrogateModel,
    rng: &mut impl Rng,
) -> AugmentationCandidate {
    let mut tokens = tokenize(&example.text);
    let protected = protected_range(example, config);
    let selected = select_indices(tokens.len(), &protected, config.token_transform_prob, rng);
    for i in selected {
        let Some(proposals) = scorer.propose_substitutes(&tokens[i]) else {
            continue;
        };
        if proposals.is_empty() {
            continue;
        }
        let total: f64 = proposals.iter().map(|(_, s)| s.max(0.0)).sum();
        let pick = if total > 0.0 {
            let mut x = rng.random::<f64>() * total;
            let mut pick = proposals.len() - 1;
            for (idx, (_, s)) in proposals.iter().enumerate() {
                let s = s.max(0.0);
                if x < s {
                    pick = idx;
                    break;
                }
                x -= s;
            }
            pick
        } else {
            0
        };
        tokens[i] = proposals[pick].0.clone();
    }
    AugmentationCandidate::unscored(example, Strategy::EmbedSub, detokenize(&tokens))
}

/// Draws up to `count` distinct candidates for one example.
///
/// Attempts are capped at `max_attempts * count`; candidates equal to the
/// original text (in raw or token-normalized form) and duplicate candidates
/// are discarded, so fewer than `count` results (or none) is a normal
/// outcome for short or hard-to-vary texts. Results are in draw order with
/// dense `draw_index`. The same `(seed, example.id)` always yields the same
/// candidates.
pub fn generate(
    example: &Example,
    count: usize,
    config: &TransformConfig,
    resources: &Resources,
    scorer: Option<&dyn SurrogateModel>,
    seed: u64,
) -> Result<Vec<AugmentationCandidate>> {
    config.validate()?;
    if count == 0 {
        return Err(Error::config("candidate count must be at least 1"));
    }
    match config.strategy {
        Strategy::Eda => {
            if resources.synonyms.is_empty() {
                return Err(Error::config(
                    "eda strategy needs a non-empty synonym lexicon",
                ));
            }
        }
        Strategy::Spelling => {
            if resources.misspellings.is_empty() {
                return Err(Error::config(
                    "spelling strategy needs a non-empty misspelling lexicon",
                ));
            }
        }
        Strategy::EmbedSub => {
            if scorer.is_none() {
                return Err(Error::config(
                    "embed_sub strategy needs a surrogate scorer",
                ));
            }
        }
        Strategy::Split => {}
    }

    let mut rng = seeding::rng_for(&[seed, STREAM_GENERATE, example.id as u64]);
    let original_norm = detokenize(&tokenize(&example.text));
    let budget = config.max_attempts.saturating_mul(count);
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < budget {
        attempts += 1;
        let mut candidate = match config.strategy {
            Strategy::Eda => eda_transform(example, config, &resources.synonyms, &mut rng),
            Strategy::Spelling => {
                spelling_transform(example, config, &resources.misspellings, &mut rng)
            }
            Strategy::Split => split_transform(example, config, &mut rng),
            Strategy::EmbedSub => embed_substitute_transform(
                example,
                config,
                scorer.expect("checked above"),
                &mut rng,
            ),
        };
        if candidate.text == original_norm || candidate.text == example.text {
            continue;
        }
        if !seen.insert(candidate.text.clone()) {
            continue;
        }
        candidate.draw_index = out.len();
        out.push(candidate);
    }
    Ok(out)
}
