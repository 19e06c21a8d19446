//! Corpus loading, validation, and fold planning.
//!
//! Two on-disk formats are supported. Text classification (`tc`) files hold
//! one `label<TAB>text` pair per line. Aspect-based sentiment (`absc`) files
//! hold three-line records: a sentence with a single `$T$` placeholder, the
//! aspect term that replaces it, and the label. Loading materializes the
//! aspect into the text and records the token span it occupies so downstream
//! stages can protect it.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::backends::{tokenize, tokenize_with_spans};
use crate::error::{Error, Result};
use crate::seeding::{self, STREAM_FOLD};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Tc,
    Absc,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Tc => "tc",
            Task::Absc => "absc",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tc" => Ok(Task::Tc),
            "absc" => Ok(Task::Absc),
            other => Err(Error::config(format!(
                "unknown task {other:?}; expected \"tc\" or \"absc\""
            ))),
        }
    }
}

/// Ordered set of class labels. Order is first appearance in the source,
/// and it fixes the meaning of every confidence vector in the pipeline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::config(
                "a label set needs at least two distinct labels",
            ));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::config(format!("duplicate label {label:?}")));
            }
        }
        Ok(LabelSet { labels, index })
    }

    /// Collects distinct labels in first-appearance order.
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut seen = HashMap::new();
        let mut ordered = Vec::new();
        for label in labels {
            if !seen.contains_key(label) {
                seen.insert(label.to_string(), ordered.len());
                ordered.push(label.to_string());
            }
        }
        LabelSet::new(ordered)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn get(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    pub fn as_slice(&self) -> &[String] {
        &self.labels
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        LabelSet::new(labels)
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Vec<String> {
        set.labels
    }
}

/// Half-open token index range.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: usize,
    pub text: String,
    pub label: String,
    pub aspect: Option<String>,
    pub aspect_span: Option<TokenSpan>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    task: Task,
    examples: Vec<Example>,
    labels: LabelSet,
}

impl Dataset {
    /// Validates and assembles a dataset.
    ///
    /// Ids must be dense `0..N`, every label must be in `labels`, and for
    /// `absc` every example must carry an aspect whose tokens sit exactly at
    /// `aspect_span` in the tokenized text. `tc` examples carry no aspect.
    pub fn new(task: Task, examples: Vec<Example>, labels: LabelSet) -> Result<Self> {
        for (i, ex) in examples.iter().enumerate() {
            if ex.id != i {
                return Err(Error::config(format!(
                    "example ids must be dense 0..{}; position {i} has id {}",
                    examples.len(),
                    ex.id
                )));
            }
            if ex.text.trim().is_empty() {
                return Err(Error::config(format!("example {i} has empty text")));
            }
            if labels.index_of(&ex.label).is_none() {
                return Err(Error::config(format!(
                    "example {i} has label {:?} which is not in the label set",
                    ex.label
                )));
            }
            match task {
                Task::Tc => {
                    if ex.aspect.is_some() || ex.aspect_span.is_some() {
                        return Err(Error::config(format!(
                            "example {i}: tc examples cannot carry an aspect"
                        )));
                    }
                }
                Task::Absc => {
                    let (aspect, span) = match (&ex.aspect, ex.aspect_span) {
                        (Some(a), Some(s)) => (a, s),
                        _ => {
                            return Err(Error::config(format!(
                                "example {i}: absc examples need an aspect and its span"
                            )))
                        }
                    };
                    let aspect_tokens = tokenize(aspect);
                    let text_tokens = tokenize(&ex.text);
                    if aspect_tokens.is_empty()
                        || span.is_empty()
                        || span.len() != aspect_tokens.len()
                        || text_tokens.get(span.start..span.end) != Some(&aspect_tokens[..])
                    {
                        return Err(Error::config(format!(
                            "example {i}: aspect {aspect:?} does not sit at tokens {}..{}",
                            span.start, span.end
                        )));
                    }
                }
            }
        }
        Ok(Dataset {
            task,
            examples,
            labels,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Example> {
        self.examples.get(id)
    }

    /// Clones the chosen examples into a new dataset with dense ids and the
    /// full label set. Order follows `ids`.
    pub fn subset(&self, ids: &[usize]) -> Result<Dataset> {
        let mut examples = Vec::with_capacity(ids.len());
        for (new_id, &id) in ids.iter().enumerate() {
            let mut ex = self
                .examples
                .get(id)
                .ok_or_else(|| Error::config(format!("subset id {id} out of range")))?
                .clone();
            ex.id = new_id;
            examples.push(ex);
        }
        Ok(Dataset {
            task: self.task,
            examples,
            labels: self.labels.clone(),
        })
    }

    /// An empty dataset sharing this one's task and label set.
    pub fn empty_like(&self) -> Dataset {
        Dataset {
            task: self.task,
            examples: Vec::new(),
            labels: self.labels.clone(),
        }
    }
}

pub fn load_tc_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut examples = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let lineno = i + 1;
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, lineno, "expected label<TAB>text"))?;
        let label = label.trim();
        let text = text.trim();
        if label.is_empty() {
            return Err(Error::parse(path, lineno, "empty label"));
        }
        if text.is_empty() {
            return Err(Error::parse(path, lineno, "empty text"));
        }
        examples.push(Example {
            id: examples.len(),
            text: text.to_string(),
            label: label.to_string(),
            aspect: None,
            aspect_span: None,
        });
    }
    finish_load(Task::Tc, path, examples)
}

pub fn load_absc_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = raw.lines().collect();
    if !lines.is_empty() && lines.len() % 3 != 0 {
        return Err(Error::parse(
            path,
            lines.len(),
            "expected three-line records (sentence, aspect, label)",
        ));
    }
    let mut examples = Vec::new();
    for record in lines.chunks(3) {
        let base = examples.len() * 3 + 1;
        let sentence = record[0];
        let aspect = record[1].trim();
        let label = record[2].trim();
        match sentence.matches("$T$").count() {
            1 => {}
            0 => return Err(Error::parse(path, base, "sentence has no $T$ placeholder")),
            _ => {
                return Err(Error::parse(
                    path,
                    base,
                    "sentence has more than one $T$ placeholder",
                ))
            }
        }
        if aspect.is_empty() {
            return Err(Error::parse(path, base + 1, "empty aspect"));
        }
        if label.is_empty() {
            return Err(Error::parse(path, base + 2, "empty label"));
        }
        let aspect_tokens = tokenize(aspect);
        if aspect_tokens.is_empty() {
            return Err(Error::parse(path, base + 1, "aspect has no tokens"));
        }
        let placeholder = sentence.find("$T$").expect("counted above");
        let start = tokenize(&sentence[..placeholder]).len();
        let span = TokenSpan {
            start,
            end: start + aspect_tokens.len(),
        };
        let text = sentence.replacen("$T$", aspect, 1).trim().to_string();
        let text_tokens = tokenize(&text);
        if text_tokens.get(span.start..span.end) != Some(&aspect_tokens[..]) {
            return Err(Error::parse(
                path,
                base,
                "aspect does not land on token boundaries; \
                 $T$ must not be glued to adjacent word characters",
            ));
        }
        examples.push(Example {
            id: examples.len(),
            text,
            label: label.to_string(),
            aspect: Some(aspect.to_string()),
            aspect_span: Some(span),
        });
    }
    finish_load(Task::Absc, path, examples)
}

fn finish_load(task: Task, path: &Path, examples: Vec<Example>) -> Result<Dataset> {
    if examples.is_empty() {
        return Err(Error::parse(path, 1, "dataset file is empty"));
    }
    // Loaders sort the label order so independently loaded files (say an
    // augmented training set and a test set) share one label set whenever
    // they share the same labels.
    let distinct: std::collections::BTreeSet<&str> =
        examples.iter().map(|e| e.label.as_str()).collect();
    let labels = LabelSet::new(distinct.into_iter().map(String::from).collect())
        .map_err(|_| Error::parse(path, 1, "dataset needs at least two distinct labels"))?;
    Dataset::new(task, examples, labels)
}

/// Serializes a dataset back to its on-disk format. Loading the written file
/// reproduces the dataset exactly.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for ex in dataset.examples() {
        match dataset.task {
            Task::Tc => {
                out.push_str(&ex.label);
                out.push('\t');
                out.push_str(&ex.text);
                out.push('\n');
            }
            Task::Absc => {
                let aspect = ex.aspect.as_deref().expect("validated at construction");
                let span = ex.aspect_span.expect("validated at construction");
                let spans = tokenize_with_spans(&ex.text);
                let char_start = spans[span.start].1;
                let char_end = spans[span.end - 1].2;
                if &ex.text[char_start..char_end] != aspect {
                    return Err(Error::AspectLost {
                        origin_id: ex.id,
                        aspect: aspect.to_string(),
                    });
                }
                out.push_str(&ex.text[..char_start]);
                out.push_str("$T$");
                out.push_str(&ex.text[char_end..]);
                out.push('\n');
                out.push_str(aspect);
                out.push('\n');
                out.push_str(&ex.label);
                out.push('\n');
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Role assignment for one cross-boosting iteration. The three roles
/// partition the folds: one boost fold, one validation fold, and the rest
/// for surrogate training.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldRoles {
    pub boost_fold: usize,
    pub validation_fold: usize,
    pub train_folds: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    seed: u64,
    assignment: Vec<usize>,
    iterations: Vec<FoldRoles>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fold index per example id.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn iterations(&self) -> &[FoldRoles] {
        &self.iterations
    }

    /// Example ids in `fold`, ascending.
    pub fn fold_members(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(id, _)| id)
            .collect()
    }

    /// Example ids in all of `folds`, ascending.
    pub fn members_of(&self, folds: &[usize]) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, f)| folds.contains(f))
            .map(|(id, _)| id)
            .collect()
    }
}

/// Shuffles example ids with the seed and deals them round-robin into `k`
/// folds, then fixes the per-iteration roles: iteration `i` boosts fold `i`,
/// draws one validation fold from the rest, and trains on the remainder.
///
/// Cross boosting needs at least two training folds per iteration, so
/// `k <= 3` is rejected.
pub fn make_fold_plan(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k <= 3 {
        return Err(Error::config(format!(
            "cross boosting needs k > 3 folds, got k = {k}"
        )));
    }
    let n = dataset.len();
    if n < k {
        return Err(Error::config(format!(
            "dataset has {n} examples, fewer than k = {k} folds"
        )));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    let mut rng = seeding::rng_for(&[seed, STREAM_FOLD]);
    ids.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (position, &id) in ids.iter().enumerate() {
        assignment[id] = position % k;
    }
    let mut iterations = Vec::with_capacity(k);
    for boost_fold in 0..k {
        let others: Vec<usize> = (0..k).filter(|&f| f != boost_fold).collect();
        let validation_fold = others[rng.random_range(0..others.len())];
        let train_folds: Vec<usize> = others
            .into_iter()
            .filter(|&f| f != validation_fold)
            .collect();
        iterations.push(FoldRoles {
            boost_fold,
            validation_fold,
            train_folds,
        });
    }
    Ok(FoldPlan {
        k,
        seed,
        assignment,
        iterations,
    })
}
