//! Token-count features for the shift diagnostics.
//!
//! The featurizer counts unigrams and adjacent bigrams of the training
//! vocabulary and L2-normalizes each vector. Texts with no in-vocabulary
//! terms come out as zero vectors (logged, since they carry no position
//! information for the embedding).

use std::collections::BTreeMap;

use crate::backends::tokenize;
use crate::corpus::Dataset;
use crate::error::{Error, Result};

/// Unigram+bigram count featurizer with a frozen training vocabulary.
#[derive(Clone, Debug)]
pub struct Featurizer {
    columns: BTreeMap<String, usize>,
}

fn bigram(a: &str, b: &str) -> String {
    format!("{a} {b}")
}

impl Featurizer {
    pub fn fit(dataset: &Dataset) -> Result<Featurizer> {
        Featurizer::fit_texts(dataset.examples().iter().map(|ex| ex.text.as_str()))
    }

    /// Fits the vocabulary over raw texts. Comparing several datasets in a
    /// shared space means fitting over their union.
    pub fn fit_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<Featurizer> {
        let mut terms = std::collections::BTreeSet::new();
        for text in texts {
            let tokens = tokenize(text);
            for t in &tokens {
                terms.insert(t.clone());
            }
            for pair in tokens.windows(2) {
                terms.insert(bigram(&pair[0], &pair[1]));
            }
        }
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let columns = terms
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, i))
            .collect();
        Ok(Featurizer { columns })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// L2-normalized term-count vector. All-OOV texts give a zero vector.
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.columns.len()];
        let tokens = tokenize(text);
        for t in &tokens {
            if let Some(&col) = self.columns.get(t.as_str()) {
                v[col] += 1.0;
            }
        }
        for pair in tokens.windows(2) {
            if let Some(&col) = self.columns.get(bigram(&pair[0], &pair[1]).as_str()) {
                v[col] += 1.0;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        } else {
            log::warn!("text has no in-vocabulary terms; feature vector is zero");
        }
        v
    }
}

/// One feature vector per example, in dataset order.
pub fn feature_vectors(featurizer: &Featurizer, dataset: &Dataset) -> Vec<Vec<f64>> {
    dataset
        .examples()
        .iter()
        .map(|ex| featurizer.vector(&ex.text))
        .collect()
}
