//! Downstream evaluation and the Ñ-sweep experiment.
//!
//! The desk-scale classifier reuses the lightweight surrogate family; it
//! stands in for the heavyweight victim models so sweep numbers are cheap
//! and exactly reproducible. Metrics are accuracy and macro-F1 with the 0/0
//! → 0 convention for degenerate precision or recall.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::Resources;
use crate::boost::{augment, BoostMode, BoostRunConfig};
use crate::corpus::{Dataset, LabelSet};
use crate::error::{Error, Result};
use crate::surrogate::{train_lightweight, LightweightModel, ScorerSpec, SurrogateModel,
    SurrogateTrainConfig};

/// Fraction of positions where `preds[i] == golds[i]`. Empty input gives 0.
pub fn accuracy_of(preds: &[usize], golds: &[usize]) -> f64 {
    debug_assert_eq!(preds.len(), golds.len());
    if preds.is_empty() {
        return 0.0;
    }
    let correct = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    correct as f64 / preds.len() as f64
}

/// Per-class F1 over class indices `0..classes`. A class with zero
/// denominator in precision or recall scores that component 0, and an
/// F1 with P + R = 0 is 0.
pub fn per_class_f1_of(preds: &[usize], golds: &[usize], classes: usize) -> Vec<f64> {
    debug_assert_eq!(preds.len(), golds.len());
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&p, &g) in preds.iter().zip(golds) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    (0..classes)
        .map(|c| {
            let precision = if tp[c] + fp[c] == 0 {
                0.0
            } else {
                tp[c] as f64 / (tp[c] + fp[c]) as f64
            };
            let recall = if tp[c] + fn_[c] == 0 {
                0.0
            } else {
                tp[c] as f64 / (tp[c] + fn_[c]) as f64
            };
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect()
}

/// Unweighted mean of [`per_class_f1_of`] over all classes.
pub fn macro_f1_of(preds: &[usize], golds: &[usize], classes: usize) -> f64 {
    let per_class = per_class_f1_of(preds, golds, classes);
    if per_class.is_empty() {
        return 0.0;
    }
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Desk-scale downstream classifier.
pub struct Classifier {
    model: LightweightModel,
    n_train: usize,
    seed: u64,
}

impl Classifier {
    pub fn labels(&self) -> &LabelSet {
        self.model.labels()
    }

    /// Predicted class index for one text.
    pub fn predict(&self, text: &str, aspect: Option<&str>) -> Result<usize> {
        let triple = self.model.score(text, aspect)?;
        Ok(self
            .labels()
            .index_of(&triple.predicted_label)
            .expect("prediction comes from the model's own label set"))
    }
}

pub fn train_classifier(
    train: &Dataset,
    valid: &Dataset,
    config: &SurrogateTrainConfig,
    seed: u64,
) -> Result<Classifier> {
    let model = train_lightweight(train, valid, config, seed)?;
    Ok(Classifier {
        model,
        n_train: train.len(),
        seed,
    })
}

pub fn evaluate(classifier: &Classifier, test: &Dataset) -> Result<EvalResult> {
    if test.is_empty() {
        return Err(Error::config("cannot evaluate on an empty test set"));
    }
    if classifier.labels() != test.labels() {
        return Err(Error::config(
            "classifier and test set must share one label set",
        ));
    }
    let mut preds = Vec::with_capacity(test.len());
    let mut golds = Vec::with_capacity(test.len());
    for ex in test.examples() {
        preds.push(classifier.predict(&ex.text, ex.aspect.as_deref())?);
        golds.push(
            test.labels()
                .index_of(&ex.label)
                .expect("validated at construction"),
        );
    }
    let classes = test.labels().len();
    let per_class_f1 = per_class_f1_of(&preds, &golds, classes);
    let macro_f1 = per_class_f1.iter().sum::<f64>() / classes as f64;
    Ok(EvalResult {
        accuracy: accuracy_of(&preds, &golds),
        macro_f1,
        per_class_f1,
        n_train: classifier.n_train,
        n_test: test.len(),
        seed: classifier.seed,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    /// Train on the original data only.
    #[serde(rename = "none")]
    None,
    /// Full cross-boosting pipeline.
    #[serde(rename = "boostaug")]
    BoostAug,
    /// Mono ablation: one surrogate filters its own training data.
    #[serde(rename = "monoaug")]
    MonoAug,
    /// Backend output with every filter disabled and no oversampling.
    #[serde(rename = "raw_backend")]
    RawBackend,
}

impl std::fmt::Display for SweepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepMode::None => "none",
            SweepMode::BoostAug => "boostaug",
            SweepMode::MonoAug => "monoaug",
            SweepMode::RawBackend => "raw_backend",
        })
    }
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SweepMode::None),
            "boostaug" => Ok(SweepMode::BoostAug),
            "monoaug" => Ok(SweepMode::MonoAug),
            "raw_backend" => Ok(SweepMode::RawBackend),
            other => Err(Error::config(format!(
                "unknown sweep mode {other:?}; expected none, boostaug, monoaug, \
                 or raw_backend"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub modes: Vec<SweepMode>,
    pub seeds: Vec<u64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return Err(Error::config("sweep needs at least one value of n"));
        }
        if self.n_values.iter().any(|&n| n == 0) {
            return Err(Error::config("sweep n values must be at least 1"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("sweep needs at least one mode"));
        }
        if self.seeds.len() < 2 {
            return Err(Error::config(
                "sweep needs at least two seeds to estimate stderr",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: SweepMode,
    pub n: usize,
    pub acc_mean: f64,
    pub acc_stderr: f64,
    pub f1_mean: f64,
    pub f1_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Plot-ready TSV with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("mode\tn\tacc_mean\tacc_stderr\tf1_mean\tf1_stderr\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                row.mode, row.n, row.acc_mean, row.acc_stderr, row.f1_mean, row.f1_stderr
            ));
        }
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean: sample standard deviation over sqrt(m).
fn stderr_of(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (m - 1) as f64;
    (var / m as f64).sqrt()
}

fn cell_config(base: &BoostRunConfig, mode: SweepMode, n: usize, seed: u64) -> BoostRunConfig {
    let mut config = base.clone();
    config.seed = seed;
    config.filter.keep_per_example = n;
    config.include_originals = true;
    match mode {
        SweepMode::BoostAug => config.mode = BoostMode::Cross,
        SweepMode::MonoAug => config.mode = BoostMode::Mono,
        SweepMode::RawBackend => {
            config.mode = BoostMode::Mono;
            config.pool_multiplier = 1;
            config.filter.enabled.clear();
        }
        SweepMode::None => {}
    }
    config
}

fn run_cell(
    train: &Dataset,
    test: &Dataset,
    mode: SweepMode,
    n: usize,
    seeds: &[u64],
    base: &BoostRunConfig,
    resources: &Resources,
    scorer: &ScorerSpec,
) -> Result<SweepRow> {
    let mut accs = Vec::with_capacity(seeds.len());
    let mut f1s = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let result = match mode {
            SweepMode::None => {
                let classifier =
                    train_classifier(train, &train.empty_like(), &base.surrogate, seed)?;
                evaluate(&classifier, test)?
            }
            _ => {
                let config = cell_config(base, mode, n, seed);
                let augmented = augment(train, &config, resources, scorer)?;
                let classifier = train_classifier(
                    &augmented.dataset,
                    &train.empty_like(),
                    &base.surrogate,
                    seed,
                )?;
                evaluate(&classifier, test)?
            }
        };
        accs.push(result.accuracy);
        f1s.push(result.macro_f1);
    }
    Ok(SweepRow {
        mode,
        n,
        acc_mean: mean(&accs),
        acc_stderr: stderr_of(&accs),
        f1_mean: mean(&f1s),
        f1_stderr: stderr_of(&f1s),
    })
}

/// Runs mode × Ñ × seed cells and aggregates mean and stderr per cell.
/// Rows follow the requested mode order, then the requested Ñ order.
pub fn sweep_n(
    train: &Dataset,
    test: &Dataset,
    sweep: &SweepConfig,
    base: &BoostRunConfig,
    resources: &Resources,
    scorer: &ScorerSpec,
) -> Result<SweepResult> {
    sweep.validate()?;
    if train.labels() != test.labels() {
        return Err(Error::config(
            "train and test sets must share one label set",
        ));
    }
    let cells: Vec<(SweepMode, usize)> = sweep
        .modes
        .iter()
        .flat_map(|&mode| sweep.n_values.iter().map(move |&n| (mode, n)))
        .collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(mode, n)| {
            run_cell(train, test, mode, n, &sweep.seeds, base, resources, scorer)
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { rows })
}
