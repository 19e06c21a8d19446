//! Acceptance gate: one test per release criterion, each printing a single
//! pass/fail line (visible with `--nocapture`) and enforcing its runtime
//! budget. Tolerances are pinned next to each check.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use boostaug_core::surrogate::NgramLm;
use boostaug_core::{
    augment, boost_augment, convex_hull, filter_chain, global_skewness, hull_overlap_rate,
    joint_clouds, make_fold_plan, polygon_area, shift_report, skewness, sweep_n,
    train_lightweight, AugmentationCandidate, BoostMode, BoostRunConfig, CloudSource, Dataset,
    EmbedMethod, Example, FilterConfig, FilterStage, LabelSet, Lexicon, PerplexityMode,
    PointCloud, Resources, ScoreTriple, ScorerSpec, ScriptedScorer, Strategy, SurrogateModel,
    SurrogateTrainConfig, SweepConfig, SweepMode, Task,
};
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<(), String>;

fn gate(name: &str, budget: Duration, check: Check) {
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let verdict = match &outcome {
        Ok(()) if elapsed <= budget => "PASS".to_string(),
        Ok(()) => format!("FAIL (over budget: {elapsed:?} > {budget:?})"),
        Err(msg) => format!("FAIL ({msg})"),
    };
    println!("acceptance {name}: {verdict} [{elapsed:.2?}]");
    if verdict != "PASS" {
        panic!("acceptance {name}: {verdict}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Synthetic corpora shared by the pipeline criteria.
//
// The vocabulary is deliberately small and dense so every neutral token has
// high, class-balanced counts and the planted keywords decide the label. The
// synonym table maps "excellent" to "fine", a genuinely ambiguous English
// word that the negative templates use inside a negated phrase: a backend
// substitution silently flips bag-of-words polarity, which is exactly the
// noise the filter chain is supposed to remove.

const NOUNS: [&str; 4] = ["phone", "battery", "screen", "camera"];
const VERBS: [&str; 2] = ["works", "feels"];
const FILLERS: [&str; 2] = ["large", "small"];
const NEG_WORDS: [&str; 2] = ["awful", "dreadful"];

fn example(id: usize, text: String, label: &str) -> Example {
    Example {
        id,
        text,
        label: label.to_string(),
        aspect: None,
        aspect_span: None,
    }
}

fn review_labels() -> LabelSet {
    LabelSet::new(vec!["neg".into(), "pos".into()]).unwrap()
}

/// Two-class review corpus. Even ids are positive (keyword "excellent"),
/// odd ids negative; ids congruent to 17 mod 40 carry "fine" inside a
/// negated tail, making "fine" a weak negative cue. `phase` offsets the
/// template cycling so separate calls give different surface combinations.
fn review_corpus(n: usize, phase: usize) -> Dataset {
    let examples = (0..n)
        .map(|i| {
            let j = i + phase;
            let noun_a = NOUNS[j % NOUNS.len()];
            let noun_b = NOUNS[(j / 2 + 1) % NOUNS.len()];
            let verb = VERBS[(j / 4) % VERBS.len()];
            let filler = FILLERS[(j / 3) % FILLERS.len()];
            if i % 2 == 0 {
                example(
                    i,
                    format!("the {noun_a} {verb} excellent and the {noun_b} is {filler}"),
                    "pos",
                )
            } else {
                let kw = NEG_WORDS[(j / 2) % NEG_WORDS.len()];
                if i % 40 == 17 {
                    example(i, format!("the {noun_a} {verb} {kw} and not fine at all"), "neg")
                } else {
                    example(
                        i,
                        format!("the {noun_a} {verb} {kw} and the {noun_b} is {filler}"),
                        "neg",
                    )
                }
            }
        })
        .collect();
    Dataset::new(Task::Tc, examples, review_labels()).unwrap()
}

/// Phase-shifted test set drawn from the same templates, trap-free.
fn clean_test_corpus(n: usize) -> Dataset {
    let examples = (0..n)
        .map(|i| {
            let j = i + 5;
            let noun_a = NOUNS[j % NOUNS.len()];
            let noun_b = NOUNS[(j / 3 + 2) % NOUNS.len()];
            let verb = VERBS[(j / 2) % VERBS.len()];
            let filler = FILLERS[(j / 5) % FILLERS.len()];
            if i % 2 == 0 {
                example(
                    i,
                    format!("the {noun_a} {verb} excellent and the {noun_b} is {filler}"),
                    "pos",
                )
            } else {
                let kw = NEG_WORDS[(j / 2) % NEG_WORDS.len()];
                example(
                    i,
                    format!("the {noun_a} {verb} {kw} and the {noun_b} is {filler}"),
                    "neg",
                )
            }
        })
        .collect();
    Dataset::new(Task::Tc, examples, review_labels()).unwrap()
}

/// Test set where a fifth of the examples are negatives whose only polarity
/// cue is "fine". A clean model classifies them from the two negated-tail
/// training sentences; a model trained on unfiltered substitutions has seen
/// "fine" mostly in positive copies and flips them.
fn trap_test_corpus() -> Dataset {
    let mut fine_idx = 0usize;
    let examples = (0..60)
        .map(|i| {
            let j = i + 5;
            let noun_a = NOUNS[j % NOUNS.len()];
            let noun_b = NOUNS[(j / 3 + 2) % NOUNS.len()];
            let verb = VERBS[(j / 2) % VERBS.len()];
            let filler = FILLERS[(j / 5) % FILLERS.len()];
            if i % 2 == 0 {
                example(
                    i,
                    format!("the {noun_a} {verb} excellent and the {noun_b} is {filler}"),
                    "pos",
                )
            } else if i % 5 == 1 {
                let noun = NOUNS[fine_idx % NOUNS.len()];
                let verb = VERBS[(fine_idx / 4) % VERBS.len()];
                fine_idx += 1;
                example(i, format!("the {noun} {verb} fine"), "neg")
            } else {
                let kw = NEG_WORDS[(j / 2) % NEG_WORDS.len()];
                example(
                    i,
                    format!("the {noun_a} {verb} {kw} and the {noun_b} is {filler}"),
                    "neg",
                )
            }
        })
        .collect();
    Dataset::new(Task::Tc, examples, review_labels()).unwrap()
}

fn review_resources() -> Resources {
    let synonyms = Lexicon::from_entries([
        ("excellent", vec!["fine"]),
        ("awful", vec!["dreadful"]),
        ("dreadful", vec!["awful"]),
        ("phone", vec!["handset"]),
        ("battery", vec!["cell"]),
        ("screen", vec!["display"]),
        ("camera", vec!["lens"]),
        ("works", vec!["runs"]),
        ("feels", vec!["seems"]),
        ("large", vec!["big"]),
        ("small", vec!["little"]),
    ]);
    Resources::new(synonyms, Lexicon::empty())
}

/// Desk-scale run settings: the absolute perplexity cut is disabled and the
/// confidence cut sits at the two-class floor, so the tiny surrogate keeps a
/// meaningful share of candidates while every stage still executes.
fn relaxed_config(mode: BoostMode, keep: usize, seed: u64) -> BoostRunConfig {
    let mut config = BoostRunConfig {
        mode,
        seed,
        ..BoostRunConfig::default()
    };
    config.filter.keep_per_example = keep;
    config.filter.perplexity_limit = f64::INFINITY;
    config.filter.confidence_threshold = 0.5;
    config
}

/// Full pipeline settings for the directional criteria: substitution-heavy
/// EDA without the insert op (inserted synonyms keep the original keyword,
/// which makes the candidate legitimately positive and dilutes the trap),
/// a training-median perplexity gate, and a strict confidence cut.
fn directional_config(seed: u64, keep: usize) -> BoostRunConfig {
    let mut config = BoostRunConfig {
        mode: BoostMode::Cross,
        seed,
        ..BoostRunConfig::default()
    };
    config.transform.token_transform_prob = 0.4;
    config.transform.eda_op_weights.synonym_replace = 3.0;
    config.transform.eda_op_weights.random_insert = 0.0;
    config.transform.eda_op_weights.random_delete = 2.0;
    config.filter.keep_per_example = keep;
    config.filter.perplexity_mode = PerplexityMode::Relative;
    config.filter.relative_ratio = 2.5;
    config.filter.confidence_threshold = 0.9;
    config
}

/// The unfiltered baseline over the same backend: mono pass, no
/// oversampling, every filter stage disabled.
fn raw_backend_config(seed: u64, keep: usize) -> BoostRunConfig {
    let mut config = directional_config(seed, keep);
    config.mode = BoostMode::Mono;
    config.pool_multiplier = 1;
    config.filter.enabled.clear();
    config
}

// ---------------------------------------------------------------------------
// Criterion 1: geometry oracles.

type P = (f64, f64);

fn cross(o: P, a: P, b: P) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn strictly_inside(p: P, a: P, b: P, c: P) -> bool {
    let d1 = cross(a, b, p);
    let d2 = cross(b, c, p);
    let d3 = cross(c, a, p);
    (d1 > 0.0 && d2 > 0.0 && d3 > 0.0) || (d1 < 0.0 && d2 < 0.0 && d3 < 0.0)
}

/// Brute-force hull oracle: a point is a vertex unless some triangle of
/// other points strictly contains it. Valid for points in general position.
fn oracle_hull_vertices(points: &[P]) -> Vec<P> {
    let n = points.len();
    let mut vertices = Vec::new();
    'next: for (i, &p) in points.iter().enumerate() {
        for a in 0..n {
            if a == i {
                continue;
            }
            for b in (a + 1)..n {
                if b == i {
                    continue;
                }
                for c in (b + 1)..n {
                    if c == i {
                        continue;
                    }
                    if strictly_inside(p, points[a], points[b], points[c]) {
                        continue 'next;
                    }
                }
            }
        }
        vertices.push(p);
    }
    vertices
}

fn point_set(points: &[P]) -> BTreeSet<(u64, u64)> {
    points
        .iter()
        .map(|p| (p.0.to_bits(), p.1.to_bits()))
        .collect()
}

fn check_geometry_oracles() -> Result<(), String> {
    const SETS: usize = 1_000;
    const MC_SAMPLES: usize = 400_000;
    const MC_POLYGONS: usize = 6;
    const REL_TOL_AREA: f64 = 0.01;
    const TOL_OVERLAP: f64 = 1e-9;

    let mut mc_candidates: Vec<Vec<P>> = Vec::new();
    for set_index in 0..SETS {
        let n = 1 + set_index % 12;
        let mut rng = ChaCha8Rng::seed_from_u64(40_000 + set_index as u64);
        let points: Vec<P> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let hull = convex_hull(&points).map_err(|e| format!("hull failed on set {set_index}: {e}"))?;

        if n < 3 {
            ensure(hull.degenerate, || format!("set {set_index}: n={n} not degenerate"))?;
            ensure(point_set(&hull.vertices) == point_set(&points), || {
                format!("set {set_index}: degenerate vertices differ from input")
            })?;
            continue;
        }

        ensure(!hull.degenerate, || {
            format!("set {set_index}: random set came out degenerate")
        })?;
        let k = hull.vertices.len();
        for i in 0..k {
            let turn = cross(
                hull.vertices[i],
                hull.vertices[(i + 1) % k],
                hull.vertices[(i + 2) % k],
            );
            ensure(turn > 0.0, || {
                format!("set {set_index}: vertices not strictly counter-clockwise")
            })?;
        }
        let expected = oracle_hull_vertices(&points);
        ensure(point_set(&hull.vertices) == point_set(&expected), || {
            format!(
                "set {set_index}: hull has {} vertices, oracle {}",
                hull.vertices.len(),
                expected.len()
            )
        })?;
        for p in &points {
            ensure(hull.contains(*p), || {
                format!("set {set_index}: hull does not contain input point")
            })?;
        }

        if n == 12 && mc_candidates.len() < MC_POLYGONS && polygon_area(&hull) > 0.1 {
            mc_candidates.push(hull.vertices.clone());
        }
    }

    for (poly_index, vertices) in mc_candidates.iter().enumerate() {
        let hull = convex_hull(vertices).map_err(|e| e.to_string())?;
        let area = polygon_area(&hull);
        let min_x = vertices.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_x = vertices.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = vertices.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_y = vertices.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let box_area = (max_x - min_x) * (max_y - min_y);
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + poly_index as u64);
        let mut hits = 0usize;
        for _ in 0..MC_SAMPLES {
            let p = (
                rng.random_range(min_x..max_x),
                rng.random_range(min_y..max_y),
            );
            if hull.contains(p) {
                hits += 1;
            }
        }
        let estimate = box_area * hits as f64 / MC_SAMPLES as f64;
        ensure((estimate - area).abs() <= REL_TOL_AREA * area, || {
            format!(
                "polygon {poly_index}: shoelace {area:.6} vs monte carlo {estimate:.6} \
                 exceeds {REL_TOL_AREA:.0e} relative"
            )
        })?;
    }
    ensure(mc_candidates.len() == MC_POLYGONS, || {
        format!("only {} polygons qualified for the area check", mc_candidates.len())
    })?;

    let unit = convex_hull(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
        .map_err(|e| e.to_string())?;
    let shifted = convex_hull(&[(0.5, 0.0), (1.5, 0.0), (1.5, 1.0), (0.5, 1.0)])
        .map_err(|e| e.to_string())?;
    let overlap = hull_overlap_rate(&unit, &shifted);
    ensure((overlap - 1.0 / 3.0).abs() <= TOL_OVERLAP, || {
        format!("square overlap {overlap} differs from 1/3 beyond {TOL_OVERLAP:.0e}")
    })
}

#[test]
fn criterion_01_geometry_oracles() {
    gate(
        "01 geometry oracle equivalence",
        Duration::from_secs(10),
        check_geometry_oracles,
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: skewness oracles.

/// Skewness through raw power sums; an algebraically equal but numerically
/// independent route to m3 / m2^(3/2).
fn raw_moment_skewness(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let s1 = samples.iter().sum::<f64>() / n;
    let s2 = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let s3 = samples.iter().map(|x| x * x * x).sum::<f64>() / n;
    let m2 = s2 - s1 * s1;
    let m3 = s3 - 3.0 * s1 * s2 + 2.0 * s1 * s1 * s1;
    m3 / m2.powf(1.5)
}

fn check_skewness_oracles() -> Result<(), String> {
    const SAMPLES: usize = 1_000;
    const TOL_DIRECT: f64 = 1e-12;
    const TOL_TRANSLATE: f64 = 1e-9;

    for i in 0..SAMPLES {
        let mut rng = ChaCha8Rng::seed_from_u64(60_000 + i as u64);
        let len = 3 + i % 198;
        let xs: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = skewness(&xs).map_err(|e| e.to_string())?;
        ensure(!got.degenerate, || format!("sample {i} flagged degenerate"))?;
        let want = raw_moment_skewness(&xs);
        ensure((got.value - want).abs() <= TOL_DIRECT, || {
            format!(
                "sample {i}: skewness {} vs direct formula {} beyond {TOL_DIRECT:.0e}",
                got.value, want
            )
        })?;
    }

    // Mirrored pairs around zero cancel exactly in each moment sum.
    for (i, symmetric) in [
        vec![1.5, -1.5, 0.25, -0.25],
        vec![2.0, -2.0, 0.5, -0.5, 1.0, -1.0],
        vec![0.75, -0.75, 3.0, -3.0, 0.0],
    ]
    .iter()
    .enumerate()
    {
        let got = skewness(symmetric).map_err(|e| e.to_string())?;
        ensure(got.value == 0.0, || {
            format!("symmetric vector {i} gave skewness {}", got.value)
        })?;
    }

    for i in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(61_000 + i as u64);
        let points: Vec<P> = (0..40).map(|_| (rng.random(), rng.random())).collect();
        let base = PointCloud::new(points.clone(), CloudSource::Train).map_err(|e| e.to_string())?;
        let moved = PointCloud::new(
            points.iter().map(|(x, y)| (x + 7.5, y - 3.25)).collect(),
            CloudSource::Train,
        )
        .map_err(|e| e.to_string())?;
        let a = global_skewness(&base).map_err(|e| e.to_string())?;
        let b = global_skewness(&moved).map_err(|e| e.to_string())?;
        ensure((a - b).abs() <= TOL_TRANSLATE, || {
            format!("cloud {i}: translation moved global skewness by {}", (a - b).abs())
        })?;
    }
    Ok(())
}

#[test]
fn criterion_02_skewness_oracles() {
    gate(
        "02 skewness oracle equivalence",
        Duration::from_secs(5),
        check_skewness_oracles,
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: scorer contract.

/// Hand-rolled multinomial naive Bayes with additive smoothing and one
/// shared out-of-vocabulary event, matching the documented scorer contract.
fn oracle_posterior(train: &[(&str, usize)], classes: usize, alpha: f64, text: &str) -> Vec<f64> {
    let mut vocab: HashSet<&str> = HashSet::new();
    let mut class_docs = vec![0u64; classes];
    let mut class_tokens = vec![0u64; classes];
    let mut counts: HashMap<(usize, &str), u64> = HashMap::new();
    for &(doc, label) in train {
        class_docs[label] += 1;
        for token in doc.split_whitespace() {
            vocab.insert(token);
            class_tokens[label] += 1;
            *counts.entry((label, token)).or_insert(0) += 1;
        }
    }
    let n_docs: u64 = class_docs.iter().sum();
    let v = (vocab.len() + 1) as f64;
    let mut log_post = vec![0.0f64; classes];
    for (cls, lp) in log_post.iter_mut().enumerate() {
        *lp = (class_docs[cls] as f64 / n_docs as f64).ln();
        let denom = class_tokens[cls] as f64 + alpha * v;
        for token in text.split_whitespace() {
            let count = counts.get(&(cls, token)).copied().unwrap_or(0);
            *lp += ((count as f64 + alpha) / denom).ln();
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

fn check_scorer_contract() -> Result<(), String> {
    const TOL_POSTERIOR: f64 = 1e-9;
    const TOL_UNIFORM: f64 = 1e-9;

    // 20 examples, unbalanced so the prior matters.
    let rows: [(&str, &str); 20] = [
        ("the phone works and feels excellent", "pos"),
        ("the battery runs excellent all day", "pos"),
        ("the screen looks superb and bright", "pos"),
        ("the camera feels superb at night", "pos"),
        ("the speaker sounds wonderful and clear", "pos"),
        ("the keyboard feels wonderful to type", "pos"),
        ("the charger works excellent and fast", "pos"),
        ("the case looks superb in red", "pos"),
        ("the port works wonderful with hubs", "pos"),
        ("the phone looks excellent in blue", "pos"),
        ("the battery feels superb after charge", "pos"),
        ("the camera works wonderful in rain", "pos"),
        ("the cable looks excellent and long", "pos"),
        ("the phone feels awful and slow", "neg"),
        ("the battery runs awful and hot", "neg"),
        ("the screen looks dreadful in sun", "neg"),
        ("the speaker sounds dreadful and flat", "neg"),
        ("the keyboard feels horrid to type", "neg"),
        ("the charger works horrid and warm", "neg"),
        ("the case looks awful in grey", "neg"),
    ];
    let labels = LabelSet::new(vec!["neg".into(), "pos".into()]).unwrap();
    let examples: Vec<Example> = rows
        .iter()
        .enumerate()
        .map(|(i, (text, label))| Example {
            id: i,
            text: text.to_string(),
            label: label.to_string(),
            aspect: None,
            aspect_span: None,
        })
        .collect();
    let train = Dataset::new(Task::Tc, examples, labels).unwrap();
    let config = SurrogateTrainConfig::default();
    let model = train_lightweight(&train, &train.empty_like(), &config, 0)
        .map_err(|e| e.to_string())?;

    let oracle_rows: Vec<(&str, usize)> = rows
        .iter()
        .map(|(text, label)| (*text, usize::from(*label == "pos")))
        .collect();
    let queries = [
        "the phone works and feels excellent",
        "the keyboard feels horrid to type",
        "the screen looks superb and bright",
        "a tablet nobody has reviewed yet",
        "excellent excellent excellent awful",
        "the the the phone phone",
        "dreadful camera but superb speaker",
    ];
    for query in queries {
        let got = model.score(query, None).map_err(|e| e.to_string())?;
        let want = oracle_posterior(&oracle_rows, 2, config.smoothing_alpha, query);
        for (cls, (g, w)) in got.confidence.iter().zip(&want).enumerate() {
            ensure((g - w).abs() <= TOL_POSTERIOR, || {
                format!(
                    "query {query:?} class {cls}: posterior {g} vs oracle {w} beyond \
                     {TOL_POSTERIOR:.0e}"
                )
            })?;
        }
    }

    // With additive smoothing the only all-uniform n-gram model is the one
    // with no training events; its alphabet is the end marker plus the
    // out-of-vocabulary token, so V = 2.
    for (order, alpha) in [(1usize, 1.0f64), (1, 0.25), (2, 0.5), (3, 1.0)] {
        let lm = NgramLm::fit(&[], order, alpha).map_err(|e| e.to_string())?;
        let v = lm.effective_vocab() as f64;
        let ppl = lm
            .pseudo_perplexity(&["alpha".into(), "beta".into(), "gamma".into()])
            .map_err(|e| e.to_string())?;
        ensure((ppl - v).abs() <= TOL_UNIFORM, || {
            format!("uniform model order {order} alpha {alpha}: ppl {ppl} vs V {v}")
        })?;
    }

    let sentences: Vec<Vec<String>> = [
        "the phone works fine today",
        "the battery works well today",
        "the screen looks sharp today",
    ]
    .iter()
    .map(|s| s.split_whitespace().map(String::from).collect())
    .collect();
    let lm = NgramLm::fit(&sentences, 1, 1.0).map_err(|e| e.to_string())?;
    let seen: Vec<String> = "the phone works today"
        .split_whitespace()
        .map(String::from)
        .collect();
    let mut with_oov = seen.clone();
    with_oov.insert(2, "zzzunseen".to_string());
    let base = lm.pseudo_perplexity(&seen).map_err(|e| e.to_string())?;
    let bumped = lm.pseudo_perplexity(&with_oov).map_err(|e| e.to_string())?;
    ensure(bumped > base, || {
        format!("oov insertion did not raise perplexity: {base} -> {bumped}")
    })
}

#[test]
fn criterion_03_scorer_contract() {
    gate(
        "03 scorer contract",
        Duration::from_secs(5),
        check_scorer_contract,
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: filter-chain semantics.

struct RandomPool {
    example: Example,
    labels: LabelSet,
    candidates: Vec<AugmentationCandidate>,
}

fn random_pool(rng: &mut ChaCha8Rng) -> RandomPool {
    let class_count = 2 + rng.random_range(0..2usize);
    let names: Vec<String> = (0..class_count).map(|c| format!("c{c}")).collect();
    let labels = LabelSet::new(names.clone()).unwrap();
    let truth = names[rng.random_range(0..class_count)].clone();
    let pool_size = rng.random_range(0..25usize);
    let candidates = (0..pool_size)
        .map(|draw| {
            let raw: Vec<f64> = (0..class_count)
                .map(|_| rng.random_range(0.05..1.0))
                .collect();
            let sum: f64 = raw.iter().sum();
            let confidence: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let perplexity = 1.0 + rng.random_range(0.0..30.0);
            let score = ScoreTriple::new(perplexity, confidence, &labels).unwrap();
            AugmentationCandidate {
                text: format!("candidate {draw}"),
                origin_id: 0,
                backend: Strategy::Eda,
                fold_iteration: 0,
                draw_index: draw,
                score: Some(score),
            }
        })
        .collect();
    let example = Example {
        id: 0,
        text: "origin text".to_string(),
        label: truth,
        aspect: None,
        aspect_span: None,
    };
    RandomPool {
        example,
        labels,
        candidates,
    }
}

fn random_filter_config(rng: &mut ChaCha8Rng) -> (FilterConfig, Option<f64>) {
    let mut config = FilterConfig::default();
    config.confidence_threshold = rng.random_range(0.0..1.0);
    config.keep_per_example = 1 + rng.random_range(0..8usize);
    config.perplexity_mode = if rng.random_bool(0.5) {
        PerplexityMode::Absolute
    } else {
        PerplexityMode::Relative
    };
    config.perplexity_limit = if rng.random_bool(0.2) {
        f64::INFINITY
    } else {
        1.0 + rng.random_range(0.0..25.0)
    };
    config.relative_ratio = rng.random_range(0.5..3.0);
    config.enabled = [
        FilterStage::Label,
        FilterStage::Perplexity,
        FilterStage::ConfidenceRank,
        FilterStage::ConfidenceThreshold,
    ]
    .into_iter()
    .filter(|_| rng.random_bool(0.8))
    .collect();
    let median = match config.perplexity_mode {
        PerplexityMode::Relative => Some(1.0 + rng.random_range(0.0..10.0)),
        PerplexityMode::Absolute => None,
    };
    (config, median)
}

/// Stage-by-stage recomposition of the documented chain semantics.
fn hand_composed(
    pool: &RandomPool,
    config: &FilterConfig,
    median: Option<f64>,
) -> Vec<AugmentationCandidate> {
    let mut cands = pool.candidates.clone();
    if config.is_enabled(FilterStage::Label) {
        cands.retain(|c| {
            c.score.as_ref().unwrap().predicted_label == pool.example.label
        });
    }
    if config.is_enabled(FilterStage::Perplexity) {
        let limit = match config.perplexity_mode {
            PerplexityMode::Absolute => config.perplexity_limit,
            PerplexityMode::Relative => config.relative_ratio * median.unwrap(),
        };
        cands.retain(|c| c.score.as_ref().unwrap().perplexity < limit);
    }
    if config.is_enabled(FilterStage::ConfidenceRank) {
        cands.sort_by(|a, b| {
            let sa = a.score.as_ref().unwrap();
            let sb = b.score.as_ref().unwrap();
            sb.max_confidence()
                .partial_cmp(&sa.max_confidence())
                .unwrap()
                .then_with(|| sa.perplexity.partial_cmp(&sb.perplexity).unwrap())
                .then_with(|| a.draw_index.cmp(&b.draw_index))
        });
    }
    cands.truncate(config.keep_per_example);
    if config.is_enabled(FilterStage::ConfidenceThreshold) {
        cands.retain(|c| c.score.as_ref().unwrap().max_confidence() > config.confidence_threshold);
    }
    cands
}

fn draw_indices(cands: &[AugmentationCandidate]) -> Vec<usize> {
    cands.iter().map(|c| c.draw_index).collect()
}

fn check_filter_chain_semantics() -> Result<(), String> {
    const POOLS: usize = 200;

    for i in 0..POOLS {
        let mut rng = ChaCha8Rng::seed_from_u64(70_000 + i as u64);
        let pool = random_pool(&mut rng);
        let (config, median) = random_filter_config(&mut rng);
        // Pre-scored candidates must pass through untouched, so a scorer
        // with no entries guards against any re-scoring.
        let guard = ScriptedScorer::new(pool.labels.clone(), Vec::new());
        let chained = filter_chain(
            &pool.example,
            pool.candidates.clone(),
            &guard,
            &config,
            median,
        )
        .map_err(|e| format!("pool {i}: chain failed: {e}"))?;
        let composed = hand_composed(&pool, &config, median);
        ensure(draw_indices(&chained) == draw_indices(&composed), || {
            format!(
                "pool {i}: chain kept {:?}, hand composition kept {:?}",
                draw_indices(&chained),
                draw_indices(&composed)
            )
        })?;
        ensure(chained.len() <= config.keep_per_example, || {
            format!(
                "pool {i}: {} survivors exceed budget {}",
                chained.len(),
                config.keep_per_example
            )
        })?;

        // Monotonicity is a property of the ranked chain; truncation by draw
        // order (rank disabled) can displace confident candidates, so the
        // relaxation check always ranks.
        let mut strict = config.clone();
        strict.enabled.insert(FilterStage::ConfidenceRank);
        let mut relaxed = strict.clone();
        relaxed.confidence_threshold = strict.confidence_threshold * rng.random_range(0.0..1.0);
        relaxed.keep_per_example = strict.keep_per_example + rng.random_range(0..4usize);
        if relaxed.perplexity_limit.is_finite() && rng.random_bool(0.5) {
            relaxed.perplexity_limit += rng.random_range(0.0..20.0);
        } else {
            relaxed.perplexity_limit = f64::INFINITY;
        }
        relaxed.relative_ratio = strict.relative_ratio * (1.0 + rng.random_range(0.0..1.0));
        let kept_strict = filter_chain(
            &pool.example,
            pool.candidates.clone(),
            &guard,
            &strict,
            median,
        )
        .map_err(|e| format!("pool {i}: strict chain failed: {e}"))?;
        let kept_relaxed = filter_chain(
            &pool.example,
            pool.candidates.clone(),
            &guard,
            &relaxed,
            median,
        )
        .map_err(|e| format!("pool {i}: relaxed chain failed: {e}"))?;
        ensure(kept_relaxed.len() >= kept_strict.len(), || {
            format!(
                "pool {i}: relaxing thresholds shrank survivors {} -> {}",
                kept_strict.len(),
                kept_relaxed.len()
            )
        })?;
    }
    Ok(())
}

#[test]
fn criterion_04_filter_chain_semantics() {
    gate(
        "04 filter-chain semantics",
        Duration::from_secs(5),
        check_filter_chain_semantics,
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: cross-boosting never scores an example's candidates with a
// surrogate trained on that example.

fn check_no_train_overlap() -> Result<(), String> {
    const N: usize = 500;
    const K: usize = 5;

    let data = review_corpus(N, 0);
    let mut config = relaxed_config(BoostMode::Cross, 2, 9);
    config.k = K;
    let scorer = ScorerSpec::Lightweight(config.surrogate.clone());
    let run = boost_augment(&data, &config, &review_resources(), &scorer)
        .map_err(|e| e.to_string())?;
    let plan = make_fold_plan(&data, K, config.seed).map_err(|e| e.to_string())?;

    ensure(!run.provenance.is_empty(), || {
        "no surviving candidates; the overlap check would be vacuous".to_string()
    })?;
    let trained_on: Vec<HashSet<usize>> = run
        .iterations
        .iter()
        .map(|it| it.train_example_ids.iter().copied().collect())
        .collect();
    for record in &run.provenance {
        let stats = &run.iterations[record.fold_iteration];
        ensure(stats.iteration == record.fold_iteration, || {
            "iteration stats out of order".to_string()
        })?;
        ensure(!trained_on[record.fold_iteration].contains(&record.origin_id), || {
            format!(
                "origin {} was in the training set of the surrogate that scored it \
                 (iteration {})",
                record.origin_id, record.fold_iteration
            )
        })?;
        let boost_fold = stats.boost_fold.expect("cross iterations have a boost fold");
        ensure(plan.assignment()[record.origin_id] == boost_fold, || {
            format!(
                "origin {} scored in iteration {} but assigned to fold {}",
                record.origin_id,
                record.fold_iteration,
                plan.assignment()[record.origin_id]
            )
        })?;
    }
    Ok(())
}

#[test]
fn criterion_05_cross_boosting_no_overlap() {
    gate(
        "05 cross-boosting train/score separation",
        Duration::from_secs(30),
        check_no_train_overlap,
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: the label constraint removes polarity flips.

fn check_label_constraint_efficacy() -> Result<(), String> {
    let labels = LabelSet::new(vec!["neg".into(), "pos".into()]).unwrap();
    let examples: Vec<Example> = (0..40)
        .map(|i| {
            // Consecutive id pairs share a noun and verb so every neutral
            // token is class-balanced and the keyword alone decides.
            let noun = NOUNS[(i / 2) % NOUNS.len()];
            let verb = VERBS[(i / 4) % VERBS.len()];
            let (label, kw) = if i % 2 == 0 {
                ("pos", "excellent")
            } else {
                ("neg", "terrible")
            };
            Example {
                id: i,
                text: format!("the {noun} {verb} {kw} today"),
                label: label.to_string(),
                aspect: None,
                aspect_span: None,
            }
        })
        .collect();
    let data = Dataset::new(Task::Tc, examples, labels).unwrap();
    let model = train_lightweight(
        &data,
        &data.empty_like(),
        &SurrogateTrainConfig::default(),
        0,
    )
    .map_err(|e| e.to_string())?;

    let mut config = FilterConfig::default();
    config.enabled = [FilterStage::Label].into_iter().collect();
    config.keep_per_example = 100;

    let mut flipped_total = 0usize;
    for example in data.examples() {
        // Adversarial backend: swap the planted keyword for the opposite one.
        let flipped_text = if example.label == "pos" {
            example.text.replace("excellent", "terrible")
        } else {
            example.text.replace("terrible", "excellent")
        };
        let flipped = AugmentationCandidate {
            text: flipped_text,
            origin_id: example.id,
            backend: Strategy::Eda,
            fold_iteration: 0,
            draw_index: 0,
            score: None,
        };
        let control = AugmentationCandidate {
            text: example.text.clone(),
            origin_id: example.id,
            backend: Strategy::Eda,
            fold_iteration: 0,
            draw_index: 1,
            score: None,
        };
        let kept = filter_chain(example, vec![flipped, control], &model, &config, None)
            .map_err(|e| e.to_string())?;
        ensure(kept.len() == 1 && kept[0].draw_index == 1, || {
            format!(
                "example {}: expected only the faithful copy to survive, kept {:?}",
                example.id,
                draw_indices(&kept)
            )
        })?;
        flipped_total += 1;
    }
    ensure(flipped_total == data.len(), || {
        "not every example produced a flipped candidate".to_string()
    })
}

#[test]
fn criterion_06_label_constraint_efficacy() {
    gate(
        "06 label-constraint efficacy",
        Duration::from_secs(30),
        check_label_constraint_efficacy,
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: filtered augmentation tracks the test cloud at least as well
// as the raw backend.

fn overlap_with_test(aug: &Dataset, test: &Dataset, embed_seed: u64) -> Result<f64, String> {
    let clouds = joint_clouds(
        &[(aug, CloudSource::Augmented), (test, CloudSource::Test)],
        EmbedMethod::Deterministic,
        embed_seed,
    )
    .map_err(|e| e.to_string())?;
    let report = shift_report(&clouds[0], &clouds[1]).map_err(|e| e.to_string())?;
    Ok(report.overlap_rate)
}

fn check_directional_shift() -> Result<(), String> {
    const SEEDS: u64 = 5;
    const EMBED_SEED: u64 = 977;

    let train = review_corpus(80, 0);
    let test = clean_test_corpus(40);
    let resources = review_resources();

    let mut filtered = Vec::new();
    let mut raw = Vec::new();
    for seed in 0..SEEDS {
        let config = directional_config(seed, 4);
        let scorer = ScorerSpec::Lightweight(config.surrogate.clone());
        let aug = augment(&train, &config, &resources, &scorer).map_err(|e| e.to_string())?;
        filtered.push(overlap_with_test(&aug.dataset, &test, EMBED_SEED)?);

        let raw_aug = augment(&train, &raw_backend_config(seed, 4), &resources, &scorer)
            .map_err(|e| e.to_string())?;
        raw.push(overlap_with_test(&raw_aug.dataset, &test, EMBED_SEED)?);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let mean_filtered = mean(&filtered);
    let mean_raw = mean(&raw);
    ensure(mean_filtered >= mean_raw, || {
        format!(
            "filtered overlap {mean_filtered:.4} fell below raw backend {mean_raw:.4} \
             (filtered {filtered:?}, raw {raw:?})"
        )
    })
}

#[test]
fn criterion_07_directional_shift() {
    gate(
        "07 directional shift claim",
        Duration::from_secs(120),
        check_directional_shift,
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: the sweep separates filtered scaling from raw-backend
// saturation.

fn check_directional_sweep() -> Result<(), String> {
    let train = review_corpus(80, 0);
    let test = trap_test_corpus();
    let base = directional_config(0, 8);
    let scorer = ScorerSpec::Lightweight(base.surrogate.clone());
    let sweep = SweepConfig {
        n_values: vec![2, 8],
        modes: vec![SweepMode::BoostAug, SweepMode::RawBackend],
        seeds: (0..5).collect(),
    };
    let result = sweep_n(&train, &test, &sweep, &base, &review_resources(), &scorer)
        .map_err(|e| e.to_string())?;

    let tsv = result.to_tsv();
    let lines: Vec<&str> = tsv.lines().collect();
    ensure(lines.len() == 5, || {
        format!("sweep tsv has {} lines, expected header plus 4 rows", lines.len())
    })?;
    ensure(
        lines[0] == "mode\tn\tacc_mean\tacc_stderr\tf1_mean\tf1_stderr",
        || format!("unexpected tsv header {:?}", lines[0]),
    )?;

    let row = |mode: SweepMode, n: usize| {
        result
            .rows
            .iter()
            .find(|r| r.mode == mode && r.n == n)
            .ok_or_else(|| format!("missing sweep row {mode:?} n={n}"))
    };
    let boost_2 = row(SweepMode::BoostAug, 2)?;
    let boost_8 = row(SweepMode::BoostAug, 8)?;
    let raw_2 = row(SweepMode::RawBackend, 2)?;
    let raw_8 = row(SweepMode::RawBackend, 8)?;

    ensure(boost_8.f1_mean >= boost_2.f1_mean, || {
        format!(
            "filtered macro-f1 regressed with budget: {:.4} at 8 vs {:.4} at 2",
            boost_8.f1_mean, boost_2.f1_mean
        )
    })?;
    ensure(raw_8.f1_mean <= raw_2.f1_mean + raw_2.f1_stderr, || {
        format!(
            "raw backend kept improving: {:.4} at 8 vs {:.4} + {:.4} at 2",
            raw_8.f1_mean, raw_2.f1_mean, raw_2.f1_stderr
        )
    })
}

#[test]
fn criterion_08_directional_sweep() {
    gate(
        "08 directional sweep claim",
        Duration::from_secs(300),
        check_directional_sweep,
    );
}

// ---------------------------------------------------------------------------
// Criteria 9 and 10 drive the installed binaries.

fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boostaug"))
        .args(args)
        .output()
        .expect("boostaug binary runs")
}

fn expect_success(what: &str, output: &Output) -> Result<(), String> {
    ensure(output.status.success(), || {
        format!(
            "{what} failed with {:?}: {}",
            output.status.code(),
            String::from_utf8_lossy(&output.stderr)
        )
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn expect_identical(what: &str, paths: &[PathBuf]) -> Result<(), String> {
    let reference = read_bytes(&paths[0])?;
    for other in &paths[1..] {
        ensure(read_bytes(other)? == reference, || {
            format!(
                "{what}: {} and {} differ",
                paths[0].display(),
                other.display()
            )
        })?;
    }
    Ok(())
}

fn write_fixture(dir: &Path, name: &str, data: &Dataset) -> Result<PathBuf, String> {
    let path = dir.join(name);
    boostaug_core::write_dataset(data, &path).map_err(|e| e.to_string())?;
    Ok(path)
}

fn check_determinism_envelope() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let train = write_fixture(dir.path(), "train.tsv", &review_corpus(60, 0))?;
    let test = write_fixture(dir.path(), "test.tsv", &review_corpus(24, 97))?;
    let train = train.to_str().unwrap();
    let test = test.to_str().unwrap();

    let variants: [(&str, &str); 3] = [("a", "1"), ("b", "1"), ("c", "4")];

    let mut aug_outs = Vec::new();
    let mut aug_reports = Vec::new();
    for (tag, jobs) in variants {
        let out = dir.path().join(format!("aug_{tag}.tsv"));
        let report = dir.path().join(format!("aug_{tag}.json"));
        let result = run_cli(&[
            "augment",
            "--input",
            train,
            "--task",
            "tc",
            "--mode",
            "cross",
            "--k",
            "5",
            "--n",
            "4",
            "--seed",
            "11",
            "--jobs",
            jobs,
            "--perplexity-limit",
            "inf",
            "--confidence-threshold",
            "0.5",
            "--out",
            out.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ]);
        expect_success("augment", &result)?;
        aug_outs.push(out);
        aug_reports.push(report);
    }
    expect_identical("augment dataset", &aug_outs)?;
    expect_identical("augment report", &aug_reports)?;

    let augmented = aug_outs[0].to_str().unwrap();
    let mut shift_reports = Vec::new();
    let mut shift_points = Vec::new();
    for (tag, jobs) in variants {
        let report = dir.path().join(format!("shift_{tag}.json"));
        let points = dir.path().join(format!("points_{tag}.tsv"));
        let result = run_cli(&[
            "diagnose",
            "--train",
            train,
            "--augmented",
            augmented,
            "--test",
            test,
            "--task",
            "tc",
            "--seed",
            "11",
            "--jobs",
            jobs,
            "--report",
            report.to_str().unwrap(),
            "--points",
            points.to_str().unwrap(),
        ]);
        expect_success("diagnose", &result)?;
        shift_reports.push(report);
        shift_points.push(points);
    }
    expect_identical("diagnose report", &shift_reports)?;
    expect_identical("diagnose points", &shift_points)?;

    let mut sweep_outs = Vec::new();
    let mut sweep_reports = Vec::new();
    for (tag, jobs) in variants {
        let out = dir.path().join(format!("sweep_{tag}.tsv"));
        let report = dir.path().join(format!("sweep_{tag}.json"));
        let result = run_cli(&[
            "sweep",
            "--train",
            train,
            "--test",
            test,
            "--task",
            "tc",
            "--n",
            "1,2",
            "--seeds",
            "2",
            "--modes",
            "boostaug,raw_backend",
            "--seed",
            "11",
            "--jobs",
            jobs,
            "--perplexity-limit",
            "inf",
            "--confidence-threshold",
            "0.5",
            "--out",
            out.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
        ]);
        expect_success("sweep", &result)?;
        sweep_outs.push(out);
        sweep_reports.push(report);
    }
    expect_identical("sweep tsv", &sweep_outs)?;
    expect_identical("sweep report", &sweep_reports)
}

#[test]
fn criterion_09_determinism_envelope() {
    gate(
        "09 determinism envelope",
        Duration::from_secs(180),
        check_determinism_envelope,
    );
}

fn check_protocol_conformance() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let train = write_fixture(dir.path(), "train.tsv", &review_corpus(60, 0))?;
    let train = train.to_str().unwrap();

    // The mirroring scorer trains the same lightweight model on the same
    // file, so the wire protocol is the only variable under test. Mono mode
    // keeps the training sets aligned; run reports are not compared because
    // they record the scorer identity.
    let base_args = |out: &str| {
        vec![
            "augment".to_string(),
            "--input".to_string(),
            train.to_string(),
            "--task".to_string(),
            "tc".to_string(),
            "--mode".to_string(),
            "mono".to_string(),
            "--n".to_string(),
            "4".to_string(),
            "--seed".to_string(),
            "42".to_string(),
            "--perplexity-limit".to_string(),
            "inf".to_string(),
            "--confidence-threshold".to_string(),
            "0.5".to_string(),
            "--out".to_string(),
            out.to_string(),
        ]
    };

    let lw_out = dir.path().join("aug_lightweight.tsv");
    let args = base_args(lw_out.to_str().unwrap());
    let result = run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
    expect_success("lightweight augment", &result)?;

    let ext_out = dir.path().join("aug_external.tsv");
    let mirror = format!(
        "exec:{} --mirror-lightweight --train {train} --task tc",
        env!("CARGO_BIN_EXE_mock_scorer")
    );
    let mut args = base_args(ext_out.to_str().unwrap());
    args.push("--scorer".to_string());
    args.push(mirror);
    let result = run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
    expect_success("external augment", &result)?;
    expect_identical("lightweight vs external", &[lw_out, ext_out])?;

    let bad_out = dir.path().join("aug_bad.tsv");
    let mut args = base_args(bad_out.to_str().unwrap());
    args.push("--scorer".to_string());
    args.push(format!("exec:{} --malformed", env!("CARGO_BIN_EXE_mock_scorer")));
    let result = run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
    ensure(result.status.code() == Some(1), || {
        format!(
            "malformed scorer should exit 1, got {:?}",
            result.status.code()
        )
    })?;
    let stderr = String::from_utf8_lossy(&result.stderr);
    ensure(stderr.contains("scorer protocol violation"), || {
        format!("stderr does not name the protocol violation: {stderr}")
    })
}

#[test]
fn criterion_10_protocol_conformance() {
    gate(
        "10 scorer protocol conformance",
        Duration::from_secs(10),
        check_protocol_conformance,
    );
}
