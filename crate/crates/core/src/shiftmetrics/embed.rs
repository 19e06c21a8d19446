//! 2D embedding of feature vectors.
//!
//! The default method mean-centers the feature matrix and projects onto the
//! top-2 principal directions, computed by orthogonal iteration against the
//! data matrix (the covariance matrix is never formed). Signs are fixed so
//! each direction's largest-magnitude loading is positive (ties take the
//! lowest index), which makes the layout reproducible across runs and
//! platforms. t-SNE is a plug-in: the crate defines the hook but ships no
//! implementation.

use rand::RngExt;

use crate::error::{Error, Result};
use crate::seeding::{self, STREAM_EMBED};

use super::{CloudSource, PointCloud};

const MAX_ITERS: usize = 10_000;
const CONVERGENCE_TOL: f64 = 1e-13;
/// Relative eigenvalue floor below which the matrix counts as rank < 2.
const RANK_TOL: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum EmbedMethod {
    Deterministic,
    Tsne,
}

impl std::str::FromStr for EmbedMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(EmbedMethod::Deterministic),
            "tsne" => Ok(EmbedMethod::Tsne),
            other => Err(Error::config(format!(
                "unknown embedding method {other:?}; expected deterministic or tsne"
            ))),
        }
    }
}

/// Seeded drop-in for the t-SNE path.
pub trait Embedder: Send + Sync {
    fn embed(&self, features: &[Vec<f64>], seed: u64) -> Result<Vec<(f64, f64)>>;
}

fn check_features(features: &[Vec<f64>]) -> Result<usize> {
    if features.len() < 3 {
        return Err(Error::TooFewSamples {
            min: 3,
            got: features.len(),
        });
    }
    let dim = features[0].len();
    if dim < 2 {
        return Err(Error::config(format!(
            "feature vectors need dimension >= 2, got {dim}"
        )));
    }
    for (i, v) in features.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::config(format!(
                "feature vector {i} has dimension {}, expected {dim}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(format!(
                "feature vector {i} has non-finite entries"
            )));
        }
    }
    Ok(dim)
}

fn centered(features: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in features {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    features
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// w = Xᵀ(X v) without forming XᵀX.
fn gram_mul(x: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let dim = v.len();
    let mut w = vec![0.0; dim];
    for row in x {
        let proj = dot(row, v);
        if proj != 0.0 {
            for (wi, xi) in w.iter_mut().zip(row) {
                *wi += proj * xi;
            }
        }
    }
    w
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Top-2 principal directions of the centered matrix by orthogonal
/// iteration. Returns the (unit) directions and their eigenvalues of XᵀX/n.
fn top2_directions(x: &[Vec<f64>], dim: usize, seed: u64) -> Result<([Vec<f64>; 2], [f64; 2])> {
    let mut rng = seeding::rng_for(&[seed, STREAM_EMBED]);
    let mut v1: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut v2: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut v1);
    let p = dot(&v2, &v1);
    for (y, x1) in v2.iter_mut().zip(&v1) {
        *y -= p * x1;
    }
    normalize(&mut v2);

    for _ in 0..MAX_ITERS {
        let mut w1 = gram_mul(x, &v1);
        if normalize(&mut w1) == 0.0 {
            return Err(Error::RankDeficient);
        }
        let mut w2 = gram_mul(x, &v2);
        let p = dot(&w2, &w1);
        for (y, x1) in w2.iter_mut().zip(&w1) {
            *y -= p * x1;
        }
        if normalize(&mut w2) == 0.0 {
            return Err(Error::RankDeficient);
        }
        let settled =
            (1.0 - dot(&w1, &v1).abs()) < CONVERGENCE_TOL && (1.0 - dot(&w2, &v2).abs()) < CONVERGENCE_TOL;
        v1 = w1;
        v2 = w2;
        if settled {
            break;
        }
    }

    let n = x.len() as f64;
    let lambda1 = dot(&gram_mul(x, &v1), &v1) / n;
    let lambda2 = dot(&gram_mul(x, &v2), &v2) / n;
    if lambda1 <= 0.0 || lambda2 <= lambda1 * RANK_TOL {
        return Err(Error::RankDeficient);
    }
    fix_sign(&mut v1);
    fix_sign(&mut v2);
    Ok(([v1, v2], [lambda1, lambda2]))
}

/// Embeds feature vectors into 2D, one point per vector in input order.
pub fn embed_2d(
    features: &[Vec<f64>],
    method: EmbedMethod,
    seed: u64,
    source: CloudSource,
) -> Result<PointCloud> {
    match method {
        EmbedMethod::Deterministic => {
            let dim = check_features(features)?;
            let x = centered(features, dim);
            let ([v1, v2], _) = top2_directions(&x, dim, seed)?;
            let points = x.iter().map(|row| (dot(row, &v1), dot(row, &v2))).collect();
            PointCloud::new(points, source)
        }
        EmbedMethod::Tsne => Err(Error::config(
            "tsne embedding needs a plug-in; use embed_2d_with",
        )),
    }
}

/// Embeds through an external plug-in (the t-SNE hook).
pub fn embed_2d_with(
    features: &[Vec<f64>],
    embedder: &dyn Embedder,
    seed: u64,
    source: CloudSource,
) -> Result<PointCloud> {
    check_features(features)?;
    let points = embedder.embed(features, seed)?;
    if points.len() != features.len() {
        return Err(Error::Scorer(format!(
            "embedder returned {} points for {} vectors",
            points.len(),
            features.len()
        )));
    }
    PointCloud::new(points, source)
}
