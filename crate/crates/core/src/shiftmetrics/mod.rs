//! Feature-space shift diagnostics: 2D embeddings, convex-hull overlap, and
//! skewness summaries. See the submodules for the individual pieces; the
//! [`shift_report`] entry point compares a reference cloud against a
//! diagnosed cloud and is what the `diagnose` front end serializes.

mod embed;
mod features;
mod geometry;

pub use embed::{embed_2d, embed_2d_with, EmbedMethod, Embedder};
pub use features::{feature_vectors, Featurizer};
pub use geometry::{
    clip_convex, convex_hull, hull_overlap_rate, polygon_area, skewness, ConvexPolygon, Skewness,
};

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSource {
    Train,
    Test,
    Augmented,
}

impl std::fmt::Display for CloudSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CloudSource::Train => "train",
            CloudSource::Test => "test",
            CloudSource::Augmented => "augmented",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<(f64, f64)>,
    pub source: CloudSource,
}

impl PointCloud {
    pub fn new(points: Vec<(f64, f64)>, source: CloudSource) -> Result<PointCloud> {
        if points.is_empty() {
            return Err(Error::config("a point cloud needs at least one point"));
        }
        if points
            .iter()
            .any(|p| !p.0.is_finite() || !p.1.is_finite())
        {
            return Err(Error::config("point cloud has non-finite coordinates"));
        }
        Ok(PointCloud { points, source })
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

/// Shift summary for one (reference, diagnosed) cloud pair. The skewness
/// fields describe the diagnosed cloud `b`; `overlap_rate` compares the two
/// hulls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub source_a: CloudSource,
    pub source_b: CloudSource,
    pub count_a: usize,
    pub count_b: usize,
    pub overlap_rate: f64,
    pub skew_x: f64,
    pub skew_y: f64,
    pub skew_degenerate: bool,
    pub global_skewness: f64,
}

/// Sum of absolute per-axis skewness of a cloud.
pub fn global_skewness(cloud: &PointCloud) -> Result<f64> {
    let sk_x = skewness(&cloud.xs())?;
    let sk_y = skewness(&cloud.ys())?;
    Ok(sk_x.value.abs() + sk_y.value.abs())
}

/// Embeds several datasets into one shared 2D space: the featurizer is fit
/// on the union vocabulary and one projection is computed over all rows, so
/// the resulting clouds (one per input, in order) are directly comparable.
pub fn joint_clouds(
    datasets: &[(&Dataset, CloudSource)],
    method: EmbedMethod,
    seed: u64,
) -> Result<Vec<PointCloud>> {
    if datasets.is_empty() {
        return Err(Error::config("joint embedding needs at least one dataset"));
    }
    let featurizer = Featurizer::fit_texts(
        datasets
            .iter()
            .flat_map(|(ds, _)| ds.examples().iter().map(|ex| ex.text.as_str())),
    )?;
    let mut rows = Vec::new();
    for (ds, _) in datasets {
        rows.extend(feature_vectors(&featurizer, ds));
    }
    let combined = embed_2d(&rows, method, seed, datasets[0].1)?;
    let mut clouds = Vec::with_capacity(datasets.len());
    let mut offset = 0;
    for (ds, source) in datasets {
        let next = offset + ds.len();
        clouds.push(PointCloud::new(
            combined.points[offset..next].to_vec(),
            *source,
        )?);
        offset = next;
    }
    Ok(clouds)
}

/// Compares the diagnosed cloud `b` against the reference cloud `a`.
pub fn shift_report(a: &PointCloud, b: &PointCloud) -> Result<ShiftReport> {
    let hull_a = convex_hull(&a.points)?;
    let hull_b = convex_hull(&b.points)?;
    let overlap = hull_overlap_rate(&hull_a, &hull_b);
    let sk_x = skewness(&b.xs())?;
    let sk_y = skewness(&b.ys())?;
    Ok(ShiftReport {
        source_a: a.source,
        source_b: b.source,
        count_a: a.points.len(),
        count_b: b.points.len(),
        overlap_rate: overlap,
        skew_x: sk_x.value,
        skew_y: sk_y.value,
        skew_degenerate: sk_x.degenerate || sk_y.degenerate,
        global_skewness: sk_x.value.abs() + sk_y.value.abs(),
    })
}
