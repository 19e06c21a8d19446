//! Convex hulls, areas, clipping, and skewness.
//!
//! Hulls come from a Graham scan with strict turns, so collinear boundary
//! points are never vertices. Fewer than three non-collinear distinct points
//! give a degenerate polygon (a point or a segment) with area zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Point = (f64, f64);

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn dist2(a: Point, b: Point) -> f64 {
    let dx = b.0 - a.0;
    let dy = b.1 - a.1;
    dx * dx + dy * dy
}

/// Convex polygon with counter-clockwise vertices. Degenerate polygons keep
/// their extreme points (one for a point set, two for a segment).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<Point>,
    pub degenerate: bool,
}

impl ConvexPolygon {
    /// True when `p` is inside or on the boundary.
    pub fn contains(&self, p: Point) -> bool {
        if self.degenerate {
            return match self.vertices.len() {
                1 => self.vertices[0] == p,
                2 => {
                    let (a, b) = (self.vertices[0], self.vertices[1]);
                    cross(a, b, p) == 0.0
                        && p.0 >= a.0.min(b.0)
                        && p.0 <= a.0.max(b.0)
                        && p.1 >= a.1.min(b.1)
                        && p.1 <= a.1.max(b.1)
                }
                _ => false,
            };
        }
        let n = self.vertices.len();
        (0..n).all(|i| cross(self.vertices[i], self.vertices[(i + 1) % n], p) >= 0.0)
    }
}

/// Graham scan. The pivot is the lowest-y (then lowest-x) point; same-angle
/// groups are visited near-to-far so strict left turns drop every collinear
/// boundary point.
pub fn convex_hull(points: &[Point]) -> Result<ConvexPolygon> {
    if points.is_empty() {
        return Err(Error::TooFewSamples { min: 1, got: 0 });
    }
    if points
        .iter()
        .any(|p| !p.0.is_finite() || !p.1.is_finite())
    {
        return Err(Error::config("hull input has non-finite coordinates"));
    }
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() == 1 {
        return Ok(ConvexPolygon {
            vertices: pts,
            degenerate: true,
        });
    }

    let pivot = *pts
        .iter()
        .min_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).expect("finite"))
        .expect("non-empty");
    let mut rest: Vec<Point> = pts.into_iter().filter(|&p| p != pivot).collect();
    rest.sort_by(|&a, &b| {
        let c = cross(pivot, a, b);
        c.partial_cmp(&0.0)
            .expect("finite")
            .reverse()
            .then_with(|| {
                dist2(pivot, a)
                    .partial_cmp(&dist2(pivot, b))
                    .expect("finite")
            })
    });

    let mut stack: Vec<Point> = vec![pivot];
    for p in rest {
        while stack.len() >= 2
            && cross(stack[stack.len() - 2], stack[stack.len() - 1], p) <= 0.0
        {
            stack.pop();
        }
        stack.push(p);
    }

    if stack.len() < 3 {
        // All distinct points collinear: keep the segment endpoints in
        // lexicographic order.
        let lo = *stack
            .iter()
            .min_by(|a, b| a.partial_cmp(b).expect("finite"))
            .expect("non-empty");
        let hi = *stack
            .iter()
            .max_by(|a, b| a.partial_cmp(b).expect("finite"))
            .expect("non-empty");
        return Ok(ConvexPolygon {
            vertices: if lo == hi { vec![lo] } else { vec![lo, hi] },
            degenerate: true,
        });
    }
    Ok(ConvexPolygon {
        vertices: stack,
        degenerate: false,
    })
}

/// Shoelace area, non-negative. Degenerate polygons have area zero.
pub fn polygon_area(polygon: &ConvexPolygon) -> f64 {
    let v = &polygon.vertices;
    if v.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..v.len() {
        let a = v[i];
        let b = v[(i + 1) % v.len()];
        twice += a.0 * b.1 - b.0 * a.1;
    }
    twice.abs() / 2.0
}

fn line_side(a: Point, b: Point, p: Point) -> f64 {
    cross(a, b, p)
}

fn intersect(p: Point, q: Point, a: Point, b: Point) -> Point {
    let sp = line_side(a, b, p);
    let sq = line_side(a, b, q);
    let t = sp / (sp - sq);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

/// Sutherland–Hodgman clip of `subject` against the half-planes of the
/// counter-clockwise convex `clip`. Boundary points count as inside.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = line_side(a, b, cur) >= 0.0;
            let prev_in = line_side(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(intersect(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(intersect(prev, cur, a, b));
            }
        }
    }
    output
}

fn polygon_vertices_equal(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    let mut va = a.vertices.clone();
    let mut vb = b.vertices.clone();
    va.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    vb.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    va == vb
}

/// Overlap rate O = area(A∩B) / area(A∪B) between the hulls of two point
/// sets. Two degenerate hulls overlap fully (1) only when their vertex sets
/// coincide; a degenerate hull against a proper one overlaps nowhere (0).
pub fn hull_overlap_rate(a: &ConvexPolygon, b: &ConvexPolygon) -> f64 {
    match (a.degenerate, b.degenerate) {
        (true, true) => {
            return if polygon_vertices_equal(a, b) { 1.0 } else { 0.0 };
        }
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    // Fix the clip orientation by vertex order so the rate is exactly
    // symmetric in its arguments.
    let (first, second) = if a.vertices <= b.vertices {
        (a, b)
    } else {
        (b, a)
    };
    let area_a = polygon_area(first);
    let area_b = polygon_area(second);
    let clipped = clip_convex(&first.vertices, &second.vertices);
    let intersection = polygon_area(&ConvexPolygon {
        vertices: clipped,
        degenerate: false,
    });
    let union = area_a + area_b - intersection;
    if union <= 0.0 {
        return 0.0;
    }
    (intersection / union).clamp(0.0, 1.0)
}

/// Skewness value plus a flag for zero-variance inputs.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skewness {
    pub value: f64,
    pub degenerate: bool,
}

/// Population skewness m3 / m2^(3/2) with central moments m_i =
/// mean((x − x̄)^i). Zero variance returns 0, flagged.
pub fn skewness(samples: &[f64]) -> Result<Skewness> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            min: 3,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 == 0.0 {
        return Ok(Skewness {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Skewness {
        value: m3 / m2.powf(1.5),
        degenerate: false,
    })
}
