//! Scattered-data interpolation on a planar (lon, lat) embedding.
//!
//! Climate model output arrives as samples at scattered grid points; the
//! radar traces need values at their own coordinates. We triangulate the
//! sample points (incremental Bowyer–Watson), then evaluate each query by
//! barycentric interpolation inside its containing triangle. Queries outside
//! the convex hull fall back to the nearest sample. Degrees are treated as
//! plane coordinates: sample spacing here is far below a degree of arc, so
//! projection error is negligible next to the climate model's own grid
//! resolution.

use crate::error::{CoreError, Result};
use crate::geo::TraceCoordinates;
use crate::nn::DenseMatrix;

const EPS: f64 = 1e-12;
/// Slack for point-in-triangle tests, relative to twice the triangle area.
const CONTAIN_SLACK: f64 = 1e-9;

/// Twice the signed area of (a, b, c); positive when counter-clockwise.
fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Strict circumcircle test for a counter-clockwise triangle (a, b, c).
fn in_circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64), p: (f64, f64)) -> bool {
    let (ax, ay) = (a.0 - p.0, a.1 - p.1);
    let (bx, by) = (b.0 - p.0, b.1 - p.1);
    let (cx, cy) = (c.0 - p.0, c.1 - p.1);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by)
        - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    det > 0.0
}

/// A triangulation of deduplicated sample points. Indices in
/// [`Delaunay::weights_at`] refer to the caller's original point list.
#[derive(Debug, Clone)]
pub struct Delaunay {
    /// Deduplicated points in (x, y) = (lon, lat) order.
    verts: Vec<(f64, f64)>,
    /// Map from deduplicated vertex back to the first original index.
    orig: Vec<usize>,
    /// Counter-clockwise triangles over `verts`.
    triangles: Vec<[usize; 3]>,
    /// Length of the original point list, duplicates included.
    n_points: usize,
}

impl Delaunay {
    /// Triangulate `points`, given as (lat, lon) pairs. Exact duplicates
    /// collapse to their first occurrence. Fewer than three distinct points,
    /// or all points collinear, is degenerate geometry.
    pub fn build(points: &[(f64, f64)]) -> Result<Self> {
        let mut verts: Vec<(f64, f64)> = Vec::new();
        let mut orig: Vec<usize> = Vec::new();
        for (i, &(lat, lon)) in points.iter().enumerate() {
            if !lat.is_finite() || !lon.is_finite() {
                return Err(CoreError::invalid(format!(
                    "non-finite sample coordinate at index {i}"
                )));
            }
            let p = (lon, lat);
            if !verts.iter().any(|&q| q == p) {
                verts.push(p);
                orig.push(i);
            }
        }
        let n = verts.len();
        if n < 3 {
            return Err(CoreError::DegenerateGeometry(format!(
                "need at least 3 distinct sample points, got {n}"
            )));
        }
        let span = {
            let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
            for &(x, y) in &verts {
                lo_x = lo_x.min(x);
                hi_x = hi_x.max(x);
                lo_y = lo_y.min(y);
                hi_y = hi_y.max(y);
            }
            ((lo_x + hi_x) / 2.0, (lo_y + hi_y) / 2.0, (hi_x - lo_x).max(hi_y - lo_y))
        };
        let collinear = {
            let a = verts[0];
            let b = verts[1];
            let scale = span.2 * span.2;
            verts[2..].iter().all(|&c| orient(a, b, c).abs() <= EPS * scale.max(1.0))
        };
        if collinear {
            return Err(CoreError::DegenerateGeometry(
                "sample points are collinear".into(),
            ));
        }

        // Super-triangle enclosing every sample. Its vertices must act as if
        // at infinity — too close and hull-edge triangles attach to them,
        // leaving holes when the super-triangles are dropped.
        let (cx, cy, mut d) = span;
        d = d.max(1.0) * 1e5;
        let s0 = verts.len();
        let mut all = verts.clone();
        all.push((cx - 2.0 * d, cy - d));
        all.push((cx + 2.0 * d, cy - d));
        all.push((cx, cy + 2.0 * d));
        let mut tris: Vec<[usize; 3]> = vec![[s0, s0 + 1, s0 + 2]];

        for (pi, &p) in all[..s0].iter().enumerate() {
            // Cavity: triangles whose circumcircle swallows p.
            let mut bad = Vec::new();
            for (ti, t) in tris.iter().enumerate() {
                if in_circumcircle(all[t[0]], all[t[1]], all[t[2]], p) {
                    bad.push(ti);
                }
            }
            if bad.is_empty() {
                return Err(CoreError::Numeric(format!(
                    "triangulation lost point {pi}: no containing circumcircle"
                )));
            }
            // Boundary = edges used by exactly one cavity triangle.
            let mut edges: Vec<(usize, usize, bool)> = Vec::new(); // (a, b, shared)
            for &ti in &bad {
                let t = tris[ti];
                for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                    let key = (e.0.min(e.1), e.0.max(e.1));
                    match edges.iter_mut().find(|(a, b, _)| (*a, *b) == key) {
                        Some(entry) => entry.2 = true,
                        None => edges.push((key.0, key.1, false)),
                    }
                }
            }
            for &ti in bad.iter().rev() {
                tris.swap_remove(ti);
            }
            for (a, b, shared) in edges {
                if shared {
                    continue;
                }
                let tri = if orient(all[a], all[b], p) > 0.0 {
                    [a, b, pi]
                } else {
                    [b, a, pi]
                };
                tris.push(tri);
            }
        }

        tris.retain(|t| t.iter().all(|&v| v < s0));
        // Normalize to counter-clockwise so containment tests can assume it.
        for t in &mut tris {
            if orient(all[t[0]], all[t[1]], all[t[2]]) < 0.0 {
                t.swap(1, 2);
            }
        }
        if tris.is_empty() {
            return Err(CoreError::DegenerateGeometry(
                "triangulation produced no interior triangles".into(),
            ));
        }
        Ok(Delaunay { verts, orig, triangles: tris, n_points: points.len() })
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Triangles as index triples into the caller's original point list.
    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.triangles
            .iter()
            .map(|t| [self.orig[t[0]], self.orig[t[1]], self.orig[t[2]]])
    }

    /// Interpolation weights for a (lat, lon) query: three barycentric
    /// weights inside the hull, or a single unit weight on the nearest
    /// sample outside it. Indices refer to the original point list; weights
    /// are non-negative and sum to 1.
    pub fn weights_at(&self, lat: f64, lon: f64) -> Vec<(usize, f64)> {
        let q = (lon, lat);
        for t in &self.triangles {
            let (a, b, c) = (self.verts[t[0]], self.verts[t[1]], self.verts[t[2]]);
            let area = orient(a, b, c);
            debug_assert!(area > 0.0);
            let la = orient(q, b, c);
            let lb = orient(a, q, c);
            let lc = orient(a, b, q);
            let slack = CONTAIN_SLACK * area;
            if la >= -slack && lb >= -slack && lc >= -slack {
                let mut w = [la / area, lb / area, lc / area];
                for v in &mut w {
                    *v = v.max(0.0);
                }
                let s: f64 = w.iter().sum();
                return (0..3).map(|k| (self.orig[t[k]], w[k] / s)).collect();
            }
        }
        // Outside the hull: nearest sample wins.
        let mut best = (0usize, f64::INFINITY);
        for (vi, &(x, y)) in self.verts.iter().enumerate() {
            let d2 = (x - q.0).powi(2) + (y - q.1).powi(2);
            if d2 < best.1 {
                best = (vi, d2);
            }
        }
        vec![(self.orig[best.0], 1.0)]
    }

    /// Interpolate per-point channel vectors onto radar trace coordinates.
    /// `values[i]` belongs to the i-th point of the list this triangulation
    /// was built from; the result has one row per channel and one column per
    /// trace. Reuse one triangulation across many trace sets — building it
    /// is the expensive part.
    pub fn interpolate<V: AsRef<[f64]>>(
        &self,
        values: &[V],
        queries: &TraceCoordinates,
    ) -> Result<DenseMatrix> {
        if self.n_points != values.len() {
            return Err(CoreError::shape(format!(
                "{} sample points but {} value rows",
                self.n_points,
                values.len()
            )));
        }
        let channels = values.first().map_or(0, |v| v.as_ref().len());
        if channels == 0 {
            return Err(CoreError::invalid("no value channels to interpolate"));
        }
        for (i, v) in values.iter().enumerate() {
            let v = v.as_ref();
            if v.len() != channels {
                return Err(CoreError::shape(format!(
                    "value row {i} has {} channels, expected {channels}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(CoreError::invalid(format!("non-finite value at sample {i}")));
            }
        }
        let mut out = DenseMatrix::zeros(channels, queries.len());
        for (j, (lat, lon)) in queries.points().enumerate() {
            for (idx, w) in self.weights_at(lat, lon) {
                let row = values[idx].as_ref();
                for ch in 0..channels {
                    out.set(ch, j, out.get(ch, j) + w * row[ch]);
                }
            }
        }
        Ok(out)
    }
}

/// One-shot build-and-interpolate; see [`Delaunay::interpolate`].
pub fn delaunay_interpolate<V: AsRef<[f64]>>(
    points: &[(f64, f64)],
    values: &[V],
    queries: &TraceCoordinates,
) -> Result<DenseMatrix> {
    Delaunay::build(points)?.interpolate(values, queries)
}
