//! Geospatial graphs: trace coordinates, haversine edge weights, and the
//! per-year feature graphs fed to the recurrent models.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::DenseMatrix;

/// Traces per radar image; every graph has exactly this many nodes.
pub const TRACE_COUNT: usize = 256;

/// Node feature columns, in their fixed public order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "lat",
    "lon",
    "thickness",
    "smb",
    "surface_temp",
    "refreeze",
    "melt_height",
    "snowpack",
];

pub const NUM_FEATURES: usize = 8;
/// Leading columns that are always present: lat, lon, thickness.
pub const BASE_FEATURES: usize = 3;
/// Trailing climate-model columns.
pub const PHYSICAL_FEATURES: usize = NUM_FEATURES - BASE_FEATURES;

/// Ceiling applied to edge weights; also the self-loop weight.
pub const DEFAULT_WEIGHT_CAP: f64 = 1e9;

/// Below this the haversine sum is treated as a coincident pair.
const H_EPSILON: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Edge weight mode
// ---------------------------------------------------------------------------

/// How the haversine sum h is turned into a central angle.
///
/// `AsWritten` computes 2·arcsin(h) directly. The conventional haversine
/// distance applies a square root first — that is `Sqrt` — and makes the
/// weight a true inverse central angle. Both are kept because the two give
/// materially different weight profiles and the right choice is a modeling
/// decision, not a code one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeWeightMode {
    #[default]
    AsWritten,
    Sqrt,
}

impl fmt::Display for EdgeWeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeWeightMode::AsWritten => f.write_str("as-written"),
            EdgeWeightMode::Sqrt => f.write_str("sqrt"),
        }
    }
}

impl FromStr for EdgeWeightMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-written" => Ok(EdgeWeightMode::AsWritten),
            "sqrt" => Ok(EdgeWeightMode::Sqrt),
            other => Err(CoreError::invalid(format!(
                "unknown edge weight mode {other:?} (expected \"as-written\" or \"sqrt\")"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Coordinates
// ---------------------------------------------------------------------------

/// Per-trace latitude/longitude of one radar image, degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCoordinates {
    lat: Vec<f64>,
    lon: Vec<f64>,
}

impl TraceCoordinates {
    /// Validates lengths (exactly [`TRACE_COUNT`]) and coordinate ranges.
    pub fn new(lat: Vec<f64>, lon: Vec<f64>) -> Result<Self> {
        if lat.len() != TRACE_COUNT || lon.len() != TRACE_COUNT {
            return Err(CoreError::invalid(format!(
                "expected {TRACE_COUNT} trace coordinates, got {} lat / {} lon",
                lat.len(),
                lon.len()
            )));
        }
        for (i, &v) in lat.iter().enumerate() {
            if !v.is_finite() || !(-90.0..=90.0).contains(&v) {
                return Err(CoreError::invalid(format!("latitude[{i}] = {v} out of range")));
            }
        }
        for (i, &v) in lon.iter().enumerate() {
            if !v.is_finite() || !(-180.0..=180.0).contains(&v) {
                return Err(CoreError::invalid(format!("longitude[{i}] = {v} out of range")));
            }
        }
        Ok(TraceCoordinates { lat, lon })
    }

    pub fn len(&self) -> usize {
        self.lat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lat.is_empty()
    }

    pub fn lat(&self) -> &[f64] {
        &self.lat
    }

    pub fn lon(&self) -> &[f64] {
        &self.lon
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.lat[i], self.lon[i])
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.lat.iter().copied().zip(self.lon.iter().copied())
    }
}

// ---------------------------------------------------------------------------
// Haversine edge weights
// ---------------------------------------------------------------------------

#[inline]
fn hav(theta: f64) -> f64 {
    let s = (theta / 2.0).sin();
    s * s
}

/// Inverse-distance edge weight between two (lat, lon) points in degrees.
///
/// Computes h = hav(Δφ) + cos φ_a · cos φ_b · hav(Δλ) in radians and returns
/// 1 / (2·arcsin(x)) with x = h (`AsWritten`) or x = √h (`Sqrt`), clamped to
/// ≤ `cap`. Coincident points (h < 1e-12) return `cap` in either mode.
pub fn haversine_edge_weight(
    a: (f64, f64),
    b: (f64, f64),
    mode: EdgeWeightMode,
    cap: f64,
) -> Result<f64> {
    if !a.0.is_finite() || !a.1.is_finite() || !b.0.is_finite() || !b.1.is_finite() {
        return Err(CoreError::invalid(format!(
            "non-finite coordinates: {a:?}, {b:?}"
        )));
    }
    if !cap.is_finite() || cap <= 0.0 {
        return Err(CoreError::invalid(format!("weight cap must be positive, got {cap}")));
    }
    let phi_a = a.0.to_radians();
    let phi_b = b.0.to_radians();
    let d_phi = phi_b - phi_a;
    let d_lambda = b.1.to_radians() - a.1.to_radians();
    // h equals hav(central angle), so it lies in [0, 1] up to rounding.
    let h = hav(d_phi) + phi_a.cos() * phi_b.cos() * hav(d_lambda);
    if h < H_EPSILON {
        return Ok(cap);
    }
    let x = match mode {
        EdgeWeightMode::AsWritten => h.min(1.0),
        EdgeWeightMode::Sqrt => h.min(1.0).sqrt(),
    };
    let w = 1.0 / (2.0 * x.asin());
    Ok(w.min(cap))
}

/// Symmetric all-pairs edge weights with the cap on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMatrix {
    w: DenseMatrix,
    mode: EdgeWeightMode,
    cap: f64,
}

impl EdgeWeightMatrix {
    /// Build from explicit points. Graphs in the data pipeline always have
    /// [`TRACE_COUNT`] nodes; this constructor stays length-generic so small
    /// diagnostic graphs can use the same code path.
    pub fn from_points(points: &[(f64, f64)], mode: EdgeWeightMode, cap: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(CoreError::invalid("edge weights need at least one point"));
        }
        let n = points.len();
        let mut w = DenseMatrix::zeros(n, n);
        for i in 0..n {
            w.set(i, i, cap);
            for j in (i + 1)..n {
                let wij = haversine_edge_weight(points[i], points[j], mode, cap)?;
                w.set(i, j, wij);
                w.set(j, i, wij);
            }
        }
        Ok(EdgeWeightMatrix { w, mode, cap })
    }

    pub fn n(&self) -> usize {
        self.w.rows()
    }

    pub fn mode(&self) -> EdgeWeightMode {
        self.mode
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.w
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w.get(i, j)
    }
}

/// All-pairs weights for one image's traces.
pub fn build_edge_weights(
    coords: &TraceCoordinates,
    mode: EdgeWeightMode,
    cap: f64,
) -> Result<EdgeWeightMatrix> {
    let points: Vec<(f64, f64)> = coords.points().collect();
    EdgeWeightMatrix::from_points(&points, mode, cap)
}

// ---------------------------------------------------------------------------
// Feature mask
// ---------------------------------------------------------------------------

/// Which of the 8 feature columns are active. The three base features are
/// always on; construction rejects anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask([bool; NUM_FEATURES]);

impl FeatureMask {
    pub fn new(bits: [bool; NUM_FEATURES]) -> Result<Self> {
        if !bits[..BASE_FEATURES].iter().all(|&b| b) {
            return Err(CoreError::invalid(
                "base features (lat, lon, thickness) cannot be masked off",
            ));
        }
        Ok(FeatureMask(bits))
    }

    /// lat, lon, thickness only.
    pub fn base_only() -> Self {
        let mut bits = [false; NUM_FEATURES];
        bits[..BASE_FEATURES].fill(true);
        FeatureMask(bits)
    }

    pub fn all() -> Self {
        FeatureMask([true; NUM_FEATURES])
    }

    /// Base features plus the named physical columns.
    pub fn from_physical_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut bits = [false; NUM_FEATURES];
        bits[..BASE_FEATURES].fill(true);
        for name in names {
            let name = name.as_ref();
            match FEATURE_NAMES.iter().position(|&f| f == name) {
                Some(i) if i >= BASE_FEATURES => bits[i] = true,
                Some(_) => {
                    return Err(CoreError::invalid(format!(
                        "{name:?} is a base feature, not a physical one"
                    )))
                }
                None => {
                    return Err(CoreError::invalid(format!(
                        "unknown physical feature {name:?} (expected one of {:?})",
                        &FEATURE_NAMES[BASE_FEATURES..]
                    )))
                }
            }
        }
        Ok(FeatureMask(bits))
    }

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> [bool; NUM_FEATURES] {
        self.0
    }

    pub fn enabled_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Intersection; used to reconcile a requested mask with what the data
    /// actually provides.
    pub fn and(&self, other: &FeatureMask) -> FeatureMask {
        let mut bits = [false; NUM_FEATURES];
        for i in 0..NUM_FEATURES {
            bits[i] = self.0[i] && other.0[i];
        }
        FeatureMask(bits)
    }

    /// Zero out every masked-off column. Idempotent.
    pub fn apply(&self, features: &mut DenseMatrix) {
        for r in 0..features.rows() {
            let row = features.row_mut(r);
            for (c, v) in row.iter_mut().enumerate() {
                if !self.0[c] {
                    *v = 0.0;
                }
            }
        }
    }

    pub fn enabled_names(&self) -> Vec<&'static str> {
        FEATURE_NAMES
            .iter()
            .zip(self.0.iter())
            .filter(|(_, &on)| on)
            .map(|(&n, _)| n)
            .collect()
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask::base_only()
    }
}

// ---------------------------------------------------------------------------
// Layer graph
// ---------------------------------------------------------------------------

/// One year's graph: node features over the traces plus shared edge weights.
///
/// The five input graphs of a sample share a single weight matrix, hence the
/// `Arc`.
#[derive(Debug, Clone)]
pub struct LayerGraph {
    pub year: i32,
    /// n×8, columns in [`FEATURE_NAMES`] order; masked columns are zero.
    pub node_features: DenseMatrix,
    pub feature_mask: FeatureMask,
    pub edge_weights: Arc<EdgeWeightMatrix>,
}

impl LayerGraph {
    pub fn new(
        year: i32,
        node_features: DenseMatrix,
        feature_mask: FeatureMask,
        edge_weights: Arc<EdgeWeightMatrix>,
    ) -> Result<Self> {
        if node_features.cols() != NUM_FEATURES {
            return Err(CoreError::shape(format!(
                "node features need {NUM_FEATURES} columns, got {}",
                node_features.cols()
            )));
        }
        if node_features.rows() != edge_weights.n() {
            return Err(CoreError::shape(format!(
                "{} feature rows vs {} graph nodes",
                node_features.rows(),
                edge_weights.n()
            )));
        }
        if !node_features.all_finite() {
            return Err(CoreError::invalid("non-finite node feature"));
        }
        for r in 0..node_features.rows() {
            if node_features.get(r, 2) < 0.0 {
                return Err(CoreError::IncompleteLayer(format!(
                    "negative thickness at trace {r}"
                )));
            }
            for c in 0..NUM_FEATURES {
                if !feature_mask.bit(c) && node_features.get(r, c) != 0.0 {
                    return Err(CoreError::invalid(format!(
                        "masked-off column {:?} has nonzero value at trace {r}",
                        FEATURE_NAMES[c]
                    )));
                }
            }
        }
        Ok(LayerGraph {
            year,
            node_features,
            feature_mask,
            edge_weights,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_features.rows()
    }
}

/// Assemble one year's graph from coordinates, a thickness row, and optional
/// physical features (5×n, rows in [`FEATURE_NAMES`] order from "smb" on).
///
/// Weights are passed in prebuilt so the five graphs of a sample can share
/// one matrix instead of recomputing it per year. Physical columns that are
/// masked off — or absent entirely — come out as zeros, and the stored mask
/// reflects what is actually present.
pub fn build_layer_graph(
    coords: &TraceCoordinates,
    thickness: &[f64],
    physical: Option<&DenseMatrix>,
    mask: FeatureMask,
    year: i32,
    edge_weights: Arc<EdgeWeightMatrix>,
) -> Result<LayerGraph> {
    let n = coords.len();
    if thickness.len() != n {
        return Err(CoreError::shape(format!(
            "thickness vector has {} entries for {n} traces",
            thickness.len()
        )));
    }
    for (i, &t) in thickness.iter().enumerate() {
        if !t.is_finite() {
            return Err(CoreError::IncompleteLayer(format!(
                "missing thickness at trace {i}"
            )));
        }
        if t < 0.0 {
            return Err(CoreError::IncompleteLayer(format!(
                "negative thickness {t} at trace {i}"
            )));
        }
    }
    if let Some(p) = physical {
        if p.shape() != (PHYSICAL_FEATURES, n) {
            return Err(CoreError::shape(format!(
                "physical features must be {PHYSICAL_FEATURES}x{n}, got {}x{}",
                p.rows(),
                p.cols()
            )));
        }
    }
    let effective = match physical {
        Some(_) => mask,
        None => mask.and(&FeatureMask::base_only()),
    };
    let mut features = DenseMatrix::from_fn(n, NUM_FEATURES, |r, c| match c {
        0 => coords.lat()[r],
        1 => coords.lon()[r],
        2 => thickness[r],
        _ => physical.map_or(0.0, |p| p.get(c - BASE_FEATURES, r)),
    });
    effective.apply(&mut features);
    LayerGraph::new(year, features, effective, edge_weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::RngState;

    const CAP: f64 = DEFAULT_WEIGHT_CAP;

    fn full_coords(f: impl Fn(usize) -> (f64, f64)) -> TraceCoordinates {
        let pts: Vec<(f64, f64)> = (0..TRACE_COUNT).map(f).collect();
        TraceCoordinates::new(
            pts.iter().map(|p| p.0).collect(),
            pts.iter().map(|p| p.1).collect(),
        )
        .unwrap()
    }

    #[test]
    fn sixty_degrees_along_equator() {
        // Δλ = 60° at the equator: h = sin²(30°) = 1/4 exactly.
        let w = haversine_edge_weight((0.0, 0.0), (0.0, 60.0), EdgeWeightMode::AsWritten, CAP)
            .unwrap();
        assert!((w - 1.9787854010154329).abs() <= 1e-12, "w = {w}");
        let w = haversine_edge_weight((0.0, 0.0), (0.0, 60.0), EdgeWeightMode::Sqrt, CAP).unwrap();
        // Central angle is 60° = π/3, so the weight is 3/π.
        assert!((w - 3.0 / std::f64::consts::PI).abs() <= 1e-12, "w = {w}");
    }

    #[test]
    fn coincident_points_hit_the_cap() {
        for mode in [EdgeWeightMode::AsWritten, EdgeWeightMode::Sqrt] {
            let w = haversine_edge_weight((72.5, -38.4), (72.5, -38.4), mode, CAP).unwrap();
            assert_eq!(w, CAP);
        }
        // Nearly coincident but above the epsilon: finite, below cap, sqrt mode.
        let w = haversine_edge_weight((72.5, -38.4), (72.5, -38.399), EdgeWeightMode::Sqrt, CAP)
            .unwrap();
        assert!(w < CAP && w > 0.0);
    }

    #[test]
    fn antipodal_points() {
        // Pole to pole: h = 1, central angle π in both modes, weight 1/π.
        for mode in [EdgeWeightMode::AsWritten, EdgeWeightMode::Sqrt] {
            let w = haversine_edge_weight((90.0, 0.0), (-90.0, 0.0), mode, CAP).unwrap();
            assert!((w - 1.0 / std::f64::consts::PI).abs() <= 1e-12);
        }
    }

    #[test]
    fn weight_is_symmetric_over_random_pairs() {
        let mut rng = RngState::new(99);
        for _ in 0..1000 {
            let a = (rng.uniform(-90.0, 90.0), rng.uniform(-180.0, 180.0));
            let b = (rng.uniform(-90.0, 90.0), rng.uniform(-180.0, 180.0));
            for mode in [EdgeWeightMode::AsWritten, EdgeWeightMode::Sqrt] {
                let wab = haversine_edge_weight(a, b, mode, CAP).unwrap();
                let wba = haversine_edge_weight(b, a, mode, CAP).unwrap();
                assert_eq!(wab.to_bits(), wba.to_bits(), "asymmetry for {a:?} {b:?}");
                assert!(wab > 0.0 && wab.is_finite());
            }
        }
    }

    #[test]
    fn sqrt_mode_weight_decreases_with_distance_along_meridian() {
        let mut prev = f64::INFINITY;
        for k in 1..=90 {
            let w = haversine_edge_weight(
                (0.0, 0.0),
                (k as f64, 0.0),
                EdgeWeightMode::Sqrt,
                CAP,
            )
            .unwrap();
            assert!(w < prev, "weight rose at {k}°: {w} ≥ {prev}");
            prev = w;
        }
    }

    #[test]
    fn non_finite_coordinates_are_rejected() {
        let e = haversine_edge_weight((f64::NAN, 0.0), (0.0, 0.0), EdgeWeightMode::Sqrt, CAP);
        assert!(e.is_err());
        let e = haversine_edge_weight((0.0, 0.0), (0.0, f64::INFINITY), EdgeWeightMode::Sqrt, CAP);
        assert!(e.is_err());
        assert!(haversine_edge_weight((0.0, 0.0), (1.0, 0.0), EdgeWeightMode::Sqrt, -1.0).is_err());
    }

    #[test]
    fn edge_matrix_is_symmetric_with_cap_diagonal() {
        let coords = full_coords(|i| (70.0 + 0.01 * i as f64, -40.0 + 0.02 * i as f64));
        let m = build_edge_weights(&coords, EdgeWeightMode::AsWritten, CAP).unwrap();
        assert_eq!(m.n(), TRACE_COUNT);
        for i in 0..m.n() {
            assert_eq!(m.get(i, i), CAP);
            for j in (i + 1)..m.n() {
                assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
                assert!(m.get(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn identical_coordinates_give_all_cap() {
        let coords = full_coords(|_| (72.5, -38.4));
        let m = build_edge_weights(&coords, EdgeWeightMode::Sqrt, CAP).unwrap();
        assert!(m.matrix().data().iter().all(|&w| w == CAP));
    }

    #[test]
    fn constant_latitude_equal_spacing_gives_constant_adjacent_weight() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (45.0, k as f64)).collect();
        let m = EdgeWeightMatrix::from_points(&pts, EdgeWeightMode::Sqrt, CAP).unwrap();
        let w01 = m.get(0, 1);
        for i in 1..9 {
            assert!(
                (m.get(i, i + 1) - w01).abs() <= 1e-12,
                "w[{i}][{}] = {} vs {}",
                i + 1,
                m.get(i, i + 1),
                w01
            );
        }
    }

    #[test]
    fn permuting_points_permutes_rows_and_columns() {
        let mut rng = RngState::new(3);
        let pts: Vec<(f64, f64)> = (0..12)
            .map(|_| (rng.uniform(60.0, 80.0), rng.uniform(-60.0, -20.0)))
            .collect();
        let m = EdgeWeightMatrix::from_points(&pts, EdgeWeightMode::AsWritten, CAP).unwrap();
        let mut perm: Vec<usize> = (0..12).collect();
        rng.shuffle(&mut perm);
        let permuted: Vec<(f64, f64)> = perm.iter().map(|&i| pts[i]).collect();
        let mp = EdgeWeightMatrix::from_points(&permuted, EdgeWeightMode::AsWritten, CAP).unwrap();
        for a in 0..12 {
            for b in 0..12 {
                // Each entry is computed from the same pair of points, so the
                // permuted matrix matches bit-for-bit, not merely approximately.
                assert_eq!(mp.get(a, b).to_bits(), m.get(perm[a], perm[b]).to_bits());
            }
        }
    }

    #[test]
    fn trace_coordinates_validation() {
        assert!(TraceCoordinates::new(vec![0.0; 255], vec![0.0; 256]).is_err());
        let mut lat = vec![70.0; 256];
        lat[7] = 91.0;
        assert!(TraceCoordinates::new(lat, vec![0.0; 256]).is_err());
        let mut lon = vec![0.0; 256];
        lon[200] = -180.5;
        assert!(TraceCoordinates::new(vec![70.0; 256], lon).is_err());
        assert!(TraceCoordinates::new(vec![70.0; 256], vec![-38.0; 256]).is_ok());
    }

    #[test]
    fn mask_construction_rules() {
        assert!(FeatureMask::new([false, true, true, false, false, false, false, false]).is_err());
        let m = FeatureMask::from_physical_names(&["smb", "snowpack"]).unwrap();
        assert_eq!(
            m.bits(),
            [true, true, true, true, false, false, false, true]
        );
        assert_eq!(m.enabled_count(), 5);
        assert!(FeatureMask::from_physical_names(&["lat"]).is_err());
        assert!(FeatureMask::from_physical_names(&["density"]).is_err());
        assert_eq!(FeatureMask::base_only().enabled_names(), vec!["lat", "lon", "thickness"]);
    }

    #[test]
    fn mask_application_is_idempotent() {
        let mask = FeatureMask::from_physical_names(&["surface_temp"]).unwrap();
        let mut f = DenseMatrix::from_fn(6, NUM_FEATURES, |r, c| (r * 8 + c) as f64 + 1.0);
        mask.apply(&mut f);
        let once = f.clone();
        mask.apply(&mut f);
        assert_eq!(f, once);
        for r in 0..6 {
            assert_eq!(f.get(r, 3), 0.0);
            assert_ne!(f.get(r, 4), 0.0);
        }
    }

    fn toy_graph_parts() -> (TraceCoordinates, Vec<f64>, Arc<EdgeWeightMatrix>) {
        let coords = full_coords(|i| (70.0 + 0.001 * i as f64, -40.0));
        let weights =
            Arc::new(build_edge_weights(&coords, EdgeWeightMode::AsWritten, CAP).unwrap());
        let thickness: Vec<f64> = (0..TRACE_COUNT).map(|i| 5.0 + (i % 7) as f64).collect();
        (coords, thickness, weights)
    }

    #[test]
    fn base_only_graph_zeroes_physical_columns() {
        let (coords, thickness, weights) = toy_graph_parts();
        let g = build_layer_graph(
            &coords,
            &thickness,
            None,
            FeatureMask::all(),
            2011,
            weights,
        )
        .unwrap();
        // No physical input ⇒ effective mask downgrades to base-only.
        assert_eq!(g.feature_mask, FeatureMask::base_only());
        for r in 0..g.n_nodes() {
            assert_eq!(g.node_features.get(r, 0), coords.lat()[r]);
            assert_eq!(g.node_features.get(r, 1), coords.lon()[r]);
            assert_eq!(g.node_features.get(r, 2), thickness[r]);
            for c in BASE_FEATURES..NUM_FEATURES {
                assert_eq!(g.node_features.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn full_mask_with_physical_data_fills_all_columns() {
        let (coords, thickness, weights) = toy_graph_parts();
        let physical = DenseMatrix::from_fn(PHYSICAL_FEATURES, TRACE_COUNT, |r, c| {
            (r + 1) as f64 * 100.0 + c as f64
        });
        let g = build_layer_graph(
            &coords,
            &thickness,
            Some(&physical),
            FeatureMask::all(),
            2009,
            weights,
        )
        .unwrap();
        assert_eq!(g.feature_mask, FeatureMask::all());
        for c in BASE_FEATURES..NUM_FEATURES {
            assert_eq!(
                g.node_features.get(10, c),
                physical.get(c - BASE_FEATURES, 10)
            );
        }
    }

    #[test]
    fn partial_mask_zeroes_unchosen_physical_columns() {
        let (coords, thickness, weights) = toy_graph_parts();
        let physical = DenseMatrix::from_fn(PHYSICAL_FEATURES, TRACE_COUNT, |_, _| 2.5);
        let mask = FeatureMask::from_physical_names(&["melt_height"]).unwrap();
        let g =
            build_layer_graph(&coords, &thickness, Some(&physical), mask, 2008, weights).unwrap();
        for r in [0, 128, 255] {
            assert_eq!(g.node_features.get(r, 6), 2.5); // melt_height
            for c in [3, 4, 5, 7] {
                assert_eq!(g.node_features.get(r, c), 0.0);
            }
        }
    }

    #[test]
    fn bad_thickness_is_an_incomplete_layer_error() {
        let (coords, mut thickness, weights) = toy_graph_parts();
        thickness[3] = f64::NAN;
        let e = build_layer_graph(
            &coords,
            &thickness,
            None,
            FeatureMask::base_only(),
            2011,
            weights.clone(),
        )
        .unwrap_err();
        assert!(matches!(e, CoreError::IncompleteLayer(_)));

        thickness[3] = -1.0;
        let e = build_layer_graph(
            &coords,
            &thickness,
            None,
            FeatureMask::base_only(),
            2011,
            weights.clone(),
        )
        .unwrap_err();
        assert!(matches!(e, CoreError::IncompleteLayer(_)));

        // All-zero thickness is fine.
        thickness = vec![0.0; TRACE_COUNT];
        assert!(build_layer_graph(
            &coords,
            &thickness,
            None,
            FeatureMask::base_only(),
            2011,
            weights
        )
        .is_ok());
    }

    #[test]
    fn mode_round_trips_through_strings() {
        for mode in [EdgeWeightMode::AsWritten, EdgeWeightMode::Sqrt] {
            assert_eq!(mode.to_string().parse::<EdgeWeightMode>().unwrap(), mode);
        }
        assert!("euclidean".parse::<EdgeWeightMode>().is_err());
    }
}
