//! Record ingestion, synthesis, and assembly into model-ready samples.
//!
//! A usable record carries twenty complete annual thickness layers. The
//! five shallowest become the input graphs (one per recent year) and the
//! fifteen below them become regression targets, one column per year,
//! newest first.

pub mod delaunay;
pub mod mar;
pub mod records;
pub mod samples_io;
pub mod split;
pub mod synth;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::geo::{
    build_edge_weights, build_layer_graph, EdgeWeightMode, FeatureMask, LayerGraph,
    BASE_FEATURES,
};
use crate::nn::DenseMatrix;

pub use delaunay::{delaunay_interpolate, Delaunay};
pub use mar::{
    physical_channel_names, read_mar_csv, read_mar_csv_file, write_mar_csv,
    write_mar_csv_file, MarSampleSet, MarYear,
};
pub use records::{
    filter_valid, read_records, read_records_file, thickness_from_boundaries,
    write_records, write_records_file, LabeledImageRecord, MIN_COMPLETE_LAYERS,
};
pub use samples_io::{read_samples, read_samples_file, write_samples, write_samples_file};
pub use split::{split, split_indices, split_sizes, MIN_SPLIT_RECORDS};
pub use synth::{synth_generate, SynthConfig, SYNTH_ACQUISITION_YEAR, SYNTH_BOUNDARIES};

/// Input graphs per sample: the five most recent annual layers.
pub const INPUT_YEARS: usize = 5;
/// Regression targets per node: the fifteen years below the inputs.
pub const TARGET_YEARS: usize = 15;

/// One training/evaluation unit: five input-year graphs (newest first) and
/// an n×15 target matrix whose column j is the thickness of the layer laid
/// down `j + 1` years before the oldest input year.
#[derive(Debug, Clone)]
pub struct TemporalSample {
    pub id: String,
    pub inputs: Vec<LayerGraph>,
    pub targets: DenseMatrix,
}

impl TemporalSample {
    pub fn new(id: String, inputs: Vec<LayerGraph>, targets: DenseMatrix) -> Result<Self> {
        if inputs.len() != INPUT_YEARS {
            return Err(CoreError::invalid(format!(
                "sample {id}: expected {INPUT_YEARS} input graphs, got {}",
                inputs.len()
            )));
        }
        let n = inputs[0].n_nodes();
        let mask = inputs[0].feature_mask;
        for g in &inputs {
            if g.n_nodes() != n {
                return Err(CoreError::shape(format!(
                    "sample {id}: input graphs disagree on node count"
                )));
            }
            if g.feature_mask != mask {
                return Err(CoreError::invalid(format!(
                    "sample {id}: input graphs disagree on feature mask"
                )));
            }
        }
        if targets.shape() != (n, TARGET_YEARS) {
            return Err(CoreError::shape(format!(
                "sample {id}: targets must be {n}×{TARGET_YEARS}, got {:?}",
                targets.shape()
            )));
        }
        for i in 0..n {
            for j in 0..TARGET_YEARS {
                let v = targets.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(CoreError::IncompleteLayer(format!(
                        "sample {id}: bad target {v} at node {i}, year column {j}"
                    )));
                }
            }
        }
        Ok(TemporalSample { id, inputs, targets })
    }

    pub fn n_nodes(&self) -> usize {
        self.targets.rows()
    }

    pub fn feature_mask(&self) -> FeatureMask {
        self.inputs[0].feature_mask
    }
}

/// Assemble samples from records, optionally injecting interpolated climate
/// channels. Records must carry twenty complete thickness rows at the top of
/// the column (run [`filter_valid`] first); output order follows input
/// order. When `mask` requests physical channels and `mar` is present, every
/// input year must resolve to a climate table; with `mar` absent the
/// physical columns are zero-filled and the stored mask drops to base-only.
pub fn build_samples(
    records: &[LabeledImageRecord],
    mar: Option<&MarSampleSet>,
    mask: FeatureMask,
    edge_mode: EdgeWeightMode,
    edge_cap: f64,
) -> Result<Vec<TemporalSample>> {
    let wants_physical = mask.enabled_count() > BASE_FEATURES;
    let interpolate = wants_physical && mar.is_some();
    // One triangulation per distinct year serves every record.
    let mut triangulations: BTreeMap<i32, Delaunay> = BTreeMap::new();

    let mut samples = Vec::with_capacity(records.len());
    for record in records {
        let thickness = record.thickness()?;
        if thickness.len() < INPUT_YEARS + TARGET_YEARS {
            return Err(CoreError::IncompleteLayer(format!(
                "record {}: {} thickness rows, need {}",
                record.id,
                thickness.len(),
                INPUT_YEARS + TARGET_YEARS
            )));
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(INPUT_YEARS + TARGET_YEARS);
        for (k, row) in thickness[..INPUT_YEARS + TARGET_YEARS].iter().enumerate() {
            let complete: Option<Vec<f64>> = row.iter().copied().collect();
            match complete {
                Some(r) => rows.push(r),
                None => {
                    return Err(CoreError::IncompleteLayer(format!(
                        "record {}: thickness row {k} has missing entries",
                        record.id
                    )))
                }
            }
        }

        let weights = Arc::new(build_edge_weights(&record.coords, edge_mode, edge_cap)?);
        let mut inputs = Vec::with_capacity(INPUT_YEARS);
        for t in 0..INPUT_YEARS {
            let year = record.acquisition_year - 1 - t as i32;
            let physical = if interpolate {
                let mar = mar.expect("interpolate implies mar");
                let table = mar.for_year(year)?;
                if !triangulations.contains_key(&year) {
                    triangulations.insert(year, Delaunay::build(table.points())?);
                }
                let tri = triangulations.get(&year).expect("just inserted");
                Some(tri.interpolate(table.values(), &record.coords)?)
            } else {
                None
            };
            inputs.push(build_layer_graph(
                &record.coords,
                &rows[t],
                physical.as_ref(),
                mask,
                year,
                weights.clone(),
            )?);
        }

        let n = record.coords.len();
        let targets = DenseMatrix::from_fn(n, TARGET_YEARS, |i, j| rows[INPUT_YEARS + j][i]);
        samples.push(TemporalSample::new(record.id.clone(), inputs, targets)?);
    }
    Ok(samples)
}
