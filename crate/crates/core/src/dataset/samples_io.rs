//! Line-delimited file format for materialized temporal samples.
//!
//! The first line is a JSON header carrying the graph-construction settings
//! (edge mode, cap, feature mask); each following line is one sample with
//! its input years, per-graph node features, and target matrix. Edge
//! weights are not stored — they are a pure function of the latitude and
//! longitude columns plus the header settings, and are rebuilt on read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{TemporalSample, INPUT_YEARS, TARGET_YEARS};
use crate::error::{CoreError, Result};
use crate::geo::{EdgeWeightMatrix, EdgeWeightMode, FeatureMask, LayerGraph, NUM_FEATURES};
use crate::nn::DenseMatrix;

const SAMPLES_FORMAT: &str = "temporal-samples";
const SAMPLES_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesHeader {
    format: String,
    version: u32,
    edge_mode: EdgeWeightMode,
    edge_cap: f64,
    mask: FeatureMask,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    id: String,
    /// Year of each input graph, in stored order.
    years: Vec<i32>,
    /// `[graph][node][feature]`.
    features: Vec<Vec<Vec<f64>>>,
    /// `[node][target year]`.
    targets: Vec<Vec<f64>>,
}

/// Write samples to one line-delimited stream. All samples must share a
/// feature mask and edge-weight settings; those go in the header.
pub fn write_samples<W: Write>(mut w: W, samples: &[TemporalSample]) -> Result<()> {
    let first = samples
        .first()
        .ok_or_else(|| CoreError::invalid("refusing to write an empty samples file"))?;
    let ew = &first.inputs[0].edge_weights;
    let header = SamplesHeader {
        format: SAMPLES_FORMAT.to_string(),
        version: SAMPLES_VERSION,
        edge_mode: ew.mode(),
        edge_cap: ew.cap(),
        mask: first.feature_mask(),
    };
    for s in samples {
        let sew = &s.inputs[0].edge_weights;
        if s.feature_mask() != header.mask
            || sew.mode() != header.edge_mode
            || sew.cap() != header.edge_cap
        {
            return Err(CoreError::invalid(format!(
                "sample {} was built with different graph settings than the first sample",
                s.id
            )));
        }
    }
    let mut line = serde_json::to_vec(&header)
        .map_err(|e| CoreError::invalid(format!("unserializable header: {e}")))?;
    line.push(b'\n');
    w.write_all(&line)?;

    for s in samples {
        let features = s
            .inputs
            .iter()
            .map(|g| {
                (0..g.n_nodes())
                    .map(|i| (0..NUM_FEATURES).map(|c| g.node_features.get(i, c)).collect())
                    .collect()
            })
            .collect();
        let targets = (0..s.targets.rows())
            .map(|i| (0..TARGET_YEARS).map(|j| s.targets.get(i, j)).collect())
            .collect();
        let rec = SampleLine {
            id: s.id.clone(),
            years: s.inputs.iter().map(|g| g.year).collect(),
            features,
            targets,
        };
        let mut line = serde_json::to_vec(&rec)
            .map_err(|e| CoreError::invalid(format!("unserializable sample {}: {e}", s.id)))?;
        line.push(b'\n');
        w.write_all(&line)?;
    }
    Ok(())
}

pub fn write_samples_file(path: impl AsRef<Path>, samples: &[TemporalSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_samples(&mut w, samples)?;
    w.flush()?;
    Ok(())
}

/// Read a samples stream, rebuilding each sample's edge weights from its
/// latitude/longitude columns and the header settings.
pub fn read_samples<R: BufRead>(r: R) -> Result<Vec<TemporalSample>> {
    let mut lines = r.lines().enumerate();
    let header: SamplesHeader = loop {
        let Some((lineno, line)) = lines.next() else {
            return Err(CoreError::Corrupt("samples file is empty".into()));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        break serde_json::from_str(&line).map_err(|e| {
            CoreError::Corrupt(format!("line {}: bad samples header: {e}", lineno + 1))
        })?;
    };
    if header.format != SAMPLES_FORMAT {
        return Err(CoreError::Corrupt(format!(
            "not a samples file (format {:?})",
            header.format
        )));
    }
    if header.version != SAMPLES_VERSION {
        return Err(CoreError::VersionMismatch {
            found: header.version,
            expected: SAMPLES_VERSION,
        });
    }

    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleLine = serde_json::from_str(&line)
            .map_err(|e| CoreError::Corrupt(format!("line {lineno}: {e}")))?;
        let bad = |msg: String| CoreError::Corrupt(format!("line {lineno} ({}): {msg}", rec.id));

        if rec.years.len() != INPUT_YEARS || rec.features.len() != INPUT_YEARS {
            return Err(bad(format!(
                "expected {INPUT_YEARS} input graphs, got {} years / {} feature blocks",
                rec.years.len(),
                rec.features.len()
            )));
        }
        let n = rec.features[0].len();
        let mut graph_features = Vec::with_capacity(INPUT_YEARS);
        for (g, block) in rec.features.iter().enumerate() {
            if block.len() != n {
                return Err(bad(format!("graph {g} has {} nodes, expected {n}", block.len())));
            }
            let mut m = DenseMatrix::zeros(n, NUM_FEATURES);
            for (i, row) in block.iter().enumerate() {
                if row.len() != NUM_FEATURES {
                    return Err(bad(format!(
                        "graph {g} node {i} has {} features, expected {NUM_FEATURES}",
                        row.len()
                    )));
                }
                for (c, &v) in row.iter().enumerate() {
                    m.set(i, c, v);
                }
            }
            graph_features.push(m);
        }
        // Every graph of a sample shares the trace coordinates; the edge
        // weights below are rebuilt from graph 0's.
        let first = &graph_features[0];
        for (g, m) in graph_features.iter().enumerate().skip(1) {
            for i in 0..n {
                if m.get(i, 0) != first.get(i, 0) || m.get(i, 1) != first.get(i, 1) {
                    return Err(bad(format!("graph {g} disagrees on node {i}'s coordinates")));
                }
            }
        }

        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| (graph_features[0].get(i, 0), graph_features[0].get(i, 1)))
            .collect();
        let weights = Arc::new(EdgeWeightMatrix::from_points(
            &points,
            header.edge_mode,
            header.edge_cap,
        )?);

        let inputs = rec
            .years
            .iter()
            .zip(graph_features)
            .map(|(&year, f)| LayerGraph::new(year, f, header.mask, weights.clone()))
            .collect::<Result<Vec<_>>>()?;

        if rec.targets.len() != n {
            return Err(bad(format!("{} target rows for {n} nodes", rec.targets.len())));
        }
        let mut targets = DenseMatrix::zeros(n, TARGET_YEARS);
        for (i, row) in rec.targets.iter().enumerate() {
            if row.len() != TARGET_YEARS {
                return Err(bad(format!(
                    "target row {i} has {} columns, expected {TARGET_YEARS}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                targets.set(i, j, v);
            }
        }
        samples.push(TemporalSample::new(rec.id, inputs, targets)?);
    }
    Ok(samples)
}

pub fn read_samples_file(path: impl AsRef<Path>) -> Result<Vec<TemporalSample>> {
    read_samples(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_samples, synth_generate, SynthConfig};

    fn make_samples(n: usize, mask: FeatureMask) -> Vec<TemporalSample> {
        let cfg = SynthConfig { n_records: n, informative: false, ..SynthConfig::default() };
        let (records, mar) = synth_generate(&cfg).unwrap();
        build_samples(
            &records,
            mar.as_ref(),
            mask,
            EdgeWeightMode::Sqrt,
            crate::geo::DEFAULT_WEIGHT_CAP,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact_including_edge_weights() {
        let samples = make_samples(3, FeatureMask::all());
        let mut buf = Vec::new();
        write_samples(&mut buf, &samples).unwrap();
        let back = read_samples(buf.as_slice()).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.targets, b.targets);
            assert_eq!(a.feature_mask(), b.feature_mask());
            for (ga, gb) in a.inputs.iter().zip(&b.inputs) {
                assert_eq!(ga.year, gb.year);
                assert_eq!(ga.node_features, gb.node_features);
                assert_eq!(ga.edge_weights.matrix(), gb.edge_weights.matrix());
                assert_eq!(ga.edge_weights.mode(), gb.edge_weights.mode());
            }
        }
        // Writing the re-read samples reproduces the bytes.
        let mut buf2 = Vec::new();
        write_samples(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn header_and_line_errors_are_positioned() {
        let samples = make_samples(2, FeatureMask::base_only());
        let mut buf = Vec::new();
        write_samples(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let empty = read_samples(std::io::Cursor::new("")).unwrap_err();
        assert!(matches!(empty, CoreError::Corrupt(_)));

        let mut lines: Vec<&str> = text.lines().collect();
        let second = lines[2].replace("\"targets\":[[", "\"targets\":[[\"x\",");
        lines[2] = &second;
        let joined = lines.join("\n");
        let err = read_samples(std::io::Cursor::new(joined)).unwrap_err();
        assert!(err.to_string().contains("line 3"), "got: {err}");

        let bumped = text.replace("\"version\":1", "\"version\":9");
        let err = read_samples(std::io::Cursor::new(bumped)).unwrap_err();
        assert!(matches!(err, CoreError::VersionMismatch { found: 9, expected: 1 }));
    }

    #[test]
    fn file_round_trip() {
        let samples = make_samples(2, FeatureMask::base_only());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        write_samples_file(&path, &samples).unwrap();
        let back = read_samples_file(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].targets, samples[0].targets);
    }
}
