//! Labeled radar image records and their line-delimited file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geo::{TraceCoordinates, TRACE_COUNT};

/// One annotated radar image: trace coordinates plus the labeled
/// row-positions of every picked layer boundary (top boundary first).
/// `None` marks pixels where the annotator could not follow a boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageRecord {
    pub id: String,
    pub acquisition_year: i32,
    pub coords: TraceCoordinates,
    boundaries: Vec<Vec<Option<f64>>>,
}

impl LabeledImageRecord {
    /// Validates row widths, finiteness, and that boundaries never run
    /// upward: wherever two vertically adjacent picks are both present, the
    /// deeper one must not be above the shallower one.
    pub fn new(
        id: String,
        acquisition_year: i32,
        coords: TraceCoordinates,
        boundaries: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if boundaries.is_empty() {
            return Err(CoreError::MalformedRecord(format!(
                "record {id}: no boundary rows"
            )));
        }
        for (k, row) in boundaries.iter().enumerate() {
            if row.len() != TRACE_COUNT {
                return Err(CoreError::MalformedRecord(format!(
                    "record {id}: boundary {k} has {} entries, expected {TRACE_COUNT}",
                    row.len()
                )));
            }
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    if !v.is_finite() {
                        return Err(CoreError::MalformedRecord(format!(
                            "record {id}: non-finite boundary at row {k}, trace {c}"
                        )));
                    }
                }
            }
        }
        for c in 0..TRACE_COUNT {
            for k in 1..boundaries.len() {
                if let (Some(upper), Some(lower)) = (boundaries[k - 1][c], boundaries[k][c]) {
                    if lower < upper {
                        return Err(CoreError::MalformedRecord(format!(
                            "record {id}: boundary {k} rises above boundary {} at trace {c}",
                            k - 1
                        )));
                    }
                }
            }
        }
        Ok(LabeledImageRecord {
            id,
            acquisition_year,
            coords,
            boundaries,
        })
    }

    pub fn boundaries(&self) -> &[Vec<Option<f64>>] {
        &self.boundaries
    }

    pub fn n_boundaries(&self) -> usize {
        self.boundaries.len()
    }

    /// Per-layer thickness; see [`thickness_from_boundaries`].
    pub fn thickness(&self) -> Result<Vec<Vec<Option<f64>>>> {
        thickness_from_boundaries(&self.boundaries)
    }

    /// How many thickness rows are fully labeled across all traces.
    pub fn complete_thickness_rows(&self) -> usize {
        let Ok(t) = self.thickness() else { return 0 };
        t.iter()
            .filter(|row| row.iter().all(|v| v.is_some()))
            .count()
    }
}

/// Difference adjacent boundary rows into per-layer thickness (pixels).
/// An entry is present only where both bounding picks are; equal picks give
/// zero thickness, inverted picks are corrupt data.
pub fn thickness_from_boundaries(
    boundaries: &[Vec<Option<f64>>],
) -> Result<Vec<Vec<Option<f64>>>> {
    if boundaries.len() < 2 {
        return Err(CoreError::invalid(format!(
            "need at least 2 boundary rows to difference, got {}",
            boundaries.len()
        )));
    }
    let width = boundaries[0].len();
    let mut out = Vec::with_capacity(boundaries.len() - 1);
    for k in 1..boundaries.len() {
        if boundaries[k].len() != width || boundaries[k - 1].len() != width {
            return Err(CoreError::shape("ragged boundary rows"));
        }
        let mut row = Vec::with_capacity(width);
        for c in 0..width {
            let t = match (boundaries[k - 1][c], boundaries[k][c]) {
                (Some(upper), Some(lower)) => {
                    let d = lower - upper;
                    if d < 0.0 {
                        return Err(CoreError::MalformedRecord(format!(
                            "boundary {k} rises above boundary {} at trace {c}",
                            k - 1
                        )));
                    }
                    Some(d)
                }
                _ => None,
            };
            row.push(t);
        }
        out.push(row);
    }
    Ok(out)
}

/// Keep only records with at least [`MIN_COMPLETE_LAYERS`] fully labeled
/// thickness rows. Idempotent; order-preserving.
pub fn filter_valid(records: Vec<LabeledImageRecord>) -> Vec<LabeledImageRecord> {
    records
        .into_iter()
        .filter(|r| r.complete_thickness_rows() >= MIN_COMPLETE_LAYERS)
        .collect()
}

/// Complete annual layers a record must carry to be usable: five shallow
/// input years plus fifteen deep target years.
pub const MIN_COMPLETE_LAYERS: usize = 20;

// ---------------------------------------------------------------------------
// Line-delimited record files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    year: i32,
    lat: Vec<f64>,
    lon: Vec<f64>,
    boundaries: Vec<Vec<Option<f64>>>,
}

pub fn write_records<W: Write>(mut w: W, records: &[LabeledImageRecord]) -> Result<()> {
    for r in records {
        let line = RecordLine {
            id: r.id.clone(),
            year: r.acquisition_year,
            lat: r.coords.lat().to_vec(),
            lon: r.coords.lon().to_vec(),
            boundaries: r.boundaries.clone(),
        };
        serde_json::to_writer(&mut w, &line)
            .map_err(|e| CoreError::invalid(format!("serializing record {}: {e}", r.id)))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[LabeledImageRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}

/// Parse one record per line, skipping blank lines. Errors carry the
/// 1-based line number.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<LabeledImageRecord>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine = serde_json::from_str(&line).map_err(|e| {
            CoreError::MalformedRecord(format!("line {}: {e}", idx + 1))
        })?;
        let coords = TraceCoordinates::new(parsed.lat, parsed.lon)
            .map_err(|e| CoreError::MalformedRecord(format!("line {}: {e}", idx + 1)))?;
        let record =
            LabeledImageRecord::new(parsed.id, parsed.year, coords, parsed.boundaries)
                .map_err(|e| CoreError::MalformedRecord(format!("line {}: {e}", idx + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<LabeledImageRecord>> {
    read_records(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords() -> TraceCoordinates {
        TraceCoordinates::new(
            (0..TRACE_COUNT).map(|i| 70.0 + 1e-3 * i as f64).collect(),
            (0..TRACE_COUNT).map(|i| -40.0 + 2e-3 * i as f64).collect(),
        )
        .unwrap()
    }

    /// `rows` boundary rows at constant offsets, fully labeled.
    fn flat_boundaries(rows: usize) -> Vec<Vec<Option<f64>>> {
        (0..rows)
            .map(|k| vec![Some(10.0 + 4.0 * k as f64); TRACE_COUNT])
            .collect()
    }

    #[test]
    fn thickness_differences_boundary_rows() {
        let mut b = vec![
            vec![Some(10.0); TRACE_COUNT],
            vec![Some(14.0); TRACE_COUNT],
            vec![Some(19.0); TRACE_COUNT],
        ];
        let t = thickness_from_boundaries(&b).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t[0].iter().all(|&v| v == Some(4.0)));
        assert!(t[1].iter().all(|&v| v == Some(5.0)));

        // Equal picks are a zero-thickness layer, not an error.
        b[1] = vec![Some(10.0); TRACE_COUNT];
        let t = thickness_from_boundaries(&b).unwrap();
        assert!(t[0].iter().all(|&v| v == Some(0.0)));
    }

    #[test]
    fn missing_pick_blanks_both_adjacent_thicknesses() {
        let mut b = flat_boundaries(3);
        b[1][7] = None;
        let t = thickness_from_boundaries(&b).unwrap();
        assert_eq!(t[0][7], None);
        assert_eq!(t[1][7], None);
        assert_eq!(t[0][6], Some(4.0));
        assert_eq!(t[1][8], Some(4.0));
    }

    #[test]
    fn inverted_boundaries_are_malformed() {
        let mut b = flat_boundaries(2);
        b[1][100] = Some(5.0); // above the 10.0 top boundary
        assert!(matches!(
            thickness_from_boundaries(&b),
            Err(CoreError::MalformedRecord(_))
        ));
        assert!(LabeledImageRecord::new("r".into(), 2012, coords(), b).is_err());
        assert!(thickness_from_boundaries(&flat_boundaries(1)).is_err());
    }

    fn record_with_complete_rows(id: &str, complete: usize, total: usize) -> LabeledImageRecord {
        let mut b = flat_boundaries(total + 1);
        // Poke a hole in every thickness row past `complete`: removing
        // boundary k+1 blanks thickness rows k and k+1.
        for k in complete..total {
            b[k + 1][k % TRACE_COUNT] = None;
        }
        LabeledImageRecord::new(id.into(), 2012, coords(), b).unwrap()
    }

    #[test]
    fn filter_keeps_twenty_complete_layers() {
        let keep = record_with_complete_rows("keep", 20, 20);
        let drop = record_with_complete_rows("drop", 19, 22);
        assert_eq!(keep.complete_thickness_rows(), 20);
        assert!(drop.complete_thickness_rows() < 20);
        let kept = filter_valid(vec![keep.clone(), drop]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].id, "keep");
        // Idempotence and the empty case.
        let again = filter_valid(kept.clone());
        assert_eq!(again, kept);
        assert!(filter_valid(Vec::new()).is_empty());
    }

    #[test]
    fn records_round_trip_through_the_line_format() {
        let mut b = flat_boundaries(21);
        b[3][17] = None;
        b[20][255] = Some(10.0 + 4.0 * 20.0 + 0.125); // non-integer pixels survive
        let records = vec![
            LabeledImageRecord::new("a-001".into(), 2012, coords(), b).unwrap(),
            record_with_complete_rows("a-002", 20, 20),
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let parsed = read_records(buf.as_slice()).unwrap();
        assert_eq!(parsed, records);
        // Bytes are deterministic for identical inputs.
        let mut buf2 = Vec::new();
        write_records(&mut buf2, &records).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[record_with_complete_rows("ok", 20, 20)]).unwrap();
        buf.extend_from_slice(b"{\"id\": \"broken\"\n");
        let err = read_records(buf.as_slice()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "unexpected message: {msg}");
    }
}
