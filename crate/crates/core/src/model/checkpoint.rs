//! Binary model checkpoints.
//!
//! Layout: 4-byte magic `ILCP`, little-endian `u32` format version,
//! little-endian `u64` header length, a JSON header (config, normalization
//! stats, seed, epoch, parameter manifest), then every parameter's values
//! packed as little-endian `f64` in visit order. Writing is deterministic:
//! the same model state always produces the same bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{Model, ModelConfig, NormStats};
use crate::nn::ParamModel;

const MAGIC: [u8; 4] = *b"ILCP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    rows: u64,
    cols: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    norm: Option<NormStats>,
    seed: u64,
    epoch: u64,
    manifest: Vec<ParamEntry>,
}

/// A model plus the run metadata needed to resume or audit it.
#[derive(Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub seed: u64,
    pub epoch: u64,
}

impl Checkpoint {
    pub fn new(model: Model, seed: u64, epoch: u64) -> Self {
        Checkpoint { model, seed, epoch }
    }

    /// Serialize to the on-disk byte format. Needs `&mut` only because
    /// parameter traversal does; the model is not modified.
    pub fn to_bytes(&mut self) -> Result<Vec<u8>> {
        let mut manifest = Vec::new();
        let mut payload: Vec<u8> = Vec::new();
        self.model.visit_params(&mut |name, p| {
            let (rows, cols) = p.value.shape();
            manifest.push(ParamEntry { name: name.to_string(), rows: rows as u64, cols: cols as u64 });
            for &v in p.value.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        });
        let header = Header {
            config: self.model.config.clone(),
            norm: self.model.norm.clone(),
            seed: self.seed,
            epoch: self.epoch,
            manifest,
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| CoreError::invalid(format!("unserializable header: {e}")))?;
        let mut out = Vec::with_capacity(16 + header_json.len() + payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(CoreError::Corrupt("file shorter than the fixed header".into()));
        }
        if bytes[..4] != MAGIC {
            return Err(CoreError::Corrupt("bad magic; not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(CoreError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let payload_start = 16usize
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| CoreError::Corrupt("header length exceeds file size".into()))?;
        let header: Header = serde_json::from_slice(&bytes[16..payload_start])
            .map_err(|e| CoreError::Corrupt(format!("unreadable header: {e}")))?;
        header.config.validate()?;

        // Seed is irrelevant here; every parameter gets overwritten.
        let mut model = Model::init(header.config, 0)?;
        if let Some(norm) = header.norm {
            model.set_norm(norm)?;
        }

        let payload = &bytes[payload_start..];
        let mut cursor = 0usize;
        let mut entry_idx = 0usize;
        let mut err: Option<CoreError> = None;
        model.visit_params(&mut |name, p| {
            if err.is_some() {
                return;
            }
            let Some(entry) = header.manifest.get(entry_idx) else {
                err = Some(CoreError::Corrupt("manifest has too few parameters".into()));
                return;
            };
            let (rows, cols) = p.value.shape();
            if entry.name != name || entry.rows != rows as u64 || entry.cols != cols as u64 {
                err = Some(CoreError::Corrupt(format!(
                    "manifest entry {entry_idx} is {} ({}×{}), expected {name} ({rows}×{cols})",
                    entry.name, entry.rows, entry.cols
                )));
                return;
            }
            let nbytes = rows * cols * 8;
            let Some(chunk) = payload.get(cursor..cursor + nbytes) else {
                err = Some(CoreError::Corrupt("payload truncated".into()));
                return;
            };
            for (dst, src) in p.value.data_mut().iter_mut().zip(chunk.chunks_exact(8)) {
                *dst = f64::from_le_bytes(src.try_into().expect("8 bytes"));
            }
            cursor += nbytes;
            entry_idx += 1;
        });
        if let Some(e) = err {
            return Err(e);
        }
        if entry_idx != header.manifest.len() {
            return Err(CoreError::Corrupt("manifest has extra parameters".into()));
        }
        if cursor != payload.len() {
            return Err(CoreError::Corrupt(format!(
                "payload has {} trailing bytes",
                payload.len() - cursor
            )));
        }
        Ok(Checkpoint { model, seed: header.seed, epoch: header.epoch })
    }

    pub fn save(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Checkpoint::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TARGET_YEARS;
    use crate::geo::FeatureMask;
    use crate::model::CellKind;
    use crate::nn::{stream, RngState};

    fn small_model(seed: u64) -> Model {
        let cfg = ModelConfig {
            cell_kind: CellKind::Gcn,
            hidden: 5,
            head: [4, 3, TARGET_YEARS],
            feature_mask: FeatureMask::base_only(),
            ..ModelConfig::default()
        };
        let mut m = Model::init(cfg, seed).unwrap();
        m.set_norm(NormStats::identity()).unwrap();
        m
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let mut ckpt = Checkpoint::new(small_model(77), 77, 42);
        let bytes = ckpt.to_bytes().unwrap();
        let mut reloaded = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(reloaded.seed, 77);
        assert_eq!(reloaded.epoch, 42);
        assert_eq!(reloaded.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn file_round_trip_preserves_behavior() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ckpt = Checkpoint::new(small_model(3), 3, 0);
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();

        // Identical parameters ⇒ identical predictions, bit for bit.
        let mut rng = RngState::with_stream(0, stream::INIT);
        let pts: Vec<(f64, f64)> = (0..5)
            .map(|_| (70.0 + rng.uniform(-0.4, 0.4), -45.0 + rng.uniform(-0.4, 0.4)))
            .collect();
        let weights = std::sync::Arc::new(
            crate::geo::EdgeWeightMatrix::from_points(
                &pts,
                crate::geo::EdgeWeightMode::AsWritten,
                1e9,
            )
            .unwrap(),
        );
        let graphs: Vec<crate::geo::LayerGraph> = (0..5)
            .map(|k| {
                let f = crate::nn::DenseMatrix::from_fn(5, crate::geo::NUM_FEATURES, |i, c| {
                    match c {
                        0 => pts[i].0,
                        1 => pts[i].1,
                        2 => 12.0 + (i + k) as f64,
                        _ => 0.0,
                    }
                });
                crate::geo::LayerGraph::new(2007 + k as i32, f, FeatureMask::base_only(), weights.clone())
                    .unwrap()
            })
            .collect();
        let a = ckpt.model.predict_denormalized(&graphs).unwrap();
        let b = loaded.model.predict_denormalized(&graphs).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_and_tampering_are_detected() {
        let mut ckpt = Checkpoint::new(small_model(9), 9, 1);
        let bytes = ckpt.to_bytes().unwrap();

        for cut in [bytes.len() - 1, bytes.len() - 9, 20, 10, 3] {
            let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(err, CoreError::Corrupt(_)),
                "cut at {cut} gave {err}"
            );
        }

        let mut extra = bytes.clone();
        extra.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            Checkpoint::from_bytes(&extra).unwrap_err(),
            CoreError::Corrupt(_)
        ));

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bad_magic).unwrap_err(),
            CoreError::Corrupt(_)
        ));
    }

    #[test]
    fn future_versions_are_refused_with_the_version_error() {
        let mut ckpt = Checkpoint::new(small_model(4), 4, 0);
        let mut bytes = ckpt.to_bytes().unwrap();
        bytes[4..8].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
        match Checkpoint::from_bytes(&bytes).unwrap_err() {
            CoreError::VersionMismatch { found, expected } => {
                assert_eq!(found, CHECKPOINT_VERSION + 1);
                assert_eq!(expected, CHECKPOINT_VERSION);
            }
            other => panic!("expected version mismatch, got {other}"),
        }
    }
}
