//! Experiment configuration: a flat TOML file merged with command-line
//! overrides. Precedence: built-in defaults < config file < flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use icelayer_core::geo::{EdgeWeightMode, FeatureMask};
use icelayer_core::model::{CellKind, ModelConfig};
use icelayer_core::training::TrainConfig;
use serde::Deserialize;

use crate::error::{AppError, IntoAppResult};

/// Keys accepted in the config file. Every key is optional; unknown keys
/// are hard errors so typos cannot silently fall back to defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // Paths.
    pub records: Option<PathBuf>,
    pub mar: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    // Model.
    pub cell: Option<String>,
    pub hidden: Option<usize>,
    pub dropout: Option<f64>,
    /// Physical channel names; `["all"]` / `["none"]` select every / no
    /// physical channel.
    pub physical_features: Option<Vec<String>>,
    pub edge_mode: Option<String>,
    pub edge_cap: Option<f64>,
    /// Neighbors sampled per node during training; 0 means all.
    pub fanout: Option<usize>,
    pub weighted_mean: Option<bool>,
    // Training.
    pub epochs: Option<usize>,
    pub lr0: Option<f64>,
    pub period: Option<usize>,
    pub seed: Option<u64>,
    pub weight_decay: Option<f64>,
    pub decoupled_decay: Option<bool>,
    pub shuffle: Option<bool>,
    // Protocol.
    pub trials: Option<usize>,
    pub bit_exact: Option<bool>,
}

/// Flags shared by the data-driven subcommands. Each flag overrides the
/// config-file key of the same name.
#[derive(Debug, Default, clap::Args)]
pub struct Overrides {
    /// Flat TOML config file; the flags below override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Layer records (JSON lines)
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,

    /// Climate table (CSV)
    #[arg(long, value_name = "FILE")]
    pub mar: Option<PathBuf>,

    /// Prebuilt samples file; replaces --records/--mar
    #[arg(long, value_name = "FILE")]
    pub samples: Option<PathBuf>,

    /// Directory for checkpoints, histories, and reports [default: out]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Recurrent cell: "sage" or "gcn"
    #[arg(long, value_name = "KIND")]
    pub cell: Option<String>,

    /// LSTM hidden width
    #[arg(long, value_name = "N")]
    pub hidden: Option<usize>,

    /// Dropout probability in [0, 1)
    #[arg(long, value_name = "P")]
    pub dropout: Option<f64>,

    /// Comma-separated physical channels (e.g. "smb,melt_height"), or "all"/"none"
    #[arg(long, value_name = "LIST")]
    pub physical_features: Option<String>,

    /// Edge weight mode: "as-written" or "sqrt"
    #[arg(long, value_name = "MODE")]
    pub edge_mode: Option<String>,

    /// Weight assigned to near-coincident trace pairs
    #[arg(long, value_name = "W")]
    pub edge_cap: Option<f64>,

    /// Neighbors sampled per node during training; 0 means all
    #[arg(long, value_name = "K")]
    pub fanout: Option<usize>,

    /// Weight neighbor means by edge weight: "true" or "false"
    #[arg(long, value_name = "BOOL")]
    pub weighted_mean: Option<bool>,

    /// Training epochs
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,

    /// Initial learning rate
    #[arg(long, value_name = "LR")]
    pub lr0: Option<f64>,

    /// Epochs between learning-rate halvings
    #[arg(long, value_name = "N")]
    pub period: Option<usize>,

    /// Base RNG seed
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// L2 penalty strength
    #[arg(long, value_name = "WD")]
    pub weight_decay: Option<f64>,

    /// Decouple weight decay from the Adam moments: "true" or "false"
    #[arg(long, value_name = "BOOL")]
    pub decoupled_decay: Option<bool>,

    /// Reshuffle sample order each epoch: "true" or "false"
    #[arg(long, value_name = "BOOL")]
    pub shuffle: Option<bool>,

    /// Number of trials for the trials subcommand
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,

    /// Omit wall-clock times so outputs are byte-reproducible: "true"/"false"
    #[arg(long, value_name = "BOOL")]
    pub bit_exact: Option<bool>,
}

/// A fully merged experiment setup.
#[derive(Debug)]
pub struct Resolved {
    pub records: Option<PathBuf>,
    pub mar: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub n_trials: usize,
    pub bit_exact: bool,
}

pub fn resolve(ov: &Overrides) -> Result<Resolved, AppError> {
    let file = match &ov.config {
        Some(path) => parse_file(path)?,
        None => FileConfig::default(),
    };

    let mut model = ModelConfig::default();
    if let Some(s) = ov.cell.as_deref().or(file.cell.as_deref()) {
        model.cell_kind = CellKind::from_str(s).or_config()?;
    }
    if let Some(h) = ov.hidden.or(file.hidden) {
        model.hidden = h;
    }
    if let Some(p) = ov.dropout.or(file.dropout) {
        model.dropout_p = p;
    }
    let physical: Option<Vec<String>> = match (&ov.physical_features, &file.physical_features) {
        (Some(list), _) => Some(split_list(list)),
        (None, Some(v)) => Some(v.clone()),
        (None, None) => None,
    };
    if let Some(names) = physical {
        model.feature_mask = mask_from_names(&names)?;
    }
    if let Some(s) = ov.edge_mode.as_deref().or(file.edge_mode.as_deref()) {
        model.edge_mode = EdgeWeightMode::from_str(s).or_config()?;
    }
    if let Some(c) = ov.edge_cap.or(file.edge_cap) {
        model.edge_cap = c;
    }
    if let Some(k) = ov.fanout.or(file.fanout) {
        model.fanout = if k == 0 { None } else { Some(k) };
    }
    if let Some(b) = ov.weighted_mean.or(file.weighted_mean) {
        model.weighted_mean = b;
    }

    let mut train = TrainConfig::default();
    if let Some(v) = ov.epochs.or(file.epochs) {
        train.epochs = v;
    }
    if let Some(v) = ov.lr0.or(file.lr0) {
        train.lr0 = v;
    }
    if let Some(v) = ov.period.or(file.period) {
        train.period = v;
    }
    if let Some(v) = ov.seed.or(file.seed) {
        train.seed = v;
    }
    if let Some(v) = ov.weight_decay.or(file.weight_decay) {
        train.weight_decay = v;
    }
    if let Some(v) = ov.decoupled_decay.or(file.decoupled_decay) {
        train.decoupled_decay = v;
    }
    if let Some(v) = ov.shuffle.or(file.shuffle) {
        train.shuffle = v;
    }

    let resolved = Resolved {
        records: ov.records.clone().or(file.records),
        mar: ov.mar.clone().or(file.mar),
        samples: ov.samples.clone().or(file.samples),
        out_dir: ov
            .out_dir
            .clone()
            .or(file.out_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        model,
        train,
        n_trials: ov.trials.or(file.trials).unwrap_or(5),
        bit_exact: ov.bit_exact.or(file.bit_exact).unwrap_or(true),
    };

    resolved.model.validate().or_config()?;
    resolved.train.validate().or_config()?;
    if resolved.n_trials == 0 {
        return Err(AppError::config("trials must be ≥ 1"));
    }
    let referenced = [
        ("records", &resolved.records),
        ("mar", &resolved.mar),
        ("samples", &resolved.samples),
    ];
    for (label, path) in referenced {
        if let Some(p) = path {
            if !p.is_file() {
                return Err(AppError::data(format!(
                    "{label} file not found: {}",
                    p.display()
                )));
            }
        }
    }
    Ok(resolved)
}

fn parse_file(path: &Path) -> Result<FileConfig, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| AppError::config(format!("{}: {}", path.display(), e.message())))
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Channel names → feature mask, honoring the "all"/"none" shorthands.
pub fn mask_from_names(names: &[String]) -> Result<FeatureMask, AppError> {
    match names {
        [one] if one == "all" => Ok(FeatureMask::all()),
        [one] if one == "none" => Ok(FeatureMask::base_only()),
        names => FeatureMask::from_physical_names(names).or_config(),
    }
}
