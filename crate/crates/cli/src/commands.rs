//! Subcommand implementations. Each returns `AppError` with an exit class;
//! printing is plain `println!` so outputs stay deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use icelayer_core::dataset::{
    build_samples, filter_valid, read_mar_csv_file, read_records_file, read_samples_file, split,
    synth_generate, write_mar_csv_file, write_records_file, write_samples_file, SynthConfig,
    TemporalSample, TARGET_YEARS,
};
use icelayer_core::diagnostics::gradient_suite;
use icelayer_core::geo::{FeatureMask, BASE_FEATURES};
use icelayer_core::model::{Checkpoint, Model, ModelConfig};
use icelayer_core::training::{
    self, evaluate_rmse, run_trials_on_samples, write_history_csv, TrainConfig, TrialReport,
};

use crate::config::{resolve, Overrides, Resolved};
use crate::error::{AppError, IntoAppResult};

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// RNG seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Number of records (tiles)
    #[arg(long, default_value_t = 40)]
    pub n: usize,

    /// Records output path
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,

    /// Climate table output path [default: <out>.mar.csv]
    #[arg(long, value_name = "FILE")]
    pub mar_out: Option<PathBuf>,

    /// Relative per-pixel thickness noise, in [0, 0.5]
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,

    /// Skip the climate table
    #[arg(long)]
    pub no_mar: bool,

    /// Decouple the smb channel from the deep-layer factor
    #[arg(long)]
    pub uninformative: bool,
}

pub fn synth(args: &SynthArgs) -> Result<(), AppError> {
    let cfg = SynthConfig {
        seed: args.seed,
        n_records: args.n,
        noise: args.noise,
        with_mar: !args.no_mar,
        // No climate table means no channel to carry the latent factor.
        informative: !args.uninformative && !args.no_mar,
        ..SynthConfig::default()
    };
    let (records, mar) = synth_generate(&cfg).or_config()?;
    ensure_parent(&args.out)?;
    write_records_file(&args.out, &records).or_data()?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    if let Some(set) = mar {
        let path = args
            .mar_out
            .clone()
            .unwrap_or_else(|| args.out.with_extension("mar.csv"));
        ensure_parent(&path)?;
        write_mar_csv_file(&path, &set).or_data()?;
        println!("wrote climate table to {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub overrides: Overrides,

    /// Samples output path [default: <out-dir>/samples.jsonl]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn build(args: &BuildArgs) -> Result<(), AppError> {
    let r = resolve(&args.overrides)?;
    let samples = build_from_records(&r)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| r.out_dir.join("samples.jsonl"));
    ensure_parent(&out)?;
    write_samples_file(&out, &samples).or_data()?;
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: Overrides,
}

pub fn train(ov: &Overrides) -> Result<(), AppError> {
    let r = resolve(ov)?;
    let samples = load_samples(&r)?;
    let (train_set, val_set, test_set) = split(samples, r.train.seed).or_data()?;
    println!(
        "split: {} train / {} val / {} test",
        train_set.len(),
        val_set.len(),
        test_set.len()
    );

    let mut model = Model::init(r.model.clone(), r.train.seed).or_config()?;
    let outcome = training::train(&mut model, &train_set, &val_set, &r.train).or_other()?;
    let report = evaluate_rmse(&model, &test_set).or_other()?;

    fs::create_dir_all(&r.out_dir)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", r.out_dir.display())))?;
    let epoch = outcome
        .best_epoch
        .unwrap_or(r.train.epochs.saturating_sub(1)) as u64;
    let ckpt_path = r.out_dir.join("model.ckpt");
    let history_path = r.out_dir.join("history.csv");
    Checkpoint::new(model, r.train.seed, epoch).save(&ckpt_path).or_data()?;
    write_history_csv(&history_path, &outcome.history).or_data()?;

    if let (Some(e), Some(v)) = (outcome.best_epoch, outcome.best_val_rmse) {
        println!("best epoch {e}: val RMSE {v}");
    }
    println!("test RMSE {}", report.scalar);
    println!("wrote {} and {}", ckpt_path.display(), history_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,

    /// Prebuilt samples file
    #[arg(long, value_name = "FILE")]
    pub samples: Option<PathBuf>,

    /// Layer records; graphs are built with the checkpoint's own settings
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,

    /// Climate table (CSV)
    #[arg(long, value_name = "FILE")]
    pub mar: Option<PathBuf>,

    /// Also write the report as JSON here
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> Result<(), AppError> {
    if !args.checkpoint.is_file() {
        return Err(AppError::data(format!(
            "checkpoint not found: {}",
            args.checkpoint.display()
        )));
    }
    let ckpt = Checkpoint::load(&args.checkpoint).or_data()?;
    let model = ckpt.model;

    let samples = match (&args.samples, &args.records) {
        (Some(path), _) => {
            if !path.is_file() {
                return Err(AppError::data(format!(
                    "samples file not found: {}",
                    path.display()
                )));
            }
            let samples = read_samples_file(path).or_data()?;
            require_matching_samples(&samples, &model.config)?;
            samples
        }
        (None, Some(records)) => {
            // Reuse the records → samples path with the checkpoint's model
            // settings, so evaluation sees the graphs it was trained on.
            let r = Resolved {
                records: Some(records.clone()),
                mar: args.mar.clone(),
                samples: None,
                out_dir: PathBuf::from("out"),
                model: model.config.clone(),
                train: TrainConfig::default(),
                n_trials: 1,
                bit_exact: true,
            };
            build_from_records(&r)?
        }
        (None, None) => {
            return Err(AppError::config("pass --samples or --records to evaluate on"))
        }
    };

    let report = evaluate_rmse(&model, &samples).or_other()?;
    println!("RMSE {} over {} samples", report.scalar, report.n_samples);
    let per_year: Vec<String> = report.per_year.iter().map(|v| v.to_string()).collect();
    println!("per-year: {}", per_year.join(" "));
    if let Some(out) = &args.out {
        ensure_parent(out)?;
        let mut json = serde_json::to_string_pretty(&report)
            .map_err(|e| AppError::other(format!("unserializable report: {e}")))?;
        json.push('\n');
        fs::write(out, json)
            .map_err(|e| AppError::data(format!("cannot write {}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// trials
// ---------------------------------------------------------------------------

pub fn trials(ov: &Overrides) -> Result<(), AppError> {
    let r = resolve(ov)?;
    let samples = load_samples(&r)?;
    let report =
        run_trials_on_samples(&samples, &r.model, &r.train, r.n_trials, r.bit_exact).or_other()?;

    fs::create_dir_all(&r.out_dir)
        .map_err(|e| AppError::data(format!("cannot create {}: {e}", r.out_dir.display())))?;
    let path = r.out_dir.join("trials.json");
    fs::write(&path, report.to_json().or_other()?)
        .map_err(|e| AppError::data(format!("cannot write {}: {e}", path.display())))?;

    for t in &report.trials {
        match t.test_rmse {
            Some(v) => println!("trial {} (seed {}): test RMSE {v}", t.trial, t.seed),
            None => println!(
                "trial {} (seed {}): failed: {}",
                t.trial,
                t.seed,
                t.error.as_deref().unwrap_or("unknown")
            ),
        }
    }
    println!("test RMSE over {} trials: {}", report.n_trials, report.summary);
    println!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

pub fn gradcheck() -> Result<(), AppError> {
    let suite = gradient_suite().or_other()?;
    let mut failures = 0;
    for entry in &suite {
        let status = if entry.passed() { "pass" } else { "FAIL" };
        println!(
            "{:<16} max rel err {:.3e} (tolerance {:.0e}, {} coordinates) [{status}]",
            entry.name, entry.max_rel_err, entry.tolerance, entry.checked
        );
        if !entry.passed() {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(AppError::other(format!(
            "{failures} of {} gradient checks failed",
            suite.len()
        )));
    }
    println!("all {} gradient checks passed", suite.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// Trial report JSON files to merge
    #[arg(required = true, value_name = "REPORT")]
    pub reports: Vec<PathBuf>,

    /// Also write the table as CSV here
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn report(args: &ReportArgs) -> Result<(), AppError> {
    let mut rows = Vec::new();
    for path in &args.reports {
        if !path.is_file() {
            return Err(AppError::data(format!("report not found: {}", path.display())));
        }
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::data(format!("cannot read {}: {e}", path.display())))?;
        let rep = TrialReport::from_json(&text).or_data()?;
        rows.push((label_for(path), rep));
    }

    let header =
        ["report", "cell", "features", "trials", "test RMSE (mean ± std)"].map(str::to_string);
    let mut table = vec![header];
    for (label, rep) in &rows {
        let successes = rep.trials.iter().filter(|t| t.test_rmse.is_some()).count();
        let trials = if successes == rep.n_trials {
            rep.n_trials.to_string()
        } else {
            format!("{successes}/{}", rep.n_trials)
        };
        table.push([
            label.clone(),
            rep.model.cell_kind.to_string(),
            physical_label(&rep.model.feature_mask),
            trials,
            rep.summary.clone(),
        ]);
    }
    let mut width = [0usize; 5];
    for row in &table {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    for row in &table {
        let line: Vec<String> = row
            .iter()
            .zip(width)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        println!("{}", line.join("  ").trim_end());
    }

    if let Some(out) = &args.out {
        ensure_parent(out)?;
        let mut csv = String::from("report,cell,features,n_trials,mean_rmse,std_rmse");
        for k in 1..=TARGET_YEARS {
            csv.push_str(&format!(",y{k}"));
        }
        csv.push('\n');
        for (label, rep) in &rows {
            csv.push_str(&format!(
                "{label},{},{},{},{},{}",
                rep.model.cell_kind,
                physical_label(&rep.model.feature_mask),
                rep.n_trials,
                rep.mean_rmse,
                rep.std_rmse
            ));
            for v in rep.per_year_mean {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        fs::write(out, csv)
            .map_err(|e| AppError::data(format!("cannot write {}: {e}", out.display())))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Samples from whatever input the setup names: a prebuilt samples file
/// (checked for consistency with the run's settings) or records to build
/// from scratch.
fn load_samples(r: &Resolved) -> Result<Vec<TemporalSample>, AppError> {
    match &r.samples {
        Some(path) => {
            let samples = read_samples_file(path).or_data()?;
            require_matching_samples(&samples, &r.model)?;
            Ok(samples)
        }
        None => build_from_records(r),
    }
}

fn build_from_records(r: &Resolved) -> Result<Vec<TemporalSample>, AppError> {
    let path = r.records.as_ref().ok_or_else(|| {
        AppError::config("no input: pass --records or --samples (or set them in the config file)")
    })?;
    if !path.is_file() {
        return Err(AppError::data(format!("records file not found: {}", path.display())));
    }
    let records = filter_valid(read_records_file(path).or_data()?);
    if records.is_empty() {
        return Err(AppError::data(format!("no usable records in {}", path.display())));
    }
    let mar = match &r.mar {
        Some(p) => {
            if !p.is_file() {
                return Err(AppError::data(format!("mar file not found: {}", p.display())));
            }
            Some(read_mar_csv_file(p).or_data()?)
        }
        None => None,
    };
    if wants_physical(&r.model.feature_mask) && mar.is_none() {
        return Err(AppError::config(
            "physical features requested but no climate table given; \
             pass --mar or use --physical-features none",
        ));
    }
    build_samples(
        &records,
        mar.as_ref(),
        r.model.feature_mask,
        r.model.edge_mode,
        r.model.edge_cap,
    )
    .or_data()
}

/// A samples file fixes the feature mask and edge weighting it was built
/// with; the model insists on an exact match, so mismatches are caught here
/// with advice instead of a contract error mid-forward.
fn require_matching_samples(
    samples: &[TemporalSample],
    model: &ModelConfig,
) -> Result<(), AppError> {
    let Some(sample) = samples.first() else {
        return Err(AppError::data("samples file is empty"));
    };
    let graph = &sample.inputs[0];
    let have = graph.feature_mask;
    if have != model.feature_mask {
        return Err(AppError::config(format!(
            "samples were built with features [{}] but the run asks for [{}]; \
             adjust --physical-features or rebuild the samples",
            have.enabled_names().join(","),
            model.feature_mask.enabled_names().join(","),
        )));
    }
    let weights = graph.edge_weights.as_ref();
    if weights.mode() != model.edge_mode || weights.cap() != model.edge_cap {
        return Err(AppError::config(format!(
            "samples carry {} edge weights (cap {}) but the run asks for {} (cap {}); \
             adjust --edge-mode/--edge-cap or rebuild the samples",
            weights.mode(),
            weights.cap(),
            model.edge_mode,
            model.edge_cap,
        )));
    }
    Ok(())
}

fn wants_physical(mask: &FeatureMask) -> bool {
    mask.enabled_count() > BASE_FEATURES
}

fn ensure_parent(path: &Path) -> Result<(), AppError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| AppError::data(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    Ok(())
}

fn label_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Physical channels in play, or "base" when it's coordinates+thickness only.
fn physical_label(mask: &FeatureMask) -> String {
    let names: Vec<&str> = mask.enabled_names().into_iter().skip(BASE_FEATURES).collect();
    if names.is_empty() {
        "base".to_string()
    } else {
        names.join("+")
    }
}
