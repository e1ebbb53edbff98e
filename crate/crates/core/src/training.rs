//! Optimization loop, learning-rate schedule, evaluation, and the
//! multi-trial experiment protocol.
//!
//! One optimizer step consumes one temporal sample (a single image's
//! five-graph sequence). Training is sequential and fully seeded: given the
//! same data, config, and seed, every logged number is bit-identical across
//! runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_samples, split_indices, LabeledImageRecord, MarSampleSet, TemporalSample, TARGET_YEARS,
};
use crate::error::{CoreError, Result};
use crate::model::{Model, ModelConfig, NormStats};
use crate::nn::{mse_loss_and_grad, stream, DenseMatrix, ParamModel, RngState};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Step-decay learning rate: `lr0 · 0.5^⌊epoch/period⌋`.
pub fn lr_at(lr0: f64, period: usize, epoch: usize) -> f64 {
    lr0 * 0.5f64.powi((epoch / period.max(1)) as i32)
}

fn default_epochs() -> usize {
    450
}
fn default_lr0() -> f64 {
    0.01
}
fn default_period() -> usize {
    75
}
fn default_weight_decay() -> f64 {
    1e-4
}
fn default_true() -> bool {
    true
}

/// Training-loop knobs. Architecture lives in [`ModelConfig`]; this covers
/// only how the optimizer runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr0: f64,
    /// Epochs between each halving of the learning rate.
    pub period: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// Apply decay directly to parameters (AdamW style) instead of folding
    /// it into the gradient.
    pub decoupled_decay: bool,
    /// Reshuffle the sample order every epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            lr0: default_lr0(),
            period: default_period(),
            seed: 0,
            weight_decay: default_weight_decay(),
            decoupled_decay: false,
            shuffle: default_true(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(CoreError::invalid("epochs must be ≥ 1"));
        }
        if self.period == 0 {
            return Err(CoreError::invalid("schedule period must be ≥ 1"));
        }
        if !self.lr0.is_finite() || self.lr0 <= 0.0 {
            return Err(CoreError::invalid(format!(
                "initial learning rate must be positive, got {}",
                self.lr0
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(CoreError::invalid(format!(
                "weight decay must be ≥ 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Classic Adam (β₁ = 0.9, β₂ = 0.999, ε = 1e-8) with bias correction.
///
/// Weight decay defaults to L2-coupled form — the decay term joins the
/// gradient before the moment updates. With `decoupled` it is instead
/// subtracted from the parameter directly after the Adam step.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
    t: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub decoupled: bool,
}

impl AdamState {
    pub fn new<M: ParamModel>(model: &mut M, lr: f64, weight_decay: f64, decoupled: bool) -> Self {
        let mut m = Vec::new();
        let mut v = Vec::new();
        model.visit_params(&mut |_, p| {
            let (r, c) = p.value.shape();
            m.push(DenseMatrix::zeros(r, c));
            v.push(DenseMatrix::zeros(r, c));
        });
        AdamState { m, v, t: 0, lr, weight_decay, decoupled }
    }

    /// Completed optimizer steps.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update over every parameter. A NaN or infinite gradient anywhere
    /// aborts before any state is touched; on success all gradients are
    /// zeroed for the next accumulation.
    pub fn step<M: ParamModel>(&mut self, model: &mut M) -> Result<()> {
        // Validation pass: nothing may mutate until the step is known good.
        let mut idx = 0usize;
        let mut problem: Option<String> = None;
        model.visit_params(&mut |name, p| {
            if problem.is_some() {
                return;
            }
            match self.m.get(idx) {
                Some(m) if m.shape() == p.value.shape() => {}
                _ => {
                    problem = Some(format!("optimizer state does not fit parameter {name}"));
                    return;
                }
            }
            if !p.grad.all_finite() {
                problem = Some(format!("non-finite gradient in {name}"));
            }
            idx += 1;
        });
        if let Some(msg) = problem {
            return Err(CoreError::Numeric(msg));
        }
        if idx != self.m.len() {
            return Err(CoreError::Contract(format!(
                "optimizer holds {} parameters, model visited {idx}",
                self.m.len()
            )));
        }

        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let (lr, wd, decoupled) = (self.lr, self.weight_decay, self.decoupled);
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut idx = 0usize;
        model.visit_params(&mut |_, p| {
            let m = ms[idx].data_mut();
            let v = vs[idx].data_mut();
            let theta = p.value.data_mut();
            let grad = p.grad.data_mut();
            for k in 0..theta.len() {
                let g = if decoupled { grad[k] } else { grad[k] + wd * theta[k] };
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * g;
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                theta[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                if decoupled {
                    theta[k] -= lr * wd * theta[k];
                }
                grad[k] = 0.0;
            }
            idx += 1;
        });
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// One logged epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample MSE on normalized targets.
    pub train_mse: f64,
    /// RMSE in pixels on the validation split; absent when that split is
    /// empty.
    pub val_rmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_rmse: Option<f64>,
}

/// Train in place. Normalization statistics come from the training split
/// (computed here unless the model already carries some, e.g. on resume).
/// Each epoch reshuffles the sample order, runs one optimizer step per
/// sample, and logs validation RMSE; the parameters that scored the best
/// validation RMSE are restored at the end. A numeric failure (NaN/Inf loss
/// or gradient) aborts with the parameters of the last completed epoch.
pub fn train(
    model: &mut Model,
    train_samples: &[TemporalSample],
    val_samples: &[TemporalSample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_samples.is_empty() {
        return Err(CoreError::invalid("training needs at least one sample"));
    }
    if model.norm.is_none() {
        model.set_norm(NormStats::compute(train_samples)?)?;
    }
    let norm = model.norm.clone().expect("just set");
    let norm_targets: Vec<DenseMatrix> = train_samples
        .iter()
        .map(|s| norm.normalize_targets(&s.targets))
        .collect::<Result<_>>()?;

    let mut adam = AdamState::new(
        model,
        config.lr0,
        config.weight_decay,
        config.decoupled_decay,
    );
    let mut shuffle_rng = RngState::with_stream(config.seed, stream::SHUFFLE);
    let mut dropout_rng = RngState::with_stream(config.seed, stream::DROPOUT);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Vec<(String, DenseMatrix)>)> = None;
    let mut last_good = model.param_snapshot();
    model.zero_grads();

    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    for epoch in 0..config.epochs {
        adam.lr = lr_at(config.lr0, config.period, epoch);
        if config.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        let mut loss_sum = 0.0;
        for &i in &order {
            let sample = &train_samples[i];
            let step = (|| -> Result<f64> {
                let (y, cache) = model.forward_cached(&sample.inputs, true, &mut dropout_rng)?;
                let (loss, grad) = mse_loss_and_grad(&y, &norm_targets[i])?;
                if !loss.is_finite() {
                    return Err(CoreError::Numeric(format!(
                        "loss became {loss} on sample {}",
                        sample.id
                    )));
                }
                model.backward(&cache, &grad)?;
                adam.step(model)?;
                Ok(loss)
            })();
            match step {
                Ok(loss) => loss_sum += loss,
                Err(e @ CoreError::Numeric(_)) => {
                    model.load_param_snapshot(&last_good)?;
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
        }
        let train_mse = loss_sum / train_samples.len() as f64;

        let val_rmse = if val_samples.is_empty() {
            None
        } else {
            let rmse = evaluate_rmse(model, val_samples)?.scalar;
            if !rmse.is_finite() {
                model.load_param_snapshot(&last_good)?;
                return Err(CoreError::Numeric(format!(
                    "validation RMSE became {rmse} at epoch {epoch}"
                )));
            }
            Some(rmse)
        };
        history.push(EpochRecord { epoch, lr: adam.lr, train_mse, val_rmse });

        if let Some(v) = val_rmse {
            if best.as_ref().map_or(true, |(_, b, _)| v < *b) {
                best = Some((epoch, v, model.param_snapshot()));
            }
        }
        last_good = model.param_snapshot();
    }

    let (best_epoch, best_val_rmse) = match best {
        Some((e, v, snap)) => {
            model.load_param_snapshot(&snap)?;
            (Some(e), Some(v))
        }
        None => (None, None),
    };
    Ok(TrainOutcome { history, best_epoch, best_val_rmse })
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    /// RMSE pooled over every node, year, and sample, in pixels.
    pub scalar: f64,
    /// RMSE per target year column, newest first.
    pub per_year: [f64; TARGET_YEARS],
    pub n_samples: usize,
}

/// RMSE from prediction/target matrix pairs (both in pixels).
pub fn rmse_from_pairs(pairs: &[(&DenseMatrix, &DenseMatrix)]) -> Result<RmseReport> {
    if pairs.is_empty() {
        return Err(CoreError::invalid("RMSE over zero samples is undefined"));
    }
    let mut sq = [0.0f64; TARGET_YEARS];
    let mut count = 0usize;
    for (pred, target) in pairs {
        if pred.shape() != target.shape() || pred.cols() != TARGET_YEARS {
            return Err(CoreError::shape(format!(
                "prediction {:?} vs target {:?}",
                pred.shape(),
                target.shape()
            )));
        }
        for i in 0..pred.rows() {
            for (j, s) in sq.iter_mut().enumerate() {
                let d = pred.get(i, j) - target.get(i, j);
                *s += d * d;
            }
        }
        count += pred.rows();
    }
    let mut per_year = [0.0f64; TARGET_YEARS];
    for (out, s) in per_year.iter_mut().zip(&sq) {
        *out = (s / count as f64).sqrt();
    }
    let total: f64 = sq.iter().sum();
    Ok(RmseReport {
        scalar: (total / (count * TARGET_YEARS) as f64).sqrt(),
        per_year,
        n_samples: pairs.len(),
    })
}

/// Denormalized (pixel-space) RMSE of the model over a sample set.
pub fn evaluate_rmse(model: &Model, samples: &[TemporalSample]) -> Result<RmseReport> {
    if samples.is_empty() {
        return Err(CoreError::invalid("RMSE over zero samples is undefined"));
    }
    let preds: Vec<DenseMatrix> = samples
        .iter()
        .map(|s| model.predict_denormalized(&s.inputs))
        .collect::<Result<_>>()?;
    let pairs: Vec<(&DenseMatrix, &DenseMatrix)> =
        preds.iter().zip(samples.iter().map(|s| &s.targets)).collect();
    rmse_from_pairs(&pairs)
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

/// "mean ± sample std" with four decimals, the comparison-table format.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.4} ± {std:.4}")
}

/// Mean and sample standard deviation (n−1 denominator; 0 when n < 2).
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub test_rmse: Option<f64>,
    pub per_year: Option<[f64; TARGET_YEARS]>,
    pub best_epoch: Option<usize>,
    pub best_val_rmse: Option<f64>,
    /// Populated when this trial failed; such trials are excluded from the
    /// aggregate statistics.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub n_trials: usize,
    pub trials: Vec<TrialResult>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    /// True when fewer than two trials succeeded, so the sample standard
    /// deviation is reported as 0 by convention rather than computed.
    pub std_undefined: bool,
    pub per_year_mean: [f64; TARGET_YEARS],
    /// "mean ± std", four decimals.
    pub summary: String,
    /// Omitted in bit-exact mode so reports are byte-reproducible.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_secs: Option<f64>,
}

impl TrialReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| CoreError::invalid(format!("unserializable report: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| CoreError::Corrupt(format!("bad trial report: {e}")))
    }
}

/// The multi-trial protocol on prebuilt records: builds samples once, then
/// delegates to [`run_trials_on_samples`].
pub fn run_trials(
    records: &[LabeledImageRecord],
    mar: Option<&MarSampleSet>,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    n_trials: usize,
    bit_exact: bool,
) -> Result<TrialReport> {
    let samples = build_samples(
        records,
        mar,
        model_config.feature_mask,
        model_config.edge_mode,
        model_config.edge_cap,
    )?;
    run_trials_on_samples(&samples, model_config, train_config, n_trials, bit_exact)
}

/// The multi-trial protocol: trial k re-splits the samples with seed
/// `base+k`, initializes a fresh model with the same seed, trains, and
/// evaluates on the held-out test split. Failed trials are recorded and
/// excluded from the aggregate; if every trial fails, the first error is
/// returned.
pub fn run_trials_on_samples(
    samples: &[TemporalSample],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    n_trials: usize,
    bit_exact: bool,
) -> Result<TrialReport> {
    if n_trials == 0 {
        return Err(CoreError::invalid("n_trials must be ≥ 1"));
    }
    model_config.validate()?;
    train_config.validate()?;
    let started = Instant::now();

    let mut trials = Vec::with_capacity(n_trials);
    let mut first_error: Option<CoreError> = None;
    for k in 0..n_trials {
        let seed = train_config.seed + k as u64;
        let outcome = run_one_trial(samples, model_config, train_config, seed);
        match outcome {
            Ok((rmse, outcome)) => trials.push(TrialResult {
                trial: k,
                seed,
                test_rmse: Some(rmse.scalar),
                per_year: Some(rmse.per_year),
                best_epoch: outcome.best_epoch,
                best_val_rmse: outcome.best_val_rmse,
                error: None,
            }),
            Err(e) => {
                trials.push(TrialResult {
                    trial: k,
                    seed,
                    test_rmse: None,
                    per_year: None,
                    best_epoch: None,
                    best_val_rmse: None,
                    error: Some(e.to_string()),
                });
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }

    let ok_rmse: Vec<f64> = trials.iter().filter_map(|t| t.test_rmse).collect();
    if ok_rmse.is_empty() {
        return Err(first_error.expect("no successes implies at least one error"));
    }
    let (mean_rmse, std_rmse) = mean_and_sample_std(&ok_rmse);
    let mut per_year_mean = [0.0f64; TARGET_YEARS];
    for t in &trials {
        if let Some(py) = &t.per_year {
            for (acc, v) in per_year_mean.iter_mut().zip(py) {
                *acc += v / ok_rmse.len() as f64;
            }
        }
    }
    Ok(TrialReport {
        model: model_config.clone(),
        train: train_config.clone(),
        n_trials,
        trials,
        mean_rmse,
        std_rmse,
        std_undefined: ok_rmse.len() < 2,
        per_year_mean,
        summary: format_mean_std(mean_rmse, std_rmse),
        wall_time_secs: if bit_exact {
            None
        } else {
            Some(started.elapsed().as_secs_f64())
        },
    })
}

fn run_one_trial(
    samples: &[TemporalSample],
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    seed: u64,
) -> Result<(RmseReport, TrainOutcome)> {
    let (train_idx, val_idx, test_idx) = split_indices(samples.len(), seed)?;
    let gather = |idx: &[usize]| -> Vec<TemporalSample> {
        idx.iter().map(|&i| samples[i].clone()).collect()
    };
    let (train_set, val_set, test_set) = (gather(&train_idx), gather(&val_idx), gather(&test_idx));

    let mut model = Model::init(model_config.clone(), seed)?;
    let trial_config = TrainConfig { seed, ..train_config.clone() };
    let outcome = train(&mut model, &train_set, &val_set, &trial_config)?;
    let rmse = evaluate_rmse(&model, &test_set)?;
    Ok((rmse, outcome))
}

// ---------------------------------------------------------------------------
// History file
// ---------------------------------------------------------------------------

/// Per-epoch history as CSV. Floats print in shortest round-trip form, so
/// the bytes are a pure function of the values.
pub fn history_to_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,lr,train_mse,val_rmse\n");
    for rec in history {
        let val = rec.val_rmse.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", rec.epoch, rec.lr, rec.train_mse, val));
    }
    out
}

pub fn write_history_csv(path: impl AsRef<std::path::Path>, history: &[EpochRecord]) -> Result<()> {
    std::fs::write(path, history_to_csv(history))?;
    Ok(())
}
