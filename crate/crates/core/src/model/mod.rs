//! The recurrent graph model: a graph-convolutional LSTM over the five
//! input-year graphs, followed by a three-stage dense head that regresses
//! fifteen per-node annual thicknesses.
//!
//! Forward pipeline: z-score the node features, unroll the cell oldest year
//! first, then `hardswish → linear → hardswish → dropout → linear →
//! hardswish → dropout → linear`. The final layer has no activation or
//! dropout; outputs stay in normalized target space until explicitly
//! denormalized.

pub mod checkpoint;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{TemporalSample, TARGET_YEARS};
use crate::error::{CoreError, Result};
use crate::geo::{EdgeWeightMatrix, EdgeWeightMode, FeatureMask, LayerGraph, NUM_FEATURES};
use crate::layers::{
    normalized_adjacency, unroll, unroll_backward, unroll_cached, Fanout, GcnLstmCell,
    NeighborSampler, SageCtx, SageLstmCell, UnrollCache,
};
use crate::nn::{
    dropout_backward, dropout_forward, hardswish_backward, hardswish_mat, linear_backward,
    linear_forward, stream, DenseMatrix, DropoutMask, Neighborhood, ParamModel, Parameter,
    RngState,
};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};

/// Which graph operator feeds the LSTM gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    #[default]
    Sage,
    Gcn,
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Sage => "sage",
            CellKind::Gcn => "gcn",
        })
    }
}

impl FromStr for CellKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sage" => Ok(CellKind::Sage),
            "gcn" => Ok(CellKind::Gcn),
            other => Err(CoreError::invalid(format!(
                "unknown cell kind {other:?}; expected \"sage\" or \"gcn\""
            ))),
        }
    }
}

fn default_in_channels() -> usize {
    NUM_FEATURES
}
fn default_hidden() -> usize {
    256
}
fn default_head() -> [usize; 3] {
    [128, 64, TARGET_YEARS]
}
fn default_dropout() -> f64 {
    0.2
}
fn default_edge_cap() -> f64 {
    crate::geo::DEFAULT_WEIGHT_CAP
}

/// Architecture and graph-construction settings. Everything needed to
/// rebuild an identical model (given a seed) and to check that data fed to
/// it was prepared the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub cell_kind: CellKind,
    /// Node feature width; fixed by the feature table.
    pub in_channels: usize,
    /// LSTM hidden width.
    pub hidden: usize,
    /// Dense head widths; the last is the number of target years.
    pub head: [usize; 3],
    pub dropout_p: f64,
    pub feature_mask: FeatureMask,
    pub edge_mode: EdgeWeightMode,
    pub edge_cap: f64,
    /// Neighbors sampled per node during training; `None` means all.
    pub fanout: Option<usize>,
    /// Weight the neighbor mean by edge weights instead of counts.
    pub weighted_mean: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cell_kind: CellKind::Sage,
            in_channels: default_in_channels(),
            hidden: default_hidden(),
            head: default_head(),
            dropout_p: default_dropout(),
            feature_mask: FeatureMask::base_only(),
            edge_mode: EdgeWeightMode::AsWritten,
            edge_cap: default_edge_cap(),
            fanout: None,
            weighted_mean: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels != NUM_FEATURES {
            return Err(CoreError::invalid(format!(
                "in_channels is fixed at {NUM_FEATURES} by the feature table, got {}",
                self.in_channels
            )));
        }
        if self.hidden == 0 {
            return Err(CoreError::invalid("hidden width must be ≥ 1"));
        }
        if self.head[2] != TARGET_YEARS {
            return Err(CoreError::invalid(format!(
                "final head width must be {TARGET_YEARS}, got {}",
                self.head[2]
            )));
        }
        if self.head.iter().any(|&w| w == 0) {
            return Err(CoreError::invalid("head widths must be ≥ 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(CoreError::invalid(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !self.edge_cap.is_finite() || self.edge_cap <= 0.0 {
            return Err(CoreError::invalid(format!(
                "edge_cap must be positive and finite, got {}",
                self.edge_cap
            )));
        }
        if self.fanout == Some(0) {
            return Err(CoreError::invalid("fanout of 0 samples no neighbors"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Normalization statistics
// ---------------------------------------------------------------------------

/// Per-column z-score statistics, computed on the training split only and
/// carried with the model ever after. Standard deviations are strictly
/// positive: constant columns get σ = 1 so they pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_mean: [f64; NUM_FEATURES],
    pub feature_std: [f64; NUM_FEATURES],
    pub target_mean: [f64; TARGET_YEARS],
    pub target_std: [f64; TARGET_YEARS],
}

/// Guard against zero or denormal σ; such columns carry no information.
const DEGENERATE_STD: f64 = 1e-12;

fn column_stats<const W: usize>(
    matrices: &mut dyn Iterator<Item = &DenseMatrix>,
) -> Result<([f64; W], [f64; W])> {
    let mut sum = [0.0f64; W];
    let mut count = 0usize;
    let mut mats: Vec<&DenseMatrix> = Vec::new();
    for m in matrices {
        if m.cols() != W {
            return Err(CoreError::shape(format!(
                "expected {W} columns, got {}",
                m.cols()
            )));
        }
        for r in 0..m.rows() {
            for (c, s) in sum.iter_mut().enumerate() {
                *s += m.get(r, c);
            }
        }
        count += m.rows();
        mats.push(m);
    }
    if count == 0 {
        return Err(CoreError::invalid("no rows to compute statistics from"));
    }
    let mut mean = [0.0f64; W];
    for (m, s) in mean.iter_mut().zip(&sum) {
        *m = s / count as f64;
    }
    let mut sq = [0.0f64; W];
    for m in &mats {
        for r in 0..m.rows() {
            for (c, s) in sq.iter_mut().enumerate() {
                let d = m.get(r, c) - mean[c];
                *s += d * d;
            }
        }
    }
    let mut std = [0.0f64; W];
    for (out, s) in std.iter_mut().zip(&sq) {
        let v = (s / count as f64).sqrt();
        *out = if v <= DEGENERATE_STD { 1.0 } else { v };
    }
    Ok((mean, std))
}

impl NormStats {
    /// Pass-through statistics: zero mean, unit variance.
    pub fn identity() -> Self {
        NormStats {
            feature_mean: [0.0; NUM_FEATURES],
            feature_std: [1.0; NUM_FEATURES],
            target_mean: [0.0; TARGET_YEARS],
            target_std: [1.0; TARGET_YEARS],
        }
    }

    /// Population mean and standard deviation per feature column (pooled
    /// over every node of every input graph) and per target-year column.
    pub fn compute(samples: &[TemporalSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(CoreError::invalid(
                "cannot compute normalization statistics from zero samples",
            ));
        }
        let (feature_mean, feature_std) = column_stats::<NUM_FEATURES>(
            &mut samples
                .iter()
                .flat_map(|s| s.inputs.iter().map(|g| &g.node_features)),
        )?;
        let (target_mean, target_std) =
            column_stats::<TARGET_YEARS>(&mut samples.iter().map(|s| &s.targets))?;
        Ok(NormStats { feature_mean, feature_std, target_mean, target_std })
    }

    fn check(&self) -> Result<()> {
        let all = self
            .feature_mean
            .iter()
            .chain(&self.feature_std)
            .chain(&self.target_mean)
            .chain(&self.target_std);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("non-finite normalization statistics"));
        }
        if self.feature_std.iter().chain(&self.target_std).any(|&s| s <= 0.0) {
            return Err(CoreError::invalid("normalization σ must be positive"));
        }
        Ok(())
    }

    pub fn normalize_features(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != NUM_FEATURES {
            return Err(CoreError::shape(format!(
                "features need {NUM_FEATURES} columns, got {}",
                x.cols()
            )));
        }
        Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |r, c| {
            (x.get(r, c) - self.feature_mean[c]) / self.feature_std[c]
        }))
    }

    pub fn normalize_targets(&self, t: &DenseMatrix) -> Result<DenseMatrix> {
        if t.cols() != TARGET_YEARS {
            return Err(CoreError::shape(format!(
                "targets need {TARGET_YEARS} columns, got {}",
                t.cols()
            )));
        }
        Ok(DenseMatrix::from_fn(t.rows(), t.cols(), |r, c| {
            (t.get(r, c) - self.target_mean[c]) / self.target_std[c]
        }))
    }

    /// Exact inverse of [`normalize_targets`]; no clamping.
    pub fn denormalize_targets(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        if y.cols() != TARGET_YEARS {
            return Err(CoreError::shape(format!(
                "outputs need {TARGET_YEARS} columns, got {}",
                y.cols()
            )));
        }
        Ok(DenseMatrix::from_fn(y.rows(), y.cols(), |r, c| {
            y.get(r, c) * self.target_std[c] + self.target_mean[c]
        }))
    }
}

// ---------------------------------------------------------------------------
// Dense head
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct LinearLayer {
    w: Parameter,
    b: Parameter,
}

impl LinearLayer {
    fn init(f_in: usize, f_out: usize, rng: &mut RngState) -> Self {
        LinearLayer {
            w: Parameter::init_uniform(f_in, f_out, f_in, rng),
            b: Parameter::zeros(1, f_out),
        }
    }

    fn forward(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        linear_forward(x, &self.w.value, &self.b.value)
    }

    fn backward(&mut self, x: &DenseMatrix, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
        linear_backward(x, &self.w.value, grad_out, &mut self.w.grad, &mut self.b.grad)
    }
}

/// Everything the head backward pass needs: the input of each linear and
/// each activation, plus the dropout masks actually drawn.
struct HeadCache {
    hsw_in: [DenseMatrix; 3],
    lin_in: [DenseMatrix; 3],
    masks: [Option<DropoutMask>; 2],
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CellVariant {
    Sage(SageLstmCell),
    Gcn(GcnLstmCell),
}

/// Per-forward state kept for the backward pass. Owns everything it refers
/// to (normalized inputs, sampled neighborhoods, propagation matrices), so
/// the caller's graphs may go away in between.
pub struct ModelCache {
    norm_x: Vec<DenseMatrix>,
    neighborhoods: Vec<Neighborhood>,
    edge_mats: Vec<Arc<EdgeWeightMatrix>>,
    props: Vec<DenseMatrix>,
    prop_of_step: Vec<usize>,
    unroll: UnrollVariant,
    head: HeadCache,
}

enum UnrollVariant {
    Sage(UnrollCache<crate::layers::SageLayerParams>),
    Gcn(UnrollCache<crate::layers::GcnLayerParams>),
}

#[derive(Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub norm: Option<NormStats>,
    cell: CellVariant,
    head: [LinearLayer; 3],
}

impl Model {
    /// Fresh parameters from the init stream of `seed`. The draw order is
    /// fixed (cell layers gate by gate, then head layers front to back), so
    /// one seed always yields bit-identical parameters.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = RngState::with_stream(seed, stream::INIT);
        let cell = match config.cell_kind {
            CellKind::Sage => {
                CellVariant::Sage(SageLstmCell::init(config.in_channels, config.hidden, &mut rng))
            }
            CellKind::Gcn => {
                CellVariant::Gcn(GcnLstmCell::init(config.in_channels, config.hidden, &mut rng))
            }
        };
        let dims = [config.hidden, config.head[0], config.head[1], config.head[2]];
        let mut layers = Vec::with_capacity(3);
        for k in 0..3 {
            layers.push(LinearLayer::init(dims[k], dims[k + 1], &mut rng));
        }
        let head: [LinearLayer; 3] = layers
            .try_into()
            .map_err(|_| CoreError::Contract("head layer count".into()))?;
        Ok(Model { config, norm: None, cell, head })
    }

    pub fn set_norm(&mut self, norm: NormStats) -> Result<()> {
        norm.check()?;
        self.norm = Some(norm);
        Ok(())
    }

    /// Validate inputs, z-score them, and return them oldest year first
    /// alongside the graph order used.
    fn prepare_inputs(&self, inputs: &[LayerGraph]) -> Result<(Vec<usize>, Vec<DenseMatrix>)> {
        if inputs.is_empty() {
            return Err(CoreError::invalid("model forward needs at least one graph"));
        }
        let norm = self.norm.as_ref().ok_or_else(|| {
            CoreError::Contract(
                "normalization statistics not set; call set_norm before forward".into(),
            )
        })?;
        let n = inputs[0].n_nodes();
        for g in inputs {
            if g.feature_mask != self.config.feature_mask {
                return Err(CoreError::Contract(format!(
                    "graph feature mask {:?} does not match model mask {:?}",
                    g.feature_mask.enabled_names(),
                    self.config.feature_mask.enabled_names()
                )));
            }
            if g.n_nodes() != n {
                return Err(CoreError::shape("input graphs disagree on node count"));
            }
        }
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.sort_by_key(|&i| inputs[i].year);
        let mut norm_x = Vec::with_capacity(order.len());
        for &i in &order {
            norm_x.push(norm.normalize_features(&inputs[i].node_features)?);
        }
        Ok((order, norm_x))
    }

    /// Neighborhood per unroll step. Sampling only happens in training and
    /// only when a fanout is configured; inference always aggregates the
    /// full neighborhood, which keeps it deterministic.
    fn draw_neighborhoods(
        &self,
        inputs: &[LayerGraph],
        order: &[usize],
        training: bool,
        rng: &mut RngState,
    ) -> Result<Vec<Neighborhood>> {
        let n = inputs[order[0]].n_nodes();
        match (training, self.config.fanout) {
            (true, Some(k)) => {
                let mut sampler = NeighborSampler::new(
                    Fanout::K(k),
                    RngState::with_stream(rng.next_u64(), stream::SAMPLER),
                )?;
                order.iter().map(|_| sampler.draw(n)).collect()
            }
            _ => Ok(vec![Neighborhood::AllExceptSelf; order.len()]),
        }
    }

    fn gcn_props(
        &self,
        inputs: &[LayerGraph],
        order: &[usize],
    ) -> (Vec<DenseMatrix>, Vec<usize>) {
        let mut seen: Vec<(*const EdgeWeightMatrix, usize)> = Vec::new();
        let mut props = Vec::new();
        let mut prop_of_step = Vec::with_capacity(order.len());
        for &i in order {
            let ptr = Arc::as_ptr(&inputs[i].edge_weights);
            let idx = match seen.iter().find(|(p, _)| *p == ptr) {
                Some(&(_, idx)) => idx,
                None => {
                    props.push(normalized_adjacency(&inputs[i].edge_weights));
                    seen.push((ptr, props.len() - 1));
                    props.len() - 1
                }
            };
            prop_of_step.push(idx);
        }
        (props, prop_of_step)
    }

    /// Inference-path forward: no caches kept. With `training` set, dropout
    /// masks are drawn from `rng` and neighbor sampling (if configured)
    /// happens; otherwise `rng` is never consulted.
    pub fn forward(
        &self,
        inputs: &[LayerGraph],
        training: bool,
        rng: &mut RngState,
    ) -> Result<DenseMatrix> {
        let (order, norm_x) = self.prepare_inputs(inputs)?;
        let h_final = match &self.cell {
            CellVariant::Sage(cell) => {
                let hoods = self.draw_neighborhoods(inputs, &order, training, rng)?;
                let mats = self.sage_edge_mats(inputs, &order);
                let steps = sage_steps(&norm_x, &hoods, &mats);
                unroll(cell, &steps)?
            }
            CellVariant::Gcn(cell) => {
                let (props, prop_of_step) = self.gcn_props(inputs, &order);
                let steps = gcn_steps(&norm_x, &props, &prop_of_step);
                unroll(cell, &steps)?
            }
        };
        let mut a = hardswish_mat(&h_final);
        for (k, lin) in self.head.iter().enumerate() {
            let z = lin.forward(&a)?;
            if k == 2 {
                return Ok(z);
            }
            a = hardswish_mat(&z);
            (a, _) = dropout_forward(&a, self.config.dropout_p, training, rng)?;
        }
        unreachable!("loop returns at the last layer")
    }

    fn sage_edge_mats(
        &self,
        inputs: &[LayerGraph],
        order: &[usize],
    ) -> Vec<Arc<EdgeWeightMatrix>> {
        if !self.config.weighted_mean {
            return Vec::new();
        }
        order.iter().map(|&i| inputs[i].edge_weights.clone()).collect()
    }

    /// Training-path forward: returns the output and a cache that
    /// [`Model::backward`] consumes.
    pub fn forward_cached(
        &self,
        inputs: &[LayerGraph],
        training: bool,
        rng: &mut RngState,
    ) -> Result<(DenseMatrix, ModelCache)> {
        let (order, norm_x) = self.prepare_inputs(inputs)?;
        let (unroll_var, h_final, neighborhoods, edge_mats, props, prop_of_step) =
            match &self.cell {
                CellVariant::Sage(cell) => {
                    let hoods = self.draw_neighborhoods(inputs, &order, training, rng)?;
                    let mats = self.sage_edge_mats(inputs, &order);
                    let steps = sage_steps(&norm_x, &hoods, &mats);
                    let (h, cache) = unroll_cached(cell, &steps)?;
                    (UnrollVariant::Sage(cache), h, hoods, mats, Vec::new(), Vec::new())
                }
                CellVariant::Gcn(cell) => {
                    let (props, prop_of_step) = self.gcn_props(inputs, &order);
                    let steps = gcn_steps(&norm_x, &props, &prop_of_step);
                    let (h, cache) = unroll_cached(cell, &steps)?;
                    (UnrollVariant::Gcn(cache), h, Vec::new(), Vec::new(), props, prop_of_step)
                }
            };

        let mut hsw_in: Vec<DenseMatrix> = Vec::with_capacity(3);
        let mut lin_in: Vec<DenseMatrix> = Vec::with_capacity(3);
        let mut masks: Vec<Option<DropoutMask>> = Vec::with_capacity(2);
        hsw_in.push(h_final);
        let mut a = hardswish_mat(&hsw_in[0]);
        let mut out = None;
        for (k, lin) in self.head.iter().enumerate() {
            lin_in.push(a.clone());
            let z = lin.forward(&a)?;
            if k == 2 {
                out = Some(z);
                break;
            }
            hsw_in.push(z);
            a = hardswish_mat(hsw_in.last().expect("just pushed"));
            let (dropped, mask) = dropout_forward(&a, self.config.dropout_p, training, rng)?;
            a = dropped;
            masks.push(mask);
        }
        let cache = ModelCache {
            norm_x,
            neighborhoods,
            edge_mats,
            props,
            prop_of_step,
            unroll: unroll_var,
            head: HeadCache {
                hsw_in: hsw_in.try_into().map_err(|_| CoreError::Contract("head cache".into()))?,
                lin_in: lin_in.try_into().map_err(|_| CoreError::Contract("head cache".into()))?,
                masks: masks.try_into().map_err(|_| CoreError::Contract("head cache".into()))?,
            },
        };
        Ok((out.expect("three head layers"), cache))
    }

    /// Accumulate parameter gradients for `d loss / d output`. Call
    /// `zero_grads` first unless accumulation is intended.
    pub fn backward(&mut self, cache: &ModelCache, grad_out: &DenseMatrix) -> Result<()> {
        let mut g = grad_out.clone();
        for k in (0..3).rev() {
            g = self.head[k].backward(&cache.head.lin_in[k], &g)?;
            if k > 0 {
                if let Some(mask) = &cache.head.masks[k - 1] {
                    g = dropout_backward(&g, mask)?;
                }
                g = hardswish_backward(&cache.head.hsw_in[k], &g)?;
            }
        }
        let grad_h_final = hardswish_backward(&cache.head.hsw_in[0], &g)?;

        match (&mut self.cell, &cache.unroll) {
            (CellVariant::Sage(cell), UnrollVariant::Sage(ucache)) => {
                let steps = sage_steps(&cache.norm_x, &cache.neighborhoods, &cache.edge_mats);
                unroll_backward(cell, ucache, &steps, &grad_h_final)?;
            }
            (CellVariant::Gcn(cell), UnrollVariant::Gcn(ucache)) => {
                let steps = gcn_steps(&cache.norm_x, &cache.props, &cache.prop_of_step);
                unroll_backward(cell, ucache, &steps, &grad_h_final)?;
            }
            _ => return Err(CoreError::Contract("cache does not match cell kind".into())),
        }
        Ok(())
    }

    /// Forward in evaluation mode, then map outputs back to pixel
    /// thicknesses. Negative predictions clamp to zero — a layer cannot
    /// have negative thickness.
    pub fn predict_denormalized(&self, inputs: &[LayerGraph]) -> Result<DenseMatrix> {
        let mut rng = RngState::with_stream(0, stream::DROPOUT);
        let y = self.forward(inputs, false, &mut rng)?;
        let norm = self.norm.as_ref().expect("forward checked norm");
        let mut out = norm.denormalize_targets(&y)?;
        for v in out.data_mut() {
            *v = v.max(0.0);
        }
        Ok(out)
    }
}

fn sage_steps<'a>(
    norm_x: &'a [DenseMatrix],
    hoods: &'a [Neighborhood],
    mats: &'a [Arc<EdgeWeightMatrix>],
) -> Vec<(&'a DenseMatrix, SageCtx<'a>)> {
    (0..norm_x.len())
        .map(|t| {
            (
                &norm_x[t],
                SageCtx {
                    neighborhood: &hoods[t],
                    edge_weights: mats.get(t).map(|m| m.matrix()),
                },
            )
        })
        .collect()
}

fn gcn_steps<'a>(
    norm_x: &'a [DenseMatrix],
    props: &'a [DenseMatrix],
    prop_of_step: &'a [usize],
) -> Vec<(&'a DenseMatrix, &'a DenseMatrix)> {
    (0..norm_x.len())
        .map(|t| (&norm_x[t], &props[prop_of_step[t]]))
        .collect()
}

impl ParamModel for Model {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        match &mut self.cell {
            CellVariant::Sage(cell) => {
                cell.visit_params(&mut |name, p| f(&format!("cell.{name}"), p))
            }
            CellVariant::Gcn(cell) => {
                cell.visit_params(&mut |name, p| f(&format!("cell.{name}"), p))
            }
        }
        for (k, lin) in self.head.iter_mut().enumerate() {
            f(&format!("head.{k}.w"), &mut lin.w);
            f(&format!("head.{k}.b"), &mut lin.b);
        }
    }
}

impl Model {
    /// Clone out every parameter value, in visit order.
    pub fn param_snapshot(&mut self) -> Vec<(String, DenseMatrix)> {
        let mut out = Vec::new();
        self.visit_params(&mut |name, p| out.push((name.to_string(), p.value.clone())));
        out
    }

    /// Restore a snapshot taken from an identically shaped model.
    pub fn load_param_snapshot(&mut self, snap: &[(String, DenseMatrix)]) -> Result<()> {
        let mut idx = 0usize;
        let mut err: Option<CoreError> = None;
        self.visit_params(&mut |name, p| {
            if err.is_some() {
                return;
            }
            match snap.get(idx) {
                Some((n, v)) if n == name && v.shape() == p.value.shape() => {
                    p.value = v.clone();
                }
                Some((n, v)) => {
                    err = Some(CoreError::Contract(format!(
                        "snapshot mismatch at {idx}: have {n} {:?}, model wants {name} {:?}",
                        v.shape(),
                        p.value.shape()
                    )));
                }
                None => err = Some(CoreError::Contract("snapshot too short".into())),
            }
            idx += 1;
        });
        if let Some(e) = err {
            return Err(e);
        }
        if idx != snap.len() {
            return Err(CoreError::Contract(format!(
                "snapshot has {} parameters, model visited {idx}",
                snap.len()
            )));
        }
        Ok(())
    }
}
