//! GraphSAGE layer: x'_i = W₁·x_i + W₂·mean of sampled neighbors (+ bias).

use crate::error::{CoreError, Result};
use crate::layers::GraphLayer;
use crate::nn::{
    mean_aggregate, mean_aggregate_backward, DenseMatrix, Neighborhood, Parameter, RngState,
};

/// How many neighbors each node aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fanout {
    /// Every other node — deterministic, the default.
    All,
    /// Uniform sample without replacement of this size (≥ 1).
    K(usize),
}

/// Draws neighbor sets for SAGE aggregation. Owns its RNG so that sampling
/// is reproducible independently of everything else.
#[derive(Debug, Clone)]
pub struct NeighborSampler {
    fanout: Fanout,
    rng: RngState,
}

impl NeighborSampler {
    pub fn new(fanout: Fanout, rng: RngState) -> Result<Self> {
        if let Fanout::K(0) = fanout {
            return Err(CoreError::invalid("fanout must be at least 1"));
        }
        Ok(NeighborSampler { fanout, rng })
    }

    pub fn fanout(&self) -> Fanout {
        self.fanout
    }

    /// Neighborhoods for an n-node fully connected graph (self excluded).
    /// With `Fanout::K`, each node draws min(k, n−1) distinct others.
    pub fn draw(&mut self, n: usize) -> Result<Neighborhood> {
        if n < 2 {
            return Err(CoreError::InvalidGraph(format!(
                "{n}-node graph leaves nodes without neighbors"
            )));
        }
        match self.fanout {
            Fanout::All => Ok(Neighborhood::AllExceptSelf),
            Fanout::K(k) => {
                let k = k.min(n - 1);
                let mut lists = Vec::with_capacity(n);
                for i in 0..n {
                    // Sample from 0..n−1 and shift to skip index i.
                    let list: Vec<usize> = self
                        .rng
                        .sample_indices(n - 1, k)
                        .into_iter()
                        .map(|j| if j >= i { j + 1 } else { j })
                        .collect();
                    lists.push(list);
                }
                Ok(Neighborhood::Lists(lists))
            }
        }
    }
}

/// Root and neighbor weight matrices, both F_in×F_out.
#[derive(Debug, Clone)]
pub struct SageLayerParams {
    pub w1: Parameter,
    pub w2: Parameter,
    pub bias: Option<Parameter>,
}

/// Per-call graph view for SAGE: who the neighbors are and whether their
/// mean is weighted by haversine edge weights.
#[derive(Debug, Clone, Copy)]
pub struct SageCtx<'a> {
    pub neighborhood: &'a Neighborhood,
    /// `Some(w)` switches the aggregation to a w_ij-weighted mean.
    pub edge_weights: Option<&'a DenseMatrix>,
}

#[derive(Debug)]
pub struct SageCache {
    x: DenseMatrix,
    agg: DenseMatrix,
}

impl SageLayerParams {
    pub fn in_dim(&self) -> usize {
        self.w1.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w1.value.cols()
    }
}

impl GraphLayer for SageLayerParams {
    type Ctx<'a> = SageCtx<'a>;
    type Cache = SageCache;

    /// Weights uniform in ±1/√F_in, bias (when present) zero.
    fn init(f_in: usize, f_out: usize, bias: bool, rng: &mut RngState) -> Self {
        SageLayerParams {
            w1: Parameter::init_uniform(f_in, f_out, f_in, rng),
            w2: Parameter::init_uniform(f_in, f_out, f_in, rng),
            bias: bias.then(|| Parameter::zeros(1, f_out)),
        }
    }

    fn forward_cached(
        &self,
        x: &DenseMatrix,
        ctx: SageCtx<'_>,
    ) -> Result<(DenseMatrix, SageCache)> {
        if x.cols() != self.in_dim() {
            return Err(CoreError::shape(format!(
                "sage: {} input columns vs {} weight rows",
                x.cols(),
                self.in_dim()
            )));
        }
        let agg = mean_aggregate(x, ctx.neighborhood, ctx.edge_weights)?;
        let mut y = x.matmul(&self.w1.value)?;
        agg.add_matmul_into(&self.w2.value, &mut y)?;
        if let Some(b) = &self.bias {
            for r in 0..y.rows() {
                let row = y.row_mut(r);
                for (v, &bv) in row.iter_mut().zip(b.value.row(0)) {
                    *v += bv;
                }
            }
        }
        Ok((
            y,
            SageCache {
                x: x.clone(),
                agg,
            },
        ))
    }

    fn backward(
        &mut self,
        cache: &SageCache,
        ctx: SageCtx<'_>,
        grad_out: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        // y = x·W1 + agg·W2 + b
        cache.x.add_matmul_tn_into(grad_out, &mut self.w1.grad)?;
        cache.agg.add_matmul_tn_into(grad_out, &mut self.w2.grad)?;
        if let Some(b) = &mut self.bias {
            b.grad.add_assign(&grad_out.col_sums())?;
        }
        let mut grad_x = DenseMatrix::zeros(cache.x.rows(), self.in_dim());
        grad_out.add_matmul_nt_into(&self.w1.value, &mut grad_x)?;
        let mut grad_agg = DenseMatrix::zeros(cache.agg.rows(), self.in_dim());
        grad_out.add_matmul_nt_into(&self.w2.value, &mut grad_agg)?;
        let through_agg =
            mean_aggregate_backward(&grad_agg, ctx.neighborhood, ctx.edge_weights)?;
        grad_x.add_assign(&through_agg)?;
        Ok(grad_x)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f(&format!("{prefix}.w1"), &mut self.w1);
        f(&format!("{prefix}.w2"), &mut self.w2);
        if let Some(b) = &mut self.bias {
            f(&format!("{prefix}.bias"), b);
        }
    }

    fn in_dim(&self) -> usize {
        SageLayerParams::in_dim(self)
    }

    fn out_dim(&self) -> usize {
        SageLayerParams::out_dim(self)
    }
}

/// Free-function form of the forward pass.
pub fn sage_forward(
    params: &SageLayerParams,
    x: &DenseMatrix,
    ctx: SageCtx<'_>,
) -> Result<DenseMatrix> {
    params.forward(x, ctx)
}
