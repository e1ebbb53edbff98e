//! Graph convolution layer over the haversine adjacency.
//!
//! Output is Ŵ·X·W (+ bias) with Ŵ = D̂^(−1/2)·(A+I)·D̂^(−1/2): the
//! symmetric normalized adjacency with unit self-loops, A being the haversine
//! edge weights with their capped diagonal dropped and D̂ the row-sum degree
//! of A+I. The cap stays out of Ŵ because a 1e9 self-loop would drown every
//! real edge; self-contributions enter through the +I term instead.

use crate::error::{CoreError, Result};
use crate::geo::EdgeWeightMatrix;
use crate::layers::GraphLayer;
use crate::nn::{DenseMatrix, Parameter, RngState};

/// Ŵ for an edge weight matrix. Symmetric; rows and columns follow the
/// trace order of the input.
pub fn normalized_adjacency(weights: &EdgeWeightMatrix) -> DenseMatrix {
    let n = weights.n();
    let mut a = weights.matrix().clone();
    for i in 0..n {
        a.set(i, i, 1.0); // drop the capped diagonal, add the self-loop
    }
    let mut inv_sqrt_deg = vec![0.0; n];
    for i in 0..n {
        let deg: f64 = a.row(i).iter().sum();
        inv_sqrt_deg[i] = 1.0 / deg.sqrt();
    }
    for i in 0..n {
        let di = inv_sqrt_deg[i];
        let row = a.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v *= di * inv_sqrt_deg[j];
        }
    }
    a
}

/// Single weight matrix (plus optional bias) applied after propagation.
#[derive(Debug, Clone)]
pub struct GcnLayerParams {
    pub w: Parameter,
    pub bias: Option<Parameter>,
}

#[derive(Debug)]
pub struct GcnCache {
    /// Ŵ·x — propagation happens before the weight multiply.
    px: DenseMatrix,
}

impl GcnLayerParams {
    pub fn in_dim(&self) -> usize {
        self.w.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.value.cols()
    }
}

impl GraphLayer for GcnLayerParams {
    /// The precomputed propagation matrix Ŵ (see [`normalized_adjacency`]).
    type Ctx<'a> = &'a DenseMatrix;
    type Cache = GcnCache;

    fn init(f_in: usize, f_out: usize, bias: bool, rng: &mut RngState) -> Self {
        GcnLayerParams {
            w: Parameter::init_uniform(f_in, f_out, f_in, rng),
            bias: bias.then(|| Parameter::zeros(1, f_out)),
        }
    }

    fn forward_cached(
        &self,
        x: &DenseMatrix,
        prop: &DenseMatrix,
    ) -> Result<(DenseMatrix, GcnCache)> {
        if x.cols() != self.in_dim() {
            return Err(CoreError::shape(format!(
                "gcn: {} input columns vs {} weight rows",
                x.cols(),
                self.in_dim()
            )));
        }
        if prop.rows() != x.rows() || prop.cols() != x.rows() {
            return Err(CoreError::shape(format!(
                "gcn: propagation matrix {}x{} vs {} nodes",
                prop.rows(),
                prop.cols(),
                x.rows()
            )));
        }
        let px = prop.matmul(x)?;
        let mut y = px.matmul(&self.w.value)?;
        if let Some(b) = &self.bias {
            for r in 0..y.rows() {
                let row = y.row_mut(r);
                for (v, &bv) in row.iter_mut().zip(b.value.row(0)) {
                    *v += bv;
                }
            }
        }
        Ok((y, GcnCache { px }))
    }

    fn backward(
        &mut self,
        cache: &GcnCache,
        prop: &DenseMatrix,
        grad_out: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        // y = (Ŵ·x)·W + b, Ŵ symmetric ⇒ dx = Ŵ·(g·Wᵀ).
        cache.px.add_matmul_tn_into(grad_out, &mut self.w.grad)?;
        if let Some(b) = &mut self.bias {
            b.grad.add_assign(&grad_out.col_sums())?;
        }
        let mut gpx = DenseMatrix::zeros(grad_out.rows(), self.in_dim());
        grad_out.add_matmul_nt_into(&self.w.value, &mut gpx)?;
        prop.matmul(&gpx)
    }

    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f(&format!("{prefix}.w"), &mut self.w);
        if let Some(b) = &mut self.bias {
            f(&format!("{prefix}.bias"), b);
        }
    }

    fn in_dim(&self) -> usize {
        GcnLayerParams::in_dim(self)
    }

    fn out_dim(&self) -> usize {
        GcnLayerParams::out_dim(self)
    }
}

/// Free-function form of the forward pass.
pub fn gcn_forward(
    params: &GcnLayerParams,
    x: &DenseMatrix,
    prop: &DenseMatrix,
) -> Result<DenseMatrix> {
    params.forward(x, prop)
}
