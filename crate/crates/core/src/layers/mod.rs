//! Graph layers and their LSTM hybrids.
//!
//! Both layer families implement [`GraphLayer`], which is what lets one
//! generic LSTM cell body serve the GraphSAGE and GCN variants. A layer's
//! `Ctx` carries the per-call graph view (neighborhoods, edge weights, or a
//! precomputed propagation matrix); forward returns a cache holding exactly
//! what its backward needs.

pub mod gcn;
pub mod lstm;
pub mod sage;

use crate::error::Result;
use crate::nn::{DenseMatrix, Parameter, RngState};

/// A graph-aware affine layer with explicit reverse-mode rules.
pub trait GraphLayer {
    /// Borrowed graph view passed to forward and (identically) to backward.
    type Ctx<'a>: Copy;
    /// Whatever forward must retain for the backward pass.
    type Cache;

    fn init(f_in: usize, f_out: usize, bias: bool, rng: &mut RngState) -> Self;

    fn forward_cached(&self, x: &DenseMatrix, ctx: Self::Ctx<'_>)
        -> Result<(DenseMatrix, Self::Cache)>;

    fn forward(&self, x: &DenseMatrix, ctx: Self::Ctx<'_>) -> Result<DenseMatrix> {
        Ok(self.forward_cached(x, ctx)?.0)
    }

    /// Accumulates parameter gradients and returns the input cotangent.
    /// `ctx` must be the same view the forward saw.
    fn backward(
        &mut self,
        cache: &Self::Cache,
        ctx: Self::Ctx<'_>,
        grad_out: &DenseMatrix,
    ) -> Result<DenseMatrix>;

    /// Stable, named walk over this layer's parameters, names prefixed.
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter));

    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
}

pub use gcn::{gcn_forward, normalized_adjacency, GcnLayerParams};
pub use lstm::{
    gcn_lstm_step, sage_lstm_step, unroll, unroll_backward, unroll_cached, GcnLstmCell,
    GraphLstmCell, LstmStepCache, SageLstmCell, UnrollCache,
};
pub use sage::{sage_forward, Fanout, NeighborSampler, SageCtx, SageLayerParams};
