//! LSTM cells whose weight multiplications are graph layers.
//!
//! Gate equations (no peepholes):
//!   i = σ(Lxi(x) + Lhi(h) + b_i)      f = σ(Lxf(x) + Lhf(h) + b_f)
//!   g = tanh(Lxc(x) + Lhc(h) + b_c)   o = σ(Lxo(x) + Lho(h) + b_o)
//!   c = f∘c_prev + i∘g                h = o∘tanh(c)
//! where each L is a [`GraphLayer`] — GraphSAGE for the SAGE-LSTM cell, a
//! normalized graph convolution for the GCN-LSTM cell.

use crate::error::{CoreError, Result};
use crate::layers::gcn::GcnLayerParams;
use crate::layers::sage::{SageCtx, SageLayerParams};
use crate::layers::GraphLayer;
use crate::nn::{
    dsigmoid_from_y, dtanh_from_y, sigmoid, DenseMatrix, ParamModel, Parameter, RngState,
};

const GATES: usize = 4;
const GATE_NAMES: [&str; GATES] = ["i", "f", "c", "o"];

/// One recurrent cell: four gates, each with an input-path and a hidden-path
/// graph layer plus a gate bias. Biases live on the cell (not inside the
/// layers) so each gate has exactly one.
#[derive(Debug, Clone)]
pub struct GraphLstmCell<L> {
    /// Input-path layers in gate order i, f, c, o; map F_in → H.
    pub x_layers: [L; GATES],
    /// Hidden-path layers in the same order; map H → H.
    pub h_layers: [L; GATES],
    /// Gate biases, 1×H each.
    pub biases: [Parameter; GATES],
}

pub type SageLstmCell = GraphLstmCell<SageLayerParams>;
pub type GcnLstmCell = GraphLstmCell<GcnLayerParams>;

impl<L: GraphLayer> GraphLstmCell<L> {
    pub fn init(f_in: usize, hidden: usize, rng: &mut RngState) -> Self {
        GraphLstmCell {
            x_layers: std::array::from_fn(|_| L::init(f_in, hidden, false, rng)),
            h_layers: std::array::from_fn(|_| L::init(hidden, hidden, false, rng)),
            biases: std::array::from_fn(|_| Parameter::zeros(1, hidden)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.x_layers[0].in_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.biases[0].value.cols()
    }

    fn check_step_shapes(
        &self,
        x: &DenseMatrix,
        h_prev: &DenseMatrix,
        c_prev: &DenseMatrix,
    ) -> Result<()> {
        let n = x.rows();
        let h = self.hidden_dim();
        if x.cols() != self.input_dim() {
            return Err(CoreError::shape(format!(
                "lstm step: input has {} features, cell expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        if h_prev.shape() != (n, h) || c_prev.shape() != (n, h) {
            return Err(CoreError::shape(format!(
                "lstm step: state {}x{} / {}x{}, expected {n}x{h}",
                h_prev.rows(),
                h_prev.cols(),
                c_prev.rows(),
                c_prev.cols()
            )));
        }
        Ok(())
    }

    /// One step without caches (inference).
    pub fn step(
        &self,
        x: &DenseMatrix,
        h_prev: &DenseMatrix,
        c_prev: &DenseMatrix,
        ctx: L::Ctx<'_>,
    ) -> Result<(DenseMatrix, DenseMatrix)> {
        let (h, c, _) = self.step_cached(x, h_prev, c_prev, ctx)?;
        Ok((h, c))
    }

    /// One step, retaining everything backward needs.
    pub fn step_cached(
        &self,
        x: &DenseMatrix,
        h_prev: &DenseMatrix,
        c_prev: &DenseMatrix,
        ctx: L::Ctx<'_>,
    ) -> Result<(DenseMatrix, DenseMatrix, LstmStepCache<L>)> {
        self.check_step_shapes(x, h_prev, c_prev)?;
        let mut gates: Vec<DenseMatrix> = Vec::with_capacity(GATES);
        let mut x_caches: Vec<L::Cache> = Vec::with_capacity(GATES);
        let mut h_caches: Vec<L::Cache> = Vec::with_capacity(GATES);
        for k in 0..GATES {
            let (xa, xc) = self.x_layers[k].forward_cached(x, ctx)?;
            let (ha, hc) = self.h_layers[k].forward_cached(h_prev, ctx)?;
            let mut pre = xa;
            pre.add_assign(&ha)?;
            for r in 0..pre.rows() {
                let row = pre.row_mut(r);
                for (v, &b) in row.iter_mut().zip(self.biases[k].value.row(0)) {
                    *v += b;
                }
            }
            let gate = if k == 2 {
                pre.map(f64::tanh)
            } else {
                pre.map(sigmoid)
            };
            gates.push(gate);
            x_caches.push(xc);
            h_caches.push(hc);
        }
        let [i, f, g, o] = [&gates[0], &gates[1], &gates[2], &gates[3]];
        let mut c = f.hadamard(c_prev)?;
        c.add_assign(&i.hadamard(g)?)?;
        let tanh_c = c.map(f64::tanh);
        let h = o.hadamard(&tanh_c)?;
        let cache = LstmStepCache {
            x_caches: x_caches.try_into().map_err(|_| CoreError::shape("gate count"))?,
            h_caches: h_caches.try_into().map_err(|_| CoreError::shape("gate count"))?,
            i: gates.remove(0),
            f: gates.remove(0),
            g: gates.remove(0),
            o: gates.remove(0),
            c_prev: c_prev.clone(),
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// Reverse of [`Self::step_cached`]. Takes the cotangents of h_t and c_t,
    /// accumulates parameter gradients, and returns the cotangents of
    /// (x, h_prev, c_prev).
    pub fn step_backward(
        &mut self,
        cache: &LstmStepCache<L>,
        ctx: L::Ctx<'_>,
        grad_h: &DenseMatrix,
        grad_c: &DenseMatrix,
    ) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
        let LstmStepCache {
            x_caches,
            h_caches,
            i,
            f,
            g,
            o,
            c_prev,
            tanh_c,
        } = cache;

        // h = o∘tanh(c); c = f∘c_prev + i∘g.
        let grad_o = grad_h.hadamard(tanh_c)?;
        let mut grad_ct = grad_c.clone();
        {
            // + grad_h ∘ o ∘ (1 − tanh²c)
            let mut through_h = grad_h.hadamard(o)?;
            for (v, &t) in through_h.data_mut().iter_mut().zip(tanh_c.data()) {
                *v *= dtanh_from_y(t);
            }
            grad_ct.add_assign(&through_h)?;
        }
        let grad_f = grad_ct.hadamard(c_prev)?;
        let grad_i = grad_ct.hadamard(g)?;
        let grad_g = grad_ct.hadamard(i)?;
        let grad_c_prev = grad_ct.hadamard(f)?;

        // Through the gate nonlinearities to pre-activation space.
        let mut pre_grads = [grad_i, grad_f, grad_g, grad_o];
        for (k, pre) in pre_grads.iter_mut().enumerate() {
            let gate = match k {
                0 => i,
                1 => f,
                2 => g,
                _ => o,
            };
            for (v, &y) in pre.data_mut().iter_mut().zip(gate.data()) {
                *v *= if k == 2 { dtanh_from_y(y) } else { dsigmoid_from_y(y) };
            }
        }

        let n = grad_h.rows();
        let mut grad_x = DenseMatrix::zeros(n, self.input_dim());
        let mut grad_h_prev = DenseMatrix::zeros(n, self.hidden_dim());
        for k in 0..GATES {
            self.biases[k].grad.add_assign(&pre_grads[k].col_sums())?;
            grad_x.add_assign(&self.x_layers[k].backward(&x_caches[k], ctx, &pre_grads[k])?)?;
            grad_h_prev
                .add_assign(&self.h_layers[k].backward(&h_caches[k], ctx, &pre_grads[k])?)?;
        }
        Ok((grad_x, grad_h_prev, grad_c_prev))
    }
}

impl<L: GraphLayer> ParamModel for GraphLstmCell<L> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        for k in 0..GATES {
            self.x_layers[k].visit_params(&format!("x{}", GATE_NAMES[k]), f);
        }
        for k in 0..GATES {
            self.h_layers[k].visit_params(&format!("h{}", GATE_NAMES[k]), f);
        }
        for k in 0..GATES {
            f(&format!("b_{}", GATE_NAMES[k]), &mut self.biases[k]);
        }
    }
}

/// Backward state for one step.
pub struct LstmStepCache<L: GraphLayer> {
    x_caches: [L::Cache; GATES],
    h_caches: [L::Cache; GATES],
    i: DenseMatrix,
    f: DenseMatrix,
    g: DenseMatrix,
    o: DenseMatrix,
    c_prev: DenseMatrix,
    tanh_c: DenseMatrix,
}

/// Caches for a whole unrolled sequence, oldest step first.
pub struct UnrollCache<L: GraphLayer> {
    steps: Vec<LstmStepCache<L>>,
}

impl<L: GraphLayer> UnrollCache<L> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Run the cell over a chronological sequence (oldest first) from zero
/// initial state; returns the final hidden state.
///
/// `steps` pairs each step's node features with its graph view; the views
/// may differ per step (resampled neighborhoods), the node count may not.
pub fn unroll<'a, L: GraphLayer>(
    cell: &GraphLstmCell<L>,
    steps: &[(&DenseMatrix, L::Ctx<'a>)],
) -> Result<DenseMatrix> {
    Ok(unroll_cached(cell, steps)?.0)
}

pub fn unroll_cached<'a, L: GraphLayer>(
    cell: &GraphLstmCell<L>,
    steps: &[(&DenseMatrix, L::Ctx<'a>)],
) -> Result<(DenseMatrix, UnrollCache<L>)> {
    let first = steps
        .first()
        .ok_or_else(|| CoreError::invalid("unroll over an empty sequence"))?;
    let n = first.0.rows();
    let mut h = DenseMatrix::zeros(n, cell.hidden_dim());
    let mut c = DenseMatrix::zeros(n, cell.hidden_dim());
    let mut caches = Vec::with_capacity(steps.len());
    for (x, ctx) in steps {
        if x.rows() != n {
            return Err(CoreError::shape(format!(
                "unroll: step has {} nodes, sequence started with {n}",
                x.rows()
            )));
        }
        let (h_next, c_next, cache) = cell.step_cached(x, &h, &c, *ctx)?;
        h = h_next;
        c = c_next;
        caches.push(cache);
    }
    Ok((h, UnrollCache { steps: caches }))
}

/// Backpropagate through an unrolled sequence given ∂loss/∂h_T. Parameter
/// gradients accumulate into the cell; the per-step input cotangents are
/// returned oldest-first (callers training on data inputs usually drop them).
pub fn unroll_backward<'a, L: GraphLayer>(
    cell: &mut GraphLstmCell<L>,
    cache: &UnrollCache<L>,
    steps: &[(&DenseMatrix, L::Ctx<'a>)],
    grad_h_final: &DenseMatrix,
) -> Result<Vec<DenseMatrix>> {
    if cache.steps.len() != steps.len() {
        return Err(CoreError::invalid(format!(
            "unroll_backward: {} cached steps vs {} inputs",
            cache.steps.len(),
            steps.len()
        )));
    }
    let n = grad_h_final.rows();
    let mut grad_h = grad_h_final.clone();
    let mut grad_c = DenseMatrix::zeros(n, cell.hidden_dim());
    let mut grad_xs = Vec::with_capacity(steps.len());
    for (step_cache, (_, ctx)) in cache.steps.iter().zip(steps).rev() {
        let (gx, gh, gc) = cell.step_backward(step_cache, *ctx, &grad_h, &grad_c)?;
        grad_h = gh;
        grad_c = gc;
        grad_xs.push(gx);
    }
    grad_xs.reverse();
    Ok(grad_xs)
}

/// Convenience single-step entry point for the GraphSAGE variant.
pub fn sage_lstm_step(
    cell: &SageLstmCell,
    x: &DenseMatrix,
    h_prev: &DenseMatrix,
    c_prev: &DenseMatrix,
    ctx: SageCtx<'_>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    cell.step(x, h_prev, c_prev, ctx)
}

/// Convenience single-step entry point for the GCN variant; `prop` is the
/// normalized adjacency from [`crate::layers::gcn::normalized_adjacency`].
pub fn gcn_lstm_step(
    cell: &GcnLstmCell,
    x: &DenseMatrix,
    h_prev: &DenseMatrix,
    c_prev: &DenseMatrix,
    prop: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    cell.step(x, h_prev, c_prev, prop)
}
