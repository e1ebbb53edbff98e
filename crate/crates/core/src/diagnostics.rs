//! Self-contained gradient diagnostics: every differentiable building block
//! checked against central finite differences on small toy graphs. The CLI
//! exposes this as a subcommand and the acceptance tests run it verbatim.

use std::sync::Arc;

use crate::dataset::TARGET_YEARS;
use crate::error::Result;
use crate::geo::{EdgeWeightMatrix, EdgeWeightMode, FeatureMask, LayerGraph, NUM_FEATURES};
use crate::layers::{
    normalized_adjacency, unroll_backward, unroll_cached, GcnLayerParams, GcnLstmCell,
    GraphLayer, SageCtx, SageLayerParams, SageLstmCell,
};
use crate::model::{CellKind, Model, ModelConfig, NormStats};
use crate::nn::{
    grad_check, hardswish_backward, hardswish_mat, linear_backward, linear_forward,
    mse_loss_and_grad, stream, DenseMatrix, GradCheckOptions, Neighborhood, ParamModel,
    Parameter, RngState,
};

/// One checked component.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub checked: usize,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tolerance
    }
}

const N_NODES: usize = 8;

fn toy_points(rng: &mut RngState) -> Vec<(f64, f64)> {
    (0..N_NODES)
        .map(|_| (70.0 + rng.uniform(-0.5, 0.5), -45.0 + rng.uniform(-0.5, 0.5)))
        .collect()
}

/// Wraps one graph layer so the generic checker can walk its parameters.
struct LayerToy<L: GraphLayer> {
    layer: L,
}

impl<L: GraphLayer> ParamModel for LayerToy<L> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.layer.visit_params("layer", f);
    }
}

fn check_sage_layer() -> Result<SuiteEntry> {
    let mut rng = RngState::new(101);
    let points = toy_points(&mut rng);
    let weights = EdgeWeightMatrix::from_points(&points, EdgeWeightMode::AsWritten, 1e9)?;
    let x = DenseMatrix::from_fn(N_NODES, 5, |_, _| rng.uniform(-1.0, 1.0));
    let t = DenseMatrix::from_fn(N_NODES, 4, |_, _| rng.uniform(-1.0, 1.0));
    let mut toy = LayerToy { layer: SageLayerParams::init(5, 4, true, &mut rng) };
    let hood = Neighborhood::AllExceptSelf;
    let report = grad_check(
        &mut toy,
        |m, with_grad| {
            let ctx = SageCtx { neighborhood: &hood, edge_weights: Some(weights.matrix()) };
            let (y, cache) = m.layer.forward_cached(&x, ctx)?;
            let (loss, grad) = mse_loss_and_grad(&y, &t)?;
            if with_grad {
                m.layer.backward(&cache, ctx, &grad)?;
            }
            Ok(loss)
        },
        11,
        &GradCheckOptions::default(),
    )?;
    Ok(SuiteEntry {
        name: "sage-layer",
        max_rel_err: report.max_rel_err,
        tolerance: 1e-6,
        checked: report.checked,
    })
}

fn check_gcn_layer() -> Result<SuiteEntry> {
    let mut rng = RngState::new(103);
    let points = toy_points(&mut rng);
    let prop =
        normalized_adjacency(&EdgeWeightMatrix::from_points(&points, EdgeWeightMode::Sqrt, 1e9)?);
    let x = DenseMatrix::from_fn(N_NODES, 5, |_, _| rng.uniform(-1.0, 1.0));
    let t = DenseMatrix::from_fn(N_NODES, 4, |_, _| rng.uniform(-1.0, 1.0));
    let mut toy = LayerToy { layer: GcnLayerParams::init(5, 4, true, &mut rng) };
    let report = grad_check(
        &mut toy,
        |m, with_grad| {
            let (y, cache) = m.layer.forward_cached(&x, &prop)?;
            let (loss, grad) = mse_loss_and_grad(&y, &t)?;
            if with_grad {
                m.layer.backward(&cache, &prop, &grad)?;
            }
            Ok(loss)
        },
        13,
        &GradCheckOptions::default(),
    )?;
    Ok(SuiteEntry {
        name: "gcn-layer",
        max_rel_err: report.max_rel_err,
        tolerance: 1e-6,
        checked: report.checked,
    })
}

/// A single recurrent step is an unroll of length one.
fn check_sage_lstm_step() -> Result<SuiteEntry> {
    let mut rng = RngState::new(107);
    let points = toy_points(&mut rng);
    let weights = EdgeWeightMatrix::from_points(&points, EdgeWeightMode::AsWritten, 1e9)?;
    let x = DenseMatrix::from_fn(N_NODES, 4, |_, _| rng.uniform(-1.0, 1.0));
    let t = DenseMatrix::from_fn(N_NODES, 3, |_, _| rng.uniform(-1.0, 1.0));
    let hood = Neighborhood::AllExceptSelf;

    struct Toy {
        cell: SageLstmCell,
    }
    impl ParamModel for Toy {
        fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
            self.cell.visit_params(f);
        }
    }
    let mut toy = Toy { cell: SageLstmCell::init(4, 3, &mut rng) };
    let report = grad_check(
        &mut toy,
        |m, with_grad| {
            let ctx = SageCtx { neighborhood: &hood, edge_weights: Some(weights.matrix()) };
            let steps = [(&x, ctx)];
            let (h, cache) = unroll_cached(&m.cell, &steps)?;
            let (loss, grad) = mse_loss_and_grad(&h, &t)?;
            if with_grad {
                unroll_backward(&mut m.cell, &cache, &steps, &grad)?;
            }
            Ok(loss)
        },
        17,
        &GradCheckOptions::default(),
    )?;
    Ok(SuiteEntry {
        name: "sage-lstm-step",
        max_rel_err: report.max_rel_err,
        tolerance: 1e-5,
        checked: report.checked,
    })
}

fn check_gcn_lstm_step() -> Result<SuiteEntry> {
    let mut rng = RngState::new(109);
    let points = toy_points(&mut rng);
    let prop =
        normalized_adjacency(&EdgeWeightMatrix::from_points(&points, EdgeWeightMode::Sqrt, 1e9)?);
    let x = DenseMatrix::from_fn(N_NODES, 4, |_, _| rng.uniform(-1.0, 1.0));
    let t = DenseMatrix::from_fn(N_NODES, 3, |_, _| rng.uniform(-1.0, 1.0));

    struct Toy {
        cell: GcnLstmCell,
    }
    impl ParamModel for Toy {
        fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
            self.cell.visit_params(f);
        }
    }
    let mut toy = Toy { cell: GcnLstmCell::init(4, 3, &mut rng) };
    let report = grad_check(
        &mut toy,
        |m, with_grad| {
            let steps = [(&x, &prop)];
            let (h, cache) = unroll_cached(&m.cell, &steps)?;
            let (loss, grad) = mse_loss_and_grad(&h, &t)?;
            if with_grad {
                unroll_backward(&mut m.cell, &cache, &steps, &grad)?;
            }
            Ok(loss)
        },
        19,
        &GradCheckOptions::default(),
    )?;
    Ok(SuiteEntry {
        name: "gcn-lstm-step",
        max_rel_err: report.max_rel_err,
        tolerance: 1e-5,
        checked: report.checked,
    })
}

/// The dense head in isolation: hardswish → linear, three times, no
/// dropout. Uses the same primitive ops the model head is built from.
fn check_head_mlp() -> Result<SuiteEntry> {
    let mut rng = RngState::new(113);
    let dims = [6usize, 5, 4, TARGET_YEARS];
    struct Toy {
        layers: Vec<(Parameter, Parameter)>,
        x: DenseMatrix,
        t: DenseMatrix,
    }
    impl ParamModel for Toy {
        fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
            for (k, (w, b)) in self.layers.iter_mut().enumerate() {
                f(&format!("{k}.w"), w);
                f(&format!("{k}.b"), b);
            }
        }
    }
    let layers = (0..3)
        .map(|k| {
            (
                Parameter::init_uniform(dims[k], dims[k + 1], dims[k], &mut rng),
                Parameter::zeros(1, dims[k + 1]),
            )
        })
        .collect();
    let mut toy = Toy {
        layers,
        x: DenseMatrix::from_fn(N_NODES, dims[0], |_, _| rng.uniform(-1.0, 1.0)),
        t: DenseMatrix::from_fn(N_NODES, TARGET_YEARS, |_, _| rng.uniform(-1.0, 1.0)),
    };
    let report = grad_check(
        &mut toy,
        |m, with_grad| {
            let mut acts = Vec::new(); // hardswish inputs
            let mut ins = Vec::new(); // linear inputs
            acts.push(m.x.clone());
            let mut a = hardswish_mat(&m.x);
            let mut y = None;
            for (k, (w, b)) in m.layers.iter().enumerate() {
                ins.push(a.clone());
                let z = linear_forward(&a, &w.value, &b.value)?;
                if k == 2 {
                    y = Some(z);
                    break;
                }
                acts.push(z);
                a = hardswish_mat(acts.last().expect("just pushed"));
            }
            let y = y.expect("three layers");
            let (loss, grad) = mse_loss_and_grad(&y, &m.t)?;
            if with_grad {
                let mut g = grad;
                for k in (0..3).rev() {
                    let (w, b) = &mut m.layers[k];
                    g = linear_backward(&ins[k], &w.value, &g, &mut w.grad, &mut b.grad)?;
                    if k > 0 {
                        g = hardswish_backward(&acts[k], &g)?;
                    }
                }
            }
            Ok(loss)
        },
        23,
        &GradCheckOptions::default(),
    )?;
    Ok(SuiteEntry {
        name: "head-mlp",
        max_rel_err: report.max_rel_err,
        tolerance: 1e-6,
        checked: report.checked,
    })
}

fn check_full_model(kind: CellKind) -> Result<SuiteEntry> {
    let mut rng = RngState::new(127);
    let points = toy_points(&mut rng);
    let weights = Arc::new(EdgeWeightMatrix::from_points(
        &points,
        EdgeWeightMode::AsWritten,
        1e9,
    )?);
    let graphs: Vec<LayerGraph> = (0..3)
        .map(|k| {
            let f = DenseMatrix::from_fn(N_NODES, NUM_FEATURES, |i, c| match c {
                0 => points[i].0,
                1 => points[i].1,
                2 => 10.0 + rng.uniform(0.0, 5.0),
                _ => 0.0,
            });
            LayerGraph::new(2007 + k, f, FeatureMask::base_only(), weights.clone())
        })
        .collect::<Result<_>>()?;
    let targets = DenseMatrix::from_fn(N_NODES, TARGET_YEARS, |_, _| rng.uniform(-1.0, 1.0));

    let cfg = ModelConfig {
        cell_kind: kind,
        hidden: 6,
        head: [5, 4, TARGET_YEARS],
        dropout_p: 0.0,
        ..ModelConfig::default()
    };
    let mut model = Model::init(cfg, 31)?;
    model.set_norm(NormStats::identity())?;
    let report = grad_check(
        &mut model,
        |m, with_grad| {
            let mut rng = RngState::with_stream(0, stream::DROPOUT);
            if with_grad {
                let (y, cache) = m.forward_cached(&graphs, true, &mut rng)?;
                let (loss, grad) = mse_loss_and_grad(&y, &targets)?;
                m.backward(&cache, &grad)?;
                Ok(loss)
            } else {
                let y = m.forward(&graphs, true, &mut rng)?;
                mse_loss_and_grad(&y, &targets).map(|(l, _)| l)
            }
        },
        37,
        &GradCheckOptions { samples: 250, ..GradCheckOptions::default() },
    )?;
    Ok(SuiteEntry {
        name: match kind {
            CellKind::Sage => "full-model-sage",
            CellKind::Gcn => "full-model-gcn",
        },
        max_rel_err: report.max_rel_err,
        tolerance: 1e-5,
        checked: report.checked,
    })
}

/// Run every gradient check. Deterministic; completes in seconds.
pub fn gradient_suite() -> Result<Vec<SuiteEntry>> {
    Ok(vec![
        check_sage_layer()?,
        check_gcn_layer()?,
        check_sage_lstm_step()?,
        check_gcn_lstm_step()?,
        check_head_mlp()?,
        check_full_model(CellKind::Sage)?,
        check_full_model(CellKind::Gcn)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn the_whole_suite_passes() {
        let entries = gradient_suite().unwrap();
        assert_eq!(entries.len(), 7);
        for e in &entries {
            assert!(
                e.passed(),
                "{}: max rel err {} over tolerance {}",
                e.name,
                e.max_rel_err,
                e.tolerance
            );
            assert!(e.checked > 0);
        }
    }
}
