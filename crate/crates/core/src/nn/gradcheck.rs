use crate::error::{CoreError, Result};
use crate::nn::param::{ParamModel, Parameter};
use crate::nn::rng::RngState;

/// Knobs for [`grad_check`].
#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// How many parameter coordinates to probe (sampled without replacement
    /// across every parameter; all coordinates if fewer exist).
    pub samples: usize,
    /// Central-difference step. Scaled by max(1, |value|) per coordinate.
    pub step: f64,
    /// Absolute agreement at or below this counts as exact. Central
    /// differences carry cancellation noise of roughly ε·|loss|/step, so a
    /// true gradient near zero cannot be resolved and its relative error is
    /// meaningless.
    pub atol: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            samples: 200,
            step: 1e-5,
            atol: 1e-9,
        }
    }
}

/// Worst single coordinate seen during a check.
#[derive(Debug, Clone)]
pub struct WorstCoordinate {
    pub param: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<WorstCoordinate>,
}

fn rel_err(a: f64, n: f64, atol: f64) -> f64 {
    let diff = (a - n).abs();
    if diff <= atol {
        return 0.0;
    }
    diff / a.abs().max(n.abs()).max(1e-8)
}

/// Compares analytic gradients against central finite differences.
///
/// `run(model, with_grad)` must evaluate the loss; when `with_grad` is true
/// it must also accumulate gradients into the parameters (which arrive
/// zeroed). The closure has to be deterministic — it is invoked many times
/// and any internal randomness must be re-seeded per call. That is verified
/// up front by requiring two plain evaluations to agree bit-for-bit.
pub fn grad_check<M, F>(
    model: &mut M,
    mut run: F,
    seed: u64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    M: ParamModel,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    let l0 = run(model, false)?;
    let l1 = run(model, false)?;
    if l0.to_bits() != l1.to_bits() {
        return Err(CoreError::Contract(format!(
            "loss closure is not deterministic: {l0:?} vs {l1:?}"
        )));
    }

    model.zero_grads();
    run(model, true)?;

    // Snapshot analytic gradients and enumerate coordinates.
    let mut names: Vec<String> = Vec::new();
    let mut grads: Vec<Vec<f64>> = Vec::new();
    let mut coords: Vec<(usize, usize)> = Vec::new(); // (param index, flat index)
    {
        let mut pi = 0;
        model.visit_params(&mut |name, p: &mut Parameter| {
            names.push(name.to_string());
            grads.push(p.grad.data().to_vec());
            for k in 0..p.len() {
                coords.push((pi, k));
            }
            pi += 1;
        });
    }
    if coords.is_empty() {
        return Err(CoreError::invalid("model has no parameters to check"));
    }

    let mut rng = RngState::new(seed);
    rng.shuffle(&mut coords);
    coords.truncate(opts.samples.min(coords.len()).max(1));

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: None,
    };

    for &(pi, k) in &coords {
        // Perturb one coordinate in place, evaluating loss on both sides.
        let mut original = 0.0;
        let mut h = opts.step;
        let set = |model: &mut M, v: f64| {
            let mut idx = 0;
            model.visit_params(&mut |_, p| {
                if idx == pi {
                    p.value.data_mut()[k] = v;
                }
                idx += 1;
            });
        };
        {
            let mut idx = 0;
            model.visit_params(&mut |_, p| {
                if idx == pi {
                    original = p.value.data()[k];
                }
                idx += 1;
            });
        }
        h *= original.abs().max(1.0);
        set(model, original + h);
        let lp = run(model, false)?;
        set(model, original - h);
        let lm = run(model, false)?;
        set(model, original);

        let numeric = (lp - lm) / (2.0 * h);
        let analytic = grads[pi][k];
        let e = rel_err(analytic, numeric, opts.atol);
        report.checked += 1;
        if e > report.max_rel_err {
            report.max_rel_err = e;
            let cols = {
                let mut c = 0;
                let mut idx = 0;
                model.visit_params(&mut |_, p| {
                    if idx == pi {
                        c = p.value.cols();
                    }
                    idx += 1;
                });
                c
            };
            report.worst = Some(WorstCoordinate {
                param: names[pi].clone(),
                row: k / cols,
                col: k % cols,
                analytic,
                numeric,
                rel_err: e,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::matrix::DenseMatrix;
    use crate::nn::ops::{linear_backward, linear_forward, mse_loss_and_grad};

    /// One dense layer trained against a fixed target: y = xW + b, L = mse.
    struct LinearToy {
        w: Parameter,
        b: Parameter,
        x: DenseMatrix,
        t: DenseMatrix,
    }

    impl ParamModel for LinearToy {
        fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
            f("w", &mut self.w);
            f("b", &mut self.b);
        }
    }

    fn toy() -> LinearToy {
        let mut rng = RngState::new(17);
        LinearToy {
            w: Parameter::init_uniform(3, 2, 3, &mut rng),
            b: Parameter::init_uniform(1, 2, 3, &mut rng),
            x: DenseMatrix::from_fn(4, 3, |r, c| rng.uniform(-1.0, 1.0) + (r + c) as f64 * 0.0),
            t: DenseMatrix::from_fn(4, 2, |_, _| rng.uniform(-1.0, 1.0)),
        }
    }

    fn toy_loss(m: &mut LinearToy, with_grad: bool) -> Result<f64> {
        let y = linear_forward(&m.x, &m.w.value, &m.b.value)?;
        let (loss, grad) = mse_loss_and_grad(&y, &m.t)?;
        if with_grad {
            linear_backward(&m.x, &m.w.value, &grad, &mut m.w.grad, &mut m.b.grad)?;
        }
        Ok(loss)
    }

    #[test]
    fn linear_layer_gradients_check_out() {
        let mut m = toy();
        let report = grad_check(&mut m, toy_loss, 1, &GradCheckOptions::default()).unwrap();
        assert_eq!(report.checked, 8); // 6 weights + 2 biases
        assert!(
            report.max_rel_err <= 1e-8,
            "max rel err {} at {:?}",
            report.max_rel_err,
            report.worst
        );
    }

    #[test]
    fn broken_backward_is_caught() {
        let mut m = toy();
        let bad = |m: &mut LinearToy, with_grad: bool| {
            let loss = toy_loss(m, with_grad)?;
            if with_grad {
                m.w.grad.scale(0.5); // sabotage
            }
            Ok(loss)
        };
        let report = grad_check(&mut m, bad, 1, &GradCheckOptions::default()).unwrap();
        assert!(report.max_rel_err > 0.1, "sabotage went unnoticed");
    }

    #[test]
    fn nondeterministic_closure_is_rejected() {
        let mut m = toy();
        let mut calls = 0u64;
        let flaky = |m: &mut LinearToy, with_grad: bool| {
            calls += 1;
            toy_loss(m, with_grad).map(|l| l + calls as f64 * 1e-12)
        };
        let err = grad_check(&mut m, flaky, 1, &GradCheckOptions::default()).unwrap_err();
        assert!(matches!(err, CoreError::Contract(_)));
    }

    #[test]
    fn value_restored_after_probes() {
        let mut m = toy();
        let before = m.w.value.clone();
        grad_check(&mut m, toy_loss, 2, &GradCheckOptions::default()).unwrap();
        assert_eq!(m.w.value, before, "probe left a perturbed value behind");
    }
}
