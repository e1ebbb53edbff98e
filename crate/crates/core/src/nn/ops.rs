use crate::error::{CoreError, Result};
use crate::nn::matrix::DenseMatrix;
use crate::nn::rng::RngState;

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        // Avoids overflow of exp for very negative x.
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_mat(x: &DenseMatrix) -> DenseMatrix {
    x.map(sigmoid)
}

/// d sigmoid / dx expressed through the output y = sigmoid(x).
#[inline]
pub fn dsigmoid_from_y(y: f64) -> f64 {
    y * (1.0 - y)
}

pub fn tanh_mat(x: &DenseMatrix) -> DenseMatrix {
    x.map(f64::tanh)
}

/// d tanh / dx through the output y = tanh(x).
#[inline]
pub fn dtanh_from_y(y: f64) -> f64 {
    1.0 - y * y
}

/// hardswish(x) = x · min(max(x + 3, 0), 6) / 6.
#[inline]
pub fn hardswish(x: f64) -> f64 {
    x * (x + 3.0).clamp(0.0, 6.0) / 6.0
}

pub fn hardswish_mat(x: &DenseMatrix) -> DenseMatrix {
    x.map(hardswish)
}

/// Piecewise derivative of hardswish. The function has kinks at ±3; this
/// picks the one-sided value from the saturated branch there (0 at -3, 1 at
/// +3) so the subgradient is always taken from the cheaper linear piece.
#[inline]
pub fn dhardswish(x: f64) -> f64 {
    if x <= -3.0 {
        0.0
    } else if x >= 3.0 {
        1.0
    } else {
        (2.0 * x + 3.0) / 6.0
    }
}

/// grad_in = grad_out ∘ hardswish'(x), with `x` the forward input.
pub fn hardswish_backward(x: &DenseMatrix, grad_out: &DenseMatrix) -> Result<DenseMatrix> {
    if x.shape() != grad_out.shape() {
        return Err(CoreError::shape(format!(
            "hardswish_backward: input {}x{} vs grad {}x{}",
            x.rows(),
            x.cols(),
            grad_out.rows(),
            grad_out.cols()
        )));
    }
    let mut out = grad_out.clone();
    for (g, &xi) in out.data_mut().iter_mut().zip(x.data()) {
        *g *= dhardswish(xi);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dropout (inverted: kept units scaled by 1/(1-p) so inference is identity)
// ---------------------------------------------------------------------------

/// Per-element multipliers recorded by the forward pass: 0 for dropped
/// entries, 1/(1-p) for kept ones. Backward reapplies the same multipliers.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    scales: Vec<f64>,
    rows: usize,
    cols: usize,
}

pub fn dropout_forward(
    x: &DenseMatrix,
    p: f64,
    training: bool,
    rng: &mut RngState,
) -> Result<(DenseMatrix, Option<DropoutMask>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(CoreError::invalid(format!(
            "dropout probability must be in [0, 1), got {p}"
        )));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mut out = x.clone();
    let mut scales = Vec::with_capacity(out.len());
    for v in out.data_mut() {
        let s = if rng.next_f64() < p { 0.0 } else { keep_scale };
        *v *= s;
        scales.push(s);
    }
    let mask = DropoutMask {
        scales,
        rows: x.rows(),
        cols: x.cols(),
    };
    Ok((out, Some(mask)))
}

pub fn dropout_backward(grad_out: &DenseMatrix, mask: &DropoutMask) -> Result<DenseMatrix> {
    if grad_out.shape() != (mask.rows, mask.cols) {
        return Err(CoreError::shape(format!(
            "dropout_backward: grad {}x{} vs mask {}x{}",
            grad_out.rows(),
            grad_out.cols(),
            mask.rows,
            mask.cols
        )));
    }
    let mut out = grad_out.clone();
    for (g, &s) in out.data_mut().iter_mut().zip(&mask.scales) {
        *g *= s;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Linear layer: y = x·W + b
// ---------------------------------------------------------------------------

/// `x` is N×in, `w` in×out, `b` 1×out broadcast over rows.
pub fn linear_forward(x: &DenseMatrix, w: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(CoreError::shape(format!(
            "linear bias: expected 1x{}, got {}x{}",
            w.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut y = x.matmul(w)?;
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        for (v, &bv) in row.iter_mut().zip(b.row(0)) {
            *v += bv;
        }
    }
    Ok(y)
}

/// Accumulates dW += xᵀ·g and db += column sums of g; returns dX = g·Wᵀ.
pub fn linear_backward(
    x: &DenseMatrix,
    w: &DenseMatrix,
    grad_out: &DenseMatrix,
    dw: &mut DenseMatrix,
    db: &mut DenseMatrix,
) -> Result<DenseMatrix> {
    x.add_matmul_tn_into(grad_out, dw)?;
    db.add_assign(&grad_out.col_sums())?;
    let mut dx = DenseMatrix::zeros(grad_out.rows(), w.rows());
    grad_out.add_matmul_nt_into(w, &mut dx)?;
    Ok(dx)
}

// ---------------------------------------------------------------------------
// Mean squared error over all entries
// ---------------------------------------------------------------------------

pub fn mse_loss(pred: &DenseMatrix, target: &DenseMatrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(CoreError::shape(format!(
            "mse: pred {}x{} vs target {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    if pred.is_empty() {
        return Err(CoreError::invalid("mse over an empty matrix"));
    }
    let n = pred.len() as f64;
    let mut acc = 0.0;
    for (p, t) in pred.data().iter().zip(target.data()) {
        let d = p - t;
        acc += d * d;
    }
    Ok(acc / n)
}

/// Loss plus its gradient w.r.t. `pred`: 2·(pred − target)/len.
pub fn mse_loss_and_grad(pred: &DenseMatrix, target: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    let loss = mse_loss(pred, target)?;
    let n = pred.len() as f64;
    let grad = DenseMatrix::from_fn(pred.rows(), pred.cols(), |r, c| {
        2.0 * (pred.get(r, c) - target.get(r, c)) / n
    });
    Ok((loss, grad))
}

pub fn rmse(pred: &DenseMatrix, target: &DenseMatrix) -> Result<f64> {
    Ok(mse_loss(pred, target)?.sqrt())
}

// ---------------------------------------------------------------------------
// Neighborhood mean aggregation
// ---------------------------------------------------------------------------

/// Which rows feed each node's neighborhood mean.
#[derive(Debug, Clone)]
pub enum Neighborhood {
    /// Fully connected without self-loops: node i averages every j ≠ i.
    AllExceptSelf,
    /// Explicit per-node neighbor lists (self excluded by construction).
    Lists(Vec<Vec<usize>>),
}

impl Neighborhood {
    /// Every node must end up with at least one neighbor; a mean over an
    /// empty set has no defensible value.
    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Neighborhood::AllExceptSelf => {
                if n < 2 {
                    return Err(CoreError::InvalidGraph(format!(
                        "{n}-node graph leaves nodes without neighbors"
                    )));
                }
                Ok(())
            }
            Neighborhood::Lists(lists) => {
                if lists.len() != n {
                    return Err(CoreError::InvalidGraph(format!(
                        "neighbor lists for {} nodes, matrix has {n} rows",
                        lists.len()
                    )));
                }
                for (i, list) in lists.iter().enumerate() {
                    if list.is_empty() {
                        return Err(CoreError::InvalidGraph(format!(
                            "node {i} has an empty neighbor list"
                        )));
                    }
                    for &j in list {
                        if j >= n {
                            return Err(CoreError::InvalidGraph(format!(
                                "node {i} lists neighbor {j} out of range 0..{n}"
                            )));
                        }
                        if j == i {
                            return Err(CoreError::InvalidGraph(format!(
                                "node {i} lists itself as a neighbor"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_weights(weights: &DenseMatrix, n: usize) -> Result<()> {
    if weights.shape() != (n, n) {
        return Err(CoreError::shape(format!(
            "edge weights {}x{} for {n} nodes",
            weights.rows(),
            weights.cols()
        )));
    }
    Ok(())
}

/// Row i of the output is the (optionally weighted) mean of the neighbor rows
/// of `x`. Weighted means use w_ij / Σ_j w_ij over the same neighbor set; the
/// weight diagonal is never consulted. Nodes without neighbors are rejected.
///
/// Aggregation is linear in `x`, so the backward pass is
/// [`mean_aggregate_backward`] with the same neighborhood and weights.
pub fn mean_aggregate(
    x: &DenseMatrix,
    neighborhood: &Neighborhood,
    weights: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    let n = x.rows();
    neighborhood.validate(n)?;
    if let Some(w) = weights {
        check_weights(w, n)?;
    }
    let f = x.cols();
    let mut out = DenseMatrix::zeros(n, f);

    match (neighborhood, weights) {
        (Neighborhood::AllExceptSelf, None) => {
            // out[i] = (colsum − x[i]) / (n−1): O(N·F) instead of O(N²·F).
            let sums = x.col_sums();
            let inv = 1.0 / (n - 1) as f64;
            for i in 0..n {
                let xi = x.row(i);
                let oi = out.row_mut(i);
                for ((o, &s), &v) in oi.iter_mut().zip(sums.row(0)).zip(xi) {
                    *o = (s - v) * inv;
                }
            }
        }
        (Neighborhood::AllExceptSelf, Some(w)) => {
            for i in 0..n {
                let wrow = w.row(i);
                let mut total = 0.0;
                for (j, &wij) in wrow.iter().enumerate() {
                    if j != i {
                        total += wij;
                    }
                }
                if total <= 0.0 {
                    continue;
                }
                let oi = out.row_mut(i);
                for (j, &wij) in wrow.iter().enumerate() {
                    if j == i || wij == 0.0 {
                        continue;
                    }
                    let c = wij / total;
                    for (o, &v) in oi.iter_mut().zip(x.row(j)) {
                        *o += c * v;
                    }
                }
            }
        }
        (Neighborhood::Lists(lists), None) => {
            for (i, list) in lists.iter().enumerate() {
                let inv = 1.0 / list.len() as f64;
                let oi = out.row_mut(i);
                for &j in list {
                    for (o, &v) in oi.iter_mut().zip(x.row(j)) {
                        *o += inv * v;
                    }
                }
            }
        }
        (Neighborhood::Lists(lists), Some(w)) => {
            for (i, list) in lists.iter().enumerate() {
                let total: f64 = list.iter().map(|&j| w.get(i, j)).sum();
                if total <= 0.0 {
                    continue;
                }
                let oi = out.row_mut(i);
                for &j in list {
                    let c = w.get(i, j) / total;
                    for (o, &v) in oi.iter_mut().zip(x.row(j)) {
                        *o += c * v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of [`mean_aggregate`] w.r.t. its input: applies the transposed
/// aggregation operator to `grad_out`.
pub fn mean_aggregate_backward(
    grad_out: &DenseMatrix,
    neighborhood: &Neighborhood,
    weights: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    let n = grad_out.rows();
    neighborhood.validate(n)?;
    if let Some(w) = weights {
        check_weights(w, n)?;
    }
    let f = grad_out.cols();
    let mut grad_x = DenseMatrix::zeros(n, f);

    match (neighborhood, weights) {
        (Neighborhood::AllExceptSelf, None) => {
            // The operator is symmetric, so the same colsum trick applies.
            let sums = grad_out.col_sums();
            let inv = 1.0 / (n - 1) as f64;
            for j in 0..n {
                let gj = grad_out.row(j);
                let row = grad_x.row_mut(j);
                for ((o, &s), &g) in row.iter_mut().zip(sums.row(0)).zip(gj) {
                    *o = (s - g) * inv;
                }
            }
        }
        (Neighborhood::AllExceptSelf, Some(w)) => {
            for i in 0..n {
                let wrow = w.row(i);
                let mut total = 0.0;
                for (j, &wij) in wrow.iter().enumerate() {
                    if j != i {
                        total += wij;
                    }
                }
                if total <= 0.0 {
                    continue;
                }
                let gi = grad_out.row(i).to_vec();
                for (j, &wij) in wrow.iter().enumerate() {
                    if j == i || wij == 0.0 {
                        continue;
                    }
                    let c = wij / total;
                    for (o, &g) in grad_x.row_mut(j).iter_mut().zip(&gi) {
                        *o += c * g;
                    }
                }
            }
        }
        (Neighborhood::Lists(lists), None) => {
            for (i, list) in lists.iter().enumerate() {
                let inv = 1.0 / list.len() as f64;
                let gi = grad_out.row(i).to_vec();
                for &j in list {
                    for (o, &g) in grad_x.row_mut(j).iter_mut().zip(&gi) {
                        *o += inv * g;
                    }
                }
            }
        }
        (Neighborhood::Lists(lists), Some(w)) => {
            for (i, list) in lists.iter().enumerate() {
                let total: f64 = list.iter().map(|&j| w.get(i, j)).sum();
                if total <= 0.0 {
                    continue;
                }
                let gi = grad_out.row(i).to_vec();
                for &j in list {
                    let c = w.get(i, j) / total;
                    for (o, &g) in grad_x.row_mut(j).iter_mut().zip(&gi) {
                        *o += c * g;
                    }
                }
            }
        }
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardswish_breakpoints_and_samples() {
        assert_eq!(hardswish(-4.0), 0.0);
        assert_eq!(hardswish(-3.0), 0.0);
        assert_eq!(hardswish(0.0), 0.0);
        assert_eq!(hardswish(3.0), 3.0);
        assert_eq!(hardswish(5.0), 5.0);
        assert!((hardswish(1.0) - 4.0 / 6.0).abs() <= 1e-15);
        assert!((hardswish(-1.0) + 2.0 / 6.0).abs() <= 1e-15);
    }

    #[test]
    fn hardswish_derivative_convention() {
        assert_eq!(dhardswish(-3.0), 0.0);
        assert_eq!(dhardswish(3.0), 1.0);
        assert_eq!(dhardswish(0.0), 0.5);
        assert_eq!(dhardswish(-10.0), 0.0);
        assert_eq!(dhardswish(10.0), 1.0);
        // Interior derivative matches a central difference away from kinks.
        for &x in &[-2.5, -1.0, 0.3, 1.7, 2.9] {
            let h = 1e-6;
            let num = (hardswish(x + h) - hardswish(x - h)) / (2.0 * h);
            assert!((dhardswish(x) - num).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(40.0) > 1.0 - 1e-15);
        assert!(sigmoid(-40.0) < 1e-15);
        assert!((sigmoid(-700.0)).is_finite());
        assert!((dsigmoid_from_y(sigmoid(0.0)) - 0.25).abs() <= 1e-15);
    }

    #[test]
    fn dropout_identity_cases() {
        let x = DenseMatrix::from_fn(4, 5, |r, c| (r * 5 + c) as f64);
        let mut rng = RngState::new(1);
        let (y, mask) = dropout_forward(&x, 0.0, true, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
        let (y, mask) = dropout_forward(&x, 0.5, false, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
        assert!(dropout_forward(&x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_rate_and_scaling() {
        let x = DenseMatrix::from_fn(1000, 100, |_, _| 1.0);
        let mut rng = RngState::new(7);
        let p = 0.2;
        let (y, mask) = dropout_forward(&x, p, true, &mut rng).unwrap();
        let mask = mask.unwrap();
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count();
        let rate = zeros as f64 / y.len() as f64;
        assert!((rate - p).abs() < 0.005, "drop rate {rate}");
        // Kept entries carry the 1/(1-p) inflation, so the mean is preserved.
        let mean: f64 = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        // Backward reuses the identical mask.
        let g = DenseMatrix::from_fn(1000, 100, |_, _| 1.0);
        let gx = dropout_backward(&g, &mask).unwrap();
        assert_eq!(gx, y);
    }

    #[test]
    fn mse_hand_value() {
        let p = DenseMatrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let t = DenseMatrix::zeros(1, 2);
        assert!((mse_loss(&p, &t).unwrap() - 2.5).abs() <= 1e-15);
        assert!((rmse(&p, &t).unwrap() - 2.5f64.sqrt()).abs() <= 1e-15);
        let (loss, grad) = mse_loss_and_grad(&p, &t).unwrap();
        assert!((loss - 2.5).abs() <= 1e-15);
        assert_eq!(grad.data(), &[1.0, 2.0]); // 2·p/2
    }

    #[test]
    fn mse_shape_mismatch() {
        let p = DenseMatrix::zeros(2, 2);
        let t = DenseMatrix::zeros(2, 3);
        assert!(mse_loss(&p, &t).is_err());
    }

    #[test]
    fn linear_forward_and_backward_shapes() {
        let x = DenseMatrix::from_fn(3, 2, |r, c| (r + c) as f64);
        let w = DenseMatrix::from_fn(2, 4, |r, c| 0.1 * (r as f64) - 0.2 * c as f64);
        let b = DenseMatrix::from_fn(1, 4, |_, c| c as f64);
        let y = linear_forward(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), (3, 4));
        // Row 0 of x is [0, 1] so y[0] = w_row1 + b.
        for c in 0..4 {
            assert!((y.get(0, c) - (w.get(1, c) + b.get(0, c))).abs() <= 1e-15);
        }
        let g = DenseMatrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        let mut dw = DenseMatrix::zeros(2, 4);
        let mut db = DenseMatrix::zeros(1, 4);
        let dx = linear_backward(&x, &w, &g, &mut dw, &mut db).unwrap();
        assert_eq!(dx.shape(), (3, 2));
        assert!(db.max_abs_diff(&g.col_sums()) <= 1e-15);
        assert!(dw.max_abs_diff(&x.transpose().matmul(&g).unwrap()) <= 1e-12);
    }

    /// Naive reference aggregation: explicit per-node loops.
    fn naive_mean(
        x: &DenseMatrix,
        nb: &Neighborhood,
        w: Option<&DenseMatrix>,
    ) -> DenseMatrix {
        let n = x.rows();
        let lists: Vec<Vec<usize>> = match nb {
            Neighborhood::AllExceptSelf => (0..n)
                .map(|i| (0..n).filter(|&j| j != i).collect())
                .collect(),
            Neighborhood::Lists(l) => l.clone(),
        };
        DenseMatrix::from_fn(n, x.cols(), |i, c| {
            let list = &lists[i];
            match w {
                None => list.iter().map(|&j| x.get(j, c)).sum::<f64>() / list.len() as f64,
                Some(w) => {
                    let total: f64 = list.iter().map(|&j| w.get(i, j)).sum();
                    list.iter().map(|&j| w.get(i, j) * x.get(j, c)).sum::<f64>() / total
                }
            }
        })
    }

    #[test]
    fn mean_aggregate_hand_case() {
        // Three nodes, one feature: means of the other two.
        let x = DenseMatrix::from_vec(3, 1, vec![0.0, 3.0, 9.0]).unwrap();
        let y = mean_aggregate(&x, &Neighborhood::AllExceptSelf, None).unwrap();
        assert_eq!(y.data(), &[6.0, 4.5, 1.5]);
    }

    #[test]
    fn fast_path_matches_naive_all_except_self() {
        let x = DenseMatrix::from_fn(13, 6, |r, c| ((r * 31 + c * 17) as f64).sin());
        let got = mean_aggregate(&x, &Neighborhood::AllExceptSelf, None).unwrap();
        let want = naive_mean(&x, &Neighborhood::AllExceptSelf, None);
        assert!(got.max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn weighted_aggregate_matches_naive() {
        let n = 9;
        let x = DenseMatrix::from_fn(n, 4, |r, c| ((r + 2 * c) as f64).cos());
        // Symmetric positive weights with a big diagonal that must be ignored.
        let w = DenseMatrix::from_fn(n, n, |r, c| {
            if r == c {
                1e9
            } else {
                1.0 + ((r * n + c) as f64).sin().abs() + ((c * n + r) as f64).sin().abs()
            }
        });
        let got = mean_aggregate(&x, &Neighborhood::AllExceptSelf, Some(&w)).unwrap();
        let want = naive_mean(&x, &Neighborhood::AllExceptSelf, Some(&w));
        assert!(got.max_abs_diff(&want) <= 1e-12);
    }

    #[test]
    fn lists_case_matches_hand_means() {
        let x = DenseMatrix::from_fn(3, 2, |r, _| r as f64 + 1.0);
        let nb = Neighborhood::Lists(vec![vec![1, 2], vec![0, 2], vec![0]]);
        let y = mean_aggregate(&x, &nb, None).unwrap();
        assert_eq!(y.row(0), &[2.5, 2.5]);
        assert_eq!(y.row(1), &[2.0, 2.0]);
        assert_eq!(y.row(2), &[1.0, 1.0]);
    }

    #[test]
    fn neighborless_nodes_are_rejected() {
        let x = DenseMatrix::zeros(3, 1);
        let empty = Neighborhood::Lists(vec![vec![1], vec![], vec![1]]);
        assert!(matches!(
            mean_aggregate(&x, &empty, None),
            Err(CoreError::InvalidGraph(_))
        ));
        let self_loop = Neighborhood::Lists(vec![vec![0], vec![0], vec![0]]);
        assert!(mean_aggregate(&x, &self_loop, None).is_err());
        let oob = Neighborhood::Lists(vec![vec![5], vec![0], vec![0]]);
        assert!(mean_aggregate(&x, &oob, None).is_err());
        // A single-node graph has no one to average.
        let lone = DenseMatrix::zeros(1, 1);
        assert!(mean_aggregate(&lone, &Neighborhood::AllExceptSelf, None).is_err());
    }

    #[test]
    fn backward_is_transpose_of_forward_operator() {
        // For a linear map A, <A x, g> == <x, Aᵀ g> for any x and g.
        let n = 7;
        let f = 3;
        let x = DenseMatrix::from_fn(n, f, |r, c| ((r * 3 + c) as f64).sin());
        let g = DenseMatrix::from_fn(n, f, |r, c| ((r + 5 * c) as f64).cos());
        let w = DenseMatrix::from_fn(n, n, |r, c| 1.0 + ((r + c) as f64 * 0.7).abs());
        let lists: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && (i + j) % 3 != 0).collect())
            .collect();
        let cases: Vec<(Neighborhood, Option<&DenseMatrix>)> = vec![
            (Neighborhood::AllExceptSelf, None),
            (Neighborhood::AllExceptSelf, Some(&w)),
            (Neighborhood::Lists(lists.clone()), None),
            (Neighborhood::Lists(lists), Some(&w)),
        ];
        for (nb, weights) in cases {
            let ax = mean_aggregate(&x, &nb, weights).unwrap();
            let atg = mean_aggregate_backward(&g, &nb, weights).unwrap();
            let lhs: f64 = ax.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.data().iter().zip(atg.data()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-10, "adjoint mismatch: {lhs} vs {rhs}");
        }
    }
}
