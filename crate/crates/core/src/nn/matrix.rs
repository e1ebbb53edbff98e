use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Row-major 2-D array of `f64`.
///
/// The whole stack is 64-bit: gradient checks at 1e-6..1e-5 relative error and
/// bit-exact reruns both need the headroom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::shape(format!(
                "{}x{} matrix needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DenseMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Single row as a 1xN matrix.
    pub fn row_vector(data: Vec<f64>) -> Self {
        DenseMatrix {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    fn check_same_shape(&self, other: &DenseMatrix, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(CoreError::shape(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "sub")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_same_shape(other, "hadamard")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// `self += other`.
    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &DenseMatrix, s: f64) -> Result<()> {
        self.check_same_shape(other, "add_scaled")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// `self · other`, allocating the result.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        self.add_matmul_into(other, &mut out)?;
        Ok(out)
    }

    /// `out += self · other`. The ikj loop keeps the inner traversal
    /// contiguous so the compiler can vectorize it.
    pub fn add_matmul_into(&self, other: &DenseMatrix, out: &mut DenseMatrix) -> Result<()> {
        if self.cols != other.rows {
            return Err(CoreError::shape(format!(
                "matmul: {}x{} · {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if out.rows != self.rows || out.cols != other.cols {
            return Err(CoreError::shape(format!(
                "matmul out: expected {}x{}, got {}x{}",
                self.rows, other.cols, out.rows, out.cols
            )));
        }
        let n = other.cols;
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b;
                }
            }
        }
        Ok(())
    }

    /// `out += self · otherᵀ`.
    pub fn add_matmul_nt_into(&self, other: &DenseMatrix, out: &mut DenseMatrix) -> Result<()> {
        if self.cols != other.cols {
            return Err(CoreError::shape(format!(
                "matmul_nt: {}x{} · ({}x{})ᵀ",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if out.rows != self.rows || out.cols != other.rows {
            return Err(CoreError::shape(format!(
                "matmul_nt out: expected {}x{}, got {}x{}",
                self.rows, other.rows, out.rows, out.cols
            )));
        }
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let b_row = other.row(j);
                let mut acc = 0.0;
                for (a, b) in a_row.iter().zip(b_row) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] += acc;
            }
        }
        Ok(())
    }

    /// `out += selfᵀ · other`.
    pub fn add_matmul_tn_into(&self, other: &DenseMatrix, out: &mut DenseMatrix) -> Result<()> {
        if self.rows != other.rows {
            return Err(CoreError::shape(format!(
                "matmul_tn: ({}x{})ᵀ · {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        if out.rows != self.cols || out.cols != other.cols {
            return Err(CoreError::shape(format!(
                "matmul_tn out: expected {}x{}, got {}x{}",
                self.cols, other.cols, out.rows, out.cols
            )));
        }
        let n = other.cols;
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = &other.data[k * n..(k + 1) * n];
            for (i, &a_ki) in a_row.iter().enumerate() {
                if a_ki == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a_ki * b;
                }
            }
        }
        Ok(())
    }

    /// Column sums as a 1xC matrix.
    pub fn col_sums(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(1, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for (o, &v) in out.data.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Largest absolute entry difference; infinity on shape mismatch.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_returns_rhs() {
        let i = DenseMatrix::from_fn(3, 3, |r, c| if r == c { 1.0 } else { 0.0 });
        let b = DenseMatrix::from_fn(3, 2, |r, c| (r * 2 + c) as f64);
        let c = i.matmul(&b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn matmul_1x1() {
        let a = DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap();
        let b = DenseMatrix::from_vec(1, 1, vec![-2.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().get(0, 0), -6.0);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        // Independent naive i/j/k evaluation of a random-ish 5x4 · 4x3 product.
        let a = DenseMatrix::from_fn(5, 4, |r, c| ((r * 7 + c * 3) as f64).sin());
        let b = DenseMatrix::from_fn(4, 3, |r, c| ((r * 5 + c * 11) as f64).cos());
        let c = a.matmul(&b).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += a.get(i, k) * b.get(k, j);
                }
                assert!((c.get(i, j) - acc).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_is_error() {
        let a = DenseMatrix::zeros(2, 3);
        let b = DenseMatrix::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn transpose_variants_agree_with_explicit_transpose() {
        let a = DenseMatrix::from_fn(4, 6, |r, c| (r as f64) - 0.3 * c as f64);
        let b = DenseMatrix::from_fn(5, 6, |r, c| 0.1 * (r * c) as f64 - 1.0);
        let mut nt = DenseMatrix::zeros(4, 5);
        a.add_matmul_nt_into(&b, &mut nt).unwrap();
        assert!(nt.max_abs_diff(&a.matmul(&b.transpose()).unwrap()) <= 1e-12);

        let c = DenseMatrix::from_fn(4, 3, |r, c| ((r + c) as f64).sqrt());
        let mut tn = DenseMatrix::zeros(6, 3);
        a.add_matmul_tn_into(&c, &mut tn).unwrap();
        assert!(tn.max_abs_diff(&a.transpose().matmul(&c).unwrap()) <= 1e-12);
    }
}
