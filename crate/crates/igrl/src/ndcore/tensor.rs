//! Dense row-major `f64` matrices.
//!
//! This is the only data container the numeric core uses. Products are
//! written in an accumulate-over-rows form so the inner loops vectorize
//! without reassociating float sums; with the `parallel` feature the row
//! loop of large products is split across a rayon pool. Both paths perform
//! bit-identical arithmetic per output element.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum multiply-add count before a product is worth splitting across threads.
const PAR_FLOP_THRESHOLD: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Tensor2 { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Tensor2 { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn col_from(v: &[f64]) -> Self {
        Tensor2::from_vec(v.len(), 1, v.to_vec())
    }

    /// Single-row matrix from a slice.
    pub fn row_from(v: &[f64]) -> Self {
        Tensor2::from_vec(1, v.len(), v.to_vec())
    }

    pub fn eye(n: usize) -> Self {
        Tensor2::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Tensor2 {
        let mut out = Tensor2::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2 {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor2, f: impl Fn(f64, f64) -> f64) -> Tensor2 {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Tensor2) -> Tensor2 {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor2) -> Tensor2 {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Tensor2) -> Tensor2 {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Tensor2 {
        self.map(|v| c * v)
    }

    pub fn add_assign(&mut self, other: &Tensor2) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Tensor2, c: f64) {
        assert_eq!(self.shape(), other.shape(), "add_assign_scaled shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * *b;
        }
    }

    /// Adds `row` (1 x cols) to every row.
    pub fn add_row_broadcast(&self, row: &Tensor2) -> Tensor2 {
        assert_eq!(row.rows, 1, "broadcast operand must be a single row");
        assert_eq!(row.cols, self.cols, "broadcast width mismatch");
        let mut out = self.clone();
        for i in 0..out.rows {
            for (a, b) in out.row_mut(i).iter_mut().zip(&row.data) {
                *a += *b;
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor2) -> f64 {
        assert_eq!(self.shape(), other.shape(), "dot shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Column sums as a 1 x cols matrix.
    pub fn col_sums(&self) -> Tensor2 {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += *v;
            }
        }
        Tensor2::from_vec(1, self.cols, out)
    }

    /// Column means as a 1 x cols matrix.
    pub fn col_means(&self) -> Tensor2 {
        self.col_sums().scale(1.0 / self.rows as f64)
    }

    /// Row sums as an n x 1 matrix.
    pub fn row_sums(&self) -> Tensor2 {
        let data = (0..self.rows)
            .map(|i| self.row(i).iter().sum())
            .collect();
        Tensor2::from_vec(self.rows, 1, data)
    }

    /// Rows minus the column means.
    pub fn center_cols(&self) -> Tensor2 {
        let means = self.col_means();
        let mut out = self.clone();
        for i in 0..out.rows {
            for (a, m) in out.row_mut(i).iter_mut().zip(means.data()) {
                *a -= *m;
            }
        }
        out
    }

    /// Columns `lo..hi` as a new matrix.
    pub fn slice_cols(&self, lo: usize, hi: usize) -> Tensor2 {
        assert!(lo <= hi && hi <= self.cols, "column slice out of range");
        let mut out = Tensor2::zeros(self.rows, hi - lo);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[lo..hi]);
        }
        out
    }

    /// Horizontal concatenation. Either operand may have zero columns.
    pub fn hstack(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let mut out = Tensor2::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }

    /// Copies the listed rows into a new matrix.
    pub fn take_rows(&self, idx: &[usize]) -> Tensor2 {
        let mut out = Tensor2::zeros(idx.len(), self.cols);
        for (dst, &src) in idx.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Tensor2::zeros(self.rows, other.cols);
        mm_into(&mut out, self, other);
        out
    }

    /// `self * other^T` (the layer-forward shape `X * W^T`).
    pub fn matmul_tb(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(
            self.cols, other.cols,
            "matmul_tb: {}x{} * ({}x{})^T",
            self.rows, self.cols, other.rows, other.cols
        );
        let bt = other.transpose();
        let mut out = Tensor2::zeros(self.rows, other.rows);
        mm_into(&mut out, self, &bt);
        out
    }

    /// `self^T * other` (the backward shape for weight gradients).
    pub fn matmul_ta(&self, other: &Tensor2) -> Tensor2 {
        assert_eq!(
            self.rows, other.rows,
            "matmul_ta: ({}x{})^T * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let at = self.transpose();
        let mut out = Tensor2::zeros(self.cols, other.cols);
        mm_into(&mut out, &at, other);
        out
    }
}

/// Row-blocked accumulating product; the per-row kernel is reduction-free so
/// it vectorizes, and row blocks make the parallel path bit-identical to the
/// sequential one.
fn mm_into(out: &mut Tensor2, a: &Tensor2, b: &Tensor2) {
    let (n, inner, p) = (a.rows, a.cols, b.cols);
    debug_assert_eq!(out.rows, n);
    debug_assert_eq!(out.cols, p);

    let kernel = |i: usize, out_row: &mut [f64]| {
        let a_row = a.row(i);
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = &b.data[k * p..(k + 1) * p];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        if n * inner * p >= PAR_FLOP_THRESHOLD && n > 1 {
            out.data
                .par_chunks_mut(p)
                .enumerate()
                .for_each(|(i, row)| kernel(i, row));
            return;
        }
    }
    let _ = inner;
    for (i, row) in out.data.chunks_mut(p).enumerate() {
        kernel(i, row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Tensor2::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]);
        let b = Tensor2::from_vec(3, 2, vec![7., 8., 9., 10., 11., 12.]);
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[58., 64., 139., 154.]);
    }

    #[test]
    fn matmul_variants_agree_with_explicit_transpose() {
        let a = Tensor2::from_fn(5, 4, |i, j| (i * 7 + j) as f64 * 0.37 - 1.0);
        let b = Tensor2::from_fn(6, 4, |i, j| (i + 3 * j) as f64 * 0.11 + 0.5);
        assert_eq!(a.matmul_tb(&b).data(), a.matmul(&b.transpose()).data());
        let c = Tensor2::from_fn(5, 3, |i, j| (2 * i + j) as f64 - 4.0);
        assert_eq!(a.matmul_ta(&c).data(), a.transpose().matmul(&c).data());
    }

    #[test]
    fn slicing_and_stacking_round_trip() {
        let a = Tensor2::from_fn(3, 5, |i, j| (i * 5 + j) as f64);
        let left = a.slice_cols(0, 2);
        let right = a.slice_cols(2, 5);
        assert_eq!(left.hstack(&right), a);
        let empty = a.slice_cols(5, 5);
        assert_eq!(empty.cols(), 0);
        assert_eq!(a.hstack(&empty), a);
    }

    #[test]
    fn centering_zeroes_column_means() {
        let a = Tensor2::from_fn(4, 3, |i, j| (i * i + 2 * j) as f64);
        let c = a.center_cols();
        let m = c.col_means();
        for &v in m.data() {
            assert!(v.abs() < 1e-12);
        }
    }
}
