//! Minimal row-major matrix used by the recurrent cells. Nothing fancy:
//! the BPTT code only needs matrix-vector products, transposed
//! accumulation, and rank-1 gradient updates.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut() -> S) -> Self {
        Mat {
            rows,
            cols,
            data: (0..rows * cols).map(|_| f()).collect(),
        }
    }

    pub fn from_data(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// out = self * x
    pub fn matvec(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, out_r) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = S::zero();
            for (m, &xv) in row.iter().zip(x) {
                acc += *m * xv;
            }
            *out_r = acc;
        }
    }

    /// out += self * x
    pub fn matvec_acc(&self, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, out_r) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = S::zero();
            for (m, &xv) in row.iter().zip(x) {
                acc += *m * xv;
            }
            *out_r += acc;
        }
    }

    /// out += self^T * y
    pub fn matvec_t_acc(&self, y: &[S], out: &mut [S]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &yv) in y.iter().enumerate() {
            let row = self.row(r);
            for (o, &m) in out.iter_mut().zip(row) {
                *o += m * yv;
            }
        }
    }

    /// self += a * b^T
    pub fn add_outer(&mut self, a: &[S], b: &[S]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &av) in a.iter().enumerate() {
            let row = self.row_mut(r);
            for (m, &bv) in row.iter_mut().zip(b) {
                *m += av * bv;
            }
        }
    }
}
