//! Orthonormal 2-D DFT over row-major buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward/inverse 2-D transforms for one `rows x cols` shape.
///
/// Each axis is scaled by `1/sqrt(n)`, so the transform is unitary and
/// `sum |F x|^2 == sum |x|^2`.
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(cols);
        let row_inv = planner.plan_fft_inverse(cols);
        let col_fwd = planner.plan_fft_forward(rows);
        let col_inv = planner.plan_fft_inverse(rows);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            rows,
            cols,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            scale: 1.0 / ((rows * cols) as f64).sqrt(),
            scratch: vec![Complex64::default(); scratch_len],
            transposed: vec![Complex64::default(); rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        let (row, col) = (Arc::clone(&self.row_fwd), Arc::clone(&self.col_fwd));
        self.apply(buf, row.as_ref(), col.as_ref());
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        let (row, col) = (Arc::clone(&self.row_inv), Arc::clone(&self.col_inv));
        self.apply(buf, row.as_ref(), col.as_ref());
    }

    fn apply(&mut self, buf: &mut [Complex64], row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
        assert_eq!(buf.len(), self.rows * self.cols, "buffer does not match planned shape");
        row.process_with_scratch(buf, &mut self.scratch);
        transpose(buf, &mut self.transposed, self.rows, self.cols);
        col.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, buf, self.cols, self.rows);
        let s = self.scale;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        let line = &src[r * cols..(r + 1) * cols];
        for (c, v) in line.iter().enumerate() {
            dst[c * rows + r] = *v;
        }
    }
}
