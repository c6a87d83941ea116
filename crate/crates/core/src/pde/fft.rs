//! Row-parallel 2D FFT plumbing on square row-major buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    buf: Vec<Complex64>,
}

const ROWS_PER_TASK: usize = 8;

impl Fft2 {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch_len,
            buf: vec![Complex64::default(); n * n],
        }
    }

    /// Unnormalized 1D transform of every row.
    pub(crate) fn rows(&self, data: &mut [Complex64], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let len = self.scratch_len;
        data.par_chunks_mut(self.n * ROWS_PER_TASK).for_each_init(
            || vec![Complex64::default(); len],
            |scratch, chunk| plan.process_with_scratch(chunk, scratch),
        );
    }

    pub(crate) fn transpose(&mut self, data: &mut Vec<Complex64>) {
        let n = self.n;
        let src: &[Complex64] = data;
        self.buf.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = src[j * n + i];
            }
        });
        std::mem::swap(data, &mut self.buf);
    }

    /// Forward 2D transform; the result is left transposed,
    /// `data[j·n + i] = ψ̂(k_i, k_j)` with i the first axis.
    pub(crate) fn forward_t(&mut self, data: &mut Vec<Complex64>) {
        self.rows(data, true);
        self.transpose(data);
        self.rows(data, true);
    }

    /// Inverse of [`Fft2::forward_t`], including the 1/n² normalization.
    pub(crate) fn inverse_t(&mut self, data: &mut Vec<Complex64>) {
        self.rows(data, false);
        self.transpose(data);
        self.rows(data, false);
        let s = 1.0 / (self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }

    /// Multiplies the row spectrum of row r by `phase(r, k-bin)` after a
    /// transform along rows, then transforms back.
    pub(crate) fn row_multiplier(&self, data: &mut [Complex64], phase: impl Fn(usize, usize) -> Complex64 + Sync) {
        let n = self.n;
        self.rows(data, true);
        let s = 1.0 / n as f64;
        data.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            for (k, v) in row.iter_mut().enumerate() {
                *v *= phase(r, k) * s;
            }
        });
        self.rows(data, false);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_transpose() {
        let n = 16;
        let mut f = Fft2::new(n);
        let orig: Vec<Complex64> = (0..n * n).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let mut d = orig.clone();
        f.transpose(&mut d);
        assert_eq!(d[3 * n + 5], orig[5 * n + 3]);
        f.transpose(&mut d);
        assert_eq!(d, orig);
        f.forward_t(&mut d);
        f.inverse_t(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
