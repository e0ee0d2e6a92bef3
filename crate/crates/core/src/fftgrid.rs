//! In-place d-dimensional FFT over row-major complex grids.
//!
//! The grid is `[n; d]` row-major. Each round transforms the contiguous last
//! axis line by line, then cyclically rotates the axes with one transpose;
//! after `d` rounds every axis has been transformed and the layout is back
//! to the original. Lines are independent and each is transformed by a
//! single-threaded plan, so the output is bitwise independent of the thread
//! count.

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Reusable transform plans for one grid size.
pub struct GridTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        GridTransform {
            n,
            forward: planner.plan_fft(n, FftDirection::Forward),
            inverse: planner.plan_fft(n, FftDirection::Inverse),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Transforms all `d` axes of the `[n; d]` row-major grid in `data`.
    /// `scratch` must have the same length; both buffers alternate.
    pub fn apply(
        &self,
        data: &mut Vec<Complex64>,
        scratch: &mut Vec<Complex64>,
        d: usize,
        direction: FftDirection,
    ) {
        let n = self.n;
        let len = n.pow(d as u32);
        assert_eq!(data.len(), len);
        assert_eq!(scratch.len(), len);
        let fft = match direction {
            FftDirection::Forward => &self.forward,
            FftDirection::Inverse => &self.inverse,
        };
        for _ in 0..d {
            fft_lines(data, n, fft);
            rotate_axes(data, scratch, n, len / n);
            std::mem::swap(data, scratch);
        }
    }
}

/// One-shot variant of [`GridTransform::apply`].
pub fn transform_all_axes(
    data: &mut Vec<Complex64>,
    scratch: &mut Vec<Complex64>,
    n: usize,
    d: usize,
    direction: FftDirection,
) {
    GridTransform::new(n).apply(data, scratch, d, direction);
}

/// FFT of every contiguous length-`n` line.
fn fft_lines(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    #[cfg(feature = "parallel")]
    {
        if data.len() > crate::par::SEQ_CUTOFF {
            // keep at least ~64k elements per task; tiny lines otherwise
            // drown in scheduling overhead
            let grain = (65536 / n.max(1)).max(1);
            data.par_chunks_mut(n).with_min_len(grain).for_each_init(
                || vec![Complex64::default(); fft.get_inplace_scratch_len()],
                |scratch, line| fft.process_with_scratch(line, scratch),
            );
            return;
        }
    }
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for line in data.chunks_mut(n) {
        fft.process_with_scratch(line, &mut scratch);
    }
}

/// Moves the first axis to the back: `(i₀, r) ↦ (r, i₀)` as an
/// `n_rows × n_cols` transpose, writing into `out`.
fn rotate_axes(input: &[Complex64], out: &mut [Complex64], n_rows: usize, n_cols: usize) {
    crate::par::for_each_chunk_mut(out, n_rows, |start, chunk| {
        let c = start / n_rows;
        for (r, slot) in chunk.iter_mut().enumerate() {
            *slot = input[r * n_cols + c];
        }
    });
}
