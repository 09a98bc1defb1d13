//! Centered, unitary two-dimensional DFT on square grids.
//!
//! Both planes store the zero coordinate at index `N/2`. The transform is
//! scaled by `1/N` in each direction so that `Σ|E|²` is preserved.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::{from_usize, Scalar};

pub(crate) struct CenteredFft2<T: Scalar> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> CenteredFft2<T> {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn forward(&self, input: &Array2<Complex<T>>) -> Array2<Complex<T>> {
        self.transform(input, &self.forward)
    }

    pub(crate) fn inverse(&self, input: &Array2<Complex<T>>) -> Array2<Complex<T>> {
        self.transform(input, &self.inverse)
    }

    fn transform(&self, input: &Array2<Complex<T>>, fft: &Arc<dyn Fft<T>>) -> Array2<Complex<T>> {
        let n = self.n;
        let h = n / 2;
        assert_eq!(input.dim(), (n, n), "grid does not match planned size");

        // ifftshift while copying into a row-major buffer
        let mut rows = vec![Complex::new(T::zero(), T::zero()); n * n];
        for ((r, c), v) in input.indexed_iter() {
            rows[((r + h) % n) * n + (c + h) % n] = *v;
        }
        fft.process(&mut rows);

        let mut cols = vec![Complex::new(T::zero(), T::zero()); n * n];
        for r in 0..n {
            for c in 0..n {
                cols[c * n + r] = rows[r * n + c];
            }
        }
        fft.process(&mut cols);

        // cols[c * n + r] holds output (r, c); transpose back with fftshift
        let scale = T::one() / from_usize::<T>(n);
        let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
        for c in 0..n {
            for r in 0..n {
                out[((r + h) % n) * n + (c + h) % n] = cols[c * n + r] * scale;
            }
        }
        Array2::from_shape_vec((n, n), out).expect("shape matches buffer length")
    }
}
