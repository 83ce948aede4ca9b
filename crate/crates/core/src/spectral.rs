//! FFT plans and scratch space for one grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Forward/inverse transform pair sized for a grid. The inverse is
/// normalized so that `inverse(forward(x)) == x`.
///
/// Plans are shareable; the scratch buffer is not, so every trajectory owns
/// its own `Spectral`.
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.points();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Spectral {
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            scale: 1.0 / n as f64,
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Inverse transform without the `1/n` factor; callers fold it into
    /// their own multipliers.
    pub fn inverse_unnormalized(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse_unnormalized(data);
        let s = self.scale;
        data.iter_mut().for_each(|x| *x *= s);
    }

    /// `1 / points`.
    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Clone for Spectral {
    fn clone(&self) -> Self {
        Spectral {
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            scratch: vec![Complex64::default(); self.scratch.len()],
            scale: self.scale,
        }
    }
}
