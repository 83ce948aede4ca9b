//! Uniform periodic grids and the fields that live on them.
//!
//! Lengths are in harmonic-oscillator units, energies in units of the axial
//! trap quantum. All quadratures use the rectangle rule, which is exact for
//! band-limited periodic fields on a uniform lattice.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic 1D lattice `z_i = -length/2 + i * spacing` and its
/// discrete-Fourier conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    points: usize,
}

impl Grid {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidLength(length));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::InvalidPointCount(points));
        }
        Ok(Grid { length, points })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.node(i))
    }

    /// Spacing of the wavenumber lattice, `2π / length`.
    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Wavenumber of FFT bin `i` (standard ordering: non-negative bins first,
    /// then the negative ones, Nyquist at `-points/2`).
    pub fn wavenumber(&self, i: usize) -> f64 {
        let n = self.points as isize;
        let i = i as isize;
        let m = if i < n / 2 { i } else { i - n };
        m as f64 * self.wavenumber_spacing()
    }

    pub fn wavenumbers(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.wavenumber(i))
    }

    /// Index of the node at `z = 0`.
    pub fn center_index(&self) -> usize {
        self.points / 2
    }
}

/// Complex amplitude field on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: Grid,
    amplitudes: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: Grid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.points() {
            return Err(Error::LengthMismatch {
                expected: grid.points(),
                actual: amplitudes.len(),
            });
        }
        Ok(Wavefunction { grid, amplitudes })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.nodes().map(f).collect();
        Wavefunction { grid, amplitudes }
    }

    /// Normalized Gaussian `π^{-1/4} w^{-1/2} exp(-(z-c)²/(2w²))`; with
    /// `width = 1` this is the harmonic-oscillator ground state.
    pub fn gaussian(grid: Grid, center: f64, width: f64) -> Self {
        let norm = (PI.sqrt() * width).sqrt().recip();
        Self::from_fn(grid, |z| {
            let x = (z - center) / width;
            Complex64::new(norm * (-0.5 * x * x).exp(), 0.0)
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
    }

    /// Rescales to unit quadrature norm. A zero field is left untouched.
    pub fn normalize(&mut self) {
        let n = quadrature_norm(self);
        if n > 0.0 {
            self.scale(Complex64::new(n.recip(), 0.0));
        }
    }

    pub fn density(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.amplitudes.iter().map(|a| a.norm_sqr())
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// Real scalar field (trap, speckle, or a sum) on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: Grid,
    values: Vec<f64>,
}

impl PotentialField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::LengthMismatch {
                expected: grid.points(),
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param(format!("potential value {v} is not finite")));
        }
        Ok(PotentialField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        PotentialField {
            grid,
            values: vec![0.0; grid.points()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        PotentialField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v += c);
        self
    }

    /// Pointwise sum of two fields on the same grid.
    pub fn add(&self, other: &PotentialField) -> Result<PotentialField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(PotentialField {
            grid: self.grid,
            values,
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i dz`.
pub fn inner_product(a: &Wavefunction, b: &Wavefunction) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let sum: Complex64 = a
        .amplitudes
        .iter()
        .zip(&b.amplitudes)
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(sum * a.grid.spacing())
}

pub fn quadrature_norm(psi: &Wavefunction) -> f64 {
    let sum: f64 = psi.density().sum();
    (sum * psi.grid.spacing()).sqrt()
}

pub fn expectation_position(psi: &Wavefunction) -> f64 {
    let sum: f64 = psi
        .grid
        .nodes()
        .zip(psi.density())
        .map(|(z, d)| z * d)
        .sum();
    sum * psi.grid.spacing()
}
