//! Trap, random potential, interaction strength and classical dynamics in
//! the anharmonic trap.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, PotentialField, Wavefunction};
use crate::spectral::Spectral;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

/// Shortest wavelength allowed in the random potential, in oscillator lengths.
pub const MIN_WAVELENGTH: f64 = 2.0;

/// Below this transverse/axial frequency ratio the 1D reduction is suspect.
pub const QUASI_1D_RATIO: f64 = 5.0;

/// `V(z) = ½((z-c)² + K (z-c)⁴)` in units of ħω_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub quartic_k: f64,
    pub center: f64,
}

impl TrapSpec {
    pub fn new(quartic_k: f64, center: f64) -> Result<Self> {
        if !(quartic_k >= 0.0 && quartic_k.is_finite()) {
            return Err(Error::param(format!("quartic coefficient must be >= 0, got {quartic_k}")));
        }
        if !center.is_finite() {
            return Err(Error::param("trap center must be finite"));
        }
        Ok(TrapSpec { quartic_k, center })
    }

    pub fn shifted(self, by: f64) -> Self {
        TrapSpec {
            center: self.center + by,
            ..self
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let x = z - self.center;
        let x2 = x * x;
        0.5 * (x2 + self.quartic_k * x2 * x2)
    }
}

/// Cosine-sum random potential `ε Σ_{j=n_min}^{n_max} cos(2π z/λ_j + α_j)`
/// with `λ_j = L_box / j` and phases drawn from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleSpec {
    pub epsilon: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub seed: u64,
}

impl SpeckleSpec {
    pub fn mode_count(&self) -> u32 {
        self.n_max.saturating_sub(self.n_min) + 1
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(format!("speckle amplitude must be >= 0, got {}", self.epsilon)));
        }
        if self.n_min < 1 || self.n_min > self.n_max {
            return Err(Error::param(format!(
                "speckle modes need 1 <= n_min <= n_max, got {}..={}",
                self.n_min, self.n_max
            )));
        }
        let shortest = grid.length() / self.n_max as f64;
        if shortest < MIN_WAVELENGTH {
            return Err(Error::param(format!(
                "n_max = {} gives wavelength {shortest} below the minimum {MIN_WAVELENGTH}",
                self.n_max
            )));
        }
        Ok(())
    }

    /// Random phases `α_j` for `j = n_min..=n_max`, in that order.
    pub fn phases(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.mode_count()).map(|_| rng.gen_range(0.0..TAU)).collect()
    }
}

/// Dimensional inputs that fix the 1D coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// 3D s-wave scattering length, m.
    pub scattering_length: f64,
    /// Axial trap frequency, rad/s.
    pub omega_z: f64,
    /// Transverse trap frequency, rad/s.
    pub omega_perp: f64,
    /// kg.
    pub atom_mass: f64,
    pub n_atoms: f64,
}

impl PhysicalParams {
    /// ⁸⁷Rb in the elongated trap used for the reference benchmark.
    pub fn rubidium_benchmark() -> Self {
        PhysicalParams {
            scattering_length: 5.7e-9,
            omega_z: TAU * 24.7,
            omega_perp: TAU * 293.0,
            atom_mass: RB87_MASS,
            n_atoms: 1e5,
        }
    }

    pub fn oscillator_length(&self) -> f64 {
        (HBAR / (self.atom_mass * self.omega_z)).sqrt()
    }

    /// True when the trap is elongated enough for the 1D reduction.
    pub fn is_quasi_1d(&self) -> bool {
        self.omega_perp / self.omega_z > QUASI_1D_RATIO
    }

    fn validate(&self) -> Result<()> {
        // The scattering length may be zero (ideal gas); everything else must be positive.
        let ok = self.scattering_length >= 0.0
            && self.omega_z > 0.0
            && self.omega_perp > 0.0
            && self.atom_mass > 0.0
            && self.n_atoms > 0.0;
        let finite = [
            self.scattering_length,
            self.omega_z,
            self.omega_perp,
            self.atom_mass,
            self.n_atoms,
        ]
        .iter()
        .all(|v| v.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::param(format!("invalid physical parameters {self:?}")))
        }
    }
}

/// `g_1D / (L_ho ħ ω_z)` with `g_1D = 2 a ħ ω_⊥`.
pub fn dimensionless_coupling(p: &PhysicalParams) -> Result<f64> {
    p.validate()?;
    Ok(2.0 * p.scattering_length * (p.omega_perp / p.omega_z) / p.oscillator_length())
}

pub fn trap_potential(grid: &Grid, trap: &TrapSpec) -> PotentialField {
    PotentialField::from_fn(*grid, |z| trap.eval(z))
}

pub fn speckle_potential(grid: &Grid, spec: &SpeckleSpec) -> Result<PotentialField> {
    spec.validate(grid)?;
    Ok(speckle_from_phases(grid, spec.epsilon, spec.n_min, &spec.phases()))
}

/// Cosine sum with explicit phases; mode `n_min + m` uses `phases[m]`.
pub fn speckle_from_phases(grid: &Grid, epsilon: f64, n_min: u32, phases: &[f64]) -> PotentialField {
    let base = TAU / grid.length();
    PotentialField::from_fn(*grid, |z| {
        let sum: f64 = phases
            .iter()
            .enumerate()
            .map(|(m, alpha)| (base * (n_min as f64 + m as f64) * z + alpha).cos())
            .sum();
        epsilon * sum
    })
}

/// Period of a classical particle released at rest from `z = center + amplitude`.
///
/// With `z = A sin θ` the turning-point singularity cancels and the period
/// becomes `4 ∫_0^{π/2} dθ / sqrt(1 + K A² (1 + sin² θ))`.
pub fn classical_period(trap: &TrapSpec, amplitude: f64) -> Result<f64> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::param(format!("oscillation amplitude must be positive, got {amplitude}")));
    }
    let ka2 = trap.quartic_k * amplitude * amplitude;
    if ka2 == 0.0 {
        return Ok(TAU);
    }
    let f = |theta: f64| {
        let s = theta.sin();
        (1.0 + ka2 * (1.0 + s * s)).sqrt().recip()
    };
    Ok(4.0 * adaptive_simpson(&f, 0.0, 0.5 * PI, 1e-13))
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)
            + recurse(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, (a, fa), (m, fm), (b, fb), whole, tol, 48)
}

/// Gross–Pitaevskii energy functional
/// `∫ ½|ψ'|² + V|ψ|² + ½ g |ψ|⁴ dz`, kinetic term evaluated spectrally.
pub fn gpe_energy(psi: &Wavefunction, potential: &PotentialField, g_eff: f64) -> Result<f64> {
    let mut spectral = Spectral::new(psi.grid());
    gpe_energy_with(&mut spectral, psi, potential, g_eff)
}

pub(crate) fn gpe_energy_with(
    spectral: &mut Spectral,
    psi: &Wavefunction,
    potential: &PotentialField,
    g_eff: f64,
) -> Result<f64> {
    Ok(energy_parts(spectral, psi, potential, g_eff)?.total())
}

/// Kinetic, potential and interaction contributions to the GP energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.interaction
    }

    /// `μ = E_kin + E_pot + 2 E_int` for a stationary state.
    pub fn chemical_potential(&self) -> f64 {
        self.kinetic + self.potential + 2.0 * self.interaction
    }
}

pub(crate) fn energy_parts(
    spectral: &mut Spectral,
    psi: &Wavefunction,
    potential: &PotentialField,
    g_eff: f64,
) -> Result<EnergyParts> {
    let grid = psi.grid();
    if grid != potential.grid() {
        return Err(Error::GridMismatch);
    }
    let dz = grid.spacing();
    let mut buf: Vec<Complex64> = psi.amplitudes().to_vec();
    spectral.forward(&mut buf);
    // Parseval: Σ|ψ_i|² dz = Σ|ψ̂_k|² dz / n.
    let kinetic: f64 = buf
        .iter()
        .zip(grid.wavenumbers())
        .map(|(c, k)| 0.5 * k * k * c.norm_sqr())
        .sum::<f64>()
        * dz
        * spectral.scale();
    let (pot, int) = psi
        .density()
        .zip(potential.values())
        .fold((0.0, 0.0), |(p, i), (d, v)| (p + v * d, i + d * d));
    Ok(EnergyParts {
        kinetic,
        potential: pot * dz,
        interaction: 0.5 * g_eff * int * dz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rubidium_coupling() {
        let p = PhysicalParams::rubidium_benchmark();
        let l = p.oscillator_length();
        assert!((l - 2.16e-6).abs() < 0.01e-6, "L_ho = {l}");
        let g = dimensionless_coupling(&p).unwrap();
        assert!((g - 0.063).abs() <= 0.001, "g = {g}");
        assert!(p.is_quasi_1d());
    }

    #[test]
    fn coupling_scaling() {
        let mut p = PhysicalParams::rubidium_benchmark();
        let g = dimensionless_coupling(&p).unwrap();
        p.omega_perp *= 2.0;
        assert_abs_diff_eq!(dimensionless_coupling(&p).unwrap(), 2.0 * g, epsilon = 1e-15);
        p.scattering_length = 0.0;
        assert_eq!(dimensionless_coupling(&p).unwrap(), 0.0);
        p.omega_z = -1.0;
        assert!(dimensionless_coupling(&p).is_err());
    }

    #[test]
    fn trap_values() {
        let harmonic = TrapSpec::new(0.0, 0.0).unwrap();
        assert_eq!(harmonic.eval(2.0), 2.0);
        let quartic = TrapSpec::new(0.05, 0.0).unwrap();
        assert_abs_diff_eq!(quartic.eval(3.0), 6.525, epsilon = 1e-12);
        let shifted = quartic.shifted(1.5);
        assert_eq!(shifted.eval(1.5), 0.0);
        assert!(TrapSpec::new(-0.1, 0.0).is_err());

        let grid = Grid::new(40.0, 1024).unwrap();
        let v = trap_potential(&grid, &TrapSpec::new(0.05, 2.5).unwrap());
        assert_eq!(v.min(), 0.0);
        let argmin = v
            .values()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(grid.node(argmin), 2.5);
    }

    #[test]
    fn speckle_zero_amplitude() {
        let grid = Grid::new(40.0, 1024).unwrap();
        let spec = SpeckleSpec { epsilon: 0.0, n_min: 1, n_max: 20, seed: 9 };
        let v = speckle_potential(&grid, &spec).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn speckle_single_mode() {
        let grid = Grid::new(40.0, 1024).unwrap();
        let v = speckle_from_phases(&grid, 0.3, 7, &[0.0]);
        for (z, val) in grid.nodes().zip(v.values()) {
            assert_abs_diff_eq!(*val, 0.3 * (TAU * z * 7.0 / 40.0).cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn speckle_is_reproducible_and_seed_dependent() {
        let grid = Grid::new(40.0, 1024).unwrap();
        let spec = SpeckleSpec { epsilon: 1e-5, n_min: 1, n_max: 20, seed: 42 };
        let a = speckle_potential(&grid, &spec).unwrap();
        let b = speckle_potential(&grid, &spec).unwrap();
        assert_eq!(a, b);
        let c = speckle_potential(&grid, &SpeckleSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn speckle_rejects_short_wavelengths() {
        let grid = Grid::new(40.0, 1024).unwrap();
        let bad = SpeckleSpec { epsilon: 1e-5, n_min: 1, n_max: 21, seed: 0 };
        assert!(speckle_potential(&grid, &bad).is_err());
        let inverted = SpeckleSpec { epsilon: 1e-5, n_min: 5, n_max: 4, seed: 0 };
        assert!(speckle_potential(&grid, &inverted).is_err());
        let zero = SpeckleSpec { epsilon: 1e-5, n_min: 0, n_max: 4, seed: 0 };
        assert!(speckle_potential(&grid, &zero).is_err());
    }

    #[test]
    fn speckle_ensemble_rms() {
        // Var of Σ_j cos(θ_j + α_j) with independent uniform α_j is N_w / 2.
        let grid = Grid::new(40.0, 16).unwrap();
        let n_seeds = 10_000u64;
        let (n_min, n_max) = (1u32, 20u32);
        let eps = 1e-3;
        for idx in [0usize, 5, 11] {
            let mean_sq: f64 = (0..n_seeds)
                .map(|seed| {
                    let v = speckle_potential(&grid, &SpeckleSpec { epsilon: eps, n_min, n_max, seed }).unwrap();
                    v.values()[idx].powi(2)
                })
                .sum::<f64>()
                / n_seeds as f64;
            let expected = eps * (20.0f64 / 2.0).sqrt();
            let rms = mean_sq.sqrt();
            assert!((rms / expected - 1.0).abs() < 0.05, "rms {rms} vs {expected}");
        }
    }

    /// Quarter period by direct integration of `z'' = -V'(z)` (RK4, then
    /// linear interpolation of the first zero crossing of z).
    fn period_by_integration(k: f64, a: f64) -> f64 {
        let force = |z: f64| -(z + 2.0 * k * z * z * z);
        let h = 1e-5;
        let (mut z, mut v, mut t) = (a, 0.0f64, 0.0);
        loop {
            let k1z = v;
            let k1v = force(z);
            let k2z = v + 0.5 * h * k1v;
            let k2v = force(z + 0.5 * h * k1z);
            let k3z = v + 0.5 * h * k2v;
            let k3v = force(z + 0.5 * h * k2z);
            let k4z = v + h * k3v;
            let k4v = force(z + h * k3z);
            let zn = z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
            let vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            if zn <= 0.0 {
                return 4.0 * (t + h * z / (z - zn));
            }
            z = zn;
            v = vn;
            t += h;
        }
    }

    #[test]
    fn period_matches_direct_integration() {
        let trap = TrapSpec::new(0.05, 0.0).unwrap();
        for a in [0.5, 2.0, 3.0, 4.0, 6.0] {
            let quad = classical_period(&trap, a).unwrap();
            let ode = period_by_integration(0.05, a);
            assert!((quad / ode - 1.0).abs() < 1e-6, "A={a}: {quad} vs {ode}");
        }
    }

    #[test]
    fn period_matches_agm_closed_form() {
        // ∫_0^{π/2} dθ / sqrt(p² cos²θ + q² sin²θ) = π / (2 AGM(p, q)).
        fn agm(mut a: f64, mut b: f64) -> f64 {
            for _ in 0..40 {
                let m = 0.5 * (a + b);
                b = (a * b).sqrt();
                a = m;
            }
            a
        }
        let trap = TrapSpec::new(0.05, 0.0).unwrap();
        for a in [1.0, 2.0, 3.0, 4.0, 10.0] {
            let ka2: f64 = 0.05 * a * a;
            let expected = TAU / agm((1.0 + ka2).sqrt(), (1.0 + 2.0 * ka2).sqrt());
            let got = classical_period(&trap, a).unwrap();
            assert!((got / expected - 1.0).abs() < 1e-10, "A={a}: {got} vs {expected}");
        }
    }

    #[test]
    fn period_harmonic_and_monotone() {
        let harmonic = TrapSpec::new(0.0, 0.0).unwrap();
        for a in [0.5, 1.0, 3.0, 5.0] {
            assert_eq!(classical_period(&harmonic, a).unwrap(), TAU);
        }
        let trap = TrapSpec::new(0.05, 0.0).unwrap();
        let periods: Vec<f64> = (1..40).map(|i| classical_period(&trap, 0.2 * i as f64).unwrap()).collect();
        assert!(periods.windows(2).all(|w| w[1] < w[0]));
        assert!(classical_period(&trap, 0.0).is_err());
        assert!(classical_period(&trap, -1.0).is_err());
    }

    #[test]
    fn harmonic_ground_energy() {
        let grid = Grid::new(40.0, 1024).unwrap();
        let psi = Wavefunction::gaussian(grid, 0.0, 1.0);
        let v = trap_potential(&grid, &TrapSpec::new(0.0, 0.0).unwrap());
        let e = gpe_energy(&psi, &v, 0.0).unwrap();
        assert_abs_diff_eq!(e, 0.5, epsilon = 1e-10);
        let shifted = gpe_energy(&psi, &v.clone().offset(2.5), 0.0).unwrap();
        assert_abs_diff_eq!(shifted - e, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn interaction_energy_of_gaussian() {
        // ∫|ψ|⁴ for the unit Gaussian is 1/sqrt(2π).
        let grid = Grid::new(40.0, 1024).unwrap();
        let psi = Wavefunction::gaussian(grid, 0.0, 1.0);
        let v = PotentialField::zeros(grid);
        let mut sp = Spectral::new(&grid);
        let parts = energy_parts(&mut sp, &psi, &v, 3.0).unwrap();
        assert_abs_diff_eq!(parts.interaction, 1.5 / TAU.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(parts.kinetic, 0.25, epsilon = 1e-12);
    }
}
