//! Split-step Fourier time evolution of the 1D Gross–Pitaevskii equation,
//! in real time and in imaginary time.
//!
//! The real-time scheme is Strang splitting: half a potential/nonlinear
//! phase kick, a full kinetic step in wavenumber space, then another half
//! kick using the updated density. A phase kick leaves `|ψ|²` unchanged, so
//! the nonlinear substep is solved exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{expectation_position, quadrature_norm, Grid, PotentialField, Wavefunction};
use crate::physics::{energy_parts, EnergyParts};
use crate::spectral::Spectral;

/// `k_max² dt / 2` for the Nyquist mode. Split-step integration of the
/// nonlinear equation goes unstable once this nears π while the spectrum
/// reaches the grid edge.
pub fn nyquist_phase(grid: &Grid, dt: f64) -> f64 {
    let k = std::f64::consts::PI / grid.spacing();
    0.5 * k * k * dt
}

fn is_below_cutoff(grid: &Grid, k: f64, fraction: f64) -> bool {
    k.abs() <= fraction * std::f64::consts::PI / grid.spacing()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveParams {
    pub dt: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    pub g_eff: f64,
}

impl EvolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sample_interval > 0.0) {
            return Err(Error::param("sample_interval must be positive"));
        }
        let ratio = self.sample_interval / self.dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::param(format!(
                "sample_interval {} is not an integer multiple of dt {}",
                self.sample_interval, self.dt
            )));
        }
        if !(self.t_max >= self.sample_interval) {
            return Err(Error::param("t_max must be at least sample_interval"));
        }
        if !self.g_eff.is_finite() {
            return Err(Error::param("g_eff must be finite"));
        }
        Ok(())
    }

    pub fn steps_per_sample(&self) -> u64 {
        (self.sample_interval / self.dt).round() as u64
    }

    /// Number of samples after `t = 0`: `floor(t_max / sample_interval)`.
    pub fn sample_count(&self) -> usize {
        (self.t_max / self.sample_interval * (1.0 + 1e-12)).floor() as usize
    }

    pub fn sample_time(&self, index: usize) -> f64 {
        index as f64 * self.sample_interval
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateParams {
    pub dt_imag: f64,
    pub energy_tol: f64,
    pub max_steps: u64,
}

impl Default for GroundStateParams {
    fn default() -> Self {
        GroundStateParams {
            dt_imag: 1e-3,
            energy_tol: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

impl GroundStateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_imag > 0.0 && self.dt_imag.is_finite()) {
            return Err(Error::param("dt_imag must be positive"));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::param("energy_tol must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Real-time stepper bound to one potential, coupling and time step.
///
/// Owns its FFT scratch, so one instance serves exactly one trajectory at a
/// time. Cloning is cheap relative to a propagation.
#[derive(Clone)]
pub struct Propagator {
    grid: Grid,
    spectral: Spectral,
    potential: Vec<f64>,
    /// `exp(-i k² dt / 2) / n`, zero above the cutoff; the inverse-FFT
    /// normalization is folded in.
    kinetic: Vec<Complex64>,
    g_eff: f64,
    dt: f64,
    steps_taken: u64,
}

impl Propagator {
    pub fn new(potential: &PotentialField, g_eff: f64, dt: f64) -> Result<Self> {
        Self::with_cutoff(potential, g_eff, dt, 1.0)
    }

    /// Like [`Propagator::new`], but modes above `fraction` of the Nyquist
    /// wavenumber are projected out on every step.
    pub fn with_cutoff(potential: &PotentialField, g_eff: f64, dt: f64, fraction: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {dt}")));
        }
        let grid = *potential.grid();
        let spectral = Spectral::new(&grid);
        let scale = spectral.scale();
        let kinetic = grid
            .wavenumbers()
            .map(|k| {
                if is_below_cutoff(&grid, k, fraction) {
                    Complex64::from_polar(scale, -0.5 * k * k * dt)
                } else {
                    Complex64::default()
                }
            })
            .collect();
        Ok(Propagator {
            grid,
            spectral,
            potential: potential.values().to_vec(),
            kinetic,
            g_eff,
            dt,
            steps_taken: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    #[inline]
    fn kick(&self, psi: &mut [Complex64], tau: f64) {
        let g = self.g_eff;
        for (a, v) in psi.iter_mut().zip(&self.potential) {
            let theta = -(v + g * a.norm_sqr()) * tau;
            let (s, c) = theta.sin_cos();
            *a *= Complex64::new(c, s);
        }
    }

    #[inline]
    fn drift(&mut self, psi: &mut [Complex64]) {
        self.spectral.forward(psi);
        for (a, k) in psi.iter_mut().zip(&self.kinetic) {
            *a *= k;
        }
        self.spectral.inverse_unnormalized(psi);
    }

    fn check(&self, psi: &Wavefunction) -> Result<()> {
        if psi.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// One Strang step.
    pub fn step(&mut self, psi: &mut Wavefunction) -> Result<()> {
        self.advance(psi, 1)
    }

    /// `n` Strang steps. Adjacent half kicks are fused into full kicks,
    /// which is exact because a kick does not change `|ψ|²`.
    pub fn advance(&mut self, psi: &mut Wavefunction, n: u64) -> Result<()> {
        self.check(psi)?;
        if n == 0 {
            return Ok(());
        }
        let dt = self.dt;
        let data = psi.amplitudes_mut();
        self.kick(data, 0.5 * dt);
        for i in 0..n {
            self.drift(data);
            let tau = if i + 1 == n { 0.5 * dt } else { dt };
            self.kick(data, tau);
        }
        self.steps_taken += n;
        if !psi.is_finite() {
            return Err(Error::NonFinite {
                steps: self.steps_taken,
            });
        }
        Ok(())
    }
}

/// One real-time Strang step of `psi` under `potential` and nonlinearity `g_eff`.
///
/// Builds FFT plans on every call; loops should hold a [`Propagator`].
pub fn step_realtime(
    psi: &Wavefunction,
    potential: &PotentialField,
    g_eff: f64,
    dt: f64,
) -> Result<Wavefunction> {
    if psi.grid() != potential.grid() {
        return Err(Error::GridMismatch);
    }
    let mut prop = Propagator::new(potential, g_eff, dt)?;
    let mut out = psi.clone();
    prop.step(&mut out)?;
    Ok(out)
}

/// Propagates `psi0` to `params.t_max`, calling `observe(t, ψ)` after every
/// `sample_interval` (not at `t = 0`). Returns the final state.
pub fn evolve(
    psi0: &Wavefunction,
    potential: &PotentialField,
    params: &EvolveParams,
    mut observe: impl FnMut(f64, &Wavefunction),
) -> Result<Wavefunction> {
    params.validate()?;
    if psi0.grid() != potential.grid() {
        return Err(Error::GridMismatch);
    }
    let mut prop = Propagator::new(potential, params.g_eff, params.dt)?;
    let mut psi = psi0.clone();
    let per_sample = params.steps_per_sample();
    for s in 1..=params.sample_count() {
        prop.advance(&mut psi, per_sample)?;
        observe(params.sample_time(s), &psi);
    }
    Ok(psi)
}

/// Observables sampled along a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub position: Vec<f64>,
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
}

impl Trajectory {
    /// Runs [`evolve`] recording `⟨z⟩`, GP energy and norm, including the initial state.
    pub fn record(
        psi0: &Wavefunction,
        potential: &PotentialField,
        params: &EvolveParams,
    ) -> Result<(Trajectory, Wavefunction)> {
        let mut spectral = Spectral::new(psi0.grid());
        let mut traj = Trajectory::default();
        let mut push = |t: f64, psi: &Wavefunction, spectral: &mut Spectral| -> Result<()> {
            traj.times.push(t);
            traj.position.push(expectation_position(psi));
            traj.energy
                .push(energy_parts(spectral, psi, potential, params.g_eff)?.total());
            traj.norm.push(quadrature_norm(psi));
            Ok(())
        };
        push(0.0, psi0, &mut spectral)?;
        let mut failure = None;
        let last = evolve(psi0, potential, params, |t, psi| {
            if failure.is_none() {
                if let Err(e) = push(t, psi, &mut spectral) {
                    failure = Some(e);
                }
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((traj, last))
    }
}

/// Converged imaginary-time ground state.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub psi: Wavefunction,
    pub energy: f64,
    pub chemical_potential: f64,
    pub steps: u64,
    /// GP energy after every imaginary-time step.
    pub energy_history: Vec<f64>,
}

/// Ground state of `potential` with nonlinearity `g_eff`, from the default
/// initial guess (Thomas–Fermi profile when interacting, Gaussian otherwise).
pub fn ground_state(
    grid: &Grid,
    potential: &PotentialField,
    g_eff: f64,
    params: &GroundStateParams,
) -> Result<GroundState> {
    if grid != potential.grid() {
        return Err(Error::GridMismatch);
    }
    let guess = initial_guess(potential, g_eff);
    ground_state_from(guess, potential, g_eff, params)
}

/// Imaginary-time relaxation from an explicit starting state.
pub fn ground_state_from(
    initial: Wavefunction,
    potential: &PotentialField,
    g_eff: f64,
    params: &GroundStateParams,
) -> Result<GroundState> {
    params.validate()?;
    let grid = *potential.grid();
    if initial.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if !g_eff.is_finite() {
        return Err(Error::param("g_eff must be finite"));
    }
    let dtau = params.dt_imag;
    let mut spectral = Spectral::new(&grid);
    let scale = spectral.scale();
    let kinetic: Vec<f64> = grid
        .wavenumbers()
        .map(|k| scale * (-0.5 * k * k * dtau).exp())
        .collect();
    // Shifting V by a constant only rescales ψ, which renormalization undoes.
    let v_min = potential.min();
    let shifted: Vec<f64> = potential.values().iter().map(|v| v - v_min).collect();
    let kick = |psi: &mut [Complex64], tau: f64| {
        for (a, v) in psi.iter_mut().zip(&shifted) {
            *a *= (-(v + g_eff * a.norm_sqr()) * tau).exp();
        }
    };

    let mut psi = initial;
    psi.normalize();
    let mut energy = energy_parts(&mut spectral, &psi, potential, g_eff)?.total();
    let mut history = Vec::new();
    let mut last_change = f64::INFINITY;
    for step in 1..=params.max_steps {
        let data = psi.amplitudes_mut();
        kick(data, 0.5 * dtau);
        spectral.forward(data);
        data.iter_mut().zip(&kinetic).for_each(|(a, k)| *a *= k);
        spectral.inverse_unnormalized(data);
        kick(data, 0.5 * dtau);
        psi.normalize();
        if !psi.is_finite() {
            return Err(Error::NonFinite { steps: step });
        }
        let parts = energy_parts(&mut spectral, &psi, potential, g_eff)?;
        let next = parts.total();
        history.push(next);
        last_change = (next - energy).abs() / next.abs().max(f64::MIN_POSITIVE);
        energy = next;
        if last_change < params.energy_tol {
            fix_global_phase(&mut psi);
            return Ok(GroundState {
                psi,
                energy,
                chemical_potential: parts.chemical_potential(),
                steps: step,
                energy_history: history,
            });
        }
    }
    Err(Error::NotConverged {
        steps: params.max_steps,
        last_change,
    })
}

/// Rotates `psi` so that its value at `z = 0` is real and positive.
fn fix_global_phase(psi: &mut Wavefunction) {
    let c = psi.amplitudes()[psi.grid().center_index()];
    if c.norm() > 0.0 {
        psi.scale(c.conj() / c.norm());
    }
}

/// Thomas–Fermi density `max(0, μ - V) / g` with `μ` fixed by unit norm.
pub fn thomas_fermi_density(potential: &PotentialField, g_eff: f64) -> Result<(Vec<f64>, f64)> {
    if !(g_eff > 0.0) {
        return Err(Error::param("Thomas-Fermi profile needs g_eff > 0"));
    }
    let dz = potential.grid().spacing();
    let v = potential.values();
    let norm = |mu: f64| v.iter().map(|&x| (mu - x).max(0.0)).sum::<f64>() * dz / g_eff;
    let mut lo = potential.min();
    let mut hi = lo + 1.0;
    while norm(hi) < 1.0 {
        hi = lo + 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let density = v.iter().map(|&x| (mu - x).max(0.0) / g_eff).collect();
    Ok((density, mu))
}

fn initial_guess(potential: &PotentialField, g_eff: f64) -> Wavefunction {
    let grid = *potential.grid();
    let v = potential.values();
    let argmin = v
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(grid.center_index());
    let gaussian = Wavefunction::gaussian(grid, grid.node(argmin), 1.0);
    let mut psi = match thomas_fermi_density(potential, g_eff) {
        Ok((density, _)) if g_eff > 1.0 => {
            // A small Gaussian admixture keeps the tails non-zero.
            let amps = density
                .iter()
                .zip(gaussian.amplitudes())
                .map(|(d, g)| Complex64::new(d.sqrt(), 0.0) + 1e-3 * g)
                .collect();
            Wavefunction::new(grid, amps).expect("length matches grid")
        }
        _ => gaussian,
    };
    psi.normalize();
    psi
}

/// `EnergyParts` of a state, building a temporary transform.
pub fn energy_breakdown(psi: &Wavefunction, potential: &PotentialField, g_eff: f64) -> Result<EnergyParts> {
    let mut spectral = Spectral::new(psi.grid());
    energy_parts(&mut spectral, psi, potential, g_eff)
}

/// Distance from the center beyond which the density stays below
/// `fraction` of its peak, taken as the larger of the two sides.
pub fn half_length(psi: &Wavefunction, fraction: f64) -> f64 {
    let grid = psi.grid();
    let density: Vec<f64> = psi.density().collect();
    let peak = density.iter().copied().fold(0.0, f64::max);
    let threshold = fraction * peak;
    let first = density.iter().position(|&d| d >= threshold).unwrap_or(0);
    let last = density.iter().rposition(|&d| d >= threshold).unwrap_or(0);
    let c = grid.center_index();
    let left = grid.node(c) - grid.node(first);
    let right = grid.node(last) - grid.node(c);
    left.max(right)
}
