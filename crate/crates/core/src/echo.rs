//! The fidelity experiment: prepare the ground state, displace the trap,
//! evolve an ensemble of realizations of the random potential, and average
//! the overlaps of every unordered pair.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::grid::{expectation_position, inner_product, Grid, PotentialField, Wavefunction};
use crate::parallel::Executor;
use crate::physics::{speckle_potential, trap_potential, SpeckleSpec, TrapSpec};
use crate::propagator::{ground_state, EvolveParams, GroundState, GroundStateParams, Propagator};

/// Random-potential parameters shared by all realizations; only the seed differs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleTemplate {
    pub epsilon: f64,
    pub n_min: u32,
    pub n_max: u32,
}

impl SpeckleTemplate {
    pub fn with_seed(&self, seed: u64) -> SpeckleSpec {
        SpeckleSpec {
            epsilon: self.epsilon,
            n_min: self.n_min,
            n_max: self.n_max,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoConfig {
    pub grid: Grid,
    /// Trap before the displacement (the ground state is computed here).
    pub trap: TrapSpec,
    pub displacement: f64,
    pub speckle: SpeckleTemplate,
    pub realizations: usize,
    pub master_seed: u64,
    /// Dimensionless 1D coupling ĝ.
    pub coupling: f64,
    pub n_atoms: f64,
    pub dt: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    pub ground_state: GroundStateParams,
    /// Kinetic-step cutoff as a fraction of the Nyquist wavenumber (`1.0`: none).
    pub k_cutoff: f64,
    /// Keep every partial fidelity `F_ij(t)` in the curve.
    pub keep_pairs: bool,
}

impl EchoConfig {
    /// Reference benchmark: Δz = 3, N_A = 10⁵, ĝ = 0.063, K = 0.05, 11
    /// realizations of 20 modes.
    ///
    /// The displaced condensate carries momenta up to |k| ≈ 75, so the grid
    /// has 2048 points (Nyquist 161) and dt = 1e-4 keeps `k² dt / 2` well
    /// below π. On 1024 points the spectrum piles up at the grid edge and the
    /// collapse comes about twice too early; at dt = 1e-3 it is immediate.
    pub fn benchmark(epsilon: f64) -> Self {
        EchoConfig {
            grid: Grid::new(40.0, 2048).expect("valid grid"),
            trap: TrapSpec { quartic_k: 0.05, center: 0.0 },
            displacement: 3.0,
            speckle: SpeckleTemplate { epsilon, n_min: 1, n_max: 20 },
            realizations: 11,
            master_seed: 1,
            coupling: 0.063,
            n_atoms: 1e5,
            dt: 1e-4,
            t_max: 60.0,
            sample_interval: 0.1,
            ground_state: GroundStateParams::default(),
            k_cutoff: 1.0,
            keep_pairs: true,
        }
    }

    pub fn g_eff(&self) -> f64 {
        self.coupling * self.n_atoms
    }

    pub fn evolve_params(&self) -> EvolveParams {
        EvolveParams {
            dt: self.dt,
            t_max: self.t_max,
            sample_interval: self.sample_interval,
            g_eff: self.g_eff(),
        }
    }

    pub fn pair_count(&self) -> usize {
        self.realizations * self.realizations.saturating_sub(1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations < 2 {
            return Err(Error::param(format!(
                "need at least 2 realizations, got {}",
                self.realizations
            )));
        }
        if !(self.displacement >= 0.0 && self.displacement.is_finite()) {
            return Err(Error::param(format!(
                "displacement must be >= 0, got {}",
                self.displacement
            )));
        }
        if !(self.coupling >= 0.0 && self.n_atoms >= 0.0 && self.g_eff().is_finite()) {
            return Err(Error::param("coupling and atom number must be non-negative"));
        }
        TrapSpec::new(self.trap.quartic_k, self.trap.center)?;
        self.speckle.with_seed(0).validate(&self.grid)?;
        self.evolve_params().validate()?;
        self.ground_state.validate()
    }

    /// Seed of realization `j`.
    pub fn realization_seed(&self, j: usize) -> u64 {
        realization_seed(self.master_seed, j)
    }
}

/// SplitMix64 output `j + 1` of the stream started at `master`: the seed of
/// realization `j` depends only on `(master, j)`.
pub fn realization_seed(master: u64, j: usize) -> u64 {
    const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut z = master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(j as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Ensemble-averaged fidelity time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoCurve {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub amplitude_fidelity: Vec<f64>,
    /// Ensemble mean of `⟨z⟩`.
    pub mean_position: Vec<f64>,
    /// `per_pair[t][p]`: partial fidelity of pair `p` (see [`pair_list`]) at sample `t`.
    pub per_pair: Option<Vec<Vec<f64>>>,
    pub n_pairs: usize,
}

impl EchoCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// A curve with only times and `F` (e.g. read back from CSV).
    pub fn from_series(times: Vec<f64>, fidelity: Vec<f64>) -> Self {
        let n = times.len();
        EchoCurve {
            times,
            amplitude_fidelity: fidelity.clone(),
            fidelity,
            mean_position: vec![0.0; n],
            per_pair: None,
            n_pairs: 0,
        }
    }
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &Wavefunction, b: &Wavefunction) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

/// `(Σ |a_i| |b_i| dz)²`, blind to phases.
pub fn amplitude_fidelity(a: &Wavefunction, b: &Wavefunction) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let s: f64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.norm() * y.norm())
        .sum();
    let s = s * a.grid().spacing();
    Ok(s * s)
}

/// Unordered pairs `(i, j)`, `i < j`, in row-major order.
pub fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Optional on-disk copies of the realization states.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSpill {
    pub dir: PathBuf,
    /// Write every `every`-th sample (including `t = 0`).
    pub every: usize,
}

impl SnapshotSpill {
    pub fn path(&self, realization: usize, sample: usize) -> PathBuf {
        self.dir
            .join(format!("realization_{realization:03}_sample_{sample:06}.ckpt"))
    }
}

struct Realization {
    psi: Wavefunction,
    prop: Propagator,
    moduli: Vec<f64>,
}

impl Realization {
    fn refresh_moduli(&mut self) {
        self.moduli.clear();
        self.moduli
            .extend(self.psi.amplitudes().iter().map(|a| a.norm()));
    }
}

/// Runs the full protocol, preparing the ground state first.
pub fn run_echo(config: &EchoConfig, executor: &Executor) -> Result<EchoCurve> {
    config.validate()?;
    let gs = prepare_ground_state(config)?;
    run_echo_from(config, &gs, executor, None)
}

/// Ground state of the undisplaced, unperturbed trap.
pub fn prepare_ground_state(config: &EchoConfig) -> Result<GroundState> {
    let v = trap_potential(&config.grid, &config.trap);
    ground_state(&config.grid, &v, config.g_eff(), &config.ground_state)
}

/// Runs the protocol from an already prepared ground state.
pub fn run_echo_from(
    config: &EchoConfig,
    initial: &GroundState,
    executor: &Executor,
    spill: Option<&SnapshotSpill>,
) -> Result<EchoCurve> {
    config.validate()?;
    if initial.psi.grid() != &config.grid {
        return Err(Error::GridMismatch);
    }
    let params = config.evolve_params();
    let trap = trap_potential(&config.grid, &config.trap.shifted(config.displacement));
    let g_eff = config.g_eff();

    let seeds: Vec<u64> = (0..config.realizations)
        .map(|j| config.realization_seed(j))
        .collect();
    let built: Vec<Result<Realization>> = executor.map(&seeds, |_, &seed| {
        let speckle = speckle_potential(&config.grid, &config.speckle.with_seed(seed))?;
        let v: PotentialField = trap.add(&speckle)?;
        let mut r = Realization {
            psi: initial.psi.clone(),
            prop: Propagator::with_cutoff(&v, g_eff, params.dt, config.k_cutoff)?,
            moduli: Vec::with_capacity(config.grid.points()),
        };
        r.refresh_moduli();
        Ok(r)
    });
    let mut ensemble = built.into_iter().collect::<Result<Vec<_>>>()?;

    if let Some(spill) = spill {
        std::fs::create_dir_all(&spill.dir).map_err(|e| Error::io(&spill.dir, e))?;
    }

    let pairs = pair_list(config.realizations);
    let samples = params.sample_count() + 1;
    let mut curve = EchoCurve {
        times: Vec::with_capacity(samples),
        fidelity: Vec::with_capacity(samples),
        amplitude_fidelity: Vec::with_capacity(samples),
        mean_position: Vec::with_capacity(samples),
        per_pair: config.keep_pairs.then(|| Vec::with_capacity(samples)),
        n_pairs: pairs.len(),
    };
    let per_sample = params.steps_per_sample();
    for s in 0..samples {
        if s > 0 {
            executor.for_each_mut(&mut ensemble, |_, r| {
                r.prop.advance(&mut r.psi, per_sample)?;
                r.refresh_moduli();
                Ok(())
            })?;
        }
        if let Some(spill) = spill {
            if s % spill.every.max(1) == 0 {
                write_snapshots(config, &ensemble, spill, s, params.sample_time(s))?;
            }
        }
        record_sample(&mut curve, &ensemble, &pairs, executor, params.sample_time(s))?;
    }
    Ok(curve)
}

fn record_sample(
    curve: &mut EchoCurve,
    ensemble: &[Realization],
    pairs: &[(usize, usize)],
    executor: &Executor,
    t: f64,
) -> Result<()> {
    let dz = ensemble[0].psi.grid().spacing();
    let overlaps: Vec<Result<(f64, f64)>> = executor.map(pairs, |_, &(i, j)| {
        let (a, b) = (&ensemble[i], &ensemble[j]);
        let f = fidelity(&a.psi, &b.psi)?;
        let s: f64 = a.moduli.iter().zip(&b.moduli).map(|(x, y)| x * y).sum::<f64>() * dz;
        Ok((f, s * s))
    });
    let overlaps = overlaps.into_iter().collect::<Result<Vec<_>>>()?;
    let m = overlaps.len() as f64;
    let f_mean = overlaps.iter().map(|o| o.0).sum::<f64>() / m;
    let fa_mean = overlaps.iter().map(|o| o.1).sum::<f64>() / m;
    let z_mean = ensemble
        .iter()
        .map(|r| expectation_position(&r.psi))
        .sum::<f64>()
        / ensemble.len() as f64;
    curve.times.push(t);
    curve.fidelity.push(f_mean);
    curve.amplitude_fidelity.push(fa_mean);
    curve.mean_position.push(z_mean);
    if let Some(per_pair) = curve.per_pair.as_mut() {
        per_pair.push(overlaps.iter().map(|o| o.0).collect());
    }
    Ok(())
}

fn write_snapshots(
    config: &EchoConfig,
    ensemble: &[Realization],
    spill: &SnapshotSpill,
    sample: usize,
    t: f64,
) -> Result<()> {
    for (j, r) in ensemble.iter().enumerate() {
        let ckpt = Checkpoint {
            grid: config.grid,
            g_eff: config.g_eff(),
            quartic_k: config.trap.quartic_k,
            energy: f64::NAN,
            time: t,
            amplitudes: r.psi.amplitudes().to_vec(),
        };
        ckpt.write(spill.path(j, sample))?;
    }
    Ok(())
}

/// Spread of the partial fidelities across pairs at each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseStats {
    /// Population standard deviation over the pairs.
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Only one pair exists (N = 2): the spread carries no information.
    pub single_pair: bool,
}

pub fn run_echo_pairwise_stats(curve: &EchoCurve) -> Result<PairwiseStats> {
    let per_pair = curve.per_pair.as_ref().ok_or(Error::PairsUnavailable)?;
    let mut stats = PairwiseStats {
        std: Vec::with_capacity(per_pair.len()),
        min: Vec::with_capacity(per_pair.len()),
        max: Vec::with_capacity(per_pair.len()),
        single_pair: curve.n_pairs == 1,
    };
    for row in per_pair {
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        stats.std.push(var.sqrt());
        stats.min.push(row.iter().copied().fold(f64::INFINITY, f64::min));
        stats.max.push(row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::Workers;
    use crate::physics::TrapSpec;
    use crate::propagator::evolve;
    use num_complex::Complex64;

    fn small_config(epsilon: f64) -> EchoConfig {
        EchoConfig {
            grid: Grid::new(40.0, 256).unwrap(),
            trap: TrapSpec { quartic_k: 0.05, center: 0.0 },
            displacement: 3.0,
            speckle: SpeckleTemplate { epsilon, n_min: 1, n_max: 20 },
            realizations: 4,
            master_seed: 7,
            coupling: 0.063,
            n_atoms: 500.0,
            dt: 2e-3,
            t_max: 2.0,
            sample_interval: 0.2,
            ground_state: GroundStateParams { dt_imag: 2e-3, energy_tol: 1e-10, max_steps: 100_000 },
            k_cutoff: 1.0,
            keep_pairs: true,
        }
    }

    #[test]
    fn fidelity_basics() {
        let g = Grid::new(40.0, 512).unwrap();
        let psi = Wavefunction::gaussian(g, 0.5, 1.2);
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-12);
        let mut rotated = psi.clone();
        rotated.scale(Complex64::from_polar(1.0, 2.1));
        assert!((fidelity(&psi, &rotated).unwrap() - 1.0).abs() < 1e-12);

        let chirped = Wavefunction::from_fn(g, |z| {
            psi.amplitudes()[((z + 20.0) / g.spacing()).round() as usize] * Complex64::from_polar(1.0, 0.3 * z * z)
        });
        assert!((amplitude_fidelity(&psi, &chirped).unwrap() - 1.0).abs() < 1e-12);
        assert!(amplitude_fidelity(&psi, &chirped).unwrap() >= fidelity(&psi, &chirped).unwrap());
        assert!(fidelity(&psi, &chirped).unwrap() < 0.9);
    }

    #[test]
    fn constant_offset_is_invisible() {
        let g = Grid::new(40.0, 512).unwrap();
        let v = trap_potential(&g, &TrapSpec::new(0.05, 1.0).unwrap());
        let psi0 = Wavefunction::gaussian(g, 0.0, 1.0);
        let params = EvolveParams { dt: 1e-3, t_max: 3.0, sample_interval: 0.5, g_eff: 0.0 };
        let mut a = Vec::new();
        evolve(&psi0, &v, &params, |_, p| a.push(p.clone())).unwrap();
        let mut b = Vec::new();
        evolve(&psi0, &v.clone().offset(0.75), &params, |_, p| b.push(p.clone())).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((fidelity(x, y).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..11).map(|j| realization_seed(1, j)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 11);
        assert_eq!(realization_seed(1, 3), seeds[3]);
        assert_ne!(realization_seed(2, 3), seeds[3]);
    }

    #[test]
    fn pair_count() {
        assert_eq!(pair_list(11).len(), 55);
        assert_eq!(pair_list(2), vec![(0, 1)]);
        assert_eq!(EchoConfig::benchmark(1e-5).pair_count(), 55);
    }

    #[test]
    fn unperturbed_ensemble_stays_identical() {
        let cfg = small_config(0.0);
        let curve = run_echo(&cfg, &Executor::new(Workers::serial())).unwrap();
        assert_eq!(curve.len(), 11);
        for f in &curve.fidelity {
            assert!((f - 1.0).abs() < 1e-9);
        }
        let stats = run_echo_pairwise_stats(&curve).unwrap();
        assert!(stats.std.iter().all(|&s| s < 1e-14));
    }

    #[test]
    fn curve_invariants_and_determinism() {
        let cfg = small_config(1e-2);
        let a = run_echo(&cfg, &Executor::new(Workers::serial())).unwrap();
        let b = run_echo(&cfg, &Executor::new(Workers::new(3))).unwrap();
        assert_eq!(a, b);
        assert!((a.fidelity[0] - 1.0).abs() < 1e-9);
        assert_eq!(a.n_pairs, 6);
        for (f, fa) in a.fidelity.iter().zip(&a.amplitude_fidelity) {
            assert!(*f <= 1.0 + 1e-9 && *f >= 0.0);
            assert!(*fa >= f - 1e-9);
        }
        assert!(a.fidelity.last().unwrap() < &1.0);
    }

    #[test]
    fn pairwise_symmetry() {
        let g = Grid::new(40.0, 256).unwrap();
        let a = Wavefunction::gaussian(g, 0.2, 1.0);
        let mut b = Wavefunction::gaussian(g, -0.4, 1.5);
        b.scale(Complex64::from_polar(1.0, 0.4));
        assert_eq!(fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
        assert_eq!(amplitude_fidelity(&a, &b).unwrap(), amplitude_fidelity(&b, &a).unwrap());
    }

    #[test]
    fn two_realizations_flagged() {
        let mut cfg = small_config(1e-2);
        cfg.realizations = 2;
        cfg.t_max = 0.4;
        let curve = run_echo(&cfg, &Executor::new(Workers::serial())).unwrap();
        assert_eq!(curve.n_pairs, 1);
        let stats = run_echo_pairwise_stats(&curve).unwrap();
        assert!(stats.single_pair);
        assert!(stats.std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn config_errors() {
        let mut cfg = small_config(1e-2);
        cfg.realizations = 1;
        assert!(run_echo(&cfg, &Executor::new(Workers::serial())).is_err());
        let mut cfg = small_config(1e-2);
        cfg.displacement = -1.0;
        assert!(cfg.validate().is_err());
        let curve = EchoCurve::from_series(vec![0.0], vec![1.0]);
        assert!(matches!(run_echo_pairwise_stats(&curve), Err(Error::PairsUnavailable)));
    }
}
