//! Campaign configuration files.
//!
//! TOML, order-insensitive, unknown keys rejected. Every key except `mode`
//! has a default; the defaults reproduce the reference benchmark.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::echo::{EchoConfig, SpeckleTemplate};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::physics::{dimensionless_coupling, PhysicalParams, TrapSpec, RB87_MASS};
use crate::propagator::GroundStateParams;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GPE_ECHO_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SingleEcho,
    SweepEpsilon,
    SweepNatoms,
    SweepDisplacement,
    GroundStateOnly,
}

impl Mode {
    pub fn is_sweep(self) -> bool {
        matches!(self, Mode::SweepEpsilon | Mode::SweepNatoms | Mode::SweepDisplacement)
    }

    /// Name of the swept parameter.
    pub fn parameter(self) -> Option<&'static str> {
        match self {
            Mode::SweepEpsilon => Some("epsilon"),
            Mode::SweepNatoms => Some("n_atoms"),
            Mode::SweepDisplacement => Some("displacement"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Emit {
    CurvesCsv,
    SummaryJson,
    Checkpoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub length: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeckleSection {
    pub n_min: u32,
    pub n_max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    /// Kinetic cutoff as a fraction of the Nyquist wavenumber.
    pub k_cutoff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroundStateSection {
    pub dt_imag: f64,
    pub energy_tol: f64,
    pub max_steps: u64,
}

/// Dimensional trap and atom data. When present and `coupling` is not set,
/// ĝ is computed from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub scattering_length: f64,
    pub omega_z: f64,
    pub omega_perp: f64,
    #[serde(default = "rb87")]
    pub atom_mass: f64,
}

fn rb87() -> f64 {
    RB87_MASS
}

/// How the Fermi fit treats the width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitWidth {
    /// Fixed to the classical period at the run's displacement.
    Classical,
    Free,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub mode: Mode,
    pub epsilon: f64,
    pub displacement: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub quartic_k: f64,
    pub n_atoms: f64,
    /// ĝ; `None` means "from `[physical]`", or 0.063 without it.
    pub coupling: Option<f64>,
    pub sweep_values: Vec<f64>,
    /// `None` means the `GPE_ECHO_WORKERS` variable, else all cores.
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub emit: Vec<Emit>,
    pub fit_width: FitWidth,
    pub grid: GridSection,
    pub speckle: SpeckleSection,
    pub time: TimeSection,
    pub ground_state: GroundStateSection,
    pub physical: Option<PhysicalSection>,
}

const DEFAULT_COUPLING: f64 = 0.063;

impl Default for CampaignConfig {
    fn default() -> Self {
        let b = EchoConfig::benchmark(1e-5);
        CampaignConfig {
            mode: Mode::SingleEcho,
            epsilon: b.speckle.epsilon,
            displacement: b.displacement,
            realizations: b.realizations,
            master_seed: b.master_seed,
            quartic_k: b.trap.quartic_k,
            n_atoms: b.n_atoms,
            coupling: None,
            sweep_values: Vec::new(),
            workers: None,
            output_dir: PathBuf::from("out"),
            emit: vec![Emit::CurvesCsv, Emit::SummaryJson, Emit::Checkpoints],
            fit_width: FitWidth::Classical,
            grid: GridSection::default(),
            speckle: SpeckleSection::default(),
            time: TimeSection::default(),
            ground_state: GroundStateSection::default(),
            physical: None,
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        let g = EchoConfig::benchmark(0.0).grid;
        GridSection { length: g.length(), points: g.points() }
    }
}

impl Default for SpeckleSection {
    fn default() -> Self {
        let s = EchoConfig::benchmark(0.0).speckle;
        SpeckleSection { n_min: s.n_min, n_max: s.n_max }
    }
}

impl Default for TimeSection {
    fn default() -> Self {
        let b = EchoConfig::benchmark(0.0);
        TimeSection {
            dt: b.dt,
            t_max: b.t_max,
            sample_interval: b.sample_interval,
            k_cutoff: b.k_cutoff,
        }
    }
}

impl Default for GroundStateSection {
    fn default() -> Self {
        let g = GroundStateParams::default();
        GroundStateSection {
            dt_imag: g.dt_imag,
            energy_tol: g.energy_tol,
            max_steps: g.max_steps,
        }
    }
}

/// Worker count from `GPE_ECHO_WORKERS`, else the number of available cores.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

impl CampaignConfig {
    /// Parses TOML text. Missing keys take their defaults; `mode` is required.
    pub fn from_toml(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("empty configuration".into()));
        }
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if !table.contains_key("mode") {
            return Err(Error::Config("missing required key `mode`".into()));
        }
        let config: CampaignConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Fills in everything left to the environment (coupling, workers) so
    /// the result can be written to a manifest and replayed.
    pub fn resolved(mut self) -> Result<Self> {
        if self.coupling.is_none() {
            self.coupling = Some(match &self.physical {
                Some(p) => dimensionless_coupling(&PhysicalParams {
                    scattering_length: p.scattering_length,
                    omega_z: p.omega_z,
                    omega_perp: p.omega_perp,
                    atom_mass: p.atom_mass,
                    n_atoms: self.n_atoms,
                })?,
                None => DEFAULT_COUPLING,
            });
        }
        if self.workers.is_none() {
            self.workers = Some(default_workers());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode.is_sweep() && self.sweep_values.is_empty() {
            return Err(Error::Config(format!("mode {:?} needs non-empty sweep_values", self.mode)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.emit.is_empty() {
            return Err(Error::Config("emit must name at least one output".into()));
        }
        if let FitWidth::Fixed(w) = self.fit_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("fit width must be positive, got {w}")));
            }
        }
        match self.mode {
            Mode::GroundStateOnly => self.echo_config()?.validate(),
            _ => {
                let values: Vec<Option<f64>> = if self.mode.is_sweep() {
                    self.sweep_values.iter().copied().map(Some).collect()
                } else {
                    vec![None]
                };
                for v in values {
                    self.echo_config_for(v)?.validate().map_err(|e| match v {
                        Some(v) => Error::Config(format!("sweep value {v}: {e}")),
                        None => Error::Config(e.to_string()),
                    })?;
                }
                Ok(())
            }
        }
    }

    pub fn emits(&self, what: Emit) -> bool {
        self.emit.contains(&what)
    }

    /// Base experiment, before any sweep override.
    pub fn echo_config(&self) -> Result<EchoConfig> {
        self.echo_config_for(None)
    }

    /// Experiment for one sweep value (`None`: the base configuration).
    pub fn echo_config_for(&self, sweep_value: Option<f64>) -> Result<EchoConfig> {
        let grid = Grid::new(self.grid.length, self.grid.points).map_err(|e| Error::Config(e.to_string()))?;
        let mut c = EchoConfig {
            grid,
            trap: TrapSpec::new(self.quartic_k, 0.0)?,
            displacement: self.displacement,
            speckle: SpeckleTemplate {
                epsilon: self.epsilon,
                n_min: self.speckle.n_min,
                n_max: self.speckle.n_max,
            },
            realizations: self.realizations,
            master_seed: self.master_seed,
            coupling: self.coupling.unwrap_or(DEFAULT_COUPLING),
            n_atoms: self.n_atoms,
            dt: self.time.dt,
            t_max: self.time.t_max,
            sample_interval: self.time.sample_interval,
            ground_state: GroundStateParams {
                dt_imag: self.ground_state.dt_imag,
                energy_tol: self.ground_state.energy_tol,
                max_steps: self.ground_state.max_steps,
            },
            k_cutoff: self.time.k_cutoff,
            keep_pairs: true,
        };
        if let (Some(v), Some(p)) = (sweep_value, self.mode.parameter()) {
            match p {
                "epsilon" => c.speckle.epsilon = v,
                "n_atoms" => c.n_atoms = v,
                _ => c.displacement = v,
            }
        }
        Ok(c)
    }
}

/// Reads a campaign from a TOML config, or from a manifest written by an
/// earlier run (`.json`), whose resolved config is replayed verbatim.
pub fn load_config(path: impl AsRef<Path>) -> Result<CampaignConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: super::output::RunManifest = serde_json::from_str(&text)?;
        manifest.config.validate()?;
        return Ok(manifest.config);
    }
    CampaignConfig::from_toml(&text)
}
