//! Executes a campaign: one echo run, a sweep of runs, or a ground state.

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use super::config::{CampaignConfig, Emit, FitWidth, Mode};
use super::output::{
    code_version, emit_curve_csv, emit_summary_json, portable_config, GroundStateReport, ManifestEntry,
    RunManifest, RunRecord, RunStatus, ScalingRecord, Summary, MANIFEST_FILE, SUMMARY_FILE,
};
use crate::analysis::{critical_time, fermi_fit, scaling_fit_epsilon, scaling_fit_natoms, MIN_ATOMS_FOR_LOG_REGIME};
use crate::checkpoint::Checkpoint;
use crate::echo::{prepare_ground_state, run_echo_from, run_echo_pairwise_stats, EchoConfig};
use crate::error::{Error, Result};
use crate::parallel::{Executor, Workers};
use crate::physics::{classical_period, trap_potential};
use crate::propagator::{half_length, thomas_fermi_density, GroundState};

/// Density level, relative to the peak, that marks the condensate edge.
pub const EDGE_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub manifest: RunManifest,
    pub summary: Summary,
    pub failures: usize,
}

/// Runs `config` and writes its artifacts into `config.output_dir`. Failed
/// runs are recorded and the campaign moves on; the error return is kept
/// for problems that stop the whole campaign (bad config, unwritable
/// directory).
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignOutcome> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let config = config.clone().resolved()?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let workers = Workers::new(config.workers.unwrap_or(1));
    let executor = Executor::new(workers);

    let mut summary = Summary {
        code_version: code_version(),
        config: portable_config(&config)?,
        master_seed: config.master_seed,
        ground_states: Vec::new(),
        runs: Vec::new(),
        scaling: None,
    };
    let mut entries = Vec::new();

    if config.mode == Mode::GroundStateOnly {
        let label = "ground-state".to_string();
        let (status, outputs) = match ground_state_run(&config, &dir) {
            Ok((report, outputs)) => {
                summary.ground_states.push(report);
                (RunStatus::Ok, outputs)
            }
            Err(e) => (RunStatus::Failed { error: e.to_string() }, Vec::new()),
        };
        entries.push(ManifestEntry { label, status, outputs });
    } else {
        let values: Vec<Option<f64>> = if config.mode.is_sweep() {
            config.sweep_values.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let mut cache: Option<(EchoConfig, GroundState)> = None;
        for value in values {
            let label = run_label(config.mode, value);
            let mut outputs = Vec::new();
            let record = match echo_run(&config, value, &label, &dir, &executor, &mut cache, &mut outputs) {
                Ok(rec) => rec,
                Err(e) => failed_record(&config, value, &label, e),
            };
            entries.push(ManifestEntry {
                label,
                status: record.status.clone(),
                outputs,
            });
            summary.runs.push(record);
        }
        summary.scaling = scaling(&config, &summary.runs);
    }

    let mut outputs: Vec<String> = entries.iter().flat_map(|e| e.outputs.iter().cloned()).collect();
    if config.emits(Emit::SummaryJson) {
        emit_summary_json(&summary, dir.join(SUMMARY_FILE))?;
        outputs.push(SUMMARY_FILE.into());
    }
    outputs.push(MANIFEST_FILE.into());
    let failures = entries
        .iter()
        .filter(|e| matches!(e.status, RunStatus::Failed { .. }))
        .count();
    let manifest = RunManifest {
        code_version: code_version(),
        master_seed: config.master_seed,
        started_unix: started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
        wall_seconds: clock.elapsed().as_secs_f64(),
        host_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        runs: entries,
        outputs,
        config,
    };
    manifest.write(&dir)?;
    Ok(CampaignOutcome {
        manifest,
        summary,
        failures,
    })
}

fn run_label(mode: Mode, value: Option<f64>) -> String {
    match (mode.parameter(), value) {
        (Some(p), Some(v)) => format!("{p}_{v:e}"),
        _ => "single".into(),
    }
}

fn file_name(prefix: &str, label: &str, ext: &str) -> String {
    if label == "single" {
        format!("{prefix}.{ext}")
    } else {
        format!("{prefix}_{label}.{ext}")
    }
}

fn checkpoint_of(ec: &EchoConfig, gs: &GroundState) -> Checkpoint {
    Checkpoint {
        grid: ec.grid,
        g_eff: ec.g_eff(),
        quartic_k: ec.trap.quartic_k,
        energy: gs.energy,
        time: 0.0,
        amplitudes: gs.psi.amplitudes().to_vec(),
    }
}

fn ground_state_run(config: &CampaignConfig, dir: &Path) -> Result<(GroundStateReport, Vec<String>)> {
    let ec = config.echo_config()?;
    let gs = prepare_ground_state(&ec)?;
    let mut outputs = Vec::new();
    let mut checkpoint = None;
    if config.emits(Emit::Checkpoints) {
        let name = "ground_state.ckpt".to_string();
        checkpoint_of(&ec, &gs).write(dir.join(&name))?;
        outputs.push(name.clone());
        checkpoint = Some(name);
    }
    let v = trap_potential(&ec.grid, &ec.trap);
    let tf_radius = if ec.g_eff() > 0.0 {
        let (density, _) = thomas_fermi_density(&v, ec.g_eff())?;
        ec.grid
            .nodes()
            .zip(&density)
            .filter(|(_, d)| **d > 0.0)
            .map(|(z, _)| z.abs())
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    let report = GroundStateReport {
        n_atoms: ec.n_atoms,
        g_eff: ec.g_eff(),
        energy: gs.energy,
        chemical_potential: gs.chemical_potential,
        half_length: half_length(&gs.psi, EDGE_FRACTION),
        thomas_fermi_radius: tf_radius,
        steps: gs.steps,
        checkpoint,
    };
    Ok((report, outputs))
}

fn base_record(config: &CampaignConfig, value: Option<f64>, label: &str) -> Result<(EchoConfig, RunRecord)> {
    let ec = config.echo_config_for(value)?;
    let record = RunRecord {
        label: label.into(),
        parameter: config.mode.parameter().map(String::from),
        value,
        epsilon: ec.speckle.epsilon,
        n_atoms: ec.n_atoms,
        displacement: ec.displacement,
        g_eff: ec.g_eff(),
        seeds: (0..ec.realizations).map(|j| ec.realization_seed(j)).collect(),
        status: RunStatus::Ok,
        tau_c_crossing: None,
        tau_c_fit: None,
        width: None,
        f_inf: None,
        residual_rms: None,
        width_was_fixed: None,
        fit_error: None,
        plateau_std: None,
        curve_csv: None,
    };
    Ok((ec, record))
}

fn failed_record(config: &CampaignConfig, value: Option<f64>, label: &str, e: Error) -> RunRecord {
    let status = RunStatus::Failed { error: e.to_string() };
    match base_record(config, value, label) {
        Ok((_, mut rec)) => {
            rec.status = status;
            rec
        }
        Err(_) => RunRecord {
            label: label.into(),
            parameter: config.mode.parameter().map(String::from),
            value,
            epsilon: f64::NAN,
            n_atoms: f64::NAN,
            displacement: f64::NAN,
            g_eff: f64::NAN,
            seeds: Vec::new(),
            status,
            tau_c_crossing: None,
            tau_c_fit: None,
            width: None,
            f_inf: None,
            residual_rms: None,
            width_was_fixed: None,
            fit_error: None,
            plateau_std: None,
            curve_csv: None,
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn echo_run(
    config: &CampaignConfig,
    value: Option<f64>,
    label: &str,
    dir: &Path,
    executor: &Executor,
    cache: &mut Option<(EchoConfig, GroundState)>,
    outputs: &mut Vec<String>,
) -> Result<RunRecord> {
    let (ec, mut record) = base_record(config, value, label)?;
    ec.validate()?;

    // The ground state only depends on the undisplaced clean trap, so sweeps
    // over ε or Δz share it.
    let reusable = cache.as_ref().is_some_and(|(c, _)| {
        c.grid == ec.grid && c.trap == ec.trap && c.g_eff() == ec.g_eff() && c.ground_state == ec.ground_state
    });
    if !reusable {
        let gs = prepare_ground_state(&ec)?;
        *cache = Some((ec.clone(), gs));
    }
    let gs = &cache.as_ref().expect("filled above").1;
    if config.emits(Emit::Checkpoints) {
        let name = file_name("ground_state", label, "ckpt");
        checkpoint_of(&ec, gs).write(dir.join(&name))?;
        outputs.push(name);
    }

    let curve = run_echo_from(&ec, gs, executor, None)?;
    let stats = run_echo_pairwise_stats(&curve)?;
    if config.emits(Emit::CurvesCsv) {
        let name = file_name("curve", label, "csv");
        emit_curve_csv(&curve, &stats.std, dir.join(&name))?;
        outputs.push(name.clone());
        record.curve_csv = Some(name);
    }

    let tau = critical_time(&curve.times, &curve.fidelity);
    record.tau_c_crossing = tau;
    let cutoff = tau.unwrap_or(f64::INFINITY);
    record.plateau_std = curve
        .times
        .iter()
        .zip(&stats.std)
        .filter(|(t, _)| **t < cutoff)
        .map(|(_, s)| *s)
        .reduce(f64::max);
    let width = match config.fit_width {
        FitWidth::Classical => Some(classical_period(&ec.trap, ec.displacement)?),
        FitWidth::Free => None,
        FitWidth::Fixed(w) => Some(w),
    };
    match fermi_fit(&curve.times, &curve.fidelity, width) {
        Ok(fit) => record.set_fit(&fit),
        Err(e) => record.fit_error = Some(e.to_string()),
    }
    Ok(record)
}

fn scaling(config: &CampaignConfig, runs: &[RunRecord]) -> Option<ScalingRecord> {
    let (parameter, abscissa) = match config.mode {
        Mode::SweepEpsilon => ("epsilon", "-ln epsilon"),
        Mode::SweepNatoms => ("n_atoms", "ln n_atoms"),
        _ => return None,
    };
    let records: Vec<(f64, f64)> = runs
        .iter()
        .filter(|r| r.status == RunStatus::Ok)
        .filter_map(|r| Some((r.value?, r.tau_c_crossing?)))
        .filter(|(v, _)| config.mode != Mode::SweepNatoms || *v >= MIN_ATOMS_FOR_LOG_REGIME)
        .collect();
    let fit = match config.mode {
        Mode::SweepEpsilon => scaling_fit_epsilon(&records),
        _ => scaling_fit_natoms(&records),
    };
    let (fit, error) = match fit {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Some(ScalingRecord {
        parameter: parameter.into(),
        abscissa: abscissa.into(),
        fit,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::output::read_curve_csv;

    fn tiny(mode: &str, extra: &str, dir: &Path) -> CampaignConfig {
        let text = format!(
            "mode = \"{mode}\"\nrealizations = 3\nn_atoms = 500.0\nepsilon = 1e-2\noutput_dir = {:?}\n{extra}\n\
             [grid]\npoints = 256\n[time]\ndt = 2e-3\nt_max = 1.0\nsample_interval = 0.2\n\
             [ground_state]\ndt_imag = 2e-3\nenergy_tol = 1e-10\n",
            dir.display()
        );
        CampaignConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn single_echo_writes_listed_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_campaign(&tiny("single-echo", "workers = 2", dir.path())).unwrap();
        assert_eq!(out.failures, 0);
        assert_eq!(out.summary.runs.len(), 1);
        let mut listed = out.manifest.outputs.clone();
        listed.sort();
        let mut present: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        present.sort();
        assert_eq!(listed, present);
        let table = read_curve_csv(dir.path().join("curve.csv")).unwrap();
        assert_eq!(table.times.len(), 6);
        assert!((table.fidelity[0] - 1.0).abs() < 1e-9);
        let rec = &out.summary.runs[0];
        assert_eq!(rec.seeds.len(), 3);
        assert!(rec.tau_c_crossing.is_none());
        assert!(rec.fit_error.is_some());
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
        assert!(json["runs"][0]["tau_c_crossing"].is_null());
        assert!(json["config"].get("workers").is_none());
    }

    #[test]
    fn failed_sweep_value_does_not_stop_campaign() {
        let dir = tempfile::tempdir().unwrap();
        // Passes validation, but the summed random potential overflows.
        let cfg = tiny("sweep-epsilon", "sweep_values = [1e-2, 1e-3, 1e308]", dir.path());
        let out = run_campaign(&cfg).unwrap();
        assert_eq!(out.summary.runs.len(), 3);
        assert_eq!(out.failures, 1);
        assert!(matches!(out.summary.runs[2].status, RunStatus::Failed { .. }));
        assert!(out.summary.scaling.as_ref().unwrap().error.is_some());
        assert!(dir.path().join("curve_epsilon_1e-2.csv").exists());
    }

    #[test]
    fn ground_state_only_reports_and_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_campaign(&tiny("ground-state-only", "", dir.path())).unwrap();
        let report = &out.summary.ground_states[0];
        assert!(report.half_length > 0.0 && report.thomas_fermi_radius > 0.0);
        let ckpt = Checkpoint::read(dir.path().join("ground_state.ckpt")).unwrap();
        assert_eq!(ckpt.energy.to_bits(), report.energy.to_bits());
    }
}
