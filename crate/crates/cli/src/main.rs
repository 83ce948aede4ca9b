use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gpe_echo::analysis::{critical_time, fermi_fit};
use gpe_echo::harness::output::RunStatus;
use gpe_echo::harness::{load_config, read_curve_csv, run_campaign, CampaignConfig, Mode};
use serde_json::json;

#[derive(Parser)]
#[command(name = "gpe-echo", version, about = "Fidelity decay of a trapped 1D condensate under random potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Concurrent realizations [default: $GPE_ECHO_WORKERS, else all cores]
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed, overriding the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the campaign described by a TOML config (or replay a manifest.json)
    Run { config: PathBuf },
    /// Compute and checkpoint the ground state only
    GroundState { config: PathBuf },
    /// Fit the Fermi-like decay to a curve CSV
    Fit {
        curve: PathBuf,
        /// Hold the width T fixed at this value
        #[arg(long = "fix-T", value_name = "T")]
        fix_t: Option<f64>,
    },
}

fn apply_overrides(mut config: CampaignConfig, cli: &Cli) -> CampaignConfig {
    if let Some(w) = cli.workers {
        config.workers = Some(w);
    }
    if let Some(s) = cli.seed {
        config.master_seed = s;
    }
    if let Some(o) = &cli.out {
        config.output_dir = o.clone();
    }
    config
}

fn campaign(cli: &Cli, path: &PathBuf, force_ground_state: bool) -> Result<ExitCode> {
    let mut config = load_config(path).with_context(|| format!("loading {}", path.display()))?;
    if force_ground_state {
        config.mode = Mode::GroundStateOnly;
    }
    let config = apply_overrides(config, cli);
    let out = run_campaign(&config)?;
    for gs in &out.summary.ground_states {
        println!(
            "ground state: E = {:.6}, mu = {:.6}, half-length = {:.3}, TF radius = {:.3} ({} steps)",
            gs.energy, gs.chemical_potential, gs.half_length, gs.thomas_fermi_radius, gs.steps
        );
    }
    for r in &out.summary.runs {
        match &r.status {
            RunStatus::Ok => println!(
                "{}: tau_c = {}, fit tau_c = {}, T = {}, f_inf = {}",
                r.label,
                opt(r.tau_c_crossing),
                opt(r.tau_c_fit),
                opt(r.width),
                opt(r.f_inf)
            ),
            RunStatus::Failed { error } => eprintln!("{}: failed: {error}", r.label),
        }
    }
    if let Some(s) = &out.summary.scaling {
        match &s.fit {
            Some(f) => println!("scaling vs {}: slope {:.4}, r^2 {:.4}", s.abscissa, f.slope, f.r_squared),
            None => println!("scaling vs {}: {}", s.abscissa, s.error.as_deref().unwrap_or("unavailable")),
        }
    }
    println!("wrote {} files to {}", out.manifest.outputs.len(), out.manifest.config.output_dir.display());
    Ok(if out.failures > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "not reached".into(), |x| format!("{x:.4}"))
}

fn fit(cli: &Cli, path: &PathBuf, fix_t: Option<f64>) -> Result<ExitCode> {
    let table = read_curve_csv(path).with_context(|| format!("reading {}", path.display()))?;
    let tau = critical_time(&table.times, &table.fidelity);
    let report = match fermi_fit(&table.times, &table.fidelity, fix_t) {
        Ok(f) => json!({
            "tau_c_crossing": tau,
            "tau_c_fit": f.tau_c,
            "T": f.width,
            "f_inf": f.f_inf,
            "residual_rms": f.residual_rms,
            "T_was_fixed": f.width_was_fixed,
        }),
        Err(e) => json!({
            "tau_c_crossing": tau,
            "tau_c_fit": null,
            "T": null,
            "f_inf": null,
            "residual_rms": null,
            "T_was_fixed": fix_t.is_some(),
            "error": e.to_string(),
        }),
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("fit.json"), &text)?;
    }
    Ok(if report.get("error").is_some() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => campaign(&cli, config, false),
        Command::GroundState { config } => campaign(&cli, config, true),
        Command::Fit { curve, fix_t } => fit(&cli, curve, *fix_t),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
