use gpe_echo::checkpoint::{Checkpoint, FORMAT_VERSION};
use gpe_echo::echo::{prepare_ground_state, run_echo_from, EchoConfig};
use gpe_echo::grid::Grid;
use gpe_echo::parallel::{Executor, Workers};
use gpe_echo::propagator::GroundStateParams;

fn small() -> EchoConfig {
    let mut c = EchoConfig::benchmark(1e-3);
    c.grid = Grid::new(40.0, 512).unwrap();
    c.n_atoms = 2000.0;
    c.realizations = 3;
    c.dt = 1e-3;
    c.t_max = 1.0;
    c.ground_state = GroundStateParams { dt_imag: 1e-3, energy_tol: 1e-11, max_steps: 200_000 };
    c
}

#[test]
fn reloaded_ground_state_gives_identical_echo() {
    let cfg = small();
    let gs = prepare_ground_state(&cfg).unwrap();
    let ckpt = Checkpoint {
        grid: cfg.grid,
        g_eff: cfg.g_eff(),
        quartic_k: cfg.trap.quartic_k,
        energy: gs.energy,
        time: 0.0,
        amplitudes: gs.psi.amplitudes().to_vec(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gs.ckpt");
    ckpt.write(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), FORMAT_VERSION);

    let back = Checkpoint::read(&path).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    let mut reloaded = gs.clone();
    reloaded.psi = back.wavefunction().unwrap();
    assert!(reloaded
        .psi
        .amplitudes()
        .iter()
        .zip(gs.psi.amplitudes())
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));

    let ex = Executor::new(Workers::serial());
    let a = run_echo_from(&cfg, &gs, &ex, None).unwrap();
    let b = run_echo_from(&cfg, &reloaded, &ex, None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn spilled_snapshots_match_checkpoint_format() {
    let cfg = small();
    let gs = prepare_ground_state(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let spill = gpe_echo::echo::SnapshotSpill { dir: dir.path().to_path_buf(), every: 5 };
    let curve = run_echo_from(&cfg, &gs, &Executor::new(Workers::new(2)), Some(&spill)).unwrap();
    assert_eq!(curve.len(), 11);
    let snap = Checkpoint::read(spill.path(2, 10)).unwrap();
    assert!((snap.time - 1.0).abs() < 1e-12);
    assert_eq!(snap.grid, cfg.grid);
    assert!(!spill.path(2, 3).exists());
}
