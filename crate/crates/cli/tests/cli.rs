use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_gpe-echo");

const TINY: &str = r#"
mode = "sweep-epsilon"
sweep_values = [1e-1, 1e-2]
realizations = 3
n_atoms = 500.0
emit = ["curves-csv", "summary-json"]

[grid]
points = 256

[time]
dt = 2e-3
t_max = 1.0
sample_interval = 0.2

[ground_state]
dt_imag = 2e-3
energy_tol = 1e-10
"#;

fn gpe(args: &[&str], env: Option<(&str, &str)>) -> std::process::Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("GPE_ECHO_WORKERS");
    if let Some((k, v)) = env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn outputs_identical_across_worker_counts_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));

    let out = gpe(&["run", cfg.to_str().unwrap(), "--workers", "1", "--out", a.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = gpe(
        &["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()],
        Some(("GPE_ECHO_WORKERS", "3")),
    );
    assert!(out.status.success());
    let manifest_b: serde_json::Value = serde_json::from_slice(&read(&b, "manifest.json")).unwrap();
    assert_eq!(manifest_b["config"]["workers"], 3);

    let manifest = a.join("manifest.json");
    let out = gpe(&["run", manifest.to_str().unwrap(), "--out", c.to_str().unwrap(), "--workers", "2"], None);
    assert!(out.status.success());

    for name in ["curve_epsilon_1e-1.csv", "curve_epsilon_1e-2.csv", "summary.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs with worker count");
        assert_eq!(read(&a, name), read(&c, name), "{name} differs on replay");
    }
    let listed: Vec<String> = serde_json::from_slice::<serde_json::Value>(&read(&a, "manifest.json")).unwrap()["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed.len(), fs::read_dir(&a).unwrap().count());
}

#[test]
fn seed_flag_changes_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, TINY).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(gpe(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()], None).status.success());
    let out = gpe(&["run", cfg.to_str().unwrap(), "--seed", "99", "--out", b.to_str().unwrap()], None);
    assert!(out.status.success());
    assert_ne!(read(&a, "curve_epsilon_1e-1.csv"), read(&b, "curve_epsilon_1e-1.csv"));
    let s: serde_json::Value = serde_json::from_slice(&read(&b, "summary.json")).unwrap();
    assert_eq!(s["master_seed"], 99);
}

#[test]
fn ground_state_command_writes_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, TINY.replace("emit = [\"curves-csv\", \"summary-json\"]", "")).unwrap();
    let out = gpe(&["ground-state", cfg.to_str().unwrap(), "--out", tmp.path().join("gs").to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("half-length"));
    let bytes = read(&tmp.path().join("gs"), "ground_state.ckpt");
    assert_eq!(&bytes[..8], b"GPECKPT\0");
}

#[test]
fn fit_command_reads_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("curve.csv");
    let mut text = String::from("t,F,F_a,F_std\n");
    for i in 0..=600 {
        let t = i as f64 * 0.1;
        let f = 0.95 / (1.0 + ((t - 38.0) / 4.86).exp()) + 0.05;
        text += &format!("{t:.16e},{f:.16e},{:.16e},{:.16e}\n", 1.0, 0.0);
    }
    fs::write(&path, text).unwrap();
    let out = gpe(&["fit", path.to_str().unwrap(), "--fix-T", "4.86"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["tau_c_fit"].as_f64().unwrap() - 38.0).abs() < 1e-6);
    assert_eq!(v["T_was_fixed"], true);

    let flat = tmp.path().join("flat.csv");
    fs::write(&flat, "t,F,F_a,F_std\n0,1,1,0\n1,1,1,0\n2,1,1,0\n3,1,1,0\n4,1,1,0\n").unwrap();
    let out = gpe(&["fit", flat.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["tau_c_crossing"].is_null());
}

#[test]
fn bad_config_fails_with_key_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "mode = \"single-echo\"\ndzeta = 3.0\n").unwrap();
    let out = gpe(&["run", cfg.to_str().unwrap()], None);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dzeta"));
}
