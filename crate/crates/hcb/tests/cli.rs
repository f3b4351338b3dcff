use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hcb::table::Table;

fn hcb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcb")).args(args).output().expect("spawning hcb")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_ok(args: &[&str]) -> String {
    let out = hcb(args);
    assert!(out.status.success(), "hcb {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn two_site_spectrum_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "schema_version = 1\nkind = \"spectrum\"\n[lattice]\nrows = 1\ncols = 2\n");
    let out = dir.path().join("out");
    run_ok(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    let table = Table::from_csv(&fs::read(out.join("spectrum.csv")).unwrap()).unwrap();
    let n = table.numbers("n").unwrap();
    let e = table.numbers("epsilon_over_j").unwrap();
    let rows: Vec<(f64, f64)> = n.into_iter().zip(e).map(|(n, e)| (n.unwrap(), e.unwrap())).collect();
    let expected = [(0.0, 0.0), (1.0, -1.0), (1.0, 1.0), (2.0, 0.0)];
    assert_eq!(rows.len(), expected.len());
    for ((n, e), (n0, e0)) in rows.iter().zip(expected) {
        assert_eq!(*n, n0);
        assert!((e - e0).abs() < 1e-14, "{e} vs {e0}");
    }
}

#[test]
fn manifest_echoes_config_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "schema_version = 1\nkind = \"spectrum-figure\"\ndisorder = 0.3\nseeds = [4]\n[lattice]\nrows = 2\ncols = 3\n",
    );
    let out = dir.path().join("out");
    let stdout = run_ok(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--seed", "7", "--workers", "1"]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seeds"], serde_json::json!([7]));
    assert_eq!(manifest["config"]["lattice"]["cols"], 3);
    assert_eq!(manifest["seeds"], serde_json::json!([7]));
    assert!(manifest["code_version"].as_str().unwrap().starts_with("hcb "));
    let outputs = manifest["outputs"].as_array().unwrap();
    let names: Vec<&str> = outputs.iter().map(|o| o["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["spectrum.csv", "spectrum.svg"]);
    for o in outputs {
        let bytes = fs::read(out.join(o["name"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hcb::output::sha256_hex(&bytes));
        assert!(stdout.contains(o["sha256"].as_str().unwrap()));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "schema_version = 1\nkind = \"eigenstate-observables\"\ndisorder = 0.2\nseeds = [1, 2]\nsectors = [2, 3]\n[lattice]\nrows = 2\ncols = 3\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["run", "-c", &config, "-o", a.to_str().unwrap()]);
    run_ok(&["run", "-c", &config, "-o", b.to_str().unwrap(), "-w", "1"]);
    for name in ["eigenstates.csv", "band_summary.csv", "eigenstates_xi.svg", "eigenstates_ratio.svg"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let config = write_config(dir.path(), "schema_version = 1\nkind = \"spectrum\"\ncolour = \"red\"\n");
    let res = hcb(&["run", "--config", &config, "--out", out]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));

    let config = write_config(dir.path(), "schema_version = 9\nkind = \"spectrum\"\n");
    assert!(!hcb(&["run", "--config", &config, "--out", out]).status.success());

    let config = write_config(dir.path(), "schema_version = 1\nkind = \"planner\"\n");
    let res = hcb(&["circuit", "--config", &config, "--out", out]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("planner"));

    assert!(!hcb(&["run", "--out", out]).status.success());
    assert!(!Path::new(out).join("manifest.json").exists());
}

#[test]
fn dense_limit_needs_window_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let full = "schema_version = 1\nkind = \"spectrum\"\nsectors = [5]\n[lattice]\nrows = 2\ncols = 5\n[tolerances]\ndense_limit = 100\n";
    let config = write_config(dir.path(), full);
    let res = hcb(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("window"));

    let config = write_config(dir.path(), &format!("{full}[spectrum]\nmode = \"window\"\ncount = 4\n"));
    run_ok(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    let table = Table::from_csv(&fs::read(out.join("spectrum.csv")).unwrap()).unwrap();
    assert_eq!(table.len(), 4);
}

#[test]
fn template_is_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(&["template", "planner"]);
    let config = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    run_ok(&["planner", "--config", &config, "--out", out.to_str().unwrap()]);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("planner.json")).unwrap()).unwrap();
    assert!(report["readout_regime"].is_string());
    assert!(out.join("planner_sweep.csv").exists());
}

#[test]
fn circuit_subcommand_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    run_ok(&["circuit", "--out", out.to_str().unwrap()]);
    let table = Table::from_csv(&fs::read(out.join("parasitic.csv")).unwrap()).unwrap();
    assert!(table.has_columns(&["c_p", "c_p_prime", "c_g", "c_eff_floating", "ratio"]));
    assert!(fs::read_to_string(out.join("parasitic.svg")).unwrap().starts_with("<svg"));
}
