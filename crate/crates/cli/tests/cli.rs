use std::path::Path;
use std::process::{Command, Output};

use wannier_lab_cli::manifest::sha256_hex;
use wannier_lab_cli::RunManifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wannier-lab"))
}

fn run_with_root(config: &str, root: &Path) -> (Output, RunManifest) {
    let path = root.join("config.toml");
    std::fs::write(&path, config).unwrap();
    let out = bin()
        .arg("run")
        .arg(&path)
        .env("WANNIER_LAB_OUTPUT_ROOT", root)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    let manifest_path = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .map(|d| d.join("manifest.json"))
        .expect("run directory");
    let manifest = serde_json::from_slice(&std::fs::read(manifest_path).unwrap()).unwrap();
    (out, manifest)
}

#[test]
fn list_scenarios_names_all_eight() {
    let out = bin().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "spectrum",
        "gaps",
        "index",
        "homotopy",
        "bounds",
        "wannier",
        "dichotomy",
        "split_test",
    ] {
        assert!(
            text.lines().any(|l| l.starts_with(name)),
            "{name} missing in\n{text}"
        );
    }
}

#[test]
fn validate_prints_filled_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(
        &path,
        "scenario = \"spectrum\"\n[field]\nflux_per_plaquette = 0.125\n",
    )
    .unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("boundary = \"periodic\""), "{text}");
    assert!(text.contains("epsilon = 0.000001"), "{text}");
}

#[test]
fn validate_names_misspelled_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "scenario = \"spectrum\"\n[field]\nfluxx = 0.125\n").unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("fluxx"));
}

#[test]
fn run_lists_every_file_with_matching_digest() {
    let root = tempfile::tempdir().unwrap();
    let (out, manifest) = run_with_root(
        "scenario = \"gaps\"\nseed = 2\n[geometry]\nextent = 8.0\n[field]\nflux_per_plaquette = 0.125\n[disorder]\nrelative_to_gap = 0.3\n",
        root.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(manifest.passed());
    let dir = root.path().join("gaps");
    let mut on_disk: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut listed: Vec<String> = manifest.files.iter().map(|f| f.path.clone()).collect();
    listed.sort();
    assert_eq!(on_disk, listed);
    assert!(manifest.stale_files(&dir).is_empty());
    for f in &manifest.files {
        assert_eq!(
            sha256_hex(&std::fs::read(dir.join(&f.path)).unwrap()),
            f.sha256
        );
    }
    assert!(manifest
        .stages
        .iter()
        .any(|s| s.stage == "eigensolve_disordered"));
    assert!(manifest.config.contains("relative_to_gap = 0.3"));
}

#[test]
fn failed_assertion_gives_nonzero_exit() {
    let root = tempfile::tempdir().unwrap();
    let (out, manifest) = run_with_root(
        "scenario = \"index\"\n[geometry]\nextent = 8.0\n[field]\nflux_per_plaquette = 0.125\n[index]\nexpect = 5.0\n",
        root.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!manifest.assertion("band_index").unwrap().passed);
    assert!(
        manifest
            .assertion("identity_projection_index")
            .unwrap()
            .passed
    );
}

#[test]
fn stage_errors_are_attributed() {
    let root = tempfile::tempdir().unwrap();
    // flux 1/2 has no gap above the lowest band
    let (out, manifest) = run_with_root(
        "scenario = \"index\"\n[geometry]\nextent = 8.0\n[field]\nflux_per_plaquette = 0.5\n",
        root.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(manifest.errors.len(), 1);
    assert_eq!(manifest.errors[0].stage, "eigensolve");
}

#[test]
fn strong_disorder_warns_but_runs() {
    let root = tempfile::tempdir().unwrap();
    let (out, manifest) = run_with_root(
        "scenario = \"homotopy\"\n[geometry]\nextent = 8.0\n[field]\nflux_per_plaquette = 0.125\n[disorder]\nrelative_to_gap = 0.6\n[homotopy]\nsteps = 2\n",
        root.path(),
    );
    assert!(
        manifest.warnings.iter().any(|w| w.contains("sup|V| < b")),
        "{:?}",
        manifest.warnings
    );
    assert!(manifest.stages.iter().any(|s| s.stage == "scan"));
    let _ = out;
}
