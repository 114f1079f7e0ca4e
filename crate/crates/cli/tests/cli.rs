//! End-to-end CLI contract: files, exit codes, determinism, env handling.

use std::path::Path;
use std::process::Command;
use wavefuse_cli::{cmd_gen_dataset, cmd_run};

const CONFIG: &str = r#"
methods = ["random", "wavefuse"]
metric = "accuracy"

[dataset]
source = "blobs"

[dataset.blobs]
seed = 5

[[dataset.blobs.classes]]
center = [0.0, 0.0]
stdev = 0.6
count = 40

[[dataset.blobs.classes]]
center = [3.0, 3.0]
stdev = 0.6
count = 40

[model]
hidden_dim = 8
epochs = 10
mc_passes = 3

[loop]
rounds = 2
budget = 5
init_size = 4
seeds = [1]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavefuse"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, CONFIG).unwrap();
    path
}

#[test]
fn run_writes_three_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    let written = cmd_run(&config, Some(&out), Some(1), None).unwrap();
    assert_eq!(written.len(), 4);
    for name in ["curves.csv", "weights.csv", "summary.csv", "manifest.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    // 1 seed x 2 methods x (2 rounds + final) rows + header
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 2 * 3);
    // weights only for wavefuse: 2 rounds x (4 strategies + exploration)
    let weights = std::fs::read_to_string(out.join("weights.csv")).unwrap();
    assert_eq!(weights.lines().count(), 1 + 2 * 5);
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seeds\""));
    assert!(manifest.contains("\"version\""));
}

#[test]
fn invalid_key_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        CONFIG.replace("rounds = 2", "rounds = 2\naplha0 = 0.1"),
    )
    .unwrap();
    let output = bin().arg("run").arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("aplha0"), "stderr: {stderr}");
    // nothing written
    assert!(!dir.path().join("wavefuse-out").exists());
}

#[test]
fn missing_config_exits_2() {
    let output = bin()
        .arg("run")
        .arg("/nonexistent/config.toml")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    cmd_run(&config, Some(&out_a), Some(2), None).unwrap();
    cmd_run(&config, Some(&out_b), Some(1), None).unwrap();
    for name in ["curves.csv", "weights.csv", "summary.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn env_var_provides_default_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("from-env");
    let status = bin()
        .arg("run")
        .arg(&config)
        .env("WAVEFUSE_OUT", &out)
        .current_dir(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("curves.csv").exists());
}

#[test]
fn seed_override_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    cmd_run(&config, Some(&out), Some(1), Some(77)).unwrap();
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    for line in curves.lines().skip(1) {
        assert_eq!(line.split(',').nth(1).unwrap(), "77");
    }
}

#[test]
fn gen_dataset_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("blobs.toml");
    std::fs::write(
        &spec_path,
        r#"
seed = 3

[[classes]]
center = [1.5, -0.5]
stdev = 1.0
count = 10

[[classes]]
center = [4.0, 4.0]
stdev = 1.0
count = 10
"#,
    )
    .unwrap();
    let csv_path = dir.path().join("data.csv");
    cmd_gen_dataset(&spec_path, &csv_path, None).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(text.lines().count(), 21); // header + 20 rows
    assert!(text.starts_with("f0,f1,label\n"));

    // round-trip: loader recovers the generator output exactly
    let loaded = wavefuse_core::dataset::load_csv(&csv_path).unwrap();
    let spec = wavefuse_cli::config::load_blob_spec(&spec_path).unwrap();
    let original = wavefuse_core::dataset::generate_blobs(&spec.to_spec(), 3).unwrap();
    assert_eq!(loaded.dataset.n_samples(), 20);
    for i in 0..20 {
        for j in 0..2 {
            let diff = (loaded.dataset.features()[[i, j]] - original.features()[[i, j]]).abs();
            assert!(diff < 1e-9, "row {i} col {j}: {diff}");
        }
    }
}

#[test]
fn gen_dataset_zero_stdev_repeats_centers() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("blobs.toml");
    std::fs::write(
        &spec_path,
        "[[classes]]\ncenter = [2.0]\nstdev = 0.0\ncount = 3\n\n[[classes]]\ncenter = [7.0]\nstdev = 0.0\ncount = 2\n",
    )
    .unwrap();
    let csv_path = dir.path().join("data.csv");
    cmd_gen_dataset(&spec_path, &csv_path, None).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows, vec!["2,0", "2,0", "2,0", "7,1", "7,1"]);
}

#[test]
fn compare_via_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out");
    cmd_run(&config, Some(&out), Some(1), None).unwrap();

    // curves.csv holds two methods; compare requires single-method files,
    // so split it.
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    let header = curves.lines().next().unwrap();
    for method in ["random", "wavefuse"] {
        let mut text = String::from(header);
        text.push('\n');
        for line in curves.lines().skip(1).filter(|l| l.starts_with(method)) {
            text.push_str(line);
            text.push('\n');
        }
        std::fs::write(dir.path().join(format!("{method}.csv")), text).unwrap();
    }
    // single seed -> not enough pairs, expect run failure exit 1
    let output = bin()
        .arg("compare")
        .arg(dir.path().join("random.csv"))
        .arg(dir.path().join("wavefuse.csv"))
        .arg("--metric")
        .arg("accuracy")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));

    // a file against itself with >= 2 pairs reports t = 0
    let self_path = dir.path().join("self.csv");
    std::fs::write(
        &self_path,
        "method,seed,fold,round,n_labeled,metric,value\n\
         m,1,0,1,10,accuracy,5.00000000e-1\n\
         m,2,0,1,10,accuracy,6.00000000e-1\n",
    )
    .unwrap();
    let output = bin()
        .arg("compare")
        .arg(&self_path)
        .arg(&self_path)
        .arg("--metric")
        .arg("accuracy")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("not significant"), "stdout: {stdout}");
}
