use std::collections::BTreeMap;
use std::path::Path;

use ccnn_core::experiments::{run_task, ExperimentConfig, Task};
use ccnn_core::nn::Activation;
use ccnn_core::Error;

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

/// Runs `cfg` twice in fresh directories and returns the artifacts, which
/// must match byte for byte.
fn run_twice(cfg: &ExperimentConfig) -> BTreeMap<String, Vec<u8>> {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_task(cfg, a.path()).unwrap();
    run_task(cfg, b.path()).unwrap();
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs between identical runs");
    }
    for f in &ma.files {
        assert!(fa.contains_key(f), "manifest lists missing {f}");
    }
    assert!(fa.contains_key("manifest.toml"));
    fa
}

/// Data rows, skipping `#` comments and the header.
fn csv_rows(bytes: &[u8]) -> usize {
    String::from_utf8_lossy(bytes).lines().filter(|l| !l.starts_with('#')).count() - 1
}

fn small_mdof(task: Task) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(task);
    cfg.mdof.duration = 60.0;
    cfg.analysis.fdd_window = 512;
    cfg.analysis.response_points = 256;
    cfg.training.epochs = 2;
    cfg.training.batch_size = 8;
    cfg.training.kernel_len = 9;
    cfg.training.layers = 2;
    cfg
}

fn config_error(text: &str, task: Task) -> bool {
    matches!(ExperimentConfig::from_toml_str(text, task), Err(Error::Config(_)))
}

#[test]
fn config_rejections() {
    assert!(config_error("nonsense = 1", Task::Spectrum));
    assert!(config_error("[training]\nepochs = \"many\"", Task::Spectrum));
    assert!(config_error("task = \"fdd\"", Task::Spectrum));
    assert!(config_error("[training]\nkernel_len = 50\nlayers = 3", Task::Spectrum));
    assert!(config_error("[spectrum]\ncenter_hz = 49.8", Task::Spectrum));
    assert!(config_error("[fir]\ntaps = 100", Task::DesignFir));
    assert!(config_error("[mdof]\nstiffness = []", Task::Simulate));
    assert!(config_error("[analysis]\nfdd_overlap = 1.0", Task::Fdd));
    assert!(config_error("[sweep]\ncells = [[3, 50]]", Task::Sweep));
    assert!(config_error("", Task::Collapse));
    assert!(config_error("[training\n", Task::Spectrum));
}

#[test]
fn config_roundtrips_through_toml() {
    for task in [Task::Spectrum, Task::Regression, Task::Vae, Task::Sweep, Task::Fdd, Task::DesignFir, Task::Simulate] {
        let cfg = ExperimentConfig::preset(task);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string(), task).unwrap();
        assert_eq!(back, cfg);
    }
    let cfg = ExperimentConfig::from_toml_str("seed = 4\n[training]\nepochs = 7", Task::Spectrum).unwrap();
    assert_eq!((cfg.seed, cfg.training.epochs), (4, 7));
    assert_eq!(cfg.training.kernel_len, 51);
}

#[test]
fn design_fir_is_reproducible() {
    let files = run_twice(&ExperimentConfig::preset(Task::DesignFir));
    assert_eq!(csv_rows(&files["filter.csv"]), 101);
}

#[test]
fn simulate_and_fdd_are_reproducible() {
    let sim = run_twice(&small_mdof(Task::Simulate));
    assert_eq!(csv_rows(&sim["accelerations.csv"]), 6000);
    assert_eq!(csv_rows(&sim["modes.csv"]), 2);
    let fdd = run_twice(&small_mdof(Task::Fdd));
    assert!(fdd.contains_key("singular_values.csv"));
    assert!(csv_rows(&fdd["peaks.csv"]) >= 2);
}

#[test]
fn seed_changes_simulation() {
    let cfg = small_mdof(Task::Simulate);
    let other = ExperimentConfig { seed: 1, ..cfg.clone() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_task(&cfg, a.path()).unwrap();
    run_task(&other, b.path()).unwrap();
    assert_ne!(read_dir(a.path())["accelerations.csv"], read_dir(b.path())["accelerations.csv"]);
}

#[test]
fn tiny_spectrum_run_is_reproducible() {
    let mut cfg = ExperimentConfig::preset(Task::Spectrum);
    cfg.spectrum.n_pairs = 40;
    cfg.spectrum.sample_len = 128;
    cfg.spectrum.response_points = 256;
    cfg.spectrum.linearity_samples = 4;
    cfg.training.epochs = 2;
    cfg.training.batch_size = 16;
    cfg.training.kernel_len = 11;
    let files = run_twice(&cfg);
    assert!(files.keys().any(|k| k.ends_with(".ckpt")));
}

#[test]
fn tiny_regression_then_collapse() {
    let cfg = small_mdof(Task::Regression);
    let files = run_twice(&cfg);
    assert_eq!(csv_rows(&files["loss_history.csv"]), 2);
    assert!(files.contains_key("channel_peaks.csv"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("model.ckpt"), &files["model.ckpt"]).unwrap();
    let mut col = ExperimentConfig::preset(Task::Collapse);
    col.collapse.checkpoint = Some(dir.path().join("model.ckpt"));
    col.collapse.probe_batch = 2;
    col.collapse.probe_len = 64;
    let out = run_twice(&col);
    assert!(out.contains_key("linearity.csv"));
    // collapsed length M (p - 1) + 1 with M = 2, p = 9
    assert_eq!(csv_rows(&out["channel_1.csv"]), 17);
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"not a checkpoint").unwrap();
    let mut cfg = ExperimentConfig::preset(Task::Collapse);
    cfg.collapse.checkpoint = Some(path);
    let err = run_task(&cfg, &dir.path().join("out")).unwrap_err();
    assert!(matches!(err, Error::Format { .. } | Error::CheckpointVersion { .. } | Error::CheckpointChecksum), "{err:?}");
}

#[test]
fn tiny_vae_run_is_reproducible() {
    let mut cfg = small_mdof(Task::Vae);
    cfg.training.epochs = 1;
    cfg.training.lstm_hidden = 4;
    cfg.analysis.smooth_window = 11;
    let files = run_twice(&cfg);
    assert!(files.contains_key("summed_spectrum.csv"));
    assert!(files.contains_key("fdd_peaks.csv"));
}

#[test]
fn tiny_sweep_writes_every_cell() {
    let mut cfg = ExperimentConfig::preset(Task::Sweep);
    cfg.spectrum.n_pairs = 30;
    cfg.spectrum.sample_len = 96;
    cfg.spectrum.response_points = 128;
    cfg.spectrum.linearity_samples = 2;
    cfg.training.epochs = 1;
    cfg.training.batch_size = 16;
    cfg.sweep.cells = vec![[1, 5], [2, 5], [2, 3]];
    cfg.sweep.fixed_kernel = 5;
    cfg.sweep.fixed_layers = 2;
    cfg.sweep.activations = vec![Activation::Tanh, Activation::Identity];
    cfg.sweep.workers = 2;
    let files = run_twice(&cfg);
    assert_eq!(csv_rows(&files["sweep.csv"]), 6);
    assert_eq!(csv_rows(&files["linear_vs_tanh.csv"]), 3);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let table: toml::Table = text.parse().unwrap();
        let task: Task = table["task"].clone().try_into().unwrap();
        let cfg = ExperimentConfig::from_toml_str(&text, task).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if cfg.mdof.n_dof() == 9 {
            let f = cfg.mdof.build().unwrap().natural_freqs().to_vec();
            assert!(f[0] >= 3.0 && f[8] < 50.0, "{f:?}");
        }
        seen += 1;
    }
    assert!(seen >= 10);
}
