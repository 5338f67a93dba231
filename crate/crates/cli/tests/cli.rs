use std::path::Path;
use std::process::{Command, Output};

fn ccnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn design_fir_succeeds_and_repeats_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = ccnn(&["design-fir", "--out", out], tmp.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["filter.csv", "response.csv", "config.toml", "manifest.toml"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn default_out_dir_is_per_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ccnn(&["design-fir"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("out/design-fir/filter.csv").exists());
}

#[test]
fn config_file_and_flags_are_applied() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), "[fir]\ntaps = 31\nmethod = \"window\"\n").unwrap();
    let o = ccnn(&["--config", "c.toml", "--seed", "9", "design-fir", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("31 taps"), "{stdout}");
    let manifest = std::fs::read_to_string(tmp.path().join("o/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 9"), "{manifest}");
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[fir]\nno_such_key = 1\n").unwrap();
    assert_eq!(code(&ccnn(&["--config", "bad.toml", "design-fir"], tmp.path())), 2);
    std::fs::write(tmp.path().join("even.toml"), "[fir]\ntaps = 100\n").unwrap();
    assert_eq!(code(&ccnn(&["--config", "even.toml", "design-fir"], tmp.path())), 2);
    assert_eq!(code(&ccnn(&["collapse"], tmp.path())), 2);
    assert_eq!(code(&ccnn(&["no-such-command"], tmp.path())), 2);
}

#[test]
fn io_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ccnn(&["--config", "missing.toml", "design-fir"], tmp.path())), 4);
    std::fs::write(tmp.path().join("junk.ckpt"), b"junk").unwrap();
    let o = ccnn(&["collapse", "--checkpoint", "junk.ckpt"], tmp.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&ccnn(&["fdd", "--input", "missing.csv"], tmp.path())), 4);
}

#[test]
fn numeric_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    // Linear layers with an absurd step size overflow within one epoch.
    std::fs::write(
        tmp.path().join("diverge.toml"),
        "[mdof]\nduration = 30.0\n[training]\nepochs = 2\nlr_start = 1e100\nlr_end = 1e100\nbatch_size = 4\nkernel_len = 5\nactivation = \"identity\"\n",
    )
    .unwrap();
    let o = ccnn(&["--config", "diverge.toml", "train-regression"], tmp.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
