use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use crate::Result;

/// Identifies the producing build; override with `CCNN_BUILD_ID` at compile
/// time.
pub const BUILD_ID: &str = match option_env!("CCNN_BUILD_ID") {
    Some(id) => id,
    None => concat!("ccnn-", env!("CARGO_PKG_VERSION")),
};

/// The config as recorded next to the artifacts: the output location is
/// dropped so that a run reproduces byte for byte wherever it is written.
fn recorded_toml(cfg: &ExperimentConfig) -> String {
    ExperimentConfig { out: None, ..cfg.clone() }.to_toml_string()
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(recorded_toml(cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Creates `dir/name` and hands a buffered writer to `f`.
pub fn write_with<F>(dir: &Path, name: &str, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv_rows<W, I>(w: W, header: &[&str], rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    for r in rows {
        wtr.write_record(&r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Files written by one run plus what is needed to regenerate them. Holds
/// no timestamps, so identical runs give identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub task: String,
    pub seed: u64,
    pub config_sha256: String,
    pub build_id: String,
    pub files: Vec<String>,
    #[serde(skip)]
    dir: PathBuf,
    #[serde(skip)]
    config_text: String,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            task: cfg.task.name().to_string(),
            seed: cfg.seed,
            config_sha256: config_hash(cfg),
            build_id: BUILD_ID.to_string(),
            files: Vec::new(),
            dir: dir.to_path_buf(),
            config_text: recorded_toml(cfg),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        write_with(&self.dir, name, f)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `config.toml` and `manifest.toml`.
    pub fn finish(&mut self) -> Result<()> {
        let config = std::mem::take(&mut self.config_text);
        self.add("config.toml", |w| Ok(w.write_all(config.as_bytes())?))?;
        let text = toml::to_string(self).expect("manifest serialises");
        write_with(&self.dir, "manifest.toml", |w| Ok(w.write_all(text.as_bytes())?))
    }
}
