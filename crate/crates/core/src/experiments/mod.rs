//! Config-driven end-to-end runs. Each `run_*` function returns its results
//! in memory; the matching `write_*_artifacts` writes them as CSV next to a
//! manifest.

pub mod config;
pub mod design;
pub mod output;
pub mod spectrum;
pub mod sweep;
pub mod systems;

pub use config::{ExperimentConfig, Task};
pub use output::Manifest;

use std::path::Path;

use crate::Result;

/// Runs `cfg.task` and writes its artifacts into `dir`.
pub fn run_task(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    match cfg.task {
        Task::Spectrum => spectrum::write_spectrum_artifacts(&spectrum::run_spectrum_experiment(cfg)?, cfg, dir),
        Task::Regression => systems::write_regression_artifacts(&systems::run_regression_experiment(cfg)?, cfg, dir),
        Task::Vae => systems::write_vae_artifacts(&systems::run_vae_experiment(cfg)?, cfg, dir),
        Task::Fdd => systems::write_fdd_artifacts(&systems::run_fdd_experiment(cfg)?, cfg, dir),
        Task::Simulate => systems::write_simulate_artifacts(&systems::run_simulate(cfg)?, cfg, dir),
        Task::DesignFir => {
            let (f, r) = design::run_design_fir(cfg)?;
            design::write_design_artifacts(&f, &r, cfg, dir)
        }
        Task::Collapse => design::write_collapse_artifacts(&design::run_collapse(cfg)?, cfg, dir),
        Task::Sweep => sweep::write_sweep_artifacts(&sweep::run_sweep(cfg)?, cfg, dir),
    }
}
