use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::{write_csv_rows, Manifest};
use super::spectrum::{run_spectrum_on, spectrum_dataset, FilterComparison};
use crate::nn::{Activation, TrainingConfig};
use crate::signal::split_seed;
use crate::{Error, Result};

/// One trained configuration of the grid.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub layers: usize,
    pub kernel_len: usize,
    pub activation: Activation,
    pub outcome: std::result::Result<CellMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub val_loss: f64,
    pub comparison: FilterComparison,
    pub mean_r2: f64,
}

impl SweepCell {
    pub fn val_loss(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|m| m.val_loss)
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

/// Trains every `cells x activations` combination on one shared spectrum
/// dataset. A failing cell is recorded and does not stop the others.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let (data, scale) = spectrum_dataset(&cfg.spectrum, cfg.data_seed())?;
    let base = cfg.effective_training();
    let jobs: Vec<(usize, [usize; 2], Activation)> = cfg
        .sweep
        .cells
        .iter()
        .flat_map(|&c| cfg.sweep.activations.iter().map(move |&a| (c, a)))
        .enumerate()
        .map(|(i, (c, a))| (i, c, a))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.workers)
        .build()
        .map_err(|e| Error::Config(format!("sweep.workers: {e}")))?;
    let assembly = cfg.assembly();
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, [layers, kernel_len], activation)| {
                let training = TrainingConfig {
                    layers,
                    kernel_len,
                    activation,
                    seed: split_seed(cfg.seed, 100 + i as u64),
                    ..base.clone()
                };
                let outcome = run_spectrum_on(&data, scale, &cfg.spectrum, &training, assembly)
                    .map(|run| CellMetrics {
                        val_loss: run.model.final_val_loss().unwrap_or(f64::NAN),
                        comparison: run.comparison,
                        mean_r2: run.linearity.mean(),
                    })
                    .map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::warn!("sweep cell M={layers} p={kernel_len} {activation:?} failed: {e}");
                }
                SweepCell {
                    layers,
                    kernel_len,
                    activation,
                    outcome,
                }
            })
            .collect()
    });
    Ok(cells)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_artifacts(cells: &[SweepCell], cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    m.add("sweep.csv", |w| {
        let rows = cells.iter().map(|c| {
            let mut r = vec![
                c.layers.to_string(),
                c.kernel_len.to_string(),
                activation_name(c.activation).to_string(),
            ];
            match &c.outcome {
                Ok(x) => r.extend([
                    x.val_loss.to_string(),
                    x.comparison.energy_ratio_db.to_string(),
                    x.comparison.peak_hz.to_string(),
                    x.comparison.ncc.to_string(),
                    x.mean_r2.to_string(),
                    String::new(),
                ]),
                Err(e) => {
                    r.extend(std::iter::repeat_n(String::new(), 5));
                    r.push(e.clone());
                }
            }
            r
        });
        write_csv_rows(
            w,
            &["layers", "kernel_len", "activation", "val_loss", "energy_ratio_db", "peak_hz", "ncc", "mean_r2", "error"],
            rows,
        )
    })?;
    let slice = |keep: &dyn Fn(&SweepCell) -> bool, key: &dyn Fn(&SweepCell) -> usize| -> Vec<Vec<String>> {
        cells
            .iter()
            .filter(|c| keep(c))
            .map(|c| {
                vec![
                    key(c).to_string(),
                    activation_name(c.activation).to_string(),
                    opt(c.val_loss()),
                ]
            })
            .collect()
    };
    let s = &cfg.sweep;
    let by_layers = slice(&|c| c.kernel_len == s.fixed_kernel, &|c| c.layers);
    m.add("loss_vs_layers.csv", |w| write_csv_rows(w, &["layers", "activation", "val_loss"], by_layers))?;
    let by_kernel = slice(&|c| c.layers == s.fixed_layers, &|c| c.kernel_len);
    m.add("loss_vs_kernel.csv", |w| write_csv_rows(w, &["kernel_len", "activation", "val_loss"], by_kernel))?;
    let mut paired: BTreeMap<(usize, usize), [Option<f64>; 2]> = BTreeMap::new();
    for c in cells {
        let slot = paired.entry((c.layers, c.kernel_len)).or_default();
        slot[(c.activation == Activation::Tanh) as usize] = c.val_loss();
    }
    m.add("linear_vs_tanh.csv", |w| {
        let rows = paired
            .iter()
            .map(|(&(l, k), v)| vec![l.to_string(), k.to_string(), opt(v[0]), opt(v[1])]);
        write_csv_rows(w, &["layers", "kernel_len", "identity_val_loss", "tanh_val_loss"], rows)
    })?;
    m.finish()?;
    Ok(m)
}
