use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::config::{ExperimentConfig, FirMethod};
use super::output::Manifest;
use crate::collapse::{collapse_stack, linearity_r2, CollapsedFilter, LinearityReport};
use crate::fir::io::{write_filter_csv, write_response_csv};
use crate::fir::{bandpass_bands, fir_response, lsfir_design, window_method_bandpass, FirFilter, FrequencyResponse};
use crate::nn::{checkpoint, LayerStack, Mode, Tensor3};
use crate::signal::white_noise;
use crate::{Error, Result};

pub fn run_design_fir(cfg: &ExperimentConfig) -> Result<(FirFilter, FrequencyResponse)> {
    let f = &cfg.fir;
    let filter = match f.method {
        FirMethod::Lsfir => {
            let bands = bandpass_bands(f.f_lo, f.f_hi, f.transition, f.fs)?;
            lsfir_design(&bands, f.taps, f.fs, cfg.assembly())?
        }
        FirMethod::Window => window_method_bandpass(f.taps, f.f_lo, f.f_hi, f.fs)?,
    };
    let response = fir_response(&filter, f.response_points)?;
    Ok((filter, response))
}

pub fn write_design_artifacts(
    filter: &FirFilter,
    response: &FrequencyResponse,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    m.add("filter.csv", |w| write_filter_csv(filter, w))?;
    m.add("response.csv", |w| write_response_csv(response, w))?;
    m.finish()?;
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct CollapseRun {
    pub stack: LayerStack,
    pub collapsed: CollapsedFilter,
    pub linearity: LinearityReport,
}

/// Loads a checkpoint, folds it into per-path FIR filters and measures
/// per-layer linearity on a white-noise probe.
pub fn run_collapse(cfg: &ExperimentConfig) -> Result<CollapseRun> {
    let c = &cfg.collapse;
    let path = c
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Config("collapse.checkpoint is required".into()))?;
    let mut stack = checkpoint::load(BufReader::new(File::open(path)?))?;
    stack.set_mode(Mode::Eval);
    let collapsed = collapse_stack(&stack, c.fs)?;
    let n_in = stack.spec().n_in;
    let probe = white_noise(c.probe_batch * n_in * c.probe_len, cfg.data_seed(), c.fs).into_samples();
    let probe = Tensor3::from_vec(c.probe_batch, n_in, c.probe_len, probe)?;
    let linearity = linearity_r2(&stack, &probe)?;
    Ok(CollapseRun {
        stack,
        collapsed,
        linearity,
    })
}

pub fn write_collapse_artifacts(run: &CollapseRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    let col = &run.collapsed;
    for (c, f) in col.channels().iter().enumerate() {
        m.add(&format!("channel_{}.csv", c + 1), |w| write_filter_csv(f, w))?;
    }
    for i in 0..col.n_in() {
        for o in 0..col.n_out() {
            m.add(&format!("path_{}_{}.csv", i + 1, o + 1), |w| write_filter_csv(col.path(i, o), w))?;
        }
    }
    m.add("linearity.csv", |w| run.linearity.write_csv(w))?;
    m.finish()?;
    Ok(m)
}
