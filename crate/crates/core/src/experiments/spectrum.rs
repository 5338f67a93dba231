use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, SpectrumConfig};
use super::output::{write_csv_rows, Manifest};
use crate::collapse::{collapse_stack, linearity_r2, CollapsedFilter, LinearityReport};
use crate::fir::io::write_filter_csv;
use crate::fir::{bandpass_bands, fir_response, lsfir_design, Assembly, FirFilter};
use crate::nn::train::{holdout_split, write_history_csv};
use crate::nn::{checkpoint, train_spectrum_task, Dataset, Tensor3, TrainedModel, TrainingConfig};
use crate::signal::{cheby2_bandpass, iir_filter, split_seed, white_noise, IirCascade};
use crate::Result;

pub fn target_filter(cfg: &SpectrumConfig) -> Result<IirCascade> {
    let (lo, hi) = cfg.stop_edges();
    cheby2_bandpass(cfg.cheby_order, cfg.cheby_atten_db, lo, hi, cfg.fs)
}

/// `n_pairs` white-noise inputs and their Chebyshev-filtered targets, one
/// child seed per pair. Returns the dataset and the factor the targets were
/// divided by.
pub fn spectrum_dataset(cfg: &SpectrumConfig, seed: u64) -> Result<(Dataset, f64)> {
    let cascade = target_filter(cfg)?;
    let t = cfg.sample_len;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_pairs)
        .into_par_iter()
        .map(|i| {
            let x = white_noise(t, split_seed(seed, i as u64), cfg.fs);
            let y = iir_filter(&cascade, &x)?;
            Ok((x.into_samples(), y.into_samples()))
        })
        .collect::<Result<_>>()?;
    let mut xs = Vec::with_capacity(cfg.n_pairs * t);
    let mut ys = Vec::with_capacity(cfg.n_pairs * t);
    for (x, y) in pairs {
        xs.extend(x);
        ys.extend(y);
    }
    let scale = if cfg.normalize_target {
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let sd = (ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    } else {
        1.0
    };
    ys.iter_mut().for_each(|v| *v /= scale);
    let data = Dataset::new(
        Tensor3::from_vec(cfg.n_pairs, 1, t, xs)?,
        Tensor3::from_vec(cfg.n_pairs, 1, t, ys)?,
    )?;
    Ok((data, scale))
}

/// How a learned filter compares with a reference design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterComparison {
    /// Mean power over the pass band against mean power over the stop band.
    pub energy_ratio_db: f64,
    /// Frequency of the largest magnitude.
    pub peak_hz: f64,
    /// Pearson correlation of the two magnitude responses.
    pub ncc: f64,
}

/// Pearson correlation; zero when either input is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Compares `learned` against `reference` on `points` frequencies over
/// `[0, fs/2]`. The pass band is `pass`; the stop band is everything more
/// than `transition` Hz outside it.
pub fn compare_filters(
    learned: &FirFilter,
    reference: &FirFilter,
    pass: (f64, f64),
    transition: f64,
    points: usize,
) -> Result<FilterComparison> {
    let a = fir_response(learned, points)?;
    let b = fir_response(reference, points)?;
    let (mut pb, mut npb, mut sb, mut nsb) = (0.0, 0usize, 0.0, 0usize);
    let mut peak = (0.0, f64::NEG_INFINITY);
    for (&f, &m) in a.freqs.iter().zip(&a.magnitude) {
        let p = m * m;
        if f >= pass.0 && f <= pass.1 {
            pb += p;
            npb += 1;
        } else if f < pass.0 - transition || f > pass.1 + transition {
            sb += p;
            nsb += 1;
        }
        if m > peak.1 {
            peak = (f, m);
        }
    }
    let energy_ratio_db = 10.0 * ((pb / npb.max(1) as f64) / (sb / nsb.max(1) as f64)).log10();
    Ok(FilterComparison {
        energy_ratio_db,
        peak_hz: peak.0,
        ncc: pearson(&a.magnitude, &b.magnitude),
    })
}

/// Output of [`run_spectrum_experiment`].
#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub model: TrainedModel,
    pub collapsed: CollapsedFilter,
    pub lsfir: FirFilter,
    pub comparison: FilterComparison,
    pub linearity: LinearityReport,
    pub target_scale: f64,
    pub config: SpectrumConfig,
}

impl SpectrumRun {
    /// End-to-end learned filter (input 0 to output 0).
    pub fn learned(&self) -> &FirFilter {
        self.collapsed.path(0, 0)
    }
}

/// Trains on `cfg.spectrum`, collapses the result and compares it with the
/// LS-FIR design of the same length and band.
pub fn run_spectrum(
    spectrum: &SpectrumConfig,
    training: &TrainingConfig,
    data_seed: u64,
    assembly: Assembly,
) -> Result<SpectrumRun> {
    let (data, target_scale) = spectrum_dataset(spectrum, data_seed)?;
    run_spectrum_on(&data, target_scale, spectrum, training, assembly)
}

/// As [`run_spectrum`] on an already generated dataset.
pub fn run_spectrum_on(
    data: &Dataset,
    target_scale: f64,
    spectrum: &SpectrumConfig,
    training: &TrainingConfig,
    assembly: Assembly,
) -> Result<SpectrumRun> {
    let model = train_spectrum_task(training, data)?;
    let collapsed = collapse_stack(&model.stack, spectrum.fs)?;
    let pass = spectrum.pass_band();
    let bands = bandpass_bands(pass.0, pass.1, spectrum.transition_hz, spectrum.fs)?;
    let lsfir = lsfir_design(&bands, collapsed.len(), spectrum.fs, assembly)?;
    let comparison = compare_filters(
        collapsed.path(0, 0),
        &lsfir,
        pass,
        spectrum.transition_hz,
        spectrum.response_points,
    )?;
    // Linearity is measured on held-out inputs.
    let (_, val) = holdout_split(data.len(), training);
    let probe: Vec<usize> = if val.is_empty() {
        (0..data.len().min(spectrum.linearity_samples)).collect()
    } else {
        val.into_iter().take(spectrum.linearity_samples.max(1)).collect()
    };
    let linearity = linearity_r2(&model.stack, &data.inputs.gather(&probe))?;
    Ok(SpectrumRun {
        model,
        collapsed,
        lsfir,
        comparison,
        linearity,
        target_scale,
        config: spectrum.clone(),
    })
}

pub fn run_spectrum_experiment(cfg: &ExperimentConfig) -> Result<SpectrumRun> {
    run_spectrum(&cfg.spectrum, &cfg.effective_training(), cfg.data_seed(), cfg.assembly())
}

/// Writes the model, loss history, both filters, their weight and
/// magnitude comparisons, the linearity report and a metrics table.
pub fn write_spectrum_artifacts(run: &SpectrumRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    m.add("model.ckpt", |w| checkpoint::save(&run.model.stack, w))?;
    m.add("loss_history.csv", |w| write_history_csv(&run.model.history, w))?;
    m.add("collapsed_filter.csv", |w| write_filter_csv(run.learned(), w))?;
    m.add("lsfir_filter.csv", |w| write_filter_csv(&run.lsfir, w))?;
    m.add("weights_comparison.csv", |w| {
        let rows = run
            .learned()
            .taps()
            .iter()
            .zip(run.lsfir.taps())
            .enumerate()
            .map(|(i, (a, b))| vec![i.to_string(), a.to_string(), b.to_string()]);
        write_csv_rows(w, &["index", "ccnn", "lsfir"], rows)
    })?;
    let target = target_filter(&run.config)?;
    let a = fir_response(run.learned(), run.config.response_points)?;
    let b = fir_response(&run.lsfir, run.config.response_points)?;
    m.add("response_comparison.csv", |w| {
        let rows = a.freqs.iter().enumerate().map(|(i, &f)| {
            vec![
                f.to_string(),
                a.magnitude[i].to_string(),
                b.magnitude[i].to_string(),
                target.response(f).norm().to_string(),
            ]
        });
        write_csv_rows(w, &["freq_hz", "ccnn", "lsfir", "target"], rows)
    })?;
    m.add("linearity.csv", |w| run.linearity.write_csv(w))?;
    m.add("metrics.csv", |w| {
        let c = &run.comparison;
        let rows = [
            ("energy_ratio_db", c.energy_ratio_db),
            ("peak_hz", c.peak_hz),
            ("ncc", c.ncc),
            ("mean_r2", run.linearity.mean()),
            ("final_val_loss", run.model.final_val_loss().unwrap_or(f64::NAN)),
            ("target_scale", run.target_scale),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v.to_string()]);
        write_csv_rows(w, &["metric", "value"], rows)
    })?;
    m.finish()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn lsfir_against_itself() {
        let bands = bandpass_bands(9.5, 10.5, 1.0, 100.0).unwrap();
        let f = lsfir_design(&bands, 151, 100.0, Assembly::Centred).unwrap();
        let c = compare_filters(&f, &f, (9.5, 10.5), 1.0, 4096).unwrap();
        assert!((c.ncc - 1.0).abs() < 1e-12);
        assert!((c.peak_hz - 10.0).abs() < 0.5);
        assert!(c.energy_ratio_db > 20.0);
    }

    #[test]
    fn dataset_shape_and_scale() {
        let cfg = SpectrumConfig {
            n_pairs: 6,
            sample_len: 64,
            ..SpectrumConfig::default()
        };
        let (d, s) = spectrum_dataset(&cfg, 1).unwrap();
        assert_eq!(d.inputs.dims(), (6, 1, 64));
        assert!(s > 0.0);
        let (d2, _) = spectrum_dataset(&cfg, 1).unwrap();
        assert_eq!(d, d2);
    }
}
