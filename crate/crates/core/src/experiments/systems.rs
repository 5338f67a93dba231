use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use super::config::{AnalysisConfig, ExperimentConfig};
use super::output::{write_csv_rows, Manifest};
use crate::collapse::{collapse_stack, linearity_r2, CollapsedFilter, LinearityReport};
use crate::fir::fir_response;
use crate::fir::io::write_filter_csv;
use crate::mdof::SimRecord;
use crate::nn::train::write_history_csv;
use crate::nn::{checkpoint, train_regression_task, train_vae_task, Dataset, Tensor3, TrainedModel, TrainedVae};
use crate::oma::{cpsd_matrix, fdd_singular_values, peak_pick, PeakOptions, SingularSpectra};
use crate::signal::io::MultiChannel;
use crate::signal::{savgol_smooth, Spectrum, SpectrumUnit};
use crate::{Error, Result};

fn global_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

/// Non-overlapping windows of `t` samples of every channel, as
/// `windows x channels x t`; the remainder is dropped.
pub fn segment_channels(channels: &[Vec<f64>], t: usize) -> Result<Tensor3> {
    let len = channels.first().map_or(0, Vec::len);
    if t == 0 || t > len {
        return Err(Error::invalid(format!("segment of {t} samples does not fit {len}")));
    }
    let b = len / t;
    let mut data = Vec::with_capacity(b * channels.len() * t);
    for s in 0..b {
        for ch in channels {
            data.extend_from_slice(&ch[s * t..(s + 1) * t]);
        }
    }
    Tensor3::from_vec(b, channels.len(), t, data)
}

/// Forcing segments as inputs and acceleration segments as targets, each
/// optionally divided by its global standard deviation.
pub fn regression_dataset(record: &SimRecord, sample_len_s: f64, normalize: bool) -> Result<(Dataset, f64, f64)> {
    let t = (sample_len_s * record.fs()).round() as usize;
    let (fx, fy) = if normalize {
        (global_std(&record.forcing), global_std(&record.accelerations.concat()))
    } else {
        (1.0, 1.0)
    };
    let forcing: Vec<f64> = record.forcing.iter().map(|v| v / fx).collect();
    let acc: Vec<Vec<f64>> = record
        .accelerations
        .iter()
        .map(|a| a.iter().map(|v| v / fy).collect())
        .collect();
    let data = Dataset::new(segment_channels(&[forcing], t)?, segment_channels(&acc, t)?)?;
    Ok((data, fx, fy))
}

/// `|W_c(f)|^2` of every latent channel on `points` frequencies.
pub fn channel_spectra(collapsed: &CollapsedFilter, points: usize) -> Result<Vec<Spectrum>> {
    collapsed
        .channels()
        .iter()
        .map(|f| {
            let r = fir_response(f, points)?;
            Spectrum::new(r.freqs, r.magnitude.iter().map(|m| m * m).collect(), SpectrumUnit::Power)
        })
        .collect()
}

/// Peaks at least `prominence_db` prominent and within `dominant_db` of the
/// spectrum's maximum, strongest first.
pub fn dominant_peaks(spectrum: &Spectrum, prominence_db: f64, dominant_db: f64) -> Vec<f64> {
    let res = spectrum.resolution();
    let opts = PeakOptions {
        min_prominence_db: prominence_db,
        ..PeakOptions::with_resolution(res)
    };
    let max = spectrum.values().iter().cloned().fold(0.0, f64::max);
    let floor = max * 10f64.powf(-dominant_db / 10.0);
    let f0 = spectrum.freqs()[0];
    peak_pick(spectrum, opts)
        .into_iter()
        .filter(|&f| {
            let i = ((f - f0) / res).round() as usize;
            spectrum.values()[i] >= floor
        })
        .collect()
}

/// For each mode, whether any peak lies within `tol` Hz of it.
pub fn modes_matched(peaks: &[Vec<f64>], modes: &[f64], tol: f64) -> Vec<bool> {
    modes
        .iter()
        .map(|m| peaks.iter().flatten().any(|p| (p - m).abs() <= tol))
        .collect()
}

fn write_spectra_csv<W: std::io::Write>(w: W, spectra: &[Spectrum]) -> Result<()> {
    let mut header = vec!["freq_hz".to_string()];
    header.extend((1..=spectra.len()).map(|c| format!("ch{c}")));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..spectra[0].len()).map(|i| {
        let mut r = vec![spectra[0].freqs()[i].to_string()];
        r.extend(spectra.iter().map(|s| s.values()[i].to_string()));
        r
    });
    write_csv_rows(w, &h, rows)
}

fn write_modes_csv<W: std::io::Write>(w: W, modes: &[f64]) -> Result<()> {
    let rows = modes.iter().enumerate().map(|(i, f)| vec![(i + 1).to_string(), f.to_string()]);
    write_csv_rows(w, &["mode", "freq_hz"], rows)
}

fn write_peaks_csv<W: std::io::Write>(w: W, peaks: &[Vec<f64>]) -> Result<()> {
    let rows = peaks
        .iter()
        .enumerate()
        .flat_map(|(c, ps)| ps.iter().map(move |p| vec![(c + 1).to_string(), p.to_string()]));
    write_csv_rows(w, &["channel", "peak_hz"], rows)
}

#[derive(Debug, Clone)]
pub struct SimulateRun {
    pub record: SimRecord,
    pub modes: Vec<f64>,
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateRun> {
    let m = cfg.effective_mdof();
    let system = m.build()?;
    let record = m.simulate(&system)?;
    Ok(SimulateRun {
        modes: system.natural_freqs().to_vec(),
        record,
    })
}

pub fn write_simulate_artifacts(run: &SimulateRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    m.add("accelerations.csv", |w| run.record.to_multichannel()?.write_csv(w))?;
    m.add("forcing.csv", |w| {
        MultiChannel::new(vec![run.record.forcing.clone()], run.record.fs())?.write_csv(w)
    })?;
    m.add("modes.csv", |w| write_modes_csv(w, &run.modes))?;
    m.finish()?;
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct RegressionRun {
    pub model: TrainedModel,
    pub collapsed: CollapsedFilter,
    pub modes: Vec<f64>,
    pub spectra: Vec<Spectrum>,
    pub peaks: Vec<Vec<f64>>,
    pub linearity: LinearityReport,
}

impl RegressionRun {
    pub fn modes_matched(&self, tol: f64) -> Vec<bool> {
        modes_matched(&self.peaks, &self.modes, tol)
    }
}

fn channel_readout(collapsed: &CollapsedFilter, a: &AnalysisConfig) -> Result<(Vec<Spectrum>, Vec<Vec<f64>>)> {
    let spectra = channel_spectra(collapsed, a.response_points)?;
    let peaks = spectra
        .iter()
        .map(|s| dominant_peaks(s, a.peak_prominence_db, a.dominant_db))
        .collect();
    Ok((spectra, peaks))
}

/// Simulates the chain, trains the forcing-to-acceleration model and reads
/// peaks off the collapsed channel filters.
pub fn run_regression_experiment(cfg: &ExperimentConfig) -> Result<RegressionRun> {
    let sim = run_simulate(cfg)?;
    let (data, _, _) = regression_dataset(&sim.record, cfg.data.sample_len_s, cfg.data.normalize)?;
    let model = train_regression_task(&cfg.effective_training(), &data)?;
    let collapsed = collapse_stack(&model.stack, sim.record.fs())?;
    let (spectra, peaks) = channel_readout(&collapsed, &cfg.analysis)?;
    let probe: Vec<usize> = (0..data.len().min(32)).collect();
    let linearity = linearity_r2(&model.stack, &data.inputs.gather(&probe))?;
    Ok(RegressionRun {
        model,
        collapsed,
        modes: sim.modes,
        spectra,
        peaks,
        linearity,
    })
}

pub fn write_regression_artifacts(run: &RegressionRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    m.add("model.ckpt", |w| checkpoint::save(&run.model.stack, w))?;
    m.add("loss_history.csv", |w| write_history_csv(&run.model.history, w))?;
    m.add("channel_spectra.csv", |w| write_spectra_csv(w, &run.spectra))?;
    m.add("channel_peaks.csv", |w| write_peaks_csv(w, &run.peaks))?;
    m.add("modes.csv", |w| write_modes_csv(w, &run.modes))?;
    m.add("linearity.csv", |w| run.linearity.write_csv(w))?;
    for (c, f) in run.collapsed.channels().iter().enumerate() {
        m.add(&format!("collapsed_channel_{}.csv", c + 1), |w| write_filter_csv(f, w))?;
    }
    m.finish()?;
    Ok(m)
}

/// Multichannel record from `data.input` if set, otherwise simulated; the
/// modal frequencies are known only for simulated data.
pub fn load_or_simulate(cfg: &ExperimentConfig) -> Result<(MultiChannel, Option<Vec<f64>>)> {
    match &cfg.data.input {
        Some(path) => {
            let rec = MultiChannel::read_csv(BufReader::new(File::open(path)?))?;
            Ok((rec, None))
        }
        None => {
            let sim = run_simulate(cfg)?;
            Ok((sim.record.to_multichannel()?, Some(sim.modes)))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FddRun {
    pub singular: SingularSpectra,
    pub peaks: Vec<f64>,
    pub modes: Option<Vec<f64>>,
}

fn fdd_of(record: &MultiChannel, a: &AnalysisConfig) -> Result<(SingularSpectra, Vec<f64>)> {
    let cpsd = cpsd_matrix(record, a.fdd_window, a.fdd_overlap)?;
    let sv = fdd_singular_values(&cpsd, a.fdd_k.min(record.n_channels()))?;
    let first = sv.spectrum(0);
    let opts = PeakOptions {
        min_prominence_db: a.peak_prominence_db,
        ..PeakOptions::with_resolution(first.resolution())
    };
    let peaks = peak_pick(&first, opts);
    Ok((sv, peaks))
}

pub fn run_fdd_experiment(cfg: &ExperimentConfig) -> Result<FddRun> {
    let (record, modes) = load_or_simulate(cfg)?;
    let (singular, peaks) = fdd_of(&record, &cfg.analysis)?;
    Ok(FddRun { singular, peaks, modes })
}

pub fn write_fdd_artifacts(run: &FddRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    m.add("singular_values.csv", |w| run.singular.write_csv(w))?;
    m.add("peaks.csv", |w| {
        write_csv_rows(w, &["peak_hz"], run.peaks.iter().map(|p| vec![p.to_string()]))
    })?;
    if let Some(modes) = &run.modes {
        m.add("modes.csv", |w| write_modes_csv(w, modes))?;
    }
    m.finish()?;
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct VaeRun {
    pub model: TrainedVae,
    pub collapsed: CollapsedFilter,
    pub modes: Option<Vec<f64>>,
    pub spectra: Vec<Spectrum>,
    pub peaks: Vec<Vec<f64>>,
    /// Savitzky-Golay smoothed sum of the channel spectra.
    pub summed: Spectrum,
    pub summed_peaks: Vec<f64>,
    pub fdd: FddRun,
}

impl VaeRun {
    /// Strongest peak of each decoder channel.
    pub fn top_peaks(&self) -> Vec<Option<f64>> {
        self.peaks.iter().map(|p| p.first().copied()).collect()
    }
}

/// Trains the LSTM/CCNN VAE on simulated or loaded accelerations and
/// emits the decoder channel spectra next to an FDD baseline of the same
/// record.
pub fn run_vae_experiment(cfg: &ExperimentConfig) -> Result<VaeRun> {
    let (record, modes) = load_or_simulate(cfg)?;
    let t = (cfg.data.sample_len_s * record.fs()).round() as usize;
    let scale = if cfg.data.normalize {
        global_std(&record.channels().concat())
    } else {
        1.0
    };
    let scaled: Vec<Vec<f64>> = record
        .channels()
        .iter()
        .map(|c| c.iter().map(|v| v / scale).collect())
        .collect();
    let data = segment_channels(&scaled, t)?;
    let model = train_vae_task(&cfg.effective_training(), &data)?;
    let collapsed = collapse_stack(&model.decoder, record.fs())?;
    let a = &cfg.analysis;
    let (spectra, peaks) = channel_readout(&collapsed, a)?;
    let mut sum = vec![0.0; spectra[0].len()];
    for s in &spectra {
        sum.iter_mut().zip(s.values()).for_each(|(a, v)| *a += v);
    }
    let smooth = savgol_smooth(&sum, a.smooth_window, a.smooth_order)?;
    let summed = Spectrum::new(
        spectra[0].freqs().to_vec(),
        smooth.iter().map(|v| v.max(0.0)).collect(),
        SpectrumUnit::Power,
    )?;
    let summed_peaks = dominant_peaks(&summed, a.peak_prominence_db, a.dominant_db);
    let (singular, fdd_peaks) = fdd_of(&record, a)?;
    Ok(VaeRun {
        model,
        collapsed,
        modes: modes.clone(),
        spectra,
        peaks,
        summed,
        summed_peaks,
        fdd: FddRun {
            singular,
            peaks: fdd_peaks,
            modes,
        },
    })
}

pub fn write_vae_artifacts(run: &VaeRun, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    let mut m = Manifest::new(cfg, dir)?;
    m.add("decoder.ckpt", |w| checkpoint::save(&run.model.decoder, w))?;
    m.add("loss_history.csv", |w| write_history_csv(&run.model.history, w))?;
    m.add("channel_spectra.csv", |w| write_spectra_csv(w, &run.spectra))?;
    m.add("channel_peaks.csv", |w| write_peaks_csv(w, &run.peaks))?;
    m.add("summed_spectrum.csv", |w| {
        let rows = run
            .summed
            .freqs()
            .iter()
            .zip(run.summed.values())
            .map(|(f, v)| vec![f.to_string(), v.to_string()]);
        write_csv_rows(w, &["freq_hz", "smoothed_sum"], rows)
    })?;
    m.add("summed_peaks.csv", |w| {
        write_csv_rows(w, &["peak_hz"], run.summed_peaks.iter().map(|p| vec![p.to_string()]))
    })?;
    m.add("singular_values.csv", |w| run.fdd.singular.write_csv(w))?;
    m.add("fdd_peaks.csv", |w| {
        write_csv_rows(w, &["peak_hz"], run.fdd.peaks.iter().map(|p| vec![p.to_string()]))
    })?;
    if let Some(modes) = &run.modes {
        m.add("modes.csv", |w| write_modes_csv(w, modes))?;
    }
    m.finish()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segmenting() {
        let ch = vec![(0..10).map(f64::from).collect::<Vec<_>>(), vec![1.0; 10]];
        let t = segment_channels(&ch, 3).unwrap();
        assert_eq!(t.dims(), (3, 2, 3));
        assert_eq!(t.row(1, 0), &[3.0, 4.0, 5.0]);
        assert!(segment_channels(&ch, 11).is_err());
    }

    #[test]
    fn dominance_filter() {
        let freqs: Vec<f64> = (0..101).map(|i| i as f64 * 0.5).collect();
        let vals: Vec<f64> = freqs
            .iter()
            .map(|&f| 1e-3 + (-(f - 10.0f64).powi(2)).exp() + 0.01 * (-(f - 30.0f64).powi(2)).exp())
            .collect();
        let s = Spectrum::new(freqs, vals, SpectrumUnit::Power).unwrap();
        assert_eq!(dominant_peaks(&s, 3.0, 10.0), vec![10.0]);
        assert_eq!(dominant_peaks(&s, 3.0, 30.0), vec![10.0, 30.0]);
        assert_eq!(modes_matched(&[vec![10.0]], &[10.2, 30.0], 0.5), vec![true, false]);
    }
}
