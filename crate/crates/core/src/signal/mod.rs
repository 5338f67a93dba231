//! Foundational DSP used by every other module.

mod ar;
mod iir;
pub mod io;
mod noise;
mod resample;
mod savgol;
mod spectral;

pub use ar::ar_spectral_density;
pub use iir::{cheby2_bandpass, iir_filter, IirCascade, Sos};
pub use noise::{rng_from_seed, split_seed, white_noise, Rng};
pub use resample::resample;
pub use savgol::{savgol_coefficients, savgol_smooth};
pub use spectral::{hamming_window, periodogram_psd, welch_cpsd, welch_psd, WelchSegments};

use num_complex::Complex64;

use crate::{Error, Result};

/// A uniformly sampled real-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    fs: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::invalid(format!("sampling rate must be > 0, got {fs}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, fs })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population variance (divides by `n`).
    pub fn variance(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.samples.len() as f64
    }

    pub(crate) fn check_rate(&self, fs: f64) -> Result<()> {
        if self.fs != fs {
            return Err(Error::RateMismatch(self.fs, fs));
        }
        Ok(())
    }
}

/// What the values of a [`Spectrum`] measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumUnit {
    Magnitude,
    /// Power spectral density, units²/Hz.
    Power,
    Decibel,
}

/// Real-valued spectrum on an ascending frequency grid within `[0, fs/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    freqs: Vec<f64>,
    values: Vec<f64>,
    unit: SpectrumUnit,
}

impl Spectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<f64>, unit: SpectrumUnit) -> Result<Self> {
        check_grid(&freqs, values.len())?;
        Ok(Self { freqs, values, unit })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> SpectrumUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Bin spacing, assuming a uniform grid.
    pub fn resolution(&self) -> f64 {
        if self.freqs.len() < 2 {
            return 0.0;
        }
        self.freqs[1] - self.freqs[0]
    }

    /// Frequency of the largest value.
    pub fn peak_frequency(&self) -> Option<f64> {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        Some(self.freqs[i])
    }

    /// Converts magnitude or power values to decibels.
    pub fn to_db(&self) -> Spectrum {
        let values = match self.unit {
            SpectrumUnit::Decibel => self.values.clone(),
            SpectrumUnit::Magnitude => self
                .values
                .iter()
                .map(|v| 20.0 * v.abs().max(1e-300).log10())
                .collect(),
            SpectrumUnit::Power => self
                .values
                .iter()
                .map(|v| 10.0 * v.abs().max(1e-300).log10())
                .collect(),
        };
        Spectrum {
            freqs: self.freqs.clone(),
            values,
            unit: SpectrumUnit::Decibel,
        }
    }

    pub(crate) fn from_parts(freqs: Vec<f64>, values: Vec<f64>, unit: SpectrumUnit) -> Self {
        debug_assert_eq!(freqs.len(), values.len());
        Self { freqs, values, unit }
    }
}

/// Complex-valued spectrum, e.g. a cross-power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        check_grid(&freqs, values.len())?;
        Ok(Self { freqs, values })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn conj(&self) -> ComplexSpectrum {
        ComplexSpectrum {
            freqs: self.freqs.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }
}

fn check_grid(freqs: &[f64], n_values: usize) -> Result<()> {
    if freqs.len() != n_values {
        return Err(Error::LengthMismatch(freqs.len(), n_values));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("frequencies must be strictly increasing"));
    }
    Ok(())
}

/// Uniform grid of `n` one-sided bin frequencies for an `nfft`-point transform.
pub(crate) fn onesided_freqs(nfft: usize, fs: f64) -> Vec<f64> {
    (0..nfft / 2 + 1).map(|k| k as f64 * fs / nfft as f64).collect()
}
