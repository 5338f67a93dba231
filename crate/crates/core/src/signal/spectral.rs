use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{onesided_freqs, ComplexSpectrum, Spectrum, SpectrumUnit, TimeSeries};
use crate::{Error, Result};

/// Symmetric Hamming window, `w[k] = 0.54 - 0.46 cos(2 pi k / (n - 1))`.
///
/// `n = 1` yields `[1.0]`. The second half is mirrored from the first so the
/// window is exactly symmetric.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::invalid("window length must be >= 1")),
        1 => Ok(vec![1.0]),
        _ => {
            let denom = (n - 1) as f64;
            let mut w = vec![0.0; n];
            for k in 0..n.div_ceil(2) {
                let v = 0.54 - 0.46 * (2.0 * PI * k as f64 / denom).cos();
                w[k] = v;
                w[n - 1 - k] = v;
            }
            Ok(w)
        }
    }
}

/// One-sided periodogram with a rectangular window and density scaling.
///
/// `sum(psd) * df` equals the mean square of the signal.
pub fn periodogram_psd(ts: &TimeSeries) -> Result<Spectrum> {
    let n = ts.len();
    if n < 2 {
        return Err(Error::invalid("periodogram needs at least 2 samples"));
    }
    let segs = WelchSegments::with_window(ts.samples(), ts.fs(), vec![1.0; n], 0)?;
    Ok(segs.auto_psd())
}

/// Welch power spectral density with a Hamming window, no detrending and
/// one-sided density scaling. Produces `window_len / 2 + 1` bins.
pub fn welch_psd(ts: &TimeSeries, window_len: usize, overlap: f64) -> Result<Spectrum> {
    Ok(WelchSegments::new(ts, window_len, overlap)?.auto_psd())
}

/// Welch cross-power spectral density `S_xy = E[conj(X) Y]`, same windowing
/// and scaling as [`welch_psd`].
pub fn welch_cpsd(
    x: &TimeSeries,
    y: &TimeSeries,
    window_len: usize,
    overlap: f64,
) -> Result<ComplexSpectrum> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    x.check_rate(y.fs())?;
    let sx = WelchSegments::new(x, window_len, overlap)?;
    let sy = WelchSegments::new(y, window_len, overlap)?;
    let values = sx.cross(&sy);
    Ok(ComplexSpectrum {
        freqs: sx.freqs(),
        values,
    })
}

/// Windowed FFTs of all Welch segments of one signal.
///
/// Computing these once per channel lets a CPSD matrix reuse them for every
/// channel pair; [`WelchSegments::cross`] is the single place where segment
/// spectra are combined, so auto- and cross-spectra agree bit for bit.
#[derive(Debug, Clone)]
pub struct WelchSegments {
    fs: f64,
    nfft: usize,
    scale: f64,
    /// `segments x bins`, one-sided.
    spectra: Vec<Vec<Complex64>>,
}

impl WelchSegments {
    pub fn new(ts: &TimeSeries, window_len: usize, overlap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::invalid(format!("overlap must be in [0, 1), got {overlap}")));
        }
        if window_len < 2 {
            return Err(Error::invalid("Welch window must have at least 2 samples"));
        }
        if window_len > ts.len() {
            return Err(Error::invalid(format!(
                "window of {window_len} samples is longer than the signal ({})",
                ts.len()
            )));
        }
        let noverlap = (overlap * window_len as f64).floor() as usize;
        Self::with_window(ts.samples(), ts.fs(), hamming_window(window_len)?, noverlap)
    }

    fn with_window(x: &[f64], fs: f64, window: Vec<f64>, noverlap: usize) -> Result<Self> {
        let nfft = window.len();
        let step = nfft - noverlap;
        let n_seg = (x.len() - nfft) / step + 1;
        let scale = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());
        let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
        let n_bins = nfft / 2 + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        let mut spectra = Vec::with_capacity(n_seg);
        for s in 0..n_seg {
            let seg = &x[s * step..s * step + nfft];
            for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
                *b = Complex64::new(v * w, 0.0);
            }
            fft.process(&mut buf);
            spectra.push(buf[..n_bins].to_vec());
        }
        Ok(Self {
            fs,
            nfft,
            scale,
            spectra,
        })
    }

    pub fn n_segments(&self) -> usize {
        self.spectra.len()
    }

    pub fn n_bins(&self) -> usize {
        self.nfft / 2 + 1
    }

    pub fn freqs(&self) -> Vec<f64> {
        onesided_freqs(self.nfft, self.fs)
    }

    /// Averaged one-sided `conj(X_self) * X_other`, density scaled.
    ///
    /// # Panics
    /// If the two segment sets were computed with different parameters.
    pub fn cross(&self, other: &WelchSegments) -> Vec<Complex64> {
        assert_eq!(self.nfft, other.nfft);
        assert_eq!(self.spectra.len(), other.spectra.len());
        let n_bins = self.n_bins();
        let mut acc = vec![Complex64::new(0.0, 0.0); n_bins];
        for (a, b) in self.spectra.iter().zip(&other.spectra) {
            for ((s, xa), xb) in acc.iter_mut().zip(a).zip(b) {
                *s += xa.conj() * xb;
            }
        }
        let norm = self.scale / self.spectra.len() as f64;
        let nyquist_bin = if self.nfft % 2 == 0 { n_bins - 1 } else { n_bins };
        for (k, s) in acc.iter_mut().enumerate() {
            let onesided = if k == 0 || k == nyquist_bin { 1.0 } else { 2.0 };
            *s *= norm * onesided;
        }
        acc
    }

    pub fn auto_psd(&self) -> Spectrum {
        let values = self.cross(self).into_iter().map(|c| c.re).collect();
        Spectrum::from_parts(self.freqs(), values, SpectrumUnit::Power)
    }
}
