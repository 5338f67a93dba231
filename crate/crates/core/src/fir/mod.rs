//! FIR filters: closed-form least-squares design, the window method,
//! causal application and frequency responses.

pub mod io;
mod lsfir;
mod window;

pub use lsfir::{
    bandpass_bands, lsfir_b, lsfir_design, lsfir_q, Assembly, BandSpec, LsFirProblem,
};
pub use window::window_method_bandpass;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::signal::{Spectrum, SpectrumUnit, TimeSeries};
use crate::{Error, Result};

/// Impulse response `taps[0..p]` with its sampling rate. Output convention is
/// `y[n] = sum_i taps[i] * x[n - i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
    fs: f64,
}

impl FirFilter {
    pub fn new(taps: Vec<f64>, fs: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("FIR filter needs at least one tap"));
        }
        if taps.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite FIR tap"));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::invalid("sampling rate must be > 0"));
        }
        Ok(Self { taps, fs })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.taps.len();
        (0..n / 2).all(|k| self.taps[k] == self.taps[n - 1 - k])
    }

    /// Frequency response at `f` Hz (DTFT of the taps).
    pub fn response_at(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f / self.fs;
        // Horner in z^-1.
        let z_inv = Complex64::from_polar(1.0, -w);
        self.taps
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &h| acc * z_inv + h)
    }
}

/// Full linear convolution of two coefficient vectors; cascading filters
/// `h` then `g` equals filtering once with `combine(h, g)`.
pub fn combine(h: &[f64], g: &[f64]) -> Vec<f64> {
    if h.is_empty() || g.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; h.len() + g.len() - 1];
    for (i, &a) in h.iter().enumerate() {
        for (o, &b) in out[i..].iter_mut().zip(g) {
            *o += a * b;
        }
    }
    out
}

/// Causal filtering with `p - 1` implicit leading zeros; output has the
/// input's length.
pub fn fir_apply(filter: &FirFilter, ts: &TimeSeries) -> Result<TimeSeries> {
    ts.check_rate(filter.fs)?;
    TimeSeries::new(causal_conv(filter.taps(), ts.samples()), ts.fs())
}

pub(crate) fn causal_conv(taps: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (n, out) in y.iter_mut().enumerate() {
        let k_max = taps.len().min(n + 1);
        let mut acc = 0.0;
        for k in 0..k_max {
            acc += taps[k] * x[n - k];
        }
        *out = acc;
    }
    y
}

/// Magnitude and phase responses on a uniform grid of `n_freqs` points
/// spanning `[0, fs/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub freqs: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Wrapped to `(-pi, pi]`.
    pub phase: Vec<f64>,
}

impl FrequencyResponse {
    pub fn magnitude_spectrum(&self) -> Spectrum {
        Spectrum::from_parts(self.freqs.clone(), self.magnitude.clone(), SpectrumUnit::Magnitude)
    }

    pub fn power_spectrum(&self) -> Spectrum {
        let p = self.magnitude.iter().map(|m| m * m).collect();
        Spectrum::from_parts(self.freqs.clone(), p, SpectrumUnit::Power)
    }

    pub fn unwrapped_phase(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.phase.len());
        let mut offset = 0.0;
        let mut prev: Option<f64> = None;
        for &p in &self.phase {
            if let Some(q) = prev {
                let d = p - q;
                if d > PI {
                    offset -= 2.0 * PI;
                } else if d < -PI {
                    offset += 2.0 * PI;
                }
            }
            prev = Some(p);
            out.push(p + offset);
        }
        out
    }
}

pub fn fir_response(filter: &FirFilter, n_freqs: usize) -> Result<FrequencyResponse> {
    if n_freqs < 2 {
        return Err(Error::invalid("need at least two frequency points"));
    }
    let nyq = filter.fs / 2.0;
    let freqs: Vec<f64> = (0..n_freqs)
        .map(|i| nyq * i as f64 / (n_freqs - 1) as f64)
        .collect();
    let h: Vec<Complex64> = freqs.iter().map(|&f| filter.response_at(f)).collect();
    Ok(FrequencyResponse {
        magnitude: h.iter().map(|c| c.norm()).collect(),
        phase: h.iter().map(|c| c.arg()).collect(),
        freqs,
    })
}
