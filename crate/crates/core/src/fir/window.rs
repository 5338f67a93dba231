use std::f64::consts::PI;

use super::FirFilter;
use crate::signal::hamming_window;
use crate::{Error, Result};

/// Band-pass by the window method: the ideal band impulse response
/// (difference of two sincs centred at `(p - 1) / 2`) tapered by a Hamming
/// window of length `p`.
pub fn window_method_bandpass(p: usize, f_lo: f64, f_hi: f64, fs: f64) -> Result<FirFilter> {
    if !(fs > 0.0 && 0.0 < f_lo && f_lo < f_hi && f_hi < fs / 2.0) {
        return Err(Error::invalid(format!(
            "band-pass edges must satisfy 0 < {f_lo} < {f_hi} < {}",
            fs / 2.0
        )));
    }
    let window = hamming_window(p)?;
    let w1 = 2.0 * PI * f_lo / fs;
    let w2 = 2.0 * PI * f_hi / fs;
    let centre = (p - 1) as f64 / 2.0;
    let ideal = |k: usize| {
        let t = k as f64 - centre;
        if t == 0.0 {
            (w2 - w1) / PI
        } else {
            ((w2 * t).sin() - (w1 * t).sin()) / (PI * t)
        }
    };
    let mut taps: Vec<f64> = (0..p).map(|k| ideal(k) * window[k]).collect();
    for k in 0..p / 2 {
        taps[p - 1 - k] = taps[k];
    }
    FirFilter::new(taps, fs)
}
