use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Spectral density of an AR(p) process at normalised frequency `f`
/// (cycles per sample, `0 <= f <= 0.5`):
///
/// `S(f) = sigma2 / |1 - sum_k weights[k] e^{-2 pi i f (k + 1)}|^2`
///
/// `weights[k]` is the coefficient of lag `k + 1`, i.e. the process is
/// `x_t = sum_k weights[k] x_{t-k-1} + e_t`. Coefficients written newest-last
/// (`w_{p-1}` multiplying lag 1) must be reversed before calling.
pub fn ar_spectral_density(weights: &[f64], sigma2: f64, f: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&f) {
        return Err(Error::invalid(format!("normalised frequency {f} outside [0, 0.5]")));
    }
    let mut den = Complex64::new(1.0, 0.0);
    for (k, &w) in weights.iter().enumerate() {
        den -= w * Complex64::from_polar(1.0, -2.0 * PI * f * (k + 1) as f64);
    }
    let mag2 = den.norm_sqr();
    if mag2 < 1e-24 {
        return Err(Error::Unstable(format!(
            "AR transfer function has a pole on the unit circle at f = {f}"
        )));
    }
    Ok(sigma2 / mag2)
}
