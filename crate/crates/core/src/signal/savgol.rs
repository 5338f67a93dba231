use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Least-squares polynomial smoothing weights for a window of `window`
/// samples evaluated at position `pos` (0-based) within the window.
pub fn savgol_coefficients(window: usize, order: usize, pos: usize) -> Result<Vec<f64>> {
    check(window, order)?;
    if pos >= window {
        return Err(Error::invalid("evaluation position outside the window"));
    }
    let half = (window / 2) as f64;
    let scale = if half > 0.0 { half } else { 1.0 };
    let t = |i: usize| (i as f64 - half) / scale;
    let a = DMatrix::from_fn(window, order + 1, |i, j| t(i).powi(j as i32));
    let pinv = a
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let v = DVector::from_fn(order + 1, |j, _| t(pos).powi(j as i32));
    Ok((v.transpose() * pinv).iter().copied().collect())
}

/// Savitzky-Golay smoothing. The output has the input's length; the first and
/// last `window / 2` points are evaluated from a polynomial fitted to the
/// first and last full window.
pub fn savgol_smooth(values: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    check(window, order)?;
    if window > values.len() {
        return Err(Error::invalid(format!(
            "window {window} longer than input ({})",
            values.len()
        )));
    }
    let half = window / 2;
    let n = values.len();
    let centre = savgol_coefficients(window, order, half)?;
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = dot(&centre, &values[i - half..=i + half]);
    }
    for pos in 0..half {
        let c = savgol_coefficients(window, order, pos)?;
        out[pos] = dot(&c, &values[..window]);
        let c_end = savgol_coefficients(window, order, window - 1 - pos)?;
        out[n - 1 - pos] = dot(&c_end, &values[n - window..]);
    }
    Ok(out)
}

fn check(window: usize, order: usize) -> Result<()> {
    if window % 2 == 0 {
        return Err(Error::invalid(format!("Savitzky-Golay window must be odd, got {window}")));
    }
    if order >= window {
        return Err(Error::invalid(format!(
            "polynomial order {order} must be below the window length {window}"
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
