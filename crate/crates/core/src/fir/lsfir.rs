use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::FirFilter;
use crate::{Error, Result};

/// One band of a piecewise specification on the normalised frequency axis
/// `f = omega / pi in [0, 1]`. Inside the band the weight is constant and the
/// desired amplitude is linear, `D(f) = d_slope * f + d_intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSpec {
    pub f_a: f64,
    pub f_b: f64,
    pub weight: f64,
    pub d_slope: f64,
    pub d_intercept: f64,
}

impl BandSpec {
    /// Band with constant desired amplitude `d`.
    pub fn flat(f_a: f64, f_b: f64, weight: f64, d: f64) -> Self {
        Self {
            f_a,
            f_b,
            weight,
            d_slope: 0.0,
            d_intercept: d,
        }
    }

    pub fn desired(&self, f: f64) -> f64 {
        self.d_slope * f + self.d_intercept
    }
}

/// Checks ordering, range and non-overlap of a band list.
pub(crate) fn validate_bands(bands: &[BandSpec]) -> Result<()> {
    for b in bands {
        if !(0.0 <= b.f_a && b.f_a < b.f_b && b.f_b <= 1.0) {
            return Err(Error::invalid(format!(
                "band [{}, {}] must satisfy 0 <= f_a < f_b <= 1",
                b.f_a, b.f_b
            )));
        }
        if !(b.weight >= 0.0) || !b.d_slope.is_finite() || !b.d_intercept.is_finite() {
            return Err(Error::invalid("band weight must be >= 0 and D finite"));
        }
    }
    let mut sorted: Vec<&BandSpec> = bands.iter().collect();
    sorted.sort_by(|a, b| a.f_a.total_cmp(&b.f_a));
    if sorted.windows(2).any(|w| w[1].f_a < w[0].f_b) {
        return Err(Error::invalid("bands overlap"));
    }
    Ok(())
}

/// `q(n) = (1/pi) int_0^pi W(w) cos(n w) dw`, closed form per band.
pub fn lsfir_q(bands: &[BandSpec], n: usize) -> f64 {
    bands
        .iter()
        .map(|b| {
            if n == 0 {
                b.weight * (b.f_b - b.f_a)
            } else {
                let a = n as f64 * PI;
                b.weight * ((a * b.f_b).sin() - (a * b.f_a).sin()) / a
            }
        })
        .sum()
}

/// `b(k) = (1/pi) int_0^pi W(w) D(w) cos(k w) dw`, closed form per band.
pub fn lsfir_b(bands: &[BandSpec], k: usize) -> f64 {
    bands
        .iter()
        .map(|b| {
            let (m, c) = (b.d_slope, b.d_intercept);
            let antideriv = |f: f64| {
                if k == 0 {
                    0.5 * m * f * f + c * f
                } else {
                    let a = k as f64 * PI;
                    (m * f + c) * (a * f).sin() / a + m * (a * f).cos() / (a * a)
                }
            };
            b.weight * (antideriv(b.f_b) - antideriv(b.f_a))
        })
        .sum()
}

/// How the half-filter `a(0..=P)` is laid out as a length `2P + 1` impulse
/// response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assembly {
    /// `h[P] = a(0)`, `h[P +- n] = a(n) / 2`; the realised amplitude is
    /// exactly `A(w) = sum a(n) cos(n w)`.
    #[default]
    Centred,
    /// `[a(P), ..., a(1), 2 a(0), a(1), ..., a(P)]`, which realises `2 A(w)`.
    PaperLiteral,
}

/// The normal equations of the weighted least-squares design for a type-I
/// filter of `2P + 1` taps.
#[derive(Debug, Clone)]
pub struct LsFirProblem {
    half_order: usize,
    bands: Vec<BandSpec>,
    /// `q(0..=2P)`.
    q: Vec<f64>,
    /// `b(0..=P)`.
    b: Vec<f64>,
}

impl LsFirProblem {
    pub fn new(bands: &[BandSpec], p: usize) -> Result<Self> {
        if p == 0 || p % 2 == 0 {
            return Err(Error::invalid(format!(
                "least-squares design needs an odd tap count, got {p}"
            )));
        }
        validate_bands(bands)?;
        if !bands.iter().any(|b| b.weight > 0.0) {
            return Err(Error::invalid("at least one band needs a positive weight"));
        }
        let half_order = (p - 1) / 2;
        Ok(Self {
            half_order,
            bands: bands.to_vec(),
            q: (0..=2 * half_order).map(|n| lsfir_q(bands, n)).collect(),
            b: (0..=half_order).map(|k| lsfir_b(bands, k)).collect(),
        })
    }

    pub fn half_order(&self) -> usize {
        self.half_order
    }

    pub fn bands(&self) -> &[BandSpec] {
        &self.bands
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Toeplitz part, `Q1(k, n) = q(|k - n|)`.
    pub fn q1(&self) -> DMatrix<f64> {
        let m = self.half_order + 1;
        DMatrix::from_fn(m, m, |k, n| self.q[k.abs_diff(n)])
    }

    /// Hankel part, `Q2(k, n) = q(k + n)`.
    pub fn q2(&self) -> DMatrix<f64> {
        let m = self.half_order + 1;
        DMatrix::from_fn(m, m, |k, n| self.q[k + n])
    }

    /// `Q = (Q1 + Q2) / 2`.
    pub fn matrix(&self) -> DMatrix<f64> {
        (self.q1() + self.q2()) * 0.5
    }

    /// Solves `Q a = b` by Cholesky factorisation.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let chol = self.matrix().cholesky().ok_or_else(|| {
            Error::Singular("least-squares normal matrix is not positive definite".into())
        })?;
        let a = chol.solve(&DVector::from_column_slice(&self.b));
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("least-squares solution is not finite".into()));
        }
        Ok(a.iter().copied().collect())
    }

    /// Amplitude `A(w) = sum a(n) cos(n w)` of coefficients `a` at `w` rad.
    pub fn amplitude(a: &[f64], w: f64) -> f64 {
        a.iter()
            .enumerate()
            .map(|(n, &an)| an * (n as f64 * w).cos())
            .sum()
    }
}

/// Lays out `a(0..=P)` as a symmetric impulse response.
pub(crate) fn assemble(a: &[f64], assembly: Assembly) -> Vec<f64> {
    let half = a.len() - 1;
    let mut h = vec![0.0; 2 * half + 1];
    let (centre, side) = match assembly {
        Assembly::Centred => (a[0], 0.5),
        Assembly::PaperLiteral => (2.0 * a[0], 1.0),
    };
    h[half] = centre;
    for n in 1..=half {
        let v = side * a[n];
        h[half - n] = v;
        h[half + n] = v;
    }
    h
}

/// Weighted least-squares linear-phase FIR design with `p` (odd) taps.
pub fn lsfir_design(
    bands: &[BandSpec],
    p: usize,
    fs: f64,
    assembly: Assembly,
) -> Result<FirFilter> {
    let a = LsFirProblem::new(bands, p)?.solve()?;
    FirFilter::new(assemble(&a, assembly), fs)
}

/// Band list for a band-pass target: unit-weight stopbands with `D = 0`,
/// zero-weight transitions of `transition` Hz and a unit-weight passband
/// `[f_lo, f_hi]` with `D = 1`.
pub fn bandpass_bands(f_lo: f64, f_hi: f64, transition: f64, fs: f64) -> Result<Vec<BandSpec>> {
    let nyq = fs / 2.0;
    if !(0.0 <= f_lo && f_lo < f_hi && f_hi <= nyq) || !(transition >= 0.0) {
        return Err(Error::invalid(format!(
            "invalid band-pass [{f_lo}, {f_hi}] Hz with transition {transition} Hz at fs = {fs}"
        )));
    }
    let mut bands = Vec::new();
    let lo_stop = f_lo - transition;
    if lo_stop > 0.0 {
        bands.push(BandSpec::flat(0.0, lo_stop / nyq, 1.0, 0.0));
    }
    bands.push(BandSpec::flat(f_lo / nyq, f_hi / nyq, 1.0, 1.0));
    let hi_stop = f_hi + transition;
    if hi_stop < nyq {
        bands.push(BandSpec::flat(hi_stop / nyq, 1.0, 1.0, 0.0));
    }
    Ok(bands)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_full_band() {
        let full = [BandSpec::flat(0.0, 1.0, 1.0, 1.0)];
        assert_eq!(lsfir_q(&full, 0), 1.0);
        for n in 1..20 {
            assert!(lsfir_q(&full, n).abs() < 1e-15);
        }
    }

    #[test]
    fn b_simple_cases() {
        let flat = [BandSpec::flat(0.0, 1.0, 1.0, 1.0)];
        assert_eq!(lsfir_b(&flat, 0), 1.0);
        for k in 1..20 {
            assert!(lsfir_b(&flat, k).abs() < 1e-15);
        }
        let ramp = [BandSpec {
            f_a: 0.0,
            f_b: 1.0,
            weight: 1.0,
            d_slope: 1.0,
            d_intercept: 0.0,
        }];
        assert_eq!(lsfir_b(&ramp, 0), 0.5);
    }

    #[test]
    fn full_band_gives_delta() {
        let full = [BandSpec::flat(0.0, 1.0, 1.0, 1.0)];
        let h = lsfir_design(&full, 11, 1.0, Assembly::Centred).unwrap();
        for (i, &v) in h.taps().iter().enumerate() {
            let want = if i == 5 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-10);
        }
        let lit = lsfir_design(&full, 11, 1.0, Assembly::PaperLiteral).unwrap();
        assert!((lit.taps()[5] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn structure_of_q() {
        let bands = bandpass_bands(22.5, 23.5, 1.0, 100.0).unwrap();
        let prob = LsFirProblem::new(&bands, 31).unwrap();
        let q1 = prob.q1();
        let q2 = prob.q2();
        assert_eq!(q1, q1.transpose());
        for k in 1..q1.nrows() {
            for n in 1..q1.ncols() {
                assert_eq!(q1[(k, n)], q1[(k - 1, n - 1)]);
            }
        }
        for k in 1..q2.nrows() {
            for n in 0..q2.ncols() - 1 {
                assert_eq!(q2[(k, n)], q2[(k - 1, n + 1)]);
            }
        }
        let eig = prob.matrix().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn rejects_even_and_degenerate() {
        let full = [BandSpec::flat(0.0, 1.0, 1.0, 1.0)];
        assert!(lsfir_design(&full, 10, 1.0, Assembly::Centred).is_err());
        let zero = [BandSpec::flat(0.0, 1.0, 0.0, 1.0)];
        assert!(lsfir_design(&zero, 11, 1.0, Assembly::Centred).is_err());
        let overlap = [BandSpec::flat(0.0, 0.5, 1.0, 1.0), BandSpec::flat(0.4, 1.0, 1.0, 0.0)];
        assert!(lsfir_design(&overlap, 11, 1.0, Assembly::Centred).is_err());
        // A tiny band leaves most of the cosine space unconstrained.
        let tiny = [BandSpec::flat(0.5, 0.5 + 1e-9, 1.0, 1.0)];
        assert!(matches!(
            lsfir_design(&tiny, 41, 1.0, Assembly::Centred),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn symmetric_output() {
        let bands = bandpass_bands(9.5, 10.5, 1.0, 100.0).unwrap();
        let h = lsfir_design(&bands, 151, 100.0, Assembly::Centred).unwrap();
        assert!(h.is_symmetric());
    }
}
