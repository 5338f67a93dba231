use std::f64::consts::PI;

use num_complex::Complex64;

use super::TimeSeries;
use crate::{Error, Result};

/// One biquad, `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Sos {
    pub const IDENTITY: Sos = Sos {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    /// Largest pole modulus.
    pub fn pole_radius(&self) -> f64 {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        let p1 = (-self.a1 + disc) / 2.0;
        let p2 = (-self.a1 - disc) / 2.0;
        p1.norm().max(p2.norm())
    }

    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }
}

/// Cascade of second-order sections with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IirCascade {
    sections: Vec<Sos>,
    fs: f64,
}

impl IirCascade {
    /// Builds a cascade, rejecting any section with a pole on or outside the
    /// unit circle.
    pub fn new(sections: Vec<Sos>, fs: f64) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(Error::invalid("sampling rate must be > 0"));
        }
        if let Some(i) = sections.iter().position(|s| !(s.pole_radius() < 1.0)) {
            return Err(Error::Unstable(format!("section {i} has a pole outside the unit circle")));
        }
        Ok(Self { sections, fs })
    }

    pub fn sections(&self) -> &[Sos] {
        &self.sections
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / self.fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, f: f64) -> f64 {
        20.0 * self.response(f).norm().max(1e-300).log10()
    }
}

/// Chebyshev type II band-pass design.
///
/// `order` is the order of the analog low-pass prototype (the band-pass has
/// twice as many poles). `f_lo` and `f_hi` are the stopband edges, where the
/// attenuation first reaches `atten_db`. The prototype is mapped to a
/// band-pass around the prewarped edges and discretised with the bilinear
/// transform; sections are normalised to unit gain at the band centre.
pub fn cheby2_bandpass(
    order: usize,
    atten_db: f64,
    f_lo: f64,
    f_hi: f64,
    fs: f64,
) -> Result<IirCascade> {
    if order == 0 {
        return Err(Error::invalid("filter order must be >= 1"));
    }
    if !(atten_db > 0.0) {
        return Err(Error::invalid("attenuation must be positive"));
    }
    if !(0.0 < f_lo && f_lo < f_hi && f_hi < fs / 2.0) {
        return Err(Error::invalid(format!(
            "band edges must satisfy 0 < {f_lo} < {f_hi} < {}",
            fs / 2.0
        )));
    }

    let (proto_zeros, proto_poles) = cheby2_prototype(order, atten_db);

    // Prewarp the edges for the bilinear transform.
    let w1 = 2.0 * fs * (PI * f_lo / fs).tan();
    let w2 = 2.0 * fs * (PI * f_hi / fs).tan();
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    let to_bandpass = |r: Complex64| -> [Complex64; 2] {
        let rb = r * bw / 2.0;
        let d = (rb * rb - w0 * w0).sqrt();
        [rb + d, rb - d]
    };
    let mut zeros: Vec<Complex64> = proto_zeros.iter().flat_map(|&z| to_bandpass(z)).collect();
    let poles: Vec<Complex64> = proto_poles.iter().flat_map(|&p| to_bandpass(p)).collect();
    // Prototype zero deficit becomes zeros at s = 0.
    zeros.extend(std::iter::repeat_n(
        Complex64::new(0.0, 0.0),
        proto_poles.len() - proto_zeros.len(),
    ));

    let bilinear = |s: Complex64| (2.0 * fs + s) / (2.0 * fs - s);
    let mut zd: Vec<Complex64> = zeros.iter().map(|&z| bilinear(z)).collect();
    // Zeros at infinity land on z = -1.
    zd.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), poles.len() - zeros.len()));
    let pd: Vec<Complex64> = poles.iter().map(|&p| bilinear(p)).collect();

    let f_centre = fs / PI * (w0 / (2.0 * fs)).atan();
    let sections = pair_sections(&zd, &pd, f_centre, fs)?;
    let cascade = IirCascade::new(sections, fs)?;
    assert!(
        cascade.sections.iter().all(|s| s.pole_radius() < 1.0),
        "Chebyshev II design produced an unstable section"
    );
    Ok(cascade)
}

/// Zeros and poles of the Chebyshev II analog low-pass prototype whose
/// stopband starts at 1 rad/s.
fn cheby2_prototype(order: usize, atten_db: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = order as f64;
    let eps = 1.0 / (10f64.powf(0.1 * atten_db) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n;
    let mut zeros = Vec::with_capacity(order);
    let mut poles = Vec::with_capacity(order);
    for k in 0..order {
        let m = -(order as f64) + 1.0 + 2.0 * k as f64;
        let theta = PI * m / (2.0 * n);
        if m != 0.0 {
            zeros.push(Complex64::new(0.0, 1.0 / theta.sin()));
        }
        // -exp(j theta) with real part scaled by sinh(mu), imaginary by cosh(mu)
        let base = -Complex64::from_polar(1.0, theta);
        let p = Complex64::new(mu.sinh() * base.re, mu.cosh() * base.im);
        poles.push(1.0 / p);
    }
    (zeros, poles)
}

/// Groups conjugate pole pairs with their nearest conjugate zero pairs.
fn pair_sections(
    zeros: &[Complex64],
    poles: &[Complex64],
    f_centre: f64,
    fs: f64,
) -> Result<Vec<Sos>> {
    let mut pole_pairs = conjugate_pairs(poles)?;
    let mut zero_pairs = conjugate_pairs(zeros)?;
    if pole_pairs.len() != zero_pairs.len() {
        return Err(Error::invalid("zero and pole counts differ"));
    }
    // Poles closest to the unit circle first, each taking the nearest zeros.
    pole_pairs.sort_by(|a, b| b.0.norm().total_cmp(&a.0.norm()));
    let z_centre = Complex64::from_polar(1.0, -2.0 * PI * f_centre / fs);
    let mut sections = Vec::with_capacity(pole_pairs.len());
    for (p1, p2) in pole_pairs {
        let (idx, _) = zero_pairs
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 .0 - p1).norm().total_cmp(&(b.1 .0 - p1).norm()))
            .expect("pair counts checked above");
        let (z1, z2) = zero_pairs.swap_remove(idx);
        let mut s = Sos {
            b0: 1.0,
            b1: -(z1 + z2).re,
            b2: (z1 * z2).re,
            a1: -(p1 + p2).re,
            a2: (p1 * p2).re,
        };
        let g = s.response(z_centre).norm();
        s.b0 /= g;
        s.b1 /= g;
        s.b2 /= g;
        sections.push(s);
    }
    Ok(sections)
}

/// Splits roots into `(r, conj(r))` pairs; real roots are paired with each
/// other in order of value.
fn conjugate_pairs(roots: &[Complex64]) -> Result<Vec<(Complex64, Complex64)>> {
    let tol = 1e-9;
    let mut upper: Vec<Complex64> = roots.iter().copied().filter(|c| c.im > tol).collect();
    let lower = roots.iter().filter(|c| c.im < -tol).count();
    if upper.len() != lower {
        return Err(Error::invalid("roots are not closed under conjugation"));
    }
    let mut reals: Vec<f64> = roots
        .iter()
        .filter(|c| c.im.abs() <= tol)
        .map(|c| c.re)
        .collect();
    if reals.len() % 2 == 1 {
        return Err(Error::invalid("odd number of real roots"));
    }
    reals.sort_by(f64::total_cmp);
    upper.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut pairs: Vec<(Complex64, Complex64)> = upper.into_iter().map(|r| (r, r.conj())).collect();
    for pr in reals.chunks(2) {
        pairs.push((Complex64::new(pr[0], 0.0), Complex64::new(pr[1], 0.0)));
    }
    Ok(pairs)
}

/// Filters `ts` through the cascade (direct form II transposed, zero initial
/// state).
pub fn iir_filter(cascade: &IirCascade, ts: &TimeSeries) -> Result<TimeSeries> {
    ts.check_rate(cascade.fs)?;
    let mut y = ts.samples().to_vec();
    for s in &cascade.sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let x = *v;
            let out = s.b0 * x + z1;
            z1 = s.b1 * x - s.a1 * out + z2;
            z2 = s.b2 * x - s.a2 * out;
            *v = out;
        }
    }
    TimeSeries::new(y, ts.fs())
}
