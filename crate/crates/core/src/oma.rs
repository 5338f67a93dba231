//! Frequency domain decomposition: CPSD matrices of a multichannel record,
//! their singular values per bin, and peak picking on the result.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::signal::io::MultiChannel;
use crate::signal::{Spectrum, SpectrumUnit, WelchSegments};
use crate::{Error, Result};

/// One Hermitian `N x N` matrix of cross-spectral densities per frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CpsdMatrix {
    freqs: Vec<f64>,
    matrices: Vec<DMatrix<Complex64>>,
}

impl CpsdMatrix {
    pub fn new(freqs: Vec<f64>, matrices: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if freqs.len() != matrices.len() {
            return Err(Error::LengthMismatch(freqs.len(), matrices.len()));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("frequencies must be strictly increasing"));
        }
        if matrices.iter().any(|m| !m.is_square()) {
            return Err(Error::invalid("CPSD matrices must be square"));
        }
        Ok(Self { freqs, matrices })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    pub fn n_channels(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.nrows())
    }
}

/// Welch CPSD of every channel pair. The upper triangle is estimated and
/// mirrored, so every bin is exactly Hermitian.
pub fn cpsd_matrix(record: &MultiChannel, window_len: usize, overlap: f64) -> Result<CpsdMatrix> {
    let n = record.n_channels();
    if n == 0 {
        return Err(Error::invalid("record has no channels"));
    }
    let segs = (0..n)
        .map(|i| WelchSegments::new(&record.series(i), window_len, overlap))
        .collect::<Result<Vec<_>>>()?;
    let n_bins = segs[0].n_bins();
    let mut matrices = vec![DMatrix::zeros(n, n); n_bins];
    for i in 0..n {
        for j in i..n {
            let sij = segs[i].cross(&segs[j]);
            for (m, &v) in matrices.iter_mut().zip(&sij) {
                if i == j {
                    m[(i, i)] = Complex64::new(v.re, 0.0);
                } else {
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
        }
    }
    CpsdMatrix::new(segs[0].freqs(), matrices)
}

/// Top-`k` singular values per bin, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectra {
    freqs: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl SingularSpectra {
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// `values()[bin][i]` is the `i`-th largest singular value at `bin`.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Spectrum of the `i`-th singular value (0 = first).
    pub fn spectrum(&self, i: usize) -> Spectrum {
        Spectrum::from_parts(
            self.freqs.clone(),
            self.values.iter().map(|v| v[i]).collect(),
            SpectrumUnit::Power,
        )
    }

    /// CSV `freq_hz,sv1,...,svk`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["freq_hz".to_string()];
        header.extend((1..=self.k()).map(|i| format!("sv{i}")));
        wtr.write_record(&header)?;
        for (f, v) in self.freqs.iter().zip(&self.values) {
            let mut row = vec![f.to_string()];
            row.extend(v.iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Singular values of each bin. The matrices are Hermitian, so these are the
/// absolute eigenvalues.
pub fn fdd_singular_values(cpsd: &CpsdMatrix, k: usize) -> Result<SingularSpectra> {
    let n = cpsd.n_channels();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    let values = cpsd
        .matrices
        .par_iter()
        .map(|m| {
            let mut ev: Vec<f64> = m
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .map(|l| l.abs())
                .collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            ev.truncate(k);
            ev
        })
        .collect();
    Ok(SingularSpectra {
        freqs: cpsd.freqs.clone(),
        values,
    })
}

/// Peak picking thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Minimum prominence in dB above the higher of the two bases.
    pub min_prominence_db: f64,
    /// Peaks closer than this (Hz) are merged into the larger one.
    pub min_separation: f64,
}

impl PeakOptions {
    /// 3 dB prominence, separation of three bins of `resolution` Hz.
    pub fn with_resolution(resolution: f64) -> Self {
        Self {
            min_prominence_db: 3.0,
            min_separation: 3.0 * resolution,
        }
    }
}

/// Frequencies of local maxima whose topographic prominence exceeds the
/// threshold, strongest first after merging. Values are compared in dB, so
/// the spectrum must be nonnegative.
pub fn peak_pick(spectrum: &Spectrum, opts: PeakOptions) -> Vec<f64> {
    let v = spectrum.values();
    let f = spectrum.freqs();
    if v.len() < 3 {
        return Vec::new();
    }
    let db: Vec<f64> = v.iter().map(|&x| 10.0 * x.max(1e-300).log10()).collect();
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    let mut i = 1;
    while i < db.len() - 1 {
        if db[i] > db[i - 1] {
            // Step over plateaus.
            let mut j = i;
            while j + 1 < db.len() && db[j + 1] == db[i] {
                j += 1;
            }
            if j + 1 < db.len() && db[j + 1] < db[i] {
                let prom = prominence(&db, i);
                if prom >= opts.min_prominence_db {
                    peaks.push(((i + j) / 2, db[i]));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<usize> = Vec::new();
    for (idx, _) in peaks {
        if kept.iter().all(|&k| (f[k] - f[idx]).abs() >= opts.min_separation) {
            kept.push(idx);
        }
    }
    kept.into_iter().map(|k| f[k]).collect()
}

/// Height of `db[i]` above the higher of the minima reached on each side
/// before meeting a higher value.
fn prominence(db: &[f64], i: usize) -> f64 {
    let h = db[i];
    let mut left_min = h;
    for &x in db[..i].iter().rev() {
        if x > h {
            break;
        }
        left_min = left_min.min(x);
    }
    let mut right_min = h;
    for &x in &db[i + 1..] {
        if x > h {
            break;
        }
        right_min = right_min.min(x);
    }
    h - left_min.max(right_min)
}
