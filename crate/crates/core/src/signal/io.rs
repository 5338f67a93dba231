//! Multichannel time-series CSV: header `t,ch0[,ch1,...]`, one row per
//! sample. The sampling rate is inferred from the `t` column.

use std::io::{Read, Write};

use super::TimeSeries;
use crate::{Error, Result};

/// Equal-length channels sharing one sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannel {
    channels: Vec<Vec<f64>>,
    fs: f64,
}

impl MultiChannel {
    pub fn new(channels: Vec<Vec<f64>>, fs: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::invalid("sampling rate must be > 0"));
        }
        if let Some(first) = channels.first() {
            if let Some(bad) = channels.iter().find(|c| c.len() != first.len()) {
                return Err(Error::LengthMismatch(first.len(), bad.len()));
            }
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite sample"));
        }
        Ok(Self { channels, fs })
    }

    pub fn from_series(series: &[TimeSeries]) -> Result<Self> {
        let fs = series.first().map_or(1.0, |s| s.fs());
        for s in series {
            s.check_rate(fs)?;
        }
        Self::new(series.iter().map(|s| s.samples().to_vec()).collect(), fs)
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn series(&self, i: usize) -> TimeSeries {
        TimeSeries::new(self.channels[i].clone(), self.fs).expect("validated on construction")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.channels.len()).map(|i| format!("ch{i}")));
        wtr.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for n in 0..self.len() {
            row.clear();
            row.push((n as f64 / self.fs).to_string());
            row.extend(self.channels.iter().map(|c| c[n].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::format("time-series csv", "header must be `t,ch0[,ch1,...]`"));
        }
        let n_ch = headers.len() - 1;
        let mut t = Vec::new();
        let mut channels = vec![Vec::new(); n_ch];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::format("time-series csv", format!("row {line}: missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::format("time-series csv", format!("row {line}: {e}")))
            };
            t.push(parse(0)?);
            for (c, ch) in channels.iter_mut().enumerate() {
                ch.push(parse(c + 1)?);
            }
        }
        let fs = infer_rate(&t)?;
        Self::new(channels, fs)
    }
}

/// Sampling rate from a time column; every step must agree with the mean
/// step within 1e-9 relative.
fn infer_rate(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::format("time-series csv", "need at least two rows to infer fs"));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::format("time-series csv", "time column must increase"));
    }
    for (i, w) in t.windows(2).enumerate() {
        let step = w[1] - w[0];
        // Decimal round-off in the printed times scales with |t|.
        let tol = 1e-9 * dt + 4.0 * f64::EPSILON * w[1].abs();
        if (step - dt).abs() > tol {
            return Err(Error::format(
                "time-series csv",
                format!("non-uniform sampling at row {}: step {step} vs {dt}", i + 1),
            ));
        }
    }
    Ok(1.0 / dt)
}
