//! Filter exchange CSV: a `# fs=<Hz> p=<taps>` line followed by
//! `index,tap` rows. Frequency responses are written as
//! `freq_hz,magnitude,phase_rad`.

use std::io::{BufRead, BufReader, Read, Write};

use super::{FirFilter, FrequencyResponse};
use crate::{Error, Result};

pub fn write_filter_csv<W: Write>(filter: &FirFilter, mut w: W) -> Result<()> {
    writeln!(w, "# fs={} p={}", filter.fs(), filter.len())?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "tap"])?;
    for (i, t) in filter.taps().iter().enumerate() {
        wtr.write_record([i.to_string(), t.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_filter_csv<R: Read>(r: R) -> Result<FirFilter> {
    let err = |d: String| Error::format("filter csv", d);
    let mut rdr = BufReader::new(r);
    let mut first = String::new();
    rdr.read_line(&mut first)?;
    let meta = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| err("missing `# fs=<Hz> p=<taps>` line".into()))?;
    let (mut fs, mut p) = (None, None);
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("fs", v)) => fs = Some(v.parse::<f64>().map_err(|e| err(format!("fs: {e}")))?),
            Some(("p", v)) => p = Some(v.parse::<usize>().map_err(|e| err(format!("p: {e}")))?),
            _ => return Err(err(format!("unexpected header field `{kv}`"))),
        }
    }
    let (fs, p) = fs.zip(p).ok_or_else(|| err("header needs fs and p".into()))?;

    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
    if csv.headers()?.iter().collect::<Vec<_>>() != ["index", "tap"] {
        return Err(err("column header must be `index,tap`".into()));
    }
    let mut taps = Vec::with_capacity(p);
    for (row, rec) in csv.records().enumerate() {
        let rec = rec?;
        let index: usize = rec[0].parse().map_err(|e| err(format!("row {row}: {e}")))?;
        if index != row {
            return Err(err(format!("row {row} has index {index}")));
        }
        taps.push(rec[1].parse::<f64>().map_err(|e| err(format!("row {row}: {e}")))?);
    }
    if taps.len() != p {
        return Err(err(format!("header says p={p}, found {} taps", taps.len())));
    }
    FirFilter::new(taps, fs)
}

pub fn write_response_csv<W: Write>(resp: &FrequencyResponse, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["freq_hz", "magnitude", "phase_rad"])?;
    for ((f, m), ph) in resp.freqs.iter().zip(&resp.magnitude).zip(&resp.phase) {
        wtr.write_record([f.to_string(), m.to_string(), ph.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
