//! Binary checkpoints of a [`LayerStack`].
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic  b"CCNNSTAK"
//! u32    format version
//! u32 x5 layers M, channels L, kernel_len p, outputs N, inputs
//! u8     activation tag
//! f64    batch-norm eps
//! f64[]  expansion, (kernels, gamma) per layer, projection
//! f64[]  (running_mean, running_var) per layer
//! u32    CRC32 of everything above
//! ```

use std::io::{Read, Write};

use super::{Activation, ConvLayer, LayerStack, StackSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CCNNSTAK";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(stack: &LayerStack) -> Vec<u8> {
    let spec = stack.spec();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [spec.layers, spec.channels, spec.kernel_len, spec.n_out, spec.n_in] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(spec.activation.tag());
    out.extend_from_slice(&stack.bn_eps.to_le_bytes());
    let mut put = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    for block in stack.params() {
        put(block);
    }
    for layer in stack.layers() {
        put(&layer.running_mean);
        put(&layer.running_var);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn save<W: Write>(stack: &LayerStack, mut w: W) -> Result<()> {
    w.write_all(&to_bytes(stack))?;
    w.flush()?;
    Ok(())
}

pub fn load<R: Read>(mut r: R) -> Result<LayerStack> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::format("checkpoint", "payload shorter than its header declares"));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Parses a checkpoint. The version is checked before the checksum so that
/// a file from another format version is reported as such.
pub fn from_bytes(buf: &[u8]) -> Result<LayerStack> {
    if buf.len() < MAGIC.len() || &buf[..MAGIC.len()] != MAGIC {
        return Err(Error::format("checkpoint", "bad magic"));
    }
    if buf.len() < MAGIC.len() + 8 {
        return Err(Error::CheckpointChecksum);
    }
    let found = u32::from_le_bytes(buf[8..12].try_into().expect("4 bytes"));
    if found != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found,
            expected: FORMAT_VERSION,
        });
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
        return Err(Error::CheckpointChecksum);
    }

    let mut cur = Cursor { buf: body, pos: 12 };
    let layers = cur.u32()? as usize;
    let channels = cur.u32()? as usize;
    let kernel_len = cur.u32()? as usize;
    let n_out = cur.u32()? as usize;
    let n_in = cur.u32()? as usize;
    let tag = cur.take(1)?[0];
    let activation =
        Activation::from_tag(tag).ok_or_else(|| Error::format("checkpoint", format!("unknown activation tag {tag}")))?;
    let spec = StackSpec {
        n_in,
        channels,
        n_out,
        layers,
        kernel_len,
        activation,
    };
    spec.validate()?;
    let eps = cur.f64s(1)?[0];
    let expansion = cur.f64s(n_in * channels)?;
    let mut conv = Vec::with_capacity(layers);
    for _ in 0..layers {
        conv.push(ConvLayer {
            kernels: cur.f64s(channels * kernel_len)?,
            gamma: cur.f64s(channels)?,
            running_mean: Vec::new(),
            running_var: Vec::new(),
        });
    }
    let projection = cur.f64s(channels * n_out)?;
    for layer in &mut conv {
        layer.running_mean = cur.f64s(channels)?;
        layer.running_var = cur.f64s(channels)?;
    }
    if cur.pos != body.len() {
        return Err(Error::format("checkpoint", "trailing bytes after the parameters"));
    }
    let mut stack = LayerStack::from_parts(spec, expansion, conv, projection)?;
    stack.bn_eps = eps;
    Ok(stack)
}
