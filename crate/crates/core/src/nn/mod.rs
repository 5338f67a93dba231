//! A small reverse-mode engine for causal depthwise convolution stacks and
//! an LSTM encoder, with the losses, optimiser and training loops around
//! them.

mod adam;
pub mod checkpoint;
mod init;
mod loss;
mod lstm;
mod schedule;
mod stack;
pub mod train;
mod vae;

pub use adam::{adam_step, AdamState};
pub use init::xavier_init;
pub use loss::mse_loss;
pub use lstm::{LstmCache, LstmEncoder, LstmGrads, LstmLayer};
pub use schedule::{lr_schedule, TrainingConfig};
pub use stack::{ConvLayer, LayerStack, StackCache, StackGrads, StackSpec};
pub use train::{
    train_regression_task, train_spectrum_task, train_supervised, train_vae, train_vae_task,
    Dataset, EpochLoss, TrainedModel, TrainedVae,
};
pub use vae::{kl_gaussian, reparameterize, Reparameterized};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the output `a = f(z)`.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dense `batch x channels x time` array, time fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, channels: usize, time: usize) -> Self {
        Self {
            dims: (batch, channels, time),
            data: vec![0.0; batch * channels * time],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, time: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * channels * time {
            return Err(Error::LengthMismatch(batch * channels * time, data.len()));
        }
        Ok(Self {
            dims: (batch, channels, time),
            data,
        })
    }

    /// Stacks `[batch][channel] -> samples` rows; every row must have the
    /// same length.
    pub fn from_rows(rows: &[Vec<Vec<f64>>]) -> Result<Self> {
        let b = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let t = rows.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(b * c * t);
        for r in rows {
            if r.len() != c {
                return Err(Error::LengthMismatch(c, r.len()));
            }
            for ch in r {
                if ch.len() != t {
                    return Err(Error::LengthMismatch(t, ch.len()));
                }
                data.extend_from_slice(ch);
            }
        }
        Self::from_vec(b, c, t, data)
    }

    pub fn batch(&self) -> usize {
        self.dims.0
    }

    pub fn channels(&self) -> usize {
        self.dims.1
    }

    pub fn time(&self) -> usize {
        self.dims.2
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, b: usize, c: usize) -> &[f64] {
        let t = self.dims.2;
        let start = (b * self.dims.1 + c) * t;
        &self.data[start..start + t]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let t = self.dims.2;
        let start = (b * self.dims.1 + c) * t;
        &mut self.data[start..start + t]
    }

    /// Copies the listed batch entries into a new tensor.
    pub fn gather(&self, indices: &[usize]) -> Tensor3 {
        let per = self.dims.1 * self.dims.2;
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(&self.data[i * per..(i + 1) * per]);
        }
        Tensor3 {
            dims: (indices.len(), self.dims.1, self.dims.2),
            data,
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// `y[n] += a * x[n]`.
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four independent accumulators so the loop vectorises.
#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (x, y) = (&x[..n], &y[..n]);
    let mut acc = [0.0; 4];
    let mut xc = x.chunks_exact(4);
    let mut yc = y.chunks_exact(4);
    for (a, b) in (&mut xc).zip(&mut yc) {
        acc[0] += a[0] * b[0];
        acc[1] += a[1] * b[1];
        acc[2] += a[2] * b[2];
        acc[3] += a[3] * b[3];
    }
    let tail: f64 = xc.remainder().iter().zip(yc.remainder()).map(|(a, b)| a * b).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
