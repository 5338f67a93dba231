//! Training loops for the supervised stacks and the LSTM/CCNN VAE.

use std::io::Write;

use rand::seq::SliceRandom;

use super::{
    kl_gaussian, lr_schedule, mse_loss, reparameterize, AdamState, LayerStack, LstmEncoder, Mode,
    StackGrads, StackSpec, Tensor3, TrainingConfig,
};
use crate::collapse::symmetry_loss_kernels;
use crate::signal::{rng_from_seed, split_seed};
use crate::{Error, Result};

/// Stream indices for [`split_seed`] of the training seed.
const SEED_INIT: u64 = 0;
const SEED_SPLIT: u64 = 1;
const SEED_ENCODER: u64 = 2;
const SEED_EPOCH: u64 = 1000;

/// Aligned inputs and targets, `batch x channels x time`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Tensor3,
    pub targets: Tensor3,
}

impl Dataset {
    pub fn new(inputs: Tensor3, targets: Tensor3) -> Result<Self> {
        if inputs.batch() != targets.batch() {
            return Err(Error::LengthMismatch(inputs.batch(), targets.batch()));
        }
        if inputs.time() != targets.time() {
            return Err(Error::LengthMismatch(inputs.time(), targets.time()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.gather(indices),
            targets: self.targets.gather(indices),
        }
    }
}

/// Seeded shuffle of `0..n` split into `(train, validation)` indices.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let n_val = ((n as f64 * val_fraction).round() as usize).min(n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// The train/validation split used by the training loops for `n` samples.
pub fn holdout_split(n: usize, cfg: &TrainingConfig) -> (Vec<usize>, Vec<usize>) {
    split_indices(n, cfg.val_fraction, split_seed(cfg.seed, SEED_SPLIT))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean training objective over the epoch's batches.
    pub train_loss: f64,
    /// Eval-mode reconstruction or prediction MSE on the held-out set.
    pub val_loss: Option<f64>,
    pub lr: f64,
}

/// CSV `epoch,train_loss,val_loss,lr`; a missing validation loss is empty.
pub fn write_history_csv<W: Write>(history: &[EpochLoss], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["epoch", "train_loss", "val_loss", "lr"])?;
    for e in history {
        wtr.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.val_loss.map_or_else(String::new, |v| v.to_string()),
            e.lr.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub stack: LayerStack,
    pub history: Vec<EpochLoss>,
}

impl TrainedModel {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.history.last().and_then(|e| e.val_loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedVae {
    pub encoder: LstmEncoder,
    pub decoder: LayerStack,
    pub history: Vec<EpochLoss>,
}

/// Adds `weight * dL_sym/dK` to the kernel gradients, where `L_sym` is the
/// summed symmetry penalty of each channel's raw collapsed kernel. Returns
/// the weighted penalty.
pub(crate) fn add_symmetry_grads(stack: &LayerStack, grads: &mut StackGrads, weight: f64) -> f64 {
    if weight == 0.0 {
        return 0.0;
    }
    let spec = stack.spec();
    let p = spec.kernel_len;
    let mut total = 0.0;
    for c in 0..spec.channels {
        let ks: Vec<&[f64]> = stack.layers().iter().map(|l| &l.kernels[c * p..(c + 1) * p]).collect();
        let (loss, kg) = symmetry_loss_kernels(&ks);
        total += loss;
        for (m, g) in kg.iter().enumerate() {
            let dst = &mut grads.kernels[m][c * p..(c + 1) * p];
            dst.iter_mut().zip(g).for_each(|(d, v)| *d += weight * v);
        }
    }
    weight * total
}

fn check_finite(value: f64, epoch: usize, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch,
            detail: format!("{what} became {value}"),
        })
    }
}

/// Eval-mode MSE of `stack` over `data`, in chunks of `chunk` samples.
pub fn evaluate_mse(stack: &LayerStack, data: &Dataset, chunk: usize) -> Result<f64> {
    let mut total = 0.0;
    let idx: Vec<usize> = (0..data.len()).collect();
    for part in idx.chunks(chunk.max(1)) {
        let sub = data.subset(part);
        let y = stack.predict(&sub.inputs)?;
        total += mse_loss(y.data(), sub.targets.data())?.0 * part.len() as f64;
    }
    Ok(total / data.len() as f64)
}

/// Trains `stack` on `MSE + sym_weight * L_sym` with Adam and the geometric
/// learning-rate schedule. A frozen stack is evaluated but not updated. The
/// returned stack is in eval mode unless no epoch ran.
pub fn train_supervised(mut stack: LayerStack, data: &Dataset, cfg: &TrainingConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if cfg.epochs == 0 {
        return Ok(TrainedModel { stack, history: Vec::new() });
    }
    let (train_idx, val_idx) = holdout_split(data.len(), cfg);
    let val = (!val_idx.is_empty()).then(|| data.subset(&val_idx));
    let mut adam = AdamState::new(&stack.param_shapes());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order = train_idx.clone();

    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(cfg, epoch);
        order.copy_from_slice(&train_idx);
        order.shuffle(&mut rng_from_seed(split_seed(cfg.seed, SEED_EPOCH + epoch as u64)));
        stack.set_mode(if stack.is_frozen() { Mode::Eval } else { Mode::Train });
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let sub = data.subset(batch);
            let (y, cache) = stack.forward(&sub.inputs)?;
            let (mse, mut dy) = mse_loss(y.data(), sub.targets.data())?;
            dy.iter_mut().for_each(|g| *g *= cfg.mse_weight);
            let (mut grads, _) = stack.backward(&cache, &Tensor3::from_vec(y.batch(), y.channels(), y.time(), dy)?)?;
            let sym = add_symmetry_grads(&stack, &mut grads, cfg.sym_weight);
            let loss = cfg.mse_weight * mse + sym;
            check_finite(loss, epoch, "training loss")?;
            if !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite gradient".into(),
                });
            }
            if !stack.is_frozen() {
                adam.update(&mut stack.params_mut(), &grads.tensors(), lr)?;
            }
            sum += loss * batch.len() as f64;
        }
        stack.set_mode(Mode::Eval);
        let val_loss = match &val {
            Some(v) => {
                let l = evaluate_mse(&stack, v, cfg.batch_size)?;
                check_finite(l, epoch, "validation loss")?;
                Some(l)
            }
            None => None,
        };
        let entry = EpochLoss {
            epoch,
            train_loss: sum / train_idx.len() as f64,
            val_loss,
            lr,
        };
        log::debug!("epoch {epoch}: train {:.6e} val {:?}", entry.train_loss, entry.val_loss);
        history.push(entry);
    }
    Ok(TrainedModel { stack, history })
}

/// Single-input, single-output stack trained to map white noise onto its
/// band-filtered version.
pub fn train_spectrum_task(cfg: &TrainingConfig, data: &Dataset) -> Result<TrainedModel> {
    let spec = StackSpec {
        n_in: data.inputs.channels(),
        channels: cfg.channels,
        n_out: data.targets.channels(),
        layers: cfg.layers,
        kernel_len: cfg.kernel_len,
        activation: cfg.activation,
    };
    cfg.validate()?;
    let stack = LayerStack::new(spec, split_seed(cfg.seed, SEED_INIT))?;
    train_supervised(stack, data, cfg)
}

/// Forcing-to-acceleration regression; inputs are `batch x 1 x T` forcing
/// segments and targets `batch x N x T` accelerations.
pub fn train_regression_task(cfg: &TrainingConfig, data: &Dataset) -> Result<TrainedModel> {
    train_spectrum_task(cfg, data)
}

/// Trains an LSTM encoder and a CCNN decoder as a VAE on `data`
/// (`batch x N x T`). The objective is reconstruction MSE plus
/// `kl_weight * KL / (latent * T)` plus the decoder symmetry penalty. A
/// frozen decoder passes gradients through but is not updated.
pub fn train_vae(
    mut encoder: LstmEncoder,
    mut decoder: LayerStack,
    data: &Tensor3,
    cfg: &TrainingConfig,
) -> Result<TrainedVae> {
    cfg.validate()?;
    let (n, n_ch, t) = data.dims();
    if n == 0 || t == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    let dspec = decoder.spec();
    if encoder.n_in() != n_ch || dspec.n_out != n_ch || dspec.n_in != encoder.latent() {
        return Err(Error::invalid(format!(
            "encoder {}->{} and decoder {}->{} do not fit {n_ch}-channel data",
            encoder.n_in(),
            encoder.latent(),
            dspec.n_in,
            dspec.n_out
        )));
    }
    if cfg.epochs == 0 {
        return Ok(TrainedVae { encoder, decoder, history: Vec::new() });
    }
    let kl_scale = cfg.kl_weight / (encoder.latent() * t) as f64;
    let (train_idx, val_idx) = holdout_split(n, cfg);
    let val = (!val_idx.is_empty()).then(|| data.gather(&val_idx));
    let mut enc_adam = AdamState::new(&encoder.param_shapes());
    let mut dec_adam = AdamState::new(&decoder.param_shapes());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order = train_idx.clone();
    let mut step: u64 = 0;

    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(cfg, epoch);
        order.copy_from_slice(&train_idx);
        order.shuffle(&mut rng_from_seed(split_seed(cfg.seed, SEED_EPOCH + epoch as u64)));
        encoder.set_mode(Mode::Train);
        decoder.set_mode(if decoder.is_frozen() { Mode::Eval } else { Mode::Train });
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let x = data.gather(batch);
            let (mu, logvar, enc_cache) = encoder.forward(&x, split_seed(cfg.seed, 2 * step))?;
            let sample = reparameterize(&mu, &logvar, split_seed(cfg.seed, 2 * step + 1))?;
            let (y, dec_cache) = decoder.forward(&sample.z)?;
            let (rec, dy) = mse_loss(y.data(), x.data())?;
            let (kl, mut dmu_kl, mut dlv_kl) = kl_gaussian(&mu, &logvar)?;
            let (mut dgrads, dz) = decoder.backward(&dec_cache, &Tensor3::from_vec(y.batch(), y.channels(), t, dy)?)?;
            let sym = add_symmetry_grads(&decoder, &mut dgrads, cfg.sym_weight);
            let (mut dmu, mut dlv) = sample.backward(&dz)?;
            dmu_kl.scale(kl_scale);
            dlv_kl.scale(kl_scale);
            dmu.data_mut().iter_mut().zip(dmu_kl.data()).for_each(|(a, b)| *a += b);
            dlv.data_mut().iter_mut().zip(dlv_kl.data()).for_each(|(a, b)| *a += b);
            let egrads = encoder.backward(&enc_cache, &dmu, &dlv)?;

            let loss = rec + kl_scale * kl + sym;
            check_finite(loss, epoch, "VAE loss")?;
            let finite = egrads.tensors().iter().all(|g| g.iter().all(|v| v.is_finite())) && dgrads.is_finite();
            if !finite {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite gradient".into(),
                });
            }
            enc_adam.update(&mut encoder.params_mut(), &egrads.tensors(), lr)?;
            if !decoder.is_frozen() {
                dec_adam.update(&mut decoder.params_mut(), &dgrads.tensors(), lr)?;
            }
            sum += loss * batch.len() as f64;
        }
        encoder.set_mode(Mode::Eval);
        decoder.set_mode(Mode::Eval);
        let val_loss = match &val {
            Some(v) => {
                let l = vae_reconstruction_mse(&encoder, &decoder, v, cfg.batch_size)?;
                check_finite(l, epoch, "validation loss")?;
                Some(l)
            }
            None => None,
        };
        history.push(EpochLoss {
            epoch,
            train_loss: sum / train_idx.len() as f64,
            val_loss,
            lr,
        });
    }
    Ok(TrainedVae { encoder, decoder, history })
}

/// Eval-mode reconstruction MSE, decoding the posterior mean.
pub fn vae_reconstruction_mse(encoder: &LstmEncoder, decoder: &LayerStack, data: &Tensor3, chunk: usize) -> Result<f64> {
    let mut total = 0.0;
    let idx: Vec<usize> = (0..data.batch()).collect();
    for part in idx.chunks(chunk.max(1)) {
        let x = data.gather(part);
        let (mu, _, _) = encoder.forward(&x, 0)?;
        let y = decoder.predict(&mu)?;
        total += mse_loss(y.data(), x.data())?.0 * part.len() as f64;
    }
    Ok(total / data.batch() as f64)
}

/// Builds a two-layer LSTM encoder with `cfg.channels` latent channels and a
/// matching decoder, then trains them.
pub fn train_vae_task(cfg: &TrainingConfig, data: &Tensor3) -> Result<TrainedVae> {
    cfg.validate()?;
    let n_ch = data.channels();
    let encoder = LstmEncoder::new(
        n_ch,
        cfg.lstm_hidden,
        cfg.channels,
        2,
        cfg.dropout,
        split_seed(cfg.seed, SEED_ENCODER),
    )?;
    let spec = StackSpec {
        n_in: cfg.channels,
        channels: cfg.channels,
        n_out: n_ch,
        layers: cfg.layers,
        kernel_len: cfg.kernel_len,
        activation: cfg.activation,
    };
    let decoder = LayerStack::new(spec, split_seed(cfg.seed, SEED_INIT))?;
    train_vae(encoder, decoder, data, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (a, b) = split_indices(100, 0.1, 5);
        assert_eq!((a.len(), b.len()), (90, 10));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(100, 0.1, 5), (a, b));
        assert_eq!(split_indices(1, 0.5, 0).1.len(), 0);
    }

    #[test]
    fn history_csv() {
        let h = [
            EpochLoss { epoch: 0, train_loss: 1.5, val_loss: Some(2.0), lr: 0.001 },
            EpochLoss { epoch: 1, train_loss: 1.0, val_loss: None, lr: 0.0001 },
        ];
        let mut buf = Vec::new();
        write_history_csv(&h, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,val_loss,lr\n0,1.5,2,0.001\n1,1,,0.0001\n"
        );
    }
}
