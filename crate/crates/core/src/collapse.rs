//! Folding an eval-mode layer stack into equivalent FIR filters, the
//! per-layer linearity report, and the symmetry penalty on collapsed kernels.

use std::io::Write;

use crate::fir::{combine, causal_conv, FirFilter};
use crate::nn::{Activation, LayerStack, Mode, Tensor3};
use crate::{Error, Result};

/// Kernels of layer `m` with the frozen batch-norm scale
/// `gamma / sqrt(running_var + eps)` absorbed, `channels x p` row-major.
pub fn fold_batchnorm(stack: &LayerStack, m: usize) -> Result<Vec<f64>> {
    if stack.mode() != Mode::Eval {
        return Err(Error::TrainMode("batch-norm folding"));
    }
    let layer = stack
        .layers()
        .get(m)
        .ok_or_else(|| Error::invalid(format!("layer {m} out of range")))?;
    let p = stack.spec().kernel_len;
    let mut out = layer.kernels.clone();
    for (c, chunk) in out.chunks_mut(p).enumerate() {
        let rv = layer.running_var[c];
        let rm = layer.running_mean[c];
        if rm.abs() >= 0.05 * rv.sqrt() {
            log::warn!(
                "layer {m} channel {c}: running mean {rm:.3e} is large against sqrt(var) {:.3e}; \
                 the collapsed filter ignores it",
                rv.sqrt()
            );
        }
        let s = layer.gamma[c] / (rv + stack.bn_eps).sqrt();
        chunk.iter_mut().for_each(|k| *k *= s);
    }
    Ok(out)
}

/// Convolution of all kernels in order; an empty list gives the unit delta.
pub fn convolve_kernels(kernels: &[&[f64]]) -> Vec<f64> {
    kernels.iter().fold(vec![1.0], |acc, k| combine(&acc, k))
}

/// Equivalent FIR filters of an eval-mode stack.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedFilter {
    channels: Vec<FirFilter>,
    /// `[i * n_out + o]` maps input `i` to output `o`.
    paths: Vec<FirFilter>,
    n_in: usize,
    n_out: usize,
}

impl CollapsedFilter {
    /// Depthwise filter of latent channel `c`, between expansion and
    /// projection.
    pub fn channel(&self, c: usize) -> &FirFilter {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[FirFilter] {
        &self.channels
    }

    /// End-to-end filter from input `i` to output `o`.
    pub fn path(&self, i: usize, o: usize) -> &FirFilter {
        &self.paths[i * self.n_out + o]
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Runs the end-to-end filters over `batch x n_in x T`.
    pub fn apply(&self, x: &Tensor3) -> Result<Tensor3> {
        let (b, n_in, t) = x.dims();
        if n_in != self.n_in {
            return Err(Error::LengthMismatch(self.n_in, n_in));
        }
        let mut y = Tensor3::zeros(b, self.n_out, t);
        for bi in 0..b {
            for i in 0..n_in {
                for o in 0..self.n_out {
                    let part = causal_conv(self.path(i, o).taps(), x.row(bi, i));
                    y.row_mut(bi, o).iter_mut().zip(&part).for_each(|(a, v)| *a += v);
                }
            }
        }
        Ok(y)
    }
}

/// Collapses an eval-mode stack at sampling rate `fs`. Activations are
/// treated as the identity; check [`linearity_r2`] for how well that holds.
pub fn collapse_stack(stack: &LayerStack, fs: f64) -> Result<CollapsedFilter> {
    let spec = stack.spec();
    let folded = (0..spec.layers)
        .map(|m| fold_batchnorm(stack, m))
        .collect::<Result<Vec<_>>>()?;
    let p = spec.kernel_len;
    let (l, n_in, n_out) = (spec.channels, spec.n_in, spec.n_out);
    let channels = (0..l)
        .map(|c| {
            let ks: Vec<&[f64]> = folded.iter().map(|f| &f[c * p..(c + 1) * p]).collect();
            FirFilter::new(convolve_kernels(&ks), fs)
        })
        .collect::<Result<Vec<_>>>()?;
    let len = spec.collapsed_len();
    let mut paths = Vec::with_capacity(n_in * n_out);
    for i in 0..n_in {
        for o in 0..n_out {
            let mut taps = vec![0.0; len];
            for (c, ch) in channels.iter().enumerate() {
                let w = stack.expansion()[i * l + c] * stack.projection()[c * n_out + o];
                taps.iter_mut().zip(ch.taps()).for_each(|(t, v)| *t += w * v);
            }
            paths.push(FirFilter::new(taps, fs)?);
        }
    }
    Ok(CollapsedFilter {
        channels,
        paths,
        n_in,
        n_out,
    })
}

/// Per-layer `R^2` of the best scalar linear fit from pre-activation to
/// activation output.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    pub per_layer: Vec<f64>,
    /// Layers whose outputs were constant; their `R^2` is reported as 1.
    pub degenerate: Vec<bool>,
}

impl LinearityReport {
    pub fn mean(&self) -> f64 {
        self.per_layer.iter().sum::<f64>() / self.per_layer.len() as f64
    }

    /// CSV `layer,r2`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["layer", "r2"])?;
        for (m, r) in self.per_layer.iter().enumerate() {
            wtr.write_record([m.to_string(), r.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `R^2` of `post ~ alpha * pre` with `alpha` fitted by least squares, or
/// `None` when `post` is constant.
pub fn linear_fit_r2(pre: &[f64], post: &[f64]) -> Option<f64> {
    let n = pre.len().min(post.len());
    let (pre, post) = (&pre[..n], &post[..n]);
    let zz: f64 = pre.iter().map(|z| z * z).sum();
    let za: f64 = pre.iter().zip(post).map(|(z, a)| z * a).sum();
    let alpha = if zz > 0.0 { za / zz } else { 0.0 };
    let mean = post.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = post.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = pre.iter().zip(post).map(|(z, a)| (a - alpha * z).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Runs `batch` through the stack in eval mode and fits each layer's
/// activation against its pre-activation.
pub fn linearity_r2(stack: &LayerStack, batch: &Tensor3) -> Result<LinearityReport> {
    let (_, cache) = stack.predict_with_cache(batch)?;
    let act = stack.spec().activation;
    let mut per_layer = Vec::new();
    let mut degenerate = Vec::new();
    for (m, layer) in stack.layers().iter().enumerate() {
        let xhat = cache.normalized(m);
        let (b, l, _) = xhat.dims();
        let mut pre = Vec::with_capacity(xhat.data().len());
        for bi in 0..b {
            for c in 0..l {
                let g = layer.gamma[c];
                pre.extend(xhat.row(bi, c).iter().map(|v| g * v));
            }
        }
        let post: Vec<f64> = match act {
            Activation::Identity => pre.clone(),
            _ => cache.activations(m).data().to_vec(),
        };
        match linear_fit_r2(&pre, &post) {
            Some(r) => {
                per_layer.push(r);
                degenerate.push(false);
            }
            None => {
                per_layer.push(1.0);
                degenerate.push(true);
            }
        }
    }
    Ok(LinearityReport { per_layer, degenerate })
}

/// `||W - reverse(W)||^2` and its gradient with respect to `W`.
pub fn symmetry_loss(w: &[f64]) -> (f64, Vec<f64>) {
    let n = w.len();
    let d: Vec<f64> = (0..n).map(|i| w[i] - w[n - 1 - i]).collect();
    let loss = d.iter().map(|v| v * v).sum();
    // d is antisymmetric, so 2d - 2 reverse(d) = 4d.
    let grad = (0..n).map(|i| 2.0 * d[i] - 2.0 * d[n - 1 - i]).collect();
    (loss, grad)
}

/// Symmetry loss of `kernels[0] * ... * kernels[M-1]` and its gradient with
/// respect to every kernel.
pub fn symmetry_loss_kernels(kernels: &[&[f64]]) -> (f64, Vec<Vec<f64>>) {
    let m = kernels.len();
    let w = convolve_kernels(kernels);
    let (loss, g) = symmetry_loss(&w);
    // prefix[j] = k0 * .. * k(j-1), suffix[j] = kj * .. * k(M-1)
    let mut prefix = vec![vec![1.0]];
    for k in kernels {
        let next = combine(prefix.last().expect("nonempty"), k);
        prefix.push(next);
    }
    let mut suffix = vec![vec![1.0]; m + 1];
    for j in (0..m).rev() {
        suffix[j] = combine(kernels[j], &suffix[j + 1]);
    }
    let grads = (0..m)
        .map(|j| {
            let rest = combine(&prefix[j], &suffix[j + 1]);
            // dL/dk[i] = sum_n g[n] rest[n - i]
            (0..kernels[j].len())
                .map(|i| rest.iter().zip(&g[i..]).map(|(r, gv)| r * gv).sum())
                .collect()
        })
        .collect();
    (loss, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::StackSpec;

    #[test]
    fn symmetry_examples() {
        assert_eq!(symmetry_loss(&[1.0, 2.0, 1.0]).0, 0.0);
        let (l, g) = symmetry_loss(&[1.0, 0.0, -1.0]);
        assert_eq!(l, 8.0);
        assert_eq!(g, vec![8.0, 0.0, -8.0]);
    }

    #[test]
    fn delta_kernel_is_neutral() {
        let k = [0.3, -1.0, 2.5];
        assert_eq!(convolve_kernels(&[&[1.0], &k]), k.to_vec());
    }

    #[test]
    fn fold_requires_eval() {
        let spec = StackSpec {
            n_in: 1,
            channels: 1,
            n_out: 1,
            layers: 2,
            kernel_len: 3,
            activation: Activation::Identity,
        };
        let mut s = LayerStack::new(spec, 1).unwrap();
        assert!(matches!(fold_batchnorm(&s, 0), Err(Error::TrainMode(_))));
        s.set_mode(Mode::Eval);
        s.bn_eps = 0.0;
        s.layers_mut()[0].gamma[0] = 2.0;
        s.layers_mut()[0].running_var[0] = 4.0;
        assert_eq!(fold_batchnorm(&s, 0).unwrap(), s.layers()[0].kernels);
        assert_eq!(collapse_stack(&s, 1.0).unwrap().len(), 5);
    }

    #[test]
    fn saturating_tanh_is_not_linear() {
        let z: Vec<f64> = (0..=1000).map(|i| -3.0 + 6.0 * i as f64 / 1000.0).collect();
        let a: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
        assert!(linear_fit_r2(&z, &a).unwrap() < 0.95);
        assert_eq!(linear_fit_r2(&z, &z), Some(1.0));
        assert_eq!(linear_fit_r2(&z, &vec![0.5; z.len()]), None);
    }
}
