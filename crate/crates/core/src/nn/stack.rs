use super::init::xavier_samples;
use super::{axpy, dot, xavier_init, Activation, Mode, Tensor3};
use crate::signal::split_seed;
use crate::{Error, Result};

/// Architecture of a [`LayerStack`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackSpec {
    /// Input channels seen by the expansion.
    pub n_in: usize,
    /// Latent channels carried through the depthwise layers.
    pub channels: usize,
    /// Output channels produced by the projection.
    pub n_out: usize,
    pub layers: usize,
    pub kernel_len: usize,
    pub activation: Activation,
}

impl StackSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.channels == 0 || self.n_out == 0 || self.layers == 0 || self.kernel_len == 0 {
            return Err(Error::invalid(format!("degenerate stack architecture {self:?}")));
        }
        Ok(())
    }

    /// Length of the equivalent single filter, `M (p - 1) + 1`.
    pub fn collapsed_len(&self) -> usize {
        self.layers * (self.kernel_len - 1) + 1
    }
}

/// One depthwise causal convolution followed by a scale-only batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `channels x kernel_len`; `kernels[c * p + k]` multiplies `x[n - k]`.
    pub kernels: Vec<f64>,
    pub gamma: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl ConvLayer {
    pub fn kernel(&self, c: usize) -> &[f64] {
        let p = self.kernels.len() / self.gamma.len();
        &self.kernels[c * p..(c + 1) * p]
    }
}

/// Expansion (pointwise) -> `M` depthwise causal conv layers, each with batch
/// norm and an activation -> projection (pointwise). Nothing adds a bias and
/// channels never mix between the two pointwise maps.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    spec: StackSpec,
    /// `n_in x channels`, row-major.
    expansion: Vec<f64>,
    layers: Vec<ConvLayer>,
    /// `channels x n_out`, row-major.
    projection: Vec<f64>,
    mode: Mode,
    frozen: bool,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    version: u64,
}

/// Everything [`LayerStack::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct StackCache {
    version: u64,
    mode: Mode,
    input: Tensor3,
    /// `acts[0]` is the expansion output, `acts[m + 1]` the output of layer `m`.
    acts: Vec<Tensor3>,
    /// Normalised conv outputs per layer.
    normalized: Vec<Tensor3>,
    inv_std: Vec<Vec<f64>>,
    batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

impl StackCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Output of layer `m` after its activation.
    pub fn activations(&self, m: usize) -> &Tensor3 {
        &self.acts[m + 1]
    }

    /// Normalised, unscaled conv output of layer `m`.
    pub fn normalized(&self, m: usize) -> &Tensor3 {
        &self.normalized[m]
    }
}

/// Gradients in the same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StackGrads {
    pub expansion: Vec<f64>,
    pub kernels: Vec<Vec<f64>>,
    pub gammas: Vec<Vec<f64>>,
    pub projection: Vec<f64>,
}

impl StackGrads {
    /// Expansion, then `(kernels, gamma)` per layer, then projection.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.expansion];
        for (k, g) in self.kernels.iter().zip(&self.gammas) {
            out.push(k);
            out.push(g);
        }
        out.push(&self.projection);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.expansion];
        for (k, g) in self.kernels.iter_mut().zip(&mut self.gammas) {
            out.push(k);
            out.push(g);
        }
        out.push(&mut self.projection);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl LayerStack {
    /// Xavier-initialised stack in train mode with unit batch-norm scales.
    pub fn new(spec: StackSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let (l, p) = (spec.channels, spec.kernel_len);
        let layers = (0..spec.layers)
            .map(|m| {
                let mut kernels = Vec::with_capacity(l * p);
                for c in 0..l {
                    kernels.extend(xavier_samples(p, p, p, split_seed(seed, (2 + m * l + c) as u64)));
                }
                ConvLayer {
                    kernels,
                    gamma: vec![1.0; l],
                    running_mean: vec![0.0; l],
                    running_var: vec![1.0; l],
                }
            })
            .collect();
        Ok(Self {
            spec,
            expansion: xavier_init(spec.n_in, l, split_seed(seed, 0)),
            layers,
            projection: xavier_init(l, spec.n_out, split_seed(seed, 1)),
            mode: Mode::Train,
            frozen: false,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            version: 0,
        })
    }

    /// Frozen eval-mode stack that passes `n` channels through unchanged up
    /// to the batch-norm scale `1 / sqrt(1 + eps)`.
    pub fn identity(n: usize, layers: usize, kernel_len: usize, activation: Activation) -> Result<Self> {
        let spec = StackSpec {
            n_in: n,
            channels: n,
            n_out: n,
            layers,
            kernel_len,
            activation,
        };
        let mut s = Self::new(spec, 0)?;
        let eye: Vec<f64> = (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect();
        s.expansion = eye.clone();
        s.projection = eye;
        for layer in &mut s.layers {
            layer.kernels.iter_mut().for_each(|k| *k = 0.0);
            for c in 0..n {
                layer.kernels[c * kernel_len] = 1.0;
            }
        }
        s.mode = Mode::Eval;
        s.frozen = true;
        Ok(s)
    }

    /// Eval-mode stack from stored parameters; shapes must match `spec`.
    pub fn from_parts(spec: StackSpec, expansion: Vec<f64>, layers: Vec<ConvLayer>, projection: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let (l, p) = (spec.channels, spec.kernel_len);
        if expansion.len() != spec.n_in * l {
            return Err(Error::LengthMismatch(spec.n_in * l, expansion.len()));
        }
        if projection.len() != l * spec.n_out {
            return Err(Error::LengthMismatch(l * spec.n_out, projection.len()));
        }
        if layers.len() != spec.layers {
            return Err(Error::LengthMismatch(spec.layers, layers.len()));
        }
        for layer in &layers {
            if layer.kernels.len() != l * p
                || layer.gamma.len() != l
                || layer.running_mean.len() != l
                || layer.running_var.len() != l
            {
                return Err(Error::invalid("layer parameter shapes do not match the spec"));
            }
        }
        Ok(Self {
            spec,
            expansion,
            layers,
            projection,
            mode: Mode::Eval,
            frozen: false,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            version: 0,
        })
    }

    pub fn spec(&self) -> StackSpec {
        self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn expansion(&self) -> &[f64] {
        &self.expansion
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    /// Parameters in gradient order; see [`StackGrads::tensors`].
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.expansion];
        for l in &self.layers {
            out.push(&l.kernels);
            out.push(&l.gamma);
        }
        out.push(&self.projection);
        out
    }

    /// Mutable parameters; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out: Vec<&mut [f64]> = vec![&mut self.expansion];
        for l in &mut self.layers {
            out.push(&mut l.kernels);
            out.push(&mut l.gamma);
        }
        out.push(&mut self.projection);
        out
    }

    /// Mutable layers (kernels and batch-norm state); invalidates caches.
    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.param_shapes().iter().sum()
    }

    pub fn zero_grads(&self) -> StackGrads {
        StackGrads {
            expansion: vec![0.0; self.expansion.len()],
            kernels: self.layers.iter().map(|l| vec![0.0; l.kernels.len()]).collect(),
            gammas: self.layers.iter().map(|l| vec![0.0; l.gamma.len()]).collect(),
            projection: vec![0.0; self.projection.len()],
        }
    }

    /// Forward pass in the current mode. In train mode the batch statistics
    /// normalise each layer and update the running estimates.
    pub fn forward(&mut self, x: &Tensor3) -> Result<(Tensor3, StackCache)> {
        let (y, cache) = self.run(x, self.mode)?;
        if self.mode == Mode::Train {
            let mom = self.bn_momentum;
            let n = (x.batch() * x.time()) as f64;
            let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
            for (layer, (mean, var)) in self.layers.iter_mut().zip(&cache.batch_stats) {
                for c in 0..layer.gamma.len() {
                    layer.running_mean[c] = (1.0 - mom) * layer.running_mean[c] + mom * mean[c];
                    layer.running_var[c] = (1.0 - mom) * layer.running_var[c] + mom * var[c] * unbias;
                }
            }
        }
        Ok((y, cache))
    }

    /// Eval-mode output, leaving the stack untouched.
    pub fn predict(&self, x: &Tensor3) -> Result<Tensor3> {
        Ok(self.run(x, Mode::Eval)?.0)
    }

    /// Eval-mode forward that keeps the cache (for inspection of per-layer
    /// activations).
    pub fn predict_with_cache(&self, x: &Tensor3) -> Result<(Tensor3, StackCache)> {
        self.run(x, Mode::Eval)
    }

    fn run(&self, x: &Tensor3, mode: Mode) -> Result<(Tensor3, StackCache)> {
        let (b, n_in, t) = x.dims();
        if b == 0 || t == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if n_in != self.spec.n_in {
            return Err(Error::LengthMismatch(self.spec.n_in, n_in));
        }
        let (l, p, n_out) = (self.spec.channels, self.spec.kernel_len, self.spec.n_out);

        let mut h = Tensor3::zeros(b, l, t);
        for bi in 0..b {
            for i in 0..n_in {
                for c in 0..l {
                    let w = self.expansion[i * l + c];
                    if w != 0.0 {
                        axpy(w, x.row(bi, i), h.row_mut(bi, c));
                    }
                }
            }
        }

        let mut acts = vec![h];
        let mut normalized = Vec::with_capacity(self.layers.len());
        let mut inv_stds = Vec::with_capacity(self.layers.len());
        let mut batch_stats = Vec::with_capacity(self.layers.len());
        let n = (b * t) as f64;
        for layer in &self.layers {
            let prev = acts.last().expect("expansion output");
            let mut u = Tensor3::zeros(b, l, t);
            for bi in 0..b {
                for c in 0..l {
                    let kern = &layer.kernels[c * p..(c + 1) * p];
                    let src = prev.row(bi, c);
                    let dst = u.row_mut(bi, c);
                    for (k, &w) in kern.iter().enumerate().take(t) {
                        axpy(w, &src[..t - k], &mut dst[k..]);
                    }
                }
            }
            let mut inv_std = vec![0.0; l];
            let mut means = vec![0.0; l];
            let mut vars = vec![0.0; l];
            for c in 0..l {
                match mode {
                    Mode::Train => {
                        let mean = (0..b).map(|bi| u.row(bi, c).iter().sum::<f64>()).sum::<f64>() / n;
                        let var = (0..b)
                            .map(|bi| u.row(bi, c).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
                            .sum::<f64>()
                            / n;
                        means[c] = mean;
                        vars[c] = var;
                        inv_std[c] = 1.0 / (var + self.bn_eps).sqrt();
                        for bi in 0..b {
                            u.row_mut(bi, c).iter_mut().for_each(|v| *v = (*v - mean) * inv_std[c]);
                        }
                    }
                    Mode::Eval => {
                        // Scale only: the eval network stays a pure linear map.
                        inv_std[c] = 1.0 / (layer.running_var[c] + self.bn_eps).sqrt();
                        for bi in 0..b {
                            u.row_mut(bi, c).iter_mut().for_each(|v| *v *= inv_std[c]);
                        }
                    }
                }
            }
            let mut a = u.clone();
            for bi in 0..b {
                for c in 0..l {
                    let g = layer.gamma[c];
                    let act = self.spec.activation;
                    a.row_mut(bi, c).iter_mut().for_each(|v| *v = act.apply(g * *v));
                }
            }
            normalized.push(u);
            inv_stds.push(inv_std);
            batch_stats.push((means, vars));
            acts.push(a);
        }

        let last = acts.last().expect("at least one layer");
        let mut y = Tensor3::zeros(b, n_out, t);
        for bi in 0..b {
            for c in 0..l {
                for o in 0..n_out {
                    let w = self.projection[c * n_out + o];
                    if w != 0.0 {
                        axpy(w, last.row(bi, c), y.row_mut(bi, o));
                    }
                }
            }
        }
        let cache = StackCache {
            version: self.version,
            mode,
            input: x.clone(),
            acts,
            normalized,
            inv_std: inv_stds,
            batch_stats,
        };
        Ok((y, cache))
    }

    /// Exact gradients of a scalar loss given `dL/dy`, plus `dL/dx`.
    pub fn backward(&self, cache: &StackCache, output_grad: &Tensor3) -> Result<(StackGrads, Tensor3)> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        let (b, n_in, t) = cache.input.dims();
        let (l, p, n_out) = (self.spec.channels, self.spec.kernel_len, self.spec.n_out);
        if output_grad.dims() != (b, n_out, t) {
            return Err(Error::LengthMismatch(b * n_out * t, output_grad.data().len()));
        }
        let mut grads = self.zero_grads();
        let m_layers = self.layers.len();

        let last = &cache.acts[m_layers];
        let mut da = Tensor3::zeros(b, l, t);
        for bi in 0..b {
            for c in 0..l {
                for o in 0..n_out {
                    let dy = output_grad.row(bi, o);
                    grads.projection[c * n_out + o] += dot(last.row(bi, c), dy);
                    axpy(self.projection[c * n_out + o], dy, da.row_mut(bi, c));
                }
            }
        }

        let n = (b * t) as f64;
        for m in (0..m_layers).rev() {
            let layer = &self.layers[m];
            let a = &cache.acts[m + 1];
            let xhat = &cache.normalized[m];
            let h = &cache.acts[m];
            let act = self.spec.activation;
            // da -> dz
            if act != Activation::Identity {
                for (d, &av) in da.data_mut().iter_mut().zip(a.data()) {
                    *d *= act.derivative_from_output(av);
                }
            }
            let mut dh = Tensor3::zeros(b, l, t);
            for c in 0..l {
                let g = layer.gamma[c];
                let inv = cache.inv_std[m][c];
                let mut sum_dz = 0.0;
                let mut sum_dz_xhat = 0.0;
                for bi in 0..b {
                    sum_dz += da.row(bi, c).iter().sum::<f64>();
                    sum_dz_xhat += dot(da.row(bi, c), xhat.row(bi, c));
                }
                grads.gammas[m][c] = sum_dz_xhat;
                // du overwrites dz in place.
                for bi in 0..b {
                    let xr = xhat.row(bi, c);
                    let dz = da.row_mut(bi, c);
                    match cache.mode {
                        Mode::Train => {
                            let mean_d = g * sum_dz / n;
                            let mean_dx = g * sum_dz_xhat / n;
                            for (d, &xv) in dz.iter_mut().zip(xr) {
                                *d = inv * (g * *d - mean_d - xv * mean_dx);
                            }
                        }
                        Mode::Eval => dz.iter_mut().for_each(|d| *d *= g * inv),
                    }
                }
                let kern = &layer.kernels[c * p..(c + 1) * p];
                let dk = &mut grads.kernels[m][c * p..(c + 1) * p];
                for bi in 0..b {
                    let du = da.row(bi, c);
                    let src = h.row(bi, c);
                    let dst = dh.row_mut(bi, c);
                    for k in 0..p.min(t) {
                        dk[k] += dot(&du[k..], &src[..t - k]);
                        axpy(kern[k], &du[k..], &mut dst[..t - k]);
                    }
                }
            }
            da = dh;
        }

        let mut dx = Tensor3::zeros(b, n_in, t);
        for bi in 0..b {
            for i in 0..n_in {
                for c in 0..l {
                    let dh0 = da.row(bi, c);
                    grads.expansion[i * l + c] += dot(cache.input.row(bi, i), dh0);
                    axpy(self.expansion[i * l + c], dh0, dx.row_mut(bi, i));
                }
            }
        }
        Ok((grads, dx))
    }
}
