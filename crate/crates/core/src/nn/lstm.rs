use rand::Rng as _;

use super::{xavier_init, Mode, Tensor3};
use crate::signal::{rng_from_seed, split_seed};
use crate::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM layer; gates are stacked `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub n_in: usize,
    pub hidden: usize,
    /// `4H x n_in`, row-major.
    pub w_ih: Vec<f64>,
    /// `4H x H`, row-major.
    pub w_hh: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LstmLayer {
    fn new(n_in: usize, hidden: usize, seed: u64) -> Self {
        Self {
            n_in,
            hidden,
            w_ih: xavier_init(n_in, 4 * hidden, split_seed(seed, 0)),
            w_hh: xavier_init(hidden, 4 * hidden, split_seed(seed, 1)),
            bias: vec![0.0; 4 * hidden],
        }
    }
}

/// Stacked LSTM with linear heads producing a mean and a log-variance per
/// time step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmEncoder {
    layers: Vec<LstmLayer>,
    latent: usize,
    /// `latent x H`, row-major.
    head_mu: Vec<f64>,
    head_logvar: Vec<f64>,
    dropout: f64,
    mode: Mode,
    version: u64,
}

/// Per-layer recordings from [`LstmEncoder::forward`].
#[derive(Debug, Clone)]
struct LayerTrace {
    /// `[b][t]` flattened, each entry of width `n_in`.
    inputs: Vec<f64>,
    /// Activated gates, width `4H`.
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hidden: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    version: u64,
    dims: (usize, usize, usize),
    traces: Vec<LayerTrace>,
    /// Inverted-dropout masks applied to the input of layers `1..`.
    masks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    /// `(w_ih, w_hh, bias)` per layer.
    pub layers: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    pub head_mu: Vec<f64>,
    pub head_logvar: Vec<f64>,
}

impl LstmGrads {
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for (a, b, c) in &self.layers {
            out.push(a);
            out.push(b);
            out.push(c);
        }
        out.push(&self.head_mu);
        out.push(&self.head_logvar);
        out
    }
}

impl LstmEncoder {
    pub fn new(n_in: usize, hidden: usize, latent: usize, n_layers: usize, dropout: f64, seed: u64) -> Result<Self> {
        if n_in == 0 || hidden == 0 || latent == 0 || n_layers == 0 {
            return Err(Error::invalid("LSTM sizes must be >= 1"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout {dropout} outside [0, 1)")));
        }
        let layers = (0..n_layers)
            .map(|k| LstmLayer::new(if k == 0 { n_in } else { hidden }, hidden, split_seed(seed, k as u64 + 2)))
            .collect();
        Ok(Self {
            layers,
            latent,
            head_mu: xavier_init(hidden, latent, split_seed(seed, 0)),
            head_logvar: xavier_init(hidden, latent, split_seed(seed, 1)),
            dropout,
            mode: Mode::Train,
            version: 0,
        })
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn latent(&self) -> usize {
        self.latent
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn layers(&self) -> &[LstmLayer] {
        &self.layers
    }

    pub fn head_mu(&self) -> &[f64] {
        &self.head_mu
    }

    pub fn head_logvar(&self) -> &[f64] {
        &self.head_logvar
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(&l.w_ih);
            out.push(&l.w_hh);
            out.push(&l.bias);
        }
        out.push(&self.head_mu);
        out.push(&self.head_logvar);
        out
    }

    /// Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(&mut l.w_ih);
            out.push(&mut l.w_hh);
            out.push(&mut l.bias);
        }
        out.push(&mut self.head_mu);
        out.push(&mut self.head_logvar);
        out
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    /// Runs the stack over `batch x n_in x T` and returns `(mu, logvar)`, each
    /// `batch x latent x T`. Dropout masks come from `dropout_seed` and are
    /// only drawn in train mode.
    pub fn forward(&self, x: &Tensor3, dropout_seed: u64) -> Result<(Tensor3, Tensor3, LstmCache)> {
        let (b, n_in, t) = x.dims();
        if n_in != self.n_in() {
            return Err(Error::LengthMismatch(self.n_in(), n_in));
        }
        if t == 0 {
            return Err(Error::invalid("sequence length must be >= 1"));
        }
        let h = self.hidden();
        let mut rng = rng_from_seed(dropout_seed);
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::new();

        // Layer input laid out [b][t][feature].
        let mut input = vec![0.0; b * t * n_in];
        for bi in 0..b {
            for i in 0..n_in {
                for (ti, &v) in x.row(bi, i).iter().enumerate() {
                    input[(bi * t + ti) * n_in + i] = v;
                }
            }
        }
        for (k, layer) in self.layers.iter().enumerate() {
            let width = layer.n_in;
            if k > 0 && self.mode == Mode::Train && self.dropout > 0.0 {
                let keep = 1.0 - self.dropout;
                let mask: Vec<f64> = (0..input.len())
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                input.iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                masks.push(mask);
            } else if k > 0 {
                masks.push(Vec::new());
            }
            let mut trace = LayerTrace {
                inputs: input.clone(),
                gates: vec![0.0; b * t * 4 * h],
                cells: vec![0.0; b * t * h],
                tanh_cells: vec![0.0; b * t * h],
                hidden: vec![0.0; b * t * h],
            };
            let mut pre = vec![0.0; 4 * h];
            for bi in 0..b {
                for ti in 0..t {
                    let idx = bi * t + ti;
                    let xin = &input[idx * width..(idx + 1) * width];
                    pre.copy_from_slice(&layer.bias);
                    for (r, p) in pre.iter_mut().enumerate() {
                        let row = &layer.w_ih[r * width..(r + 1) * width];
                        *p += row.iter().zip(xin).map(|(w, v)| w * v).sum::<f64>();
                    }
                    if ti > 0 {
                        let hp = &trace.hidden[(idx - 1) * h..idx * h];
                        for (r, p) in pre.iter_mut().enumerate() {
                            let row = &layer.w_hh[r * h..(r + 1) * h];
                            *p += row.iter().zip(hp).map(|(w, v)| w * v).sum::<f64>();
                        }
                    }
                    for j in 0..h {
                        let ig = sigmoid(pre[j]);
                        let fg = sigmoid(pre[h + j]);
                        let gg = pre[2 * h + j].tanh();
                        let og = sigmoid(pre[3 * h + j]);
                        let c_prev = if ti > 0 { trace.cells[(idx - 1) * h + j] } else { 0.0 };
                        let c = fg * c_prev + ig * gg;
                        let tc = c.tanh();
                        let g = &mut trace.gates[idx * 4 * h..(idx + 1) * 4 * h];
                        g[j] = ig;
                        g[h + j] = fg;
                        g[2 * h + j] = gg;
                        g[3 * h + j] = og;
                        trace.cells[idx * h + j] = c;
                        trace.tanh_cells[idx * h + j] = tc;
                        trace.hidden[idx * h + j] = og * tc;
                    }
                }
            }
            input = trace.hidden.clone();
            traces.push(trace);
        }

        let top = &traces.last().expect("at least one layer").hidden;
        let mut mu = Tensor3::zeros(b, self.latent, t);
        let mut logvar = Tensor3::zeros(b, self.latent, t);
        for bi in 0..b {
            for l in 0..self.latent {
                let wm = &self.head_mu[l * h..(l + 1) * h];
                let wl = &self.head_logvar[l * h..(l + 1) * h];
                for ti in 0..t {
                    let hv = &top[(bi * t + ti) * h..(bi * t + ti + 1) * h];
                    mu.row_mut(bi, l)[ti] = wm.iter().zip(hv).map(|(w, v)| w * v).sum();
                    logvar.row_mut(bi, l)[ti] = wl.iter().zip(hv).map(|(w, v)| w * v).sum();
                }
            }
        }
        let cache = LstmCache {
            version: self.version,
            dims: (b, n_in, t),
            traces,
            masks,
        };
        Ok((mu, logvar, cache))
    }

    /// Backpropagation through time from gradients on `mu` and `logvar`.
    pub fn backward(&self, cache: &LstmCache, dmu: &Tensor3, dlogvar: &Tensor3) -> Result<LstmGrads> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        let (b, _, t) = cache.dims;
        let h = self.hidden();
        let want = (b, self.latent, t);
        if dmu.dims() != want || dlogvar.dims() != want {
            return Err(Error::LengthMismatch(b * self.latent * t, dmu.data().len()));
        }
        let top = &cache.traces.last().expect("at least one layer").hidden;
        let mut head_mu = vec![0.0; self.head_mu.len()];
        let mut head_logvar = vec![0.0; self.head_logvar.len()];
        // External gradient on the hidden output of the current layer.
        let mut dh_ext = vec![0.0; b * t * h];
        for bi in 0..b {
            for l in 0..self.latent {
                for ti in 0..t {
                    let idx = bi * t + ti;
                    let gm = dmu.row(bi, l)[ti];
                    let gl = dlogvar.row(bi, l)[ti];
                    let hv = &top[idx * h..(idx + 1) * h];
                    let dh = &mut dh_ext[idx * h..(idx + 1) * h];
                    for j in 0..h {
                        head_mu[l * h + j] += gm * hv[j];
                        head_logvar[l * h + j] += gl * hv[j];
                        dh[j] += gm * self.head_mu[l * h + j] + gl * self.head_logvar[l * h + j];
                    }
                }
            }
        }

        let mut layer_grads = vec![(Vec::new(), Vec::new(), Vec::new()); self.layers.len()];
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let tr = &cache.traces[k];
            let width = layer.n_in;
            let mut dw_ih = vec![0.0; layer.w_ih.len()];
            let mut dw_hh = vec![0.0; layer.w_hh.len()];
            let mut dbias = vec![0.0; layer.bias.len()];
            let mut dinput = vec![0.0; b * t * width];
            let mut dpre = vec![0.0; 4 * h];
            for bi in 0..b {
                let mut dh_next = vec![0.0; h];
                let mut dc_next = vec![0.0; h];
                for ti in (0..t).rev() {
                    let idx = bi * t + ti;
                    let g = &tr.gates[idx * 4 * h..(idx + 1) * 4 * h];
                    for j in 0..h {
                        let (ig, fg, gg, og) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                        let tc = tr.tanh_cells[idx * h + j];
                        let c_prev = if ti > 0 { tr.cells[(idx - 1) * h + j] } else { 0.0 };
                        let dh = dh_ext[idx * h + j] + dh_next[j];
                        let dc = dh * og * (1.0 - tc * tc) + dc_next[j];
                        dpre[j] = dc * gg * ig * (1.0 - ig);
                        dpre[h + j] = dc * c_prev * fg * (1.0 - fg);
                        dpre[2 * h + j] = dc * ig * (1.0 - gg * gg);
                        dpre[3 * h + j] = dh * tc * og * (1.0 - og);
                        dc_next[j] = dc * fg;
                    }
                    let xin = &tr.inputs[idx * width..(idx + 1) * width];
                    let dx = &mut dinput[idx * width..(idx + 1) * width];
                    dh_next.iter_mut().for_each(|v| *v = 0.0);
                    for (r, &dp) in dpre.iter().enumerate() {
                        if dp == 0.0 {
                            continue;
                        }
                        dbias[r] += dp;
                        let wrow = &layer.w_ih[r * width..(r + 1) * width];
                        let drow = &mut dw_ih[r * width..(r + 1) * width];
                        for i in 0..width {
                            drow[i] += dp * xin[i];
                            dx[i] += dp * wrow[i];
                        }
                        let whrow = &layer.w_hh[r * h..(r + 1) * h];
                        if ti > 0 {
                            let hp = &tr.hidden[(idx - 1) * h..idx * h];
                            let dhrow = &mut dw_hh[r * h..(r + 1) * h];
                            for j in 0..h {
                                dhrow[j] += dp * hp[j];
                            }
                        }
                        for j in 0..h {
                            dh_next[j] += dp * whrow[j];
                        }
                    }
                }
            }
            if k > 0 {
                let mask = &cache.masks[k - 1];
                if !mask.is_empty() {
                    dinput.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
                }
                dh_ext = dinput;
            }
            layer_grads[k] = (dw_ih, dw_hh, dbias);
        }
        Ok(LstmGrads {
            layers: layer_grads,
            head_mu,
            head_logvar,
        })
    }
}
