//! Central finite-difference checks (h = 1e-5, f64). Each returns the worst
//! relative error between the analytic gradient and the difference quotient.

use ccnn_core::collapse::{symmetry_loss, symmetry_loss_kernels};
use ccnn_core::nn::{kl_gaussian, mse_loss, reparameterize, Activation, LayerStack, LstmEncoder, Mode, StackSpec, Tensor3};
use ccnn_core::signal::white_noise;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

/// Relative error with a small floor so near-zero gradients compare on an
/// absolute scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

pub fn noise(n: usize, seed: u64) -> Vec<f64> {
    white_noise(n, seed, 1.0).into_samples()
}

pub fn tensor(b: usize, c: usize, t: usize, seed: u64) -> Tensor3 {
    Tensor3::from_vec(b, c, t, noise(b * c * t, seed)).unwrap()
}

fn weighted_sum(y: &Tensor3, w: &Tensor3) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn central(f: impl Fn(f64) -> f64) -> f64 {
    (f(H) - f(-H)) / (2.0 * H)
}

/// Whole stack under the loss `sum(y * r)`, so `dL/dy = r`: every kernel,
/// gamma and the input.
pub fn stack(act: Activation, mode: Mode) -> f64 {
    let spec = StackSpec {
        n_in: 2,
        channels: 3,
        n_out: 2,
        layers: 3,
        kernel_len: 4,
        activation: act,
    };
    let mut stack = LayerStack::new(spec, 17).unwrap();
    // Move the running statistics away from their initial values.
    for layer in stack.layers_mut() {
        layer.running_var.iter_mut().enumerate().for_each(|(c, v)| *v = 0.5 + c as f64);
        layer.gamma.iter_mut().enumerate().for_each(|(c, g)| *g = 0.7 + 0.2 * c as f64);
    }
    stack.set_mode(mode);
    let x = tensor(3, 2, 12, 1);
    let r = tensor(3, 2, 12, 2);
    let loss = |s: &LayerStack, x: &Tensor3| {
        let mut s = s.clone();
        let (y, _) = s.forward(x).unwrap();
        weighted_sum(&y, &r)
    };
    let (_, cache) = stack.clone().forward(&x).unwrap();
    let (grads, dx) = stack.backward(&cache, &r).unwrap();

    let mut worst: f64 = 0.0;
    let analytic = grads.tensors();
    for ti in 0..stack.params().len() {
        for i in 0..stack.params()[ti].len() {
            let fd = central(|d| {
                let mut s = stack.clone();
                s.params_mut()[ti][i] += d;
                loss(&s, &x)
            });
            worst = worst.max(rel_err(fd, analytic[ti][i]));
        }
    }
    for i in 0..x.data().len() {
        let fd = central(|d| {
            let mut xs = x.clone();
            xs.data_mut()[i] += d;
            loss(&stack, &xs)
        });
        worst = worst.max(rel_err(fd, dx.data()[i]));
    }
    worst
}

pub fn lstm(mode: Mode) -> f64 {
    let mut enc = LstmEncoder::new(2, 4, 3, 2, 0.2, 5).unwrap();
    // Nonzero biases exercise every path.
    for (k, p) in enc.params_mut().into_iter().enumerate() {
        if k % 3 == 2 && k < 6 {
            p.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * ((i % 5) as f64 - 2.0));
        }
    }
    enc.set_mode(mode);
    let x = tensor(2, 2, 7, 3);
    let rm = tensor(2, 3, 7, 4);
    let rl = tensor(2, 3, 7, 5);
    let seed = 99;
    let loss = |e: &LstmEncoder| {
        let (mu, lv, _) = e.forward(&x, seed).unwrap();
        weighted_sum(&mu, &rm) + weighted_sum(&lv, &rl)
    };
    let (_, _, cache) = enc.forward(&x, seed).unwrap();
    let grads = enc.backward(&cache, &rm, &rl).unwrap();
    let analytic = grads.tensors();
    let mut worst: f64 = 0.0;
    for ti in 0..enc.params().len() {
        for i in 0..enc.params()[ti].len() {
            let fd = central(|d| {
                let mut e = enc.clone();
                e.params_mut()[ti][i] += d;
                loss(&e)
            });
            worst = worst.max(rel_err(fd, analytic[ti][i]));
        }
    }
    worst
}

pub fn reparameterization() -> f64 {
    let mu = tensor(2, 2, 5, 1);
    let mut lv = tensor(2, 2, 5, 2);
    lv.scale(0.5);
    let r = tensor(2, 2, 5, 3);
    let seed = 4;
    let (dmu, dlv) = reparameterize(&mu, &lv, seed).unwrap().backward(&r).unwrap();
    let loss = |m: &Tensor3, l: &Tensor3| weighted_sum(&reparameterize(m, l, seed).unwrap().z, &r);
    let mut worst: f64 = 0.0;
    for i in 0..mu.data().len() {
        let fm = central(|d| {
            let mut m = mu.clone();
            m.data_mut()[i] += d;
            loss(&m, &lv)
        });
        let fl = central(|d| {
            let mut l = lv.clone();
            l.data_mut()[i] += d;
            loss(&mu, &l)
        });
        worst = worst.max(rel_err(fm, dmu.data()[i])).max(rel_err(fl, dlv.data()[i]));
    }
    worst
}

pub fn kl_divergence() -> f64 {
    let mu = tensor(3, 2, 4, 6);
    let lv = tensor(3, 2, 4, 7);
    let (_, dmu, dlv) = kl_gaussian(&mu, &lv).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..mu.data().len() {
        let fm = central(|d| {
            let mut m = mu.clone();
            m.data_mut()[i] += d;
            kl_gaussian(&m, &lv).unwrap().0
        });
        let fl = central(|d| {
            let mut l = lv.clone();
            l.data_mut()[i] += d;
            kl_gaussian(&mu, &l).unwrap().0
        });
        worst = worst.max(rel_err(fm, dmu.data()[i])).max(rel_err(fl, dlv.data()[i]));
    }
    worst
}

pub fn mse() -> f64 {
    let p = noise(20, 8);
    let t = noise(20, 9);
    let (_, g) = mse_loss(&p, &t).unwrap();
    (0..p.len())
        .map(|i| {
            let fd = central(|d| {
                let mut a = p.clone();
                a[i] += d;
                mse_loss(&a, &t).unwrap().0
            });
            rel_err(fd, g[i])
        })
        .fold(0.0, f64::max)
}

pub fn symmetry_on_filter() -> f64 {
    let w = noise(9, 10);
    let (_, g) = symmetry_loss(&w);
    (0..w.len())
        .map(|i| {
            let fd = central(|d| {
                let mut a = w.clone();
                a[i] += d;
                symmetry_loss(&a).0
            });
            rel_err(fd, g[i])
        })
        .fold(0.0, f64::max)
}

/// Symmetry penalty of the collapsed kernel, differentiated per layer.
pub fn symmetry_through_collapse() -> f64 {
    let kernels: Vec<Vec<f64>> = (0..4).map(|m| noise(5, 20 + m)).collect();
    let refs: Vec<&[f64]> = kernels.iter().map(Vec::as_slice).collect();
    let (_, grads) = symmetry_loss_kernels(&refs);
    let mut worst: f64 = 0.0;
    for m in 0..kernels.len() {
        for i in 0..kernels[m].len() {
            let fd = central(|d| {
                let mut ks = kernels.clone();
                ks[m][i] += d;
                let r: Vec<&[f64]> = ks.iter().map(Vec::as_slice).collect();
                symmetry_loss_kernels(&r).0
            });
            worst = worst.max(rel_err(fd, grads[m][i]));
        }
    }
    worst
}

/// Every check by name.
pub fn suite() -> Vec<(&'static str, f64)> {
    vec![
        ("stack train tanh", stack(Activation::Tanh, Mode::Train)),
        ("stack train identity", stack(Activation::Identity, Mode::Train)),
        ("stack eval tanh", stack(Activation::Tanh, Mode::Eval)),
        ("stack eval identity", stack(Activation::Identity, Mode::Eval)),
        ("lstm train", lstm(Mode::Train)),
        ("lstm eval", lstm(Mode::Eval)),
        ("reparameterization", reparameterization()),
        ("kl", kl_divergence()),
        ("mse", mse()),
        ("symmetry", symmetry_on_filter()),
        ("symmetry through collapse", symmetry_through_collapse()),
    ]
}
