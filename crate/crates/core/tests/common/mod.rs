//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod grad;

use std::f64::consts::PI;

use ccnn_core::fir::BandSpec;
use ccnn_core::collapse::CollapsedFilter;
use ccnn_core::nn::{Activation, LayerStack, Mode, StackSpec, Tensor3};
use ccnn_core::signal::white_noise;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Composite Gauss-Legendre rule over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| wi * f(lo + 0.5 * h * (xi + 1.0)))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Half-filter amplitudes `a(0..=P)` minimising the weighted squared error
/// of `A(f) = sum a(n) cos(n pi f)` against `D`, from normal equations
/// assembled by dense quadrature.
pub fn lsfir_oracle(bands: &[BandSpec], p: usize) -> Vec<f64> {
    let half = (p - 1) / 2;
    let mut g = DMatrix::<f64>::zeros(half + 1, half + 1);
    let mut h = DVector::<f64>::zeros(half + 1);
    let (x, w) = gauss_legendre(24);
    for b in bands {
        let panels = 64;
        let step = (b.f_b - b.f_a) / panels as f64;
        for k in 0..panels {
            let lo = b.f_a + k as f64 * step;
            for (xi, wi) in x.iter().zip(&w) {
                let f = lo + 0.5 * step * (xi + 1.0);
                let q = wi * 0.5 * step * b.weight;
                let basis: Vec<f64> = (0..=half).map(|n| (n as f64 * PI * f).cos()).collect();
                for r in 0..=half {
                    h[r] += q * b.desired(f) * basis[r];
                    for c in 0..=half {
                        g[(r, c)] += q * basis[r] * basis[c];
                    }
                }
            }
        }
    }
    let a = g.cholesky().expect("positive definite").solve(&h);
    a.iter().copied().collect()
}

/// Contiguous bands covering `[0, 1]` with random weights and linear
/// desired amplitudes; every other spec leaves narrow zero-weight gaps.
pub fn random_bands(rng: &mut ChaCha8Rng, gaps: bool) -> Vec<BandSpec> {
    let k = rng.random_range(2..=5);
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut edges = vec![0.0];
    edges.extend(cuts);
    edges.push(1.0);
    let mut bands = Vec::new();
    for i in 0..k {
        let (mut a, b) = (edges[i], edges[i + 1]);
        if gaps && i > 0 {
            a += (b - a).min(0.03) * 0.5;
        }
        bands.push(BandSpec {
            f_a: a,
            f_b: b,
            weight: rng.random_range(0.2..5.0),
            d_slope: rng.random_range(-1.0..1.0),
            d_intercept: rng.random_range(-1.0..1.0),
        });
    }
    bands
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct causal convolution `y[n] = sum_k h[k] x[n - k]`, zero history.
pub fn naive_fir(h: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| (0..h.len().min(n + 1)).map(|k| h[k] * x[n - k]).sum())
        .collect()
}

pub fn noise_tensor(b: usize, c: usize, t: usize, seed: u64) -> Tensor3 {
    Tensor3::from_vec(b, c, t, white_noise(b * c * t, seed, 1.0).into_samples()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn spec(n_in: usize, channels: usize, n_out: usize, layers: usize, kernel_len: usize, act: Activation) -> StackSpec {
    StackSpec {
        n_in,
        channels,
        n_out,
        layers,
        kernel_len,
        activation: act,
    }
}

/// Random stack with batch-norm state away from its defaults.
pub fn perturbed(s: StackSpec, seed: u64) -> LayerStack {
    let mut stack = LayerStack::new(s, seed).unwrap();
    for (m, layer) in stack.layers_mut().iter_mut().enumerate() {
        for c in 0..layer.gamma.len() {
            layer.gamma[c] = 0.6 + 0.1 * ((m + 2 * c) % 5) as f64;
            layer.running_var[c] = 0.3 + 0.2 * ((3 * m + c) % 4) as f64;
        }
    }
    stack.set_mode(Mode::Eval);
    stack
}

/// Output channel `o` of the collapsed filter applied by direct convolution.
pub fn collapsed_output(col: &CollapsedFilter, x: &Tensor3, b: usize, o: usize) -> Vec<f64> {
    let t = x.time();
    let mut y = vec![0.0; t];
    for i in 0..col.n_in() {
        let part = naive_fir(col.path(i, o).taps(), x.row(b, i));
        y.iter_mut().zip(part).for_each(|(a, v)| *a += v);
    }
    y
}
