use rand_distr::{Distribution, StandardNormal};

use super::Tensor3;
use crate::signal::rng_from_seed;
use crate::{Error, Result};

const LOGVAR_MIN: f64 = -20.0;
const LOGVAR_MAX: f64 = 20.0;

/// A pathwise sample `z = mu + exp(logvar / 2) * eps` and what its backward
/// pass needs.
#[derive(Debug, Clone)]
pub struct Reparameterized {
    pub z: Tensor3,
    eps: Vec<f64>,
    /// `exp(logvar / 2)`, zero where the log-variance was clamped.
    sigma: Vec<f64>,
    clamped: Vec<bool>,
}

impl Reparameterized {
    /// `(dL/dmu, dL/dlogvar)` from `dL/dz`.
    pub fn backward(&self, dz: &Tensor3) -> Result<(Tensor3, Tensor3)> {
        if dz.dims() != self.z.dims() {
            return Err(Error::LengthMismatch(self.z.data().len(), dz.data().len()));
        }
        let (b, c, t) = dz.dims();
        let dmu = dz.clone();
        let dlv: Vec<f64> = dz
            .data()
            .iter()
            .enumerate()
            .map(|(i, &g)| if self.clamped[i] { 0.0 } else { g * self.eps[i] * 0.5 * self.sigma[i] })
            .collect();
        Ok((dmu, Tensor3::from_vec(b, c, t, dlv)?))
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }
}

/// Draws `z = mu + exp(logvar / 2) * eps` with `eps ~ N(0, 1)` from `seed`.
/// The log-variance is clamped to `[-20, 20]`.
pub fn reparameterize(mu: &Tensor3, logvar: &Tensor3, seed: u64) -> Result<Reparameterized> {
    if mu.dims() != logvar.dims() {
        return Err(Error::LengthMismatch(mu.data().len(), logvar.data().len()));
    }
    let mut rng = rng_from_seed(seed);
    let n = mu.data().len();
    let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut sigma = Vec::with_capacity(n);
    let mut clamped = Vec::with_capacity(n);
    let mut z = mu.clone();
    for (i, zi) in z.data_mut().iter_mut().enumerate() {
        let lv = logvar.data()[i];
        let c = lv.clamp(LOGVAR_MIN, LOGVAR_MAX);
        let s = (0.5 * c).exp();
        *zi += s * eps[i];
        clamped.push(c != lv);
        sigma.push(s);
    }
    Ok(Reparameterized { z, eps, sigma, clamped })
}

/// `0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)` divided by the batch size,
/// with its gradients.
pub fn kl_gaussian(mu: &Tensor3, logvar: &Tensor3) -> Result<(f64, Tensor3, Tensor3)> {
    if mu.dims() != logvar.dims() {
        return Err(Error::LengthMismatch(mu.data().len(), logvar.data().len()));
    }
    let (b, c, t) = mu.dims();
    let scale = 1.0 / b.max(1) as f64;
    let mut kl = 0.0;
    let mut dmu = Vec::with_capacity(mu.data().len());
    let mut dlv = Vec::with_capacity(mu.data().len());
    for (&m, &lv) in mu.data().iter().zip(logvar.data()) {
        let e = lv.exp();
        kl += e + m * m - 1.0 - lv;
        dmu.push(scale * m);
        dlv.push(scale * 0.5 * (e - 1.0));
    }
    Ok((
        0.5 * kl * scale,
        Tensor3::from_vec(b, c, t, dmu)?,
        Tensor3::from_vec(b, c, t, dlv)?,
    ))
}
