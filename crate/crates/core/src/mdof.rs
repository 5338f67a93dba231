//! Lumped-mass chains: masses in a line, the first spring grounded, spring
//! `i` joining masses `i - 1` and `i`. Damping is Rayleigh, `C = a0 M + a1 K`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::signal::io::MultiChannel;
use crate::signal::TimeSeries;
use crate::{Error, Result};

/// How the Rayleigh coefficients were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingFit {
    /// Exact damping ratio at modes 1 and 2.
    TwoMode,
    /// Single mode: stiffness-proportional damping matched at mode 1.
    StiffnessOnly,
    None,
}

#[derive(Debug, Clone)]
pub struct MdofSystem {
    masses: Vec<f64>,
    stiffness: DMatrix<f64>,
    damping: DMatrix<f64>,
    rayleigh: (f64, f64),
    fit: DampingFit,
    natural_freqs: Vec<f64>,
}

/// Chain with unit masses and damping ratio `zeta` on the first two modes.
pub fn build_chain(stiffnesses: &[f64], zeta: f64) -> Result<MdofSystem> {
    build_chain_with_masses(&vec![1.0; stiffnesses.len()], stiffnesses, zeta)
}

pub fn build_chain_with_masses(masses: &[f64], stiffnesses: &[f64], zeta: f64) -> Result<MdofSystem> {
    let n = stiffnesses.len();
    if n == 0 {
        return Err(Error::invalid("chain needs at least one degree of freedom"));
    }
    if masses.len() != n {
        return Err(Error::LengthMismatch(n, masses.len()));
    }
    if stiffnesses.iter().chain(masses).any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(Error::invalid("masses and stiffnesses must be finite and > 0"));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::invalid(format!("damping ratio {zeta} outside (0, 1)")));
    }
    let stiffness = chain_stiffness(stiffnesses);
    let natural_freqs = modal_frequencies(masses, &stiffness)?;
    let w1 = 2.0 * PI * natural_freqs[0];
    let (rayleigh, fit) = if n >= 2 {
        let w2 = 2.0 * PI * natural_freqs[1];
        ((2.0 * zeta * w1 * w2 / (w1 + w2), 2.0 * zeta / (w1 + w2)), DampingFit::TwoMode)
    } else {
        log::warn!("single-mode chain: using stiffness-proportional damping");
        ((0.0, 2.0 * zeta / w1), DampingFit::StiffnessOnly)
    };
    let mass = DMatrix::from_diagonal(&DVector::from_column_slice(masses));
    let damping = &mass * rayleigh.0 + &stiffness * rayleigh.1;
    Ok(MdofSystem {
        masses: masses.to_vec(),
        stiffness,
        damping,
        rayleigh,
        fit,
        natural_freqs,
    })
}

fn chain_stiffness(k: &[f64]) -> DMatrix<f64> {
    let n = k.len();
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] += k[0];
    for i in 1..n {
        m[(i, i)] += k[i];
        m[(i - 1, i - 1)] += k[i];
        m[(i, i - 1)] -= k[i];
        m[(i - 1, i)] -= k[i];
    }
    m
}

/// `sqrt(eig(M^-1 K)) / 2 pi`, ascending, through the symmetric form
/// `M^-1/2 K M^-1/2`.
fn modal_frequencies(masses: &[f64], k: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = masses.len();
    let sym = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (masses[i] * masses[j]).sqrt());
    let mut lambda: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    lambda.sort_by(f64::total_cmp);
    if lambda[0] <= 0.0 {
        return Err(Error::Singular("stiffness matrix is not positive definite".into()));
    }
    Ok(lambda.iter().map(|l| l.sqrt() / (2.0 * PI)).collect())
}

impl MdofSystem {
    pub fn n_dof(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.masses))
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }

    /// `(a0, a1)`.
    pub fn rayleigh(&self) -> (f64, f64) {
        self.rayleigh
    }

    pub fn damping_fit(&self) -> DampingFit {
        self.fit
    }

    /// Hz, ascending.
    pub fn natural_freqs(&self) -> &[f64] {
        &self.natural_freqs
    }

    /// Damping ratio of every mode under the Rayleigh model.
    pub fn modal_damping(&self) -> Vec<f64> {
        let (a0, a1) = self.rayleigh;
        self.natural_freqs
            .iter()
            .map(|f| {
                let w = 2.0 * PI * f;
                0.5 * (a0 / w + a1 * w)
            })
            .collect()
    }

    pub fn without_damping(&self) -> Self {
        Self {
            damping: DMatrix::zeros(self.n_dof(), self.n_dof()),
            rayleigh: (0.0, 0.0),
            fit: DampingFit::None,
            ..self.clone()
        }
    }

    /// Largest integration step accepted by the integrator.
    pub fn max_step(&self) -> f64 {
        0.1 / self.natural_freqs[self.n_dof() - 1]
    }

    /// Smallest number of RK4 substeps per sample at rate `fs`.
    pub fn min_substeps(&self, fs: f64) -> usize {
        ((1.0 / fs) / self.max_step() * (1.0 + 1e-12)).ceil().max(1.0) as usize
    }

    /// Kinetic plus potential energy.
    pub fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let kin: f64 = self.masses.iter().zip(v).map(|(m, v)| 0.5 * m * v * v).sum();
        let xv = DVector::from_column_slice(x);
        kin + 0.5 * xv.dot(&(&self.stiffness * &xv))
    }

    /// `M^-1 (f - C v - K x)` with the same scalar force on every mass.
    fn acceleration(&self, x: &[f64], v: &[f64], force: f64, out: &mut [f64]) {
        let n = self.n_dof();
        for i in 0..n {
            let mut acc = force;
            for j in 0..n {
                acc -= self.damping[(i, j)] * v[j] + self.stiffness[(i, j)] * x[j];
            }
            out[i] = acc / self.masses[i];
        }
    }

    /// One classical RK4 step of `(x, v)` over `h` seconds under constant
    /// force.
    fn rk4_step(&self, x: &mut [f64], v: &mut [f64], force: f64, h: f64, scratch: &mut Rk4Scratch) {
        let n = self.n_dof();
        let Rk4Scratch { xs, vs, k1, k2, k3, k4 } = scratch;
        // k = (dx, dv) pairs; dx is the velocity at the stage.
        self.acceleration(x, v, force, &mut k1.1);
        k1.0.copy_from_slice(v);
        for i in 0..n {
            xs[i] = x[i] + 0.5 * h * k1.0[i];
            vs[i] = v[i] + 0.5 * h * k1.1[i];
        }
        self.acceleration(xs, vs, force, &mut k2.1);
        k2.0.copy_from_slice(vs);
        for i in 0..n {
            xs[i] = x[i] + 0.5 * h * k2.0[i];
            vs[i] = v[i] + 0.5 * h * k2.1[i];
        }
        self.acceleration(xs, vs, force, &mut k3.1);
        k3.0.copy_from_slice(vs);
        for i in 0..n {
            xs[i] = x[i] + h * k3.0[i];
            vs[i] = v[i] + h * k3.1[i];
        }
        self.acceleration(xs, vs, force, &mut k4.1);
        k4.0.copy_from_slice(vs);
        for i in 0..n {
            x[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
            v[i] += h / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
        }
    }

    fn check_step(&self, h: f64) -> Result<()> {
        if !(h > 0.0) {
            return Err(Error::invalid("time step must be > 0"));
        }
        if h > self.max_step() * (1.0 + 1e-12) {
            return Err(Error::Unstable(format!(
                "step {h} s exceeds 0.1 / f_max = {} s",
                self.max_step()
            )));
        }
        Ok(())
    }

    /// Unforced response from `(x0, v0)`; returns `n_steps + 1` states
    /// including the initial one.
    pub fn free_response(
        &self,
        x0: &[f64],
        v0: &[f64],
        dt: f64,
        n_steps: usize,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let n = self.n_dof();
        if x0.len() != n || v0.len() != n {
            return Err(Error::LengthMismatch(n, x0.len().max(v0.len())));
        }
        self.check_step(dt)?;
        let mut scratch = Rk4Scratch::new(n);
        let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
        let mut xs = vec![x.clone()];
        let mut vs = vec![v.clone()];
        for _ in 0..n_steps {
            self.rk4_step(&mut x, &mut v, 0.0, dt, &mut scratch);
            xs.push(x.clone());
            vs.push(v.clone());
        }
        Ok((xs, vs))
    }
}

struct Rk4Scratch {
    xs: Vec<f64>,
    vs: Vec<f64>,
    k1: (Vec<f64>, Vec<f64>),
    k2: (Vec<f64>, Vec<f64>),
    k3: (Vec<f64>, Vec<f64>),
    k4: (Vec<f64>, Vec<f64>),
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        let pair = || (vec![0.0; n], vec![0.0; n]);
        Self {
            xs: vec![0.0; n],
            vs: vec![0.0; n],
            k1: pair(),
            k2: pair(),
            k3: pair(),
            k4: pair(),
        }
    }
}

/// Accelerations of every DOF (`N x T`, m/s^2) with the force that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub accelerations: Vec<Vec<f64>>,
    pub forcing: Vec<f64>,
    pub dt: f64,
}

impl SimRecord {
    pub fn len(&self) -> usize {
        self.forcing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forcing.is_empty()
    }

    pub fn fs(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn n_dof(&self) -> usize {
        self.accelerations.len()
    }

    pub fn acceleration_series(&self, dof: usize) -> TimeSeries {
        TimeSeries::new(self.accelerations[dof].clone(), self.fs()).expect("finite by construction")
    }

    pub fn to_multichannel(&self) -> Result<MultiChannel> {
        MultiChannel::new(self.accelerations.clone(), self.fs())
    }

    /// Drops the first `seconds` of the record.
    pub fn skip(&self, seconds: f64) -> SimRecord {
        let k = ((seconds / self.dt).round() as usize).min(self.len());
        SimRecord {
            accelerations: self.accelerations.iter().map(|a| a[k..].to_vec()).collect(),
            forcing: self.forcing[k..].to_vec(),
            dt: self.dt,
        }
    }

    /// Non-overlapping contiguous windows of `sample_len_s` seconds; the
    /// remainder is dropped.
    pub fn segment(&self, sample_len_s: f64) -> Result<Vec<SimRecord>> {
        let t = (sample_len_s / self.dt).round() as usize;
        if t == 0 || t > self.len() {
            return Err(Error::invalid(format!(
                "segment of {sample_len_s} s does not fit a record of {} s",
                self.len() as f64 * self.dt
            )));
        }
        Ok((0..self.len() / t)
            .map(|s| {
                let r = s * t..(s + 1) * t;
                SimRecord {
                    accelerations: self.accelerations.iter().map(|a| a[r.clone()].to_vec()).collect(),
                    forcing: self.forcing[r].to_vec(),
                    dt: self.dt,
                }
            })
            .collect())
    }
}

/// Integrates the chain from rest under `forcing`, applied identically to
/// every mass and held constant over each sample interval. Each sample is
/// split into `substeps` RK4 steps; the step must not exceed `0.1 / f_max`.
pub fn simulate_rk4(system: &MdofSystem, forcing: &TimeSeries, substeps: usize) -> Result<SimRecord> {
    if substeps == 0 {
        return Err(Error::invalid("substeps must be >= 1"));
    }
    let dt = 1.0 / forcing.fs();
    let h = dt / substeps as f64;
    system.check_step(h)?;
    let n = system.n_dof();
    let f = forcing.samples();
    let mut scratch = Rk4Scratch::new(n);
    let (mut x, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut acc = vec![vec![0.0; f.len()]; n];
    let mut a = vec![0.0; n];
    for (t, &ft) in f.iter().enumerate() {
        system.acceleration(&x, &v, ft, &mut a);
        for (ch, &ai) in acc.iter_mut().zip(&a) {
            ch[t] = ai;
        }
        for _ in 0..substeps {
            system.rk4_step(&mut x, &mut v, ft, h, &mut scratch);
        }
    }
    if acc.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Unstable("integration produced non-finite accelerations".into()));
    }
    Ok(SimRecord {
        accelerations: acc,
        forcing: f.to_vec(),
        dt,
    })
}

/// Plain-text system definition (`key = value` lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdofConfig {
    /// From the grounded spring upwards.
    pub stiffness: Vec<f64>,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_fs")]
    pub fs: f64,
    /// Seconds, excluding the discarded transient.
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_transient")]
    pub transient: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_zeta() -> f64 {
    0.01
}
fn default_fs() -> f64 {
    100.0
}
fn default_duration() -> f64 {
    1000.0
}
fn default_transient() -> f64 {
    10.0
}

impl MdofConfig {
    pub fn two_dof() -> Self {
        Self {
            stiffness: vec![500.0, 3000.0],
            zeta: 0.01,
            fs: 100.0,
            duration: 1000.0,
            transient: 10.0,
            seed: 0,
        }
    }

    /// Nine masses with geometrically spaced springs, ten times the
    /// 500..3000 N/m range, stiffest at the ground: modes span 3.3..44 Hz.
    pub fn nine_dof() -> Self {
        let ratio = (500.0f64 / 3000.0).powf(1.0 / 8.0);
        Self {
            stiffness: (0..9).map(|i| 30_000.0 * ratio.powi(i)).collect(),
            ..Self::two_dof()
        }
    }

    pub fn n_dof(&self) -> usize {
        self.stiffness.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stiffness.is_empty() || self.stiffness.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Config("stiffness values must be > 0".into()));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::Config(format!("zeta {} outside (0, 1)", self.zeta)));
        }
        if !(self.fs > 0.0 && self.duration > 0.0 && self.transient >= 0.0) {
            return Err(Error::Config("fs and duration must be > 0".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<MdofSystem> {
        self.validate()?;
        build_chain(&self.stiffness, self.zeta)
    }

    /// White-noise forcing from `seed`, transient discarded.
    pub fn simulate(&self, system: &MdofSystem) -> Result<SimRecord> {
        let total = ((self.duration + self.transient) * self.fs).round() as usize;
        let forcing = crate::signal::white_noise(total, self.seed, self.fs);
        let rec = simulate_rk4(system, &forcing, system.min_substeps(self.fs))?;
        Ok(rec.skip(self.transient))
    }
}
