//! Causal convolutional networks with quasi-linear activations, studied as
//! finite impulse response filters.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`]: time series, noise, spectra (periodogram, Welch, CPSD),
//!   Chebyshev-II targets, Savitzky-Golay smoothing, resampling, CSV I/O.
//! * [`fir`]: closed-form weighted least-squares FIR design, the window
//!   method, FIR application and frequency responses.
//! * [`nn`]: a small differentiable engine for causal depthwise convolution
//!   stacks, an LSTM encoder, losses, Adam and the training loops.
//! * [`collapse`]: folding a trained stack into one equivalent FIR filter,
//!   per-layer linearity and the symmetry regulariser.
//! * [`mdof`]: lumped-mass chains with Rayleigh damping integrated by RK4.
//! * [`oma`]: CPSD matrices, frequency domain decomposition, peak picking.
//! * [`experiments`]: config-driven end-to-end runs and sweeps.

pub mod collapse;
pub mod error;
pub mod experiments;
pub mod fir;
pub mod mdof;
pub mod nn;
pub mod oma;
pub mod signal;

pub use error::{Error, Result};
