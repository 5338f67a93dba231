//! Python bindings. Arrays cross the boundary as lists of floats; tensors
//! are nested `[batch][channel][time]` lists.

use std::path::PathBuf;

use ccnn_core::collapse::{collapse_stack, CollapsedFilter};
use ccnn_core::experiments::{run_task as core_run_task, ExperimentConfig, Task};
use ccnn_core::fir::{self, Assembly, BandSpec};
use ccnn_core::mdof::MdofConfig;
use ccnn_core::nn::{checkpoint, Activation, LayerStack, Mode, StackSpec, Tensor3};
use ccnn_core::oma::{self, PeakOptions};
use ccnn_core::signal::io::MultiChannel;
use ccnn_core::signal::{self, Spectrum, TimeSeries};
use ccnn_core::Error;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Io(_) | Error::Format { .. } | Error::CheckpointVersion { .. } | Error::CheckpointChecksum => {
            PyOSError::new_err(msg)
        }
        Error::Unstable(_) | Error::Singular(_) | Error::Diverged { .. } => PyArithmeticError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for ccnn_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn spectrum_pair(s: &Spectrum) -> (Vec<f64>, Vec<f64>) {
    (s.freqs().to_vec(), s.values().to_vec())
}

fn to_tensor(x: Vec<Vec<Vec<f64>>>) -> PyResult<Tensor3> {
    let b = x.len();
    let c = x.first().map_or(0, Vec::len);
    let t = x.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != c || r.iter().any(|s| s.len() != t)) {
        return Err(PyValueError::new_err("ragged tensor"));
    }
    Tensor3::from_vec(b, c, t, x.into_iter().flatten().flatten().collect()).py()
}

fn from_tensor(y: &Tensor3) -> Vec<Vec<Vec<f64>>> {
    (0..y.batch())
        .map(|b| (0..y.channels()).map(|c| y.row(b, c).to_vec()).collect())
        .collect()
}

fn parse_activation(name: &str) -> PyResult<Activation> {
    match name {
        "tanh" => Ok(Activation::Tanh),
        "identity" | "linear" => Ok(Activation::Identity),
        _ => Err(PyValueError::new_err(format!("unknown activation `{name}`"))),
    }
}

fn parse_task(name: &str) -> PyResult<Task> {
    let all = [
        Task::Spectrum,
        Task::Regression,
        Task::Vae,
        Task::Sweep,
        Task::Fdd,
        Task::DesignFir,
        Task::Simulate,
        Task::Collapse,
    ];
    all.into_iter()
        .find(|t| t.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown task `{name}`")))
}

/// FIR filter with taps `h[0..p]` at sampling rate `fs`.
#[pyclass(name = "FirFilter", module = "ccnn", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFirFilter(fir::FirFilter);

#[pymethods]
impl PyFirFilter {
    #[new]
    fn new(taps: Vec<f64>, fs: f64) -> PyResult<Self> {
        Ok(Self(fir::FirFilter::new(taps, fs).py()?))
    }

    #[getter]
    fn taps(&self) -> Vec<f64> {
        self.0.taps().to_vec()
    }

    #[getter]
    fn fs(&self) -> f64 {
        self.0.fs()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn is_symmetric(&self) -> bool {
        self.0.is_symmetric()
    }

    /// Causal filtering with zero initial state.
    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        let ts = TimeSeries::new(x, self.0.fs()).py()?;
        Ok(fir::fir_apply(&self.0, &ts).py()?.into_samples())
    }

    /// `|H(f)|` at each frequency in Hz.
    fn magnitude(&self, freqs: Vec<f64>) -> Vec<f64> {
        freqs.iter().map(|&f| self.0.response_at(f).norm()).collect()
    }

    fn __repr__(&self) -> String {
        format!("FirFilter(p={}, fs={})", self.0.len(), self.0.fs())
    }
}

/// FIR filters equivalent to a collapsed network.
#[pyclass(name = "CollapsedFilter", module = "ccnn", frozen)]
struct PyCollapsed(CollapsedFilter);

#[pymethods]
impl PyCollapsed {
    /// Per-channel collapsed kernels.
    fn channels(&self) -> Vec<PyFirFilter> {
        self.0.channels().iter().cloned().map(PyFirFilter).collect()
    }

    /// End-to-end filter from input `i` to output `o`.
    fn path(&self, i: usize, o: usize) -> PyResult<PyFirFilter> {
        if i >= self.0.n_in() || o >= self.0.n_out() {
            return Err(PyValueError::new_err("path index out of range"));
        }
        Ok(PyFirFilter(self.0.path(i, o).clone()))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Causal depthwise convolution stack.
#[pyclass(name = "Network", module = "ccnn")]
struct PyNetwork(LayerStack);

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (n_in, channels, n_out, layers, kernel_len, activation = "tanh", seed = 0))]
    fn new(
        n_in: usize,
        channels: usize,
        n_out: usize,
        layers: usize,
        kernel_len: usize,
        activation: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = StackSpec {
            n_in,
            channels,
            n_out,
            layers,
            kernel_len,
            activation: parse_activation(activation)?,
        };
        Ok(Self(LayerStack::new(spec, seed).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| py_err(e.into()))?;
        Ok(Self(checkpoint::from_bytes(&bytes).py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(path, checkpoint::to_bytes(&self.0)).map_err(|e| py_err(e.into()))
    }

    /// Switch between `"train"` and `"eval"` batch normalisation.
    fn set_mode(&mut self, mode: &str) -> PyResult<()> {
        let m = match mode {
            "train" => Mode::Train,
            "eval" => Mode::Eval,
            _ => return Err(PyValueError::new_err("mode must be `train` or `eval`")),
        };
        self.0.set_mode(m);
        Ok(())
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.0.n_params()
    }

    #[getter]
    fn collapsed_len(&self) -> usize {
        self.0.spec().collapsed_len()
    }

    fn predict(&self, x: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        Ok(from_tensor(&self.0.predict(&to_tensor(x)?).py()?))
    }

    /// Fold the network into FIR filters; requires eval mode.
    #[pyo3(signature = (fs = 100.0))]
    fn collapse(&self, fs: f64) -> PyResult<PyCollapsed> {
        Ok(PyCollapsed(collapse_stack(&self.0, fs).py()?))
    }
}

/// Weighted least-squares band-pass: pass band `[f_lo, f_hi]` Hz with
/// linear transitions of `transition` Hz on either side.
#[pyfunction]
#[pyo3(signature = (f_lo, f_hi, transition, fs, taps, paper_literal = false))]
fn design_lsfir(f_lo: f64, f_hi: f64, transition: f64, fs: f64, taps: usize, paper_literal: bool) -> PyResult<PyFirFilter> {
    let bands = fir::bandpass_bands(f_lo, f_hi, transition, fs).py()?;
    let asm = if paper_literal { Assembly::PaperLiteral } else { Assembly::Centred };
    Ok(PyFirFilter(fir::lsfir_design(&bands, taps, fs, asm).py()?))
}

/// Least-squares design over explicit bands `(f_a, f_b, weight, slope,
/// intercept)` on the normalised axis `[0, 1]` (1 = Nyquist).
#[pyfunction]
#[pyo3(signature = (bands, taps, fs, paper_literal = false))]
fn design_lsfir_bands(bands: Vec<(f64, f64, f64, f64, f64)>, taps: usize, fs: f64, paper_literal: bool) -> PyResult<PyFirFilter> {
    let bands: Vec<BandSpec> = bands
        .into_iter()
        .map(|(f_a, f_b, weight, d_slope, d_intercept)| BandSpec {
            f_a,
            f_b,
            weight,
            d_slope,
            d_intercept,
        })
        .collect();
    let asm = if paper_literal { Assembly::PaperLiteral } else { Assembly::Centred };
    Ok(PyFirFilter(fir::lsfir_design(&bands, taps, fs, asm).py()?))
}

#[pyfunction]
fn window_fir(taps: usize, f_lo: f64, f_hi: f64, fs: f64) -> PyResult<PyFirFilter> {
    Ok(PyFirFilter(fir::window_method_bandpass(taps, f_lo, f_hi, fs).py()?))
}

/// Seeded standard normal samples.
#[pyfunction]
#[pyo3(signature = (n, seed, fs = 1.0))]
fn white_noise(n: usize, seed: u64, fs: f64) -> Vec<f64> {
    signal::white_noise(n, seed, fs).into_samples()
}

/// One-sided Welch density with a Hamming window: `(freqs, psd)`.
#[pyfunction]
#[pyo3(signature = (x, fs, window_len = 1024, overlap = 0.5))]
fn welch_psd(x: Vec<f64>, fs: f64, window_len: usize, overlap: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let ts = TimeSeries::new(x, fs).py()?;
    Ok(spectrum_pair(&signal::welch_psd(&ts, window_len, overlap).py()?))
}

/// Modal frequencies (Hz) of a grounded chain of unit masses.
#[pyfunction]
#[pyo3(signature = (stiffness, zeta = 0.01))]
fn modal_frequencies(stiffness: Vec<f64>, zeta: f64) -> PyResult<Vec<f64>> {
    Ok(ccnn_core::mdof::build_chain(&stiffness, zeta).py()?.natural_freqs().to_vec())
}

/// White-noise response of a grounded chain. Returns
/// `(accelerations[dof][t], forcing[t], modal frequencies)`.
#[pyfunction]
#[pyo3(signature = (stiffness, zeta = 0.01, fs = 100.0, duration = 1000.0, seed = 0))]
fn simulate_mdof(stiffness: Vec<f64>, zeta: f64, fs: f64, duration: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    let cfg = MdofConfig {
        stiffness,
        zeta,
        fs,
        duration,
        seed,
        ..MdofConfig::two_dof()
    };
    cfg.validate().py()?;
    let sys = cfg.build().py()?;
    let rec = cfg.simulate(&sys).py()?;
    let n = sys.n_dof();
    let acc = (0..n).map(|d| rec.acceleration_series(d).into_samples()).collect();
    Ok((acc, rec.forcing.clone(), sys.natural_freqs().to_vec()))
}

/// Frequency domain decomposition: `(freqs, sv[bin][i], first-singular-value peaks)`.
#[pyfunction]
#[pyo3(signature = (channels, fs, window_len = 2048, overlap = 0.5, k = 10))]
fn fdd(channels: Vec<Vec<f64>>, fs: f64, window_len: usize, overlap: f64, k: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let mc = MultiChannel::new(channels, fs).py()?;
    let k = k.min(mc.n_channels()).max(1);
    let sv = oma::fdd_singular_values(&oma::cpsd_matrix(&mc, window_len, overlap).py()?, k).py()?;
    let first = sv.spectrum(0);
    let peaks = oma::peak_pick(&first, PeakOptions::with_resolution(first.resolution()));
    Ok((first.freqs().to_vec(), sv.values().to_vec(), peaks))
}

/// Peaks of a spectrum, strongest first.
#[pyfunction]
#[pyo3(signature = (freqs, values, min_prominence_db = 3.0))]
fn peak_pick(freqs: Vec<f64>, values: Vec<f64>, min_prominence_db: f64) -> PyResult<Vec<f64>> {
    let s = Spectrum::new(freqs, values, signal::SpectrumUnit::Power).py()?;
    let opts = PeakOptions {
        min_prominence_db,
        ..PeakOptions::with_resolution(s.resolution())
    };
    Ok(oma::peak_pick(&s, opts))
}

/// Runs one experiment as the CLI would. `config` is TOML merged over the
/// task's preset; returns the files written into `out`.
#[pyfunction]
#[pyo3(signature = (task, out, config = ""))]
fn run_task(py: Python<'_>, task: &str, out: PathBuf, config: &str) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::from_toml_str(config, parse_task(task)?).py()?;
    let manifest = py.detach(|| core_run_task(&cfg, &out)).py()?;
    Ok(manifest.files)
}

#[pymodule]
fn ccnn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFirFilter>()?;
    m.add_class::<PyCollapsed>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(design_lsfir, m)?)?;
    m.add_function(wrap_pyfunction!(design_lsfir_bands, m)?)?;
    m.add_function(wrap_pyfunction!(window_fir, m)?)?;
    m.add_function(wrap_pyfunction!(white_noise, m)?)?;
    m.add_function(wrap_pyfunction!(welch_psd, m)?)?;
    m.add_function(wrap_pyfunction!(modal_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_mdof, m)?)?;
    m.add_function(wrap_pyfunction!(fdd, m)?)?;
    m.add_function(wrap_pyfunction!(peak_pick, m)?)?;
    m.add_function(wrap_pyfunction!(run_task, m)?)?;
    Ok(())
}
