use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::fir::Assembly;
use crate::mdof::MdofConfig;
use crate::nn::{Activation, TrainingConfig};
use crate::signal::split_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    Regression,
    Vae,
    Sweep,
    Fdd,
    DesignFir,
    Simulate,
    Collapse,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Regression => "regression",
            Task::Vae => "vae",
            Task::Sweep => "sweep",
            Task::Fdd => "fdd",
            Task::DesignFir => "design-fir",
            Task::Simulate => "simulate",
            Task::Collapse => "collapse",
        }
    }
}

/// Noise-to-band-pass learning task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub center_hz: f64,
    /// Width of the target's pass band; the Chebyshev stopband edges sit one
    /// bandwidth either side of the centre.
    pub bandwidth_hz: f64,
    pub fs: f64,
    pub n_pairs: usize,
    pub sample_len: usize,
    pub cheby_order: usize,
    pub cheby_atten_db: f64,
    /// Transition width of the LS-FIR reference.
    pub transition_hz: f64,
    /// Scale targets to unit variance.
    pub normalize_target: bool,
    pub response_points: usize,
    /// Held-out samples used for the linearity report.
    pub linearity_samples: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            center_hz: 10.0,
            bandwidth_hz: 1.0,
            fs: 100.0,
            n_pairs: 9000,
            sample_len: 512,
            cheby_order: 8,
            cheby_atten_db: 80.0,
            transition_hz: 1.0,
            normalize_target: true,
            response_points: 4096,
            linearity_samples: 200,
        }
    }
}

impl SpectrumConfig {
    pub fn pass_band(&self) -> (f64, f64) {
        (self.center_hz - self.bandwidth_hz / 2.0, self.center_hz + self.bandwidth_hz / 2.0)
    }

    pub fn stop_edges(&self) -> (f64, f64) {
        (self.center_hz - self.bandwidth_hz, self.center_hz + self.bandwidth_hz)
    }
}

/// Segmentation of simulated records for the regression and VAE tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub sample_len_s: f64,
    /// Divide inputs and targets by their global standard deviation.
    pub normalize: bool,
    /// Optional multichannel CSV used instead of simulation (VAE and FDD).
    pub input: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            sample_len_s: 3.0,
            normalize: true,
            input: None,
        }
    }
}

/// Spectral read-out shared by the regression, VAE and FDD tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub response_points: usize,
    pub peak_prominence_db: f64,
    /// Peaks more than this far below a channel's maximum are not dominant.
    pub dominant_db: f64,
    pub fdd_window: usize,
    pub fdd_overlap: f64,
    /// Number of singular values kept; capped at the channel count.
    pub fdd_k: usize,
    pub smooth_window: usize,
    pub smooth_order: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            response_points: 4096,
            peak_prominence_db: 3.0,
            dominant_db: 10.0,
            fdd_window: 2048,
            fdd_overlap: 0.5,
            fdd_k: 10,
            smooth_window: 51,
            smooth_order: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirMethod {
    Lsfir,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirConfig {
    pub f_lo: f64,
    pub f_hi: f64,
    pub transition: f64,
    pub fs: f64,
    pub taps: usize,
    pub method: FirMethod,
    pub response_points: usize,
}

impl Default for FirConfig {
    fn default() -> Self {
        Self {
            f_lo: 9.5,
            f_hi: 10.5,
            transition: 1.0,
            fs: 100.0,
            taps: 101,
            method: FirMethod::Lsfir,
            response_points: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseConfig {
    pub checkpoint: Option<PathBuf>,
    pub fs: f64,
    /// White-noise probe used for the linearity report.
    pub probe_batch: usize,
    pub probe_len: usize,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            fs: 100.0,
            probe_batch: 32,
            probe_len: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// `[layers, kernel_len]` pairs.
    pub cells: Vec<[usize; 2]>,
    pub activations: Vec<Activation>,
    pub workers: usize,
    /// Kernel length of the loss-vs-layers slice.
    pub fixed_kernel: usize,
    /// Depth of the loss-vs-kernel slice.
    pub fixed_layers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            cells: vec![[1, 51], [3, 51], [3, 15], [3, 75]],
            activations: vec![Activation::Tanh, Activation::Identity],
            workers: 1,
            fixed_kernel: 51,
            fixed_layers: 3,
        }
    }
}

/// Everything one CLI invocation needs. Seeds of the nested sections are
/// derived from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Train for the paper's 500 epochs instead of the reduced budget.
    pub paper_budget: bool,
    /// Assemble LS-FIR taps with the doubled off-centre amplitudes.
    pub paper_literal: bool,
    pub training: TrainingConfig,
    pub spectrum: SpectrumConfig,
    pub mdof: MdofConfig,
    pub data: DataConfig,
    pub analysis: AnalysisConfig,
    pub fir: FirConfig,
    pub collapse: CollapseConfig,
    pub sweep: SweepConfig,
}

pub const PAPER_EPOCHS: usize = 500;

impl ExperimentConfig {
    /// Defaults of `task`.
    pub fn preset(task: Task) -> Self {
        let regression = TrainingConfig::default();
        let spectrum = TrainingConfig {
            epochs: 30,
            batch_size: 64,
            kernel_len: 51,
            layers: 3,
            channels: 1,
            ..TrainingConfig::default()
        };
        let training = match task {
            Task::Spectrum => spectrum,
            Task::Sweep => TrainingConfig {
                epochs: 50,
                ..spectrum
            },
            _ => regression,
        };
        Self {
            task,
            seed: 0,
            out: None,
            paper_budget: false,
            paper_literal: false,
            training,
            spectrum: SpectrumConfig::default(),
            mdof: MdofConfig::two_dof(),
            data: DataConfig::default(),
            analysis: AnalysisConfig::default(),
            fir: FirConfig::default(),
            collapse: CollapseConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    /// Parses a TOML file over the preset of `task`. Keys missing from the
    /// file keep their preset values; unknown keys are rejected. A `task`
    /// key in the file must agree with `task`.
    pub fn from_toml_str(text: &str, task: Task) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        if let Some(t) = user.get("task") {
            let named: Task = t
                .clone()
                .try_into()
                .map_err(|e| Error::Config(format!("task: {e}")))?;
            if named != task {
                return Err(Error::Config(format!(
                    "config is for task `{}`, not `{}`",
                    named.name(),
                    task.name()
                )));
            }
        }
        let preset = toml::Table::try_from(Self::preset(task)).map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(preset, user);
        let cfg: Self = merged.try_into().map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn assembly(&self) -> Assembly {
        if self.paper_literal {
            Assembly::PaperLiteral
        } else {
            Assembly::Centred
        }
    }

    /// Training settings with the budget flag and the derived seed applied.
    pub fn effective_training(&self) -> TrainingConfig {
        let mut t = self.training.clone();
        t.seed = split_seed(self.seed, 0);
        if self.paper_budget {
            t.epochs = PAPER_EPOCHS;
        }
        t
    }

    /// Simulation settings with the derived seed.
    pub fn effective_mdof(&self) -> MdofConfig {
        MdofConfig {
            seed: split_seed(self.seed, 1),
            ..self.mdof.clone()
        }
    }

    pub fn data_seed(&self) -> u64 {
        split_seed(self.seed, 2)
    }

    /// Checks the sections used by the task.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let training_tasks = [Task::Spectrum, Task::Regression, Task::Vae, Task::Sweep];
        if training_tasks.contains(&self.task) {
            self.training.validate()?;
        }
        if matches!(self.task, Task::Spectrum | Task::Sweep) {
            let s = &self.spectrum;
            let nyq = s.fs / 2.0;
            let (lo, hi) = s.stop_edges();
            if !(s.fs > 0.0 && s.bandwidth_hz > 0.0) {
                return bad("spectrum.fs and spectrum.bandwidth_hz must be > 0".into());
            }
            if !(lo > 0.0 && hi < nyq) {
                return bad(format!(
                    "spectrum band edges [{lo}, {hi}] Hz must lie inside (0, {nyq}) Hz"
                ));
            }
            let (plo, phi) = s.pass_band();
            if !(plo - s.transition_hz > 0.0 && phi + s.transition_hz < nyq) || s.transition_hz < 0.0 {
                return bad("LS-FIR reference band with its transitions must fit below Nyquist".into());
            }
            if s.n_pairs < 2 || s.sample_len == 0 || s.cheby_order == 0 || s.response_points < 2 {
                return bad("spectrum sizes must be positive (n_pairs >= 2)".into());
            }
        }
        if self.task == Task::Spectrum {
            let len = self.training.layers * (self.training.kernel_len.max(1) - 1) + 1;
            if len % 2 == 0 {
                return bad(format!(
                    "collapsed length {len} is even; the LS-FIR comparison needs an odd length (use an odd kernel)"
                ));
            }
        }
        if matches!(self.task, Task::Regression | Task::Vae | Task::Fdd | Task::Simulate) {
            self.mdof.validate()?;
            if !(self.data.sample_len_s > 0.0) {
                return bad("data.sample_len_s must be > 0".into());
            }
        }
        if matches!(self.task, Task::Regression | Task::Vae | Task::Fdd) {
            let a = &self.analysis;
            if !(0.0..1.0).contains(&a.fdd_overlap) {
                return bad(format!("analysis.fdd_overlap {} outside [0, 1)", a.fdd_overlap));
            }
            if a.response_points < 2 || a.fdd_window < 2 || a.fdd_k == 0 {
                return bad("analysis sizes must be positive".into());
            }
            if a.smooth_window % 2 == 0 || a.smooth_order >= a.smooth_window {
                return bad("analysis.smooth_window must be odd and exceed smooth_order".into());
            }
        }
        if self.task == Task::DesignFir {
            let f = &self.fir;
            let nyq = f.fs / 2.0;
            if !(f.fs > 0.0 && 0.0 <= f.f_lo && f.f_lo < f.f_hi && f.f_hi < nyq) {
                return bad(format!("fir band [{}, {}] Hz must lie inside [0, {nyq}) Hz", f.f_lo, f.f_hi));
            }
            if f.taps % 2 == 0 {
                return bad(format!("fir.taps = {} must be odd", f.taps));
            }
            if f.response_points < 2 {
                return bad("fir.response_points must be >= 2".into());
            }
        }
        if self.task == Task::Collapse {
            let c = &self.collapse;
            if c.checkpoint.is_none() {
                return bad("collapse.checkpoint is required".into());
            }
            if !(c.fs > 0.0) || c.probe_batch == 0 || c.probe_len == 0 {
                return bad("collapse.fs, probe_batch and probe_len must be > 0".into());
            }
        }
        if self.task == Task::Sweep {
            let s = &self.sweep;
            if s.cells.is_empty() || s.activations.is_empty() || s.workers == 0 {
                return bad("sweep needs cells, activations and workers >= 1".into());
            }
            if s.cells.iter().any(|c| c[0] == 0 || c[1] == 0) {
                return bad("sweep cells must have layers and kernel_len >= 1".into());
            }
            if let Some(c) = s.cells.iter().find(|c| (c[0] * (c[1] - 1) + 1) % 2 == 0) {
                return bad(format!("sweep cell {c:?} collapses to an even length"));
            }
        }
        Ok(())
    }
}

/// Recursive table merge; values of `over` win.
fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (k, v) in over {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                base.insert(k, toml::Value::Table(merge(b, o)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}
