//! `ccnn`: runs one experiment per invocation and writes its artifacts as
//! CSV plus `config.toml` and `manifest.toml` into `--out`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccnn_core::experiments::{design, spectrum, sweep, systems, ExperimentConfig, Task};
use ccnn_core::Error;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ccnn", version, about = "Causal convolutional networks as FIR filters")]
struct Cli {
    /// TOML file merged over the subcommand's preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; every other seed is derived from it.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory [default: out/<subcommand>].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Train for the full 500 epochs.
    #[arg(long, global = true)]
    paper_budget: bool,
    /// Assemble LS-FIR taps with the doubled off-centre amplitudes.
    #[arg(long, global = true)]
    paper_literal: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design a band-pass FIR filter (LS-FIR or window method).
    DesignFir,
    /// Simulate the MDOF chain under white-noise forcing.
    SimulateMdof,
    /// Learn a Chebyshev band-pass from white noise and compare with LS-FIR.
    TrainSpectrum,
    /// Learn forcing-to-acceleration maps of a simulated chain.
    TrainRegression,
    /// Train the LSTM/CCNN VAE on accelerations.
    TrainVae {
        /// Multichannel CSV to train on instead of simulating.
        #[arg(long, value_name = "CSV")]
        input: Option<PathBuf>,
    },
    /// Collapse a saved checkpoint into FIR filters.
    Collapse {
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Frequency domain decomposition of simulated or recorded data.
    Fdd {
        #[arg(long, value_name = "CSV")]
        input: Option<PathBuf>,
    },
    /// Layers x kernel x activation grid on the spectrum task.
    Sweep {
        /// Worker threads for the cell pool.
        #[arg(long)]
        workers: Option<usize>,
    },
}

impl Command {
    fn task(&self) -> Task {
        match self {
            Command::DesignFir => Task::DesignFir,
            Command::SimulateMdof => Task::Simulate,
            Command::TrainSpectrum => Task::Spectrum,
            Command::TrainRegression => Task::Regression,
            Command::TrainVae { .. } => Task::Vae,
            Command::Collapse { .. } => Task::Collapse,
            Command::Fdd { .. } => Task::Fdd,
            Command::Sweep { .. } => Task::Sweep,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::RateMismatch(..) | Error::LengthMismatch(..) => 2,
        Error::Io(_) | Error::Format { .. } | Error::CheckpointVersion { .. } | Error::CheckpointChecksum => 4,
        Error::Unstable(_)
        | Error::Singular(_)
        | Error::Diverged { .. }
        | Error::TrainMode(_)
        | Error::StaleCache => 3,
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let task = cli.command.task();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::from_toml_str(&text, task)?
        }
        None => ExperimentConfig::preset(task),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.paper_budget |= cli.paper_budget;
    cfg.paper_literal |= cli.paper_literal;
    match &cli.command {
        Command::TrainVae { input } | Command::Fdd { input } if input.is_some() => cfg.data.input = input.clone(),
        Command::Collapse { checkpoint } if checkpoint.is_some() => cfg.collapse.checkpoint = checkpoint.clone(),
        Command::Sweep { workers: Some(w) } => cfg.sweep.workers = *w,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Summary line on stdout; a closed pipe is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn fmt_freqs(f: &[f64]) -> String {
    f.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ")
}

fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<(), Error> {
    let manifest = match cfg.task {
        Task::Spectrum => {
            let r = spectrum::run_spectrum_experiment(cfg)?;
            let c = r.comparison;
            say!(
                "energy ratio {:.2} dB, peak {:.3} Hz, NCC {:.4}, mean R2 {:.4}, val loss {:.5}",
                c.energy_ratio_db,
                c.peak_hz,
                c.ncc,
                r.linearity.mean(),
                r.model.final_val_loss().unwrap_or(f64::NAN)
            );
            spectrum::write_spectrum_artifacts(&r, cfg, dir)?
        }
        Task::Regression => {
            let r = systems::run_regression_experiment(cfg)?;
            say!("modes [{}] Hz", fmt_freqs(&r.modes));
            for (c, p) in r.peaks.iter().enumerate() {
                say!("channel {} peaks [{}] Hz", c + 1, fmt_freqs(p));
            }
            systems::write_regression_artifacts(&r, cfg, dir)?
        }
        Task::Vae => {
            let r = systems::run_vae_experiment(cfg)?;
            if let Some(m) = &r.modes {
                say!("modes [{}] Hz", fmt_freqs(m));
            }
            for (c, p) in r.peaks.iter().enumerate() {
                say!("channel {} peaks [{}] Hz", c + 1, fmt_freqs(p));
            }
            say!("summed spectrum peaks [{}] Hz", fmt_freqs(&r.summed_peaks));
            say!("FDD peaks [{}] Hz", fmt_freqs(&r.fdd.peaks));
            systems::write_vae_artifacts(&r, cfg, dir)?
        }
        Task::Fdd => {
            let r = systems::run_fdd_experiment(cfg)?;
            say!("FDD peaks [{}] Hz", fmt_freqs(&r.peaks));
            systems::write_fdd_artifacts(&r, cfg, dir)?
        }
        Task::Simulate => {
            let r = systems::run_simulate(cfg)?;
            say!("modes [{}] Hz, {} samples", fmt_freqs(&r.modes), r.record.len());
            systems::write_simulate_artifacts(&r, cfg, dir)?
        }
        Task::DesignFir => {
            let (f, resp) = design::run_design_fir(cfg)?;
            say!("{} taps, symmetric: {}", f.len(), f.is_symmetric());
            design::write_design_artifacts(&f, &resp, cfg, dir)?
        }
        Task::Collapse => {
            let r = design::run_collapse(cfg)?;
            say!("collapsed length {}, mean R2 {:.4}", r.collapsed.len(), r.linearity.mean());
            design::write_collapse_artifacts(&r, cfg, dir)?
        }
        Task::Sweep => {
            let cells = sweep::run_sweep(cfg)?;
            for c in &cells {
                match &c.outcome {
                    Ok(m) => say!("M={} p={} {:?}: val loss {:.5}", c.layers, c.kernel_len, c.activation, m.val_loss),
                    Err(e) => say!("M={} p={} {:?}: failed: {e}", c.layers, c.kernel_len, c.activation),
                }
            }
            sweep::write_sweep_artifacts(&cells, cfg, dir)?
        }
    };
    say!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = load_config(&cli).and_then(|cfg| {
        let dir = cfg
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(cfg.task.name()));
        run(&cfg, &dir)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
