//! Scenario configuration, experiment dispatch and output files for the
//! `kgscatter` command.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use kgscatter::dynamics::EvolutionConfig;
use kgscatter::experiments::{self, ExperimentError, ExperimentReport, Profile};
use thiserror::Error;

pub use config::{parse_config, parse_config_for, ConfigError, Experiment, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Files written by one dispatch.
#[derive(Debug)]
pub struct DispatchOutcome {
    pub report: ExperimentReport,
    pub series_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
}

impl DispatchOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.all_passed() {
            0
        } else {
            1
        }
    }
}

fn evolution(c: &ScenarioConfig) -> EvolutionConfig {
    EvolutionConfig {
        dt: c.dt,
        t_final: c.t_final,
        snapshot_stride: c.snapshot_stride,
        dealias: c.dealias,
        blowup_linf_threshold: c.blowup_linf_threshold,
    }
}

/// The reflected profile `(u(x) + u(−x))/2` used for the parity check.
fn even_part(p: &Profile, n: usize) -> Profile {
    match p {
        Profile::Gaussian {
            amplitude, width, ..
        } => Profile::Gaussian {
            amplitude: *amplitude,
            width: *width,
            center: 0.0,
            velocity: 0.0,
        },
        Profile::GroundState { .. } => p.clone(),
        Profile::Samples { u, ut } => {
            // x_j = −L + j dx reflects to x_{n−j}
            let sym = |v: &[f64]| (0..n).map(|j| 0.5 * (v[j] + v[(n - j) % n])).collect();
            Profile::Samples {
                u: sym(u),
                ut: sym(ut),
            }
        }
    }
}

/// Run the experiment described by `c`.
pub fn run_experiment(c: &ScenarioConfig) -> Result<ExperimentReport, CliError> {
    let grid = c.grid()?;
    let report = match c.experiment {
        Experiment::Identities => experiments::run_identities(c.seed),
        Experiment::SymmetryCheck => experiments::run_symmetry_check(grid)?,
        Experiment::Simulate => experiments::run_simulate(&experiments::SimulateParams {
            grid,
            profile: c.initial_profile()?,
            spec: c.nonlinearity,
            evolution: evolution(c),
            s: c.s,
            virial_radius: c.virial_radius,
            energy_tolerance: c.energy_tolerance,
            momentum_tolerance: c.momentum_tolerance,
            refine: c.refine,
        })?,
        Experiment::Scattering => experiments::run_scattering(&experiments::ScatteringParams {
            grid,
            profile: c.initial_profile()?,
            amplitudes: c.amplitudes.clone(),
            spec: c.nonlinearity,
            evolution: evolution(c),
            probes: c.probes.clone(),
            s: c.s,
            tail_start: c.tail_start,
            tail_tolerance: c.tail_tolerance,
            energy_identity_tolerance: c.energy_identity_tolerance,
            virial_radius: c.virial_radius,
        })?,
        Experiment::NlsLimit => experiments::run_nls_limit(&experiments::NlsLimitSweep {
            lambdas: c.lambdas.clone(),
            profile_grid: grid,
            spec: c.nonlinearity,
            dt: c.dt,
            window: c.window,
            s: c.s,
            sample_stride: c.sample_stride,
            blowup_linf_threshold: c.blowup_linf_threshold,
            dealias: c.dealias,
        })?,
        Experiment::Threshold => experiments::run_threshold(&experiments::ThresholdParams {
            grid,
            scatter_grid: kgscatter::GridSpec::new(c.scatter_half_length, c.scatter_n_points)
                .map_err(|e| ConfigError::Invalid {
                    field: "scatter_n_points".into(),
                    message: e.to_string(),
                })?,
            amplitudes: c.amplitudes.clone(),
            dt: c.dt,
            static_time: c.static_time,
            scatter_time: c.scatter_time,
            blowup_time: c.blowup_time,
            probes: c.probes.clone(),
            static_tolerance: c.static_tolerance,
            snapshot_stride: c.snapshot_stride,
            dealias: c.dealias,
            blowup_linf_threshold: c.blowup_linf_threshold,
        })?,
        Experiment::Stability => experiments::run_twin_stability(&experiments::TwinParams {
            grid,
            base: c.initial_profile()?,
            spec: c.nonlinearity,
            evolution: evolution(c),
            deltas: c.deltas.clone(),
            s: c.s,
        })?,
        Experiment::SolitonDeath => {
            let profile = c.initial_profile()?;
            experiments::run_soliton_death_monitors(&experiments::SolitonDeathParams {
                grid,
                even_profile: even_part(&profile, c.n_points),
                profile,
                spec: c.nonlinearity,
                evolution: evolution(c),
                radii: c.radii.clone(),
                s: c.s,
                virial_tolerance: c.virial_tolerance,
                drift_allowance: c.drift_allowance,
            })?
        }
        Experiment::DecayFit => experiments::run_decay_fit(&experiments::DecayParams {
            grid,
            profile: c.initial_profile()?,
            exponents: c.exponents.clone(),
            t_range: (c.t_start, c.t_end),
            samples: c.samples,
            tolerance: c.decay_tolerance,
        })?,
    };
    Ok(report)
}

/// Run `c` and write its series and summary under `out`.
pub fn dispatch(c: &ScenarioConfig, out: &Path) -> Result<DispatchOutcome, CliError> {
    let report = run_experiment(c)?;
    let (series_files, summary_file) =
        output::write_outputs(out, &report, &c.echo()).map_err(|source| CliError::Io {
            path: out.to_path_buf(),
            source,
        })?;
    Ok(DispatchOutcome {
        report,
        series_files,
        summary_file,
    })
}

#[derive(Debug, Parser)]
#[command(name = "kgscatter", version, about = "Nonlinear Klein-Gordon scattering experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Scenario file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one data set and record conserved quantities.
    Simulate(CommonArgs),
    /// Scattering-state extraction over an amplitude sweep.
    Scattering(CommonArgs),
    /// Klein-Gordon bubbles against their quintic NLS limit.
    NlsLimit(CommonArgs),
    /// Focusing quintic runs around the ground-state threshold.
    Threshold(CommonArgs),
    /// Twin runs under small data perturbations.
    Stability(CommonArgs),
    /// Virial and centre-of-energy monitors.
    SolitonDeath(CommonArgs),
    /// Algebra of translations, boosts, scalings and propagators.
    SymmetryCheck(CommonArgs),
    /// Dispersive decay exponents of the free flow.
    DecayFit(CommonArgs),
    /// Exact identities at machine precision.
    Identities(CommonArgs),
}

impl Command {
    pub fn split(&self) -> (Experiment, &CommonArgs) {
        match self {
            Command::Simulate(a) => (Experiment::Simulate, a),
            Command::Scattering(a) => (Experiment::Scattering, a),
            Command::NlsLimit(a) => (Experiment::NlsLimit, a),
            Command::Threshold(a) => (Experiment::Threshold, a),
            Command::Stability(a) => (Experiment::Stability, a),
            Command::SolitonDeath(a) => (Experiment::SolitonDeath, a),
            Command::SymmetryCheck(a) => (Experiment::SymmetryCheck, a),
            Command::DecayFit(a) => (Experiment::DecayFit, a),
            Command::Identities(a) => (Experiment::Identities, a),
        }
    }
}

/// Resolve the scenario for a parsed command line.
pub fn resolve(experiment: Experiment, args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|source| CliError::Io {
            path: p.clone(),
            source,
        })?,
        None => String::new(),
    };
    Ok(parse_config_for(experiment, &text, &args.overrides)?)
}

/// Entry point; returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let (experiment, args) = cli.command.split();
    let cfg = match resolve(experiment, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match dispatch(&cfg, &out) {
        Ok(o) => {
            for f in &o.report.flags {
                println!("{} {} measured={}", if f.passed { "PASS" } else { "FAIL" }, f.name, output::fmt_sci(f.measured));
            }
            for p in o.series_files.iter().chain(std::iter::once(&o.summary_file)) {
                println!("wrote {}", p.display());
            }
            o.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
