//! Flat `key = value` scenario files.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma separated.
//! Every key not listed in [`KEYS`] is rejected.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use kgscatter::dynamics::{Dealias, NonlinearitySpec};
use kgscatter::experiments::Profile;
use kgscatter::observables::check_exponent;
use kgscatter::spectral::GridSpec;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Scattering,
    NlsLimit,
    Threshold,
    Stability,
    SolitonDeath,
    SymmetryCheck,
    DecayFit,
    Identities,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Simulate,
        Experiment::Scattering,
        Experiment::NlsLimit,
        Experiment::Threshold,
        Experiment::Stability,
        Experiment::SolitonDeath,
        Experiment::SymmetryCheck,
        Experiment::DecayFit,
        Experiment::Identities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Scattering => "scattering",
            Experiment::NlsLimit => "nls-limit",
            Experiment::Threshold => "threshold",
            Experiment::Stability => "stability",
            Experiment::SolitonDeath => "soliton-death",
            Experiment::SymmetryCheck => "symmetry-check",
            Experiment::DecayFit => "decay-fit",
            Experiment::Identities => "identities",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('-', "_") == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: field `{field}`: {message}")]
    Value {
        line: usize,
        field: String,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

/// Initial-data descriptor as written in the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Gaussian,
    GroundState,
    File,
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    pub half_length: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_stride: usize,
    pub dealias: Dealias,
    pub blowup_linf_threshold: f64,
    pub nonlinearity: NonlinearitySpec,
    pub s: f64,
    pub profile: ProfileKind,
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    pub velocity: f64,
    pub multiple: f64,
    pub profile_file: Option<PathBuf>,
    pub amplitudes: Vec<f64>,
    pub probes: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub radii: Vec<f64>,
    pub exponents: Vec<f64>,
    pub seed: u64,
    pub virial_radius: f64,
    pub refine: bool,
    pub energy_tolerance: f64,
    pub momentum_tolerance: f64,
    pub tail_start: f64,
    pub tail_tolerance: f64,
    pub energy_identity_tolerance: f64,
    pub window: f64,
    pub sample_stride: usize,
    pub scatter_half_length: f64,
    pub scatter_n_points: usize,
    pub static_time: f64,
    pub scatter_time: f64,
    pub blowup_time: f64,
    pub static_tolerance: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub decay_tolerance: f64,
    pub virial_tolerance: f64,
    pub drift_allowance: f64,
    pub output_dir: Option<PathBuf>,
}

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "experiment",
    "half_length",
    "n_points",
    "dt",
    "t_final",
    "snapshot_stride",
    "dealias",
    "blowup_linf_threshold",
    "nonlinearity",
    "s",
    "profile",
    "amplitude",
    "width",
    "center",
    "velocity",
    "multiple",
    "profile_file",
    "amplitudes",
    "probes",
    "lambdas",
    "deltas",
    "radii",
    "exponents",
    "seed",
    "virial_radius",
    "refine",
    "energy_tolerance",
    "momentum_tolerance",
    "tail_start",
    "tail_tolerance",
    "energy_identity_tolerance",
    "window",
    "sample_stride",
    "scatter_half_length",
    "scatter_n_points",
    "static_time",
    "scatter_time",
    "blowup_time",
    "static_tolerance",
    "t_start",
    "t_end",
    "samples",
    "decay_tolerance",
    "virial_tolerance",
    "drift_allowance",
    "output_dir",
];

impl ScenarioConfig {
    /// Documented defaults for `experiment`.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ScenarioConfig {
            experiment,
            half_length: 200.0,
            n_points: 4096,
            dt: 1e-3,
            t_final: 20.0,
            snapshot_stride: 100,
            dealias: Dealias::ExpFilter,
            blowup_linf_threshold: 10.0,
            nonlinearity: NonlinearitySpec::DefocusingExp,
            s: 0.6,
            profile: ProfileKind::Gaussian,
            amplitude: 1.0,
            width: 1.0,
            center: 0.0,
            velocity: 0.0,
            multiple: 1.0,
            profile_file: None,
            amplitudes: vec![0.5],
            probes: vec![20.0, 30.0, 40.0, 50.0],
            lambdas: vec![4.0, 8.0, 16.0],
            deltas: vec![0.0, 1e-3, 1e-2],
            radii: vec![5.0, 10.0, 20.0],
            exponents: vec![6.0, f64::INFINITY],
            seed: 1,
            virial_radius: 10.0,
            refine: false,
            energy_tolerance: 1e-6,
            momentum_tolerance: 1e-8,
            tail_start: 50.0,
            tail_tolerance: 1e-3,
            energy_identity_tolerance: 2e-2,
            window: 2.0,
            sample_stride: 4,
            scatter_half_length: 200.0,
            scatter_n_points: 4096,
            static_time: 10.0,
            scatter_time: 50.0,
            blowup_time: 5.0,
            static_tolerance: 1e-4,
            t_start: 10.0,
            t_end: 100.0,
            samples: 24,
            decay_tolerance: 0.05,
            virial_tolerance: 1e-4,
            drift_allowance: 1e-6,
            output_dir: None,
        };
        match experiment {
            Experiment::Simulate | Experiment::Identities => {}
            Experiment::Scattering => {
                c.dt = 0.01;
                c.t_final = 100.0;
                c.snapshot_stride = 10;
            }
            Experiment::NlsLimit => {
                c.half_length = 20.0;
                c.n_points = 512;
                c.dt = 0.05;
            }
            Experiment::Threshold => {
                c.half_length = 40.0;
                c.nonlinearity = NonlinearitySpec::QuinticFocusing;
                c.profile = ProfileKind::GroundState;
                c.amplitudes = vec![0.5, 1.0, 3.0];
                c.t_final = 10.0;
            }
            Experiment::Stability => {
                c.half_length = 100.0;
                c.n_points = 1024;
                c.dt = 0.01;
                c.snapshot_stride = 10;
            }
            Experiment::SolitonDeath => {
                c.half_length = 40.0;
                c.n_points = 1024;
                c.t_final = 10.0;
                c.snapshot_stride = 1;
                c.center = 1.0;
            }
            Experiment::SymmetryCheck => {
                c.half_length = 40.0;
                c.n_points = 512;
            }
            Experiment::DecayFit => {
                c.half_length = 150.0;
                c.n_points = 2048;
            }
        }
        c
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.half_length, self.n_points).map_err(|e| ConfigError::Invalid {
            field: "n_points".into(),
            message: e.to_string(),
        })
    }

    /// Initial data built from the profile keys.
    pub fn initial_profile(&self) -> Result<Profile, ConfigError> {
        Ok(match self.profile {
            ProfileKind::Gaussian => Profile::Gaussian {
                amplitude: self.amplitude,
                width: self.width,
                center: self.center,
                velocity: self.velocity,
            },
            ProfileKind::GroundState => Profile::GroundState {
                multiple: self.multiple,
            },
            ProfileKind::File => {
                let path = self.profile_file.as_ref().ok_or_else(|| ConfigError::Invalid {
                    field: "profile_file".into(),
                    message: "required when profile = file".into(),
                })?;
                read_samples(path, self.n_points)?
            }
        })
    }

    /// `key = value` lines for every resolved field, in [`KEYS`] order.
    pub fn echo(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .filter_map(|&k| self.value_of(k).map(|v| (k.to_string(), v)))
            .collect()
    }

    fn value_of(&self, key: &str) -> Option<String> {
        let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(", ");
        Some(match key {
            "experiment" => self.experiment.name().into(),
            "half_length" => fmt_f64(self.half_length),
            "n_points" => self.n_points.to_string(),
            "dt" => fmt_f64(self.dt),
            "t_final" => fmt_f64(self.t_final),
            "snapshot_stride" => self.snapshot_stride.to_string(),
            "dealias" => self.dealias.name().into(),
            "blowup_linf_threshold" => fmt_f64(self.blowup_linf_threshold),
            "nonlinearity" => self.nonlinearity.name().into(),
            "s" => fmt_f64(self.s),
            "profile" => match self.profile {
                ProfileKind::Gaussian => "gaussian".into(),
                ProfileKind::GroundState => "ground_state".into(),
                ProfileKind::File => "file".into(),
            },
            "amplitude" => fmt_f64(self.amplitude),
            "width" => fmt_f64(self.width),
            "center" => fmt_f64(self.center),
            "velocity" => fmt_f64(self.velocity),
            "multiple" => fmt_f64(self.multiple),
            "profile_file" => self.profile_file.as_ref()?.display().to_string(),
            "amplitudes" => list(&self.amplitudes),
            "probes" => list(&self.probes),
            "lambdas" => list(&self.lambdas),
            "deltas" => list(&self.deltas),
            "radii" => list(&self.radii),
            "exponents" => list(&self.exponents),
            "seed" => self.seed.to_string(),
            "virial_radius" => fmt_f64(self.virial_radius),
            "refine" => self.refine.to_string(),
            "energy_tolerance" => fmt_f64(self.energy_tolerance),
            "momentum_tolerance" => fmt_f64(self.momentum_tolerance),
            "tail_start" => fmt_f64(self.tail_start),
            "tail_tolerance" => fmt_f64(self.tail_tolerance),
            "energy_identity_tolerance" => fmt_f64(self.energy_identity_tolerance),
            "window" => fmt_f64(self.window),
            "sample_stride" => self.sample_stride.to_string(),
            "scatter_half_length" => fmt_f64(self.scatter_half_length),
            "scatter_n_points" => self.scatter_n_points.to_string(),
            "static_time" => fmt_f64(self.static_time),
            "scatter_time" => fmt_f64(self.scatter_time),
            "blowup_time" => fmt_f64(self.blowup_time),
            "static_tolerance" => fmt_f64(self.static_tolerance),
            "t_start" => fmt_f64(self.t_start),
            "t_end" => fmt_f64(self.t_end),
            "samples" => self.samples.to_string(),
            "decay_tolerance" => fmt_f64(self.decay_tolerance),
            "virial_tolerance" => fmt_f64(self.virial_tolerance),
            "drift_allowance" => fmt_f64(self.drift_allowance),
            "output_dir" => self.output_dir.as_ref()?.display().to_string(),
            _ => return None,
        })
    }

    /// Set one field from its textual value.
    pub fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Value {
            line,
            field: key.to_string(),
            message,
        };
        let real = || parse_f64(raw).map_err(bad);
        let count = || {
            raw.parse::<usize>()
                .map_err(|_| bad(format!("expected a non-negative integer, got `{raw}`")))
        };
        let list = || -> Result<Vec<f64>, ConfigError> {
            raw.split(',')
                .map(|p| parse_f64(p.trim()).map_err(bad))
                .collect()
        };
        match key {
            "experiment" => {
                let e: Experiment = raw.parse().map_err(bad)?;
                if e != self.experiment {
                    return Err(bad(format!(
                        "file is for `{e}` but the command is `{}`",
                        self.experiment
                    )));
                }
            }
            "half_length" => self.half_length = real()?,
            "n_points" => self.n_points = count()?,
            "dt" => self.dt = real()?,
            "t_final" => self.t_final = real()?,
            "snapshot_stride" => self.snapshot_stride = count()?,
            "dealias" => self.dealias = raw.parse().map_err(|e: String| bad(e))?,
            "blowup_linf_threshold" => self.blowup_linf_threshold = real()?,
            "nonlinearity" => self.nonlinearity = raw.parse().map_err(|e: String| bad(e))?,
            "s" => self.s = real()?,
            "profile" => {
                self.profile = match raw {
                    "gaussian" => ProfileKind::Gaussian,
                    "ground_state" => ProfileKind::GroundState,
                    "file" => ProfileKind::File,
                    _ => return Err(bad(format!("expected gaussian, ground_state or file, got `{raw}`"))),
                }
            }
            "amplitude" => self.amplitude = real()?,
            "width" => self.width = real()?,
            "center" => self.center = real()?,
            "velocity" => self.velocity = real()?,
            "multiple" => self.multiple = real()?,
            "profile_file" => self.profile_file = Some(PathBuf::from(raw)),
            "amplitudes" => self.amplitudes = list()?,
            "probes" => self.probes = list()?,
            "lambdas" => self.lambdas = list()?,
            "deltas" => self.deltas = list()?,
            "radii" => self.radii = list()?,
            "exponents" => self.exponents = list()?,
            "seed" => {
                self.seed = raw
                    .parse()
                    .map_err(|_| bad(format!("expected a non-negative integer, got `{raw}`")))?
            }
            "virial_radius" => self.virial_radius = real()?,
            "refine" => {
                self.refine = match raw {
                    "true" => true,
                    "false" => false,
                    _ => return Err(bad(format!("expected true or false, got `{raw}`"))),
                }
            }
            "energy_tolerance" => self.energy_tolerance = real()?,
            "momentum_tolerance" => self.momentum_tolerance = real()?,
            "tail_start" => self.tail_start = real()?,
            "tail_tolerance" => self.tail_tolerance = real()?,
            "energy_identity_tolerance" => self.energy_identity_tolerance = real()?,
            "window" => self.window = real()?,
            "sample_stride" => self.sample_stride = count()?,
            "scatter_half_length" => self.scatter_half_length = real()?,
            "scatter_n_points" => self.scatter_n_points = count()?,
            "static_time" => self.static_time = real()?,
            "scatter_time" => self.scatter_time = real()?,
            "blowup_time" => self.blowup_time = real()?,
            "static_tolerance" => self.static_tolerance = real()?,
            "t_start" => self.t_start = real()?,
            "t_end" => self.t_end = real()?,
            "samples" => self.samples = count()?,
            "decay_tolerance" => self.decay_tolerance = real()?,
            "virial_tolerance" => self.virial_tolerance = real()?,
            "drift_allowance" => self.drift_allowance = real()?,
            "output_dir" => self.output_dir = Some(PathBuf::from(raw)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Semantic checks; the first violated invariant is reported.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field: &str, message: String| ConfigError::Invalid {
            field: field.to_string(),
            message,
        };
        let even = |field: &str, n: usize| {
            if n % 2 != 0 {
                Err(invalid(field, format!("{field} must be even (got {n})")))
            } else if n < 8 {
                Err(invalid(field, format!("{field} must be at least 8 (got {n})")))
            } else {
                Ok(())
            }
        };
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive and finite (got {v})")))
            }
        };
        even("n_points", self.n_points)?;
        even("scatter_n_points", self.scatter_n_points)?;
        positive("half_length", self.half_length)?;
        positive("scatter_half_length", self.scatter_half_length)?;
        positive("dt", self.dt)?;
        positive("blowup_linf_threshold", self.blowup_linf_threshold)?;
        positive("virial_radius", self.virial_radius)?;
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be at least 1".into()));
        }
        if self.sample_stride == 0 {
            return Err(invalid("sample_stride", "must be at least 1".into()));
        }
        if !(self.t_final >= 0.0) {
            return Err(invalid("t_final", format!("must be non-negative (got {})", self.t_final)));
        }
        check_exponent(self.s).map_err(|_| {
            invalid("s", format!("s = {} is outside the admissible range [1/2, 11/12)", self.s))
        })?;
        if self.profile == ProfileKind::File && self.profile_file.is_none() {
            return Err(invalid("profile_file", "required when profile = file".into()));
        }
        let nonempty = |field: &str, v: &[f64]| {
            if v.is_empty() {
                Err(invalid(field, "list must not be empty".into()))
            } else {
                Ok(())
            }
        };
        match self.experiment {
            Experiment::Scattering => {
                nonempty("amplitudes", &self.amplitudes)?;
                if self.probes.len() < 2 {
                    return Err(invalid("probes", "need at least two probe times".into()));
                }
                if self.probes.iter().any(|&p| p > self.t_final) {
                    return Err(invalid("probes", "probe times must not exceed t_final".into()));
                }
            }
            Experiment::NlsLimit => {
                nonempty("lambdas", &self.lambdas)?;
                if self.lambdas.iter().any(|&l| !(l >= 1.0)) {
                    return Err(invalid("lambdas", "every lambda must be >= 1".into()));
                }
                positive("window", self.window)?;
            }
            Experiment::Threshold => {
                nonempty("amplitudes", &self.amplitudes)?;
                if self.nonlinearity != NonlinearitySpec::QuinticFocusing {
                    return Err(invalid(
                        "nonlinearity",
                        "the threshold study is defined for quintic_focusing only".into(),
                    ));
                }
            }
            Experiment::Stability => nonempty("deltas", &self.deltas)?,
            Experiment::SolitonDeath => {
                nonempty("radii", &self.radii)?;
                if self.radii.iter().any(|&r| !(r > 0.0)) {
                    return Err(invalid("radii", "every radius must be positive".into()));
                }
            }
            Experiment::DecayFit => {
                nonempty("exponents", &self.exponents)?;
                if self.exponents.iter().any(|&p| !(p >= 2.0)) {
                    return Err(invalid("exponents", "every exponent must be >= 2".into()));
                }
                if !(self.t_start > 0.0 && self.t_end > self.t_start) {
                    return Err(invalid("t_end", "need 0 < t_start < t_end".into()));
                }
                if self.samples < 2 {
                    return Err(invalid("samples", "need at least two samples".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Shortest round-trip decimal for `v`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

fn parse_f64(raw: &str) -> Result<f64, String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("expected a number, got `{raw}`"))?;
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}

fn read_samples(path: &PathBuf, n: usize) -> Result<Profile, ConfigError> {
    let field = "profile_file".to_string();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid {
        field: field.clone(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let (mut u, mut ut) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| {
            parse_f64(s).map_err(|m| ConfigError::Invalid {
                field: field.clone(),
                message: format!("{}:{}: {m}", path.display(), i + 1),
            })
        };
        match cols.as_slice() {
            [a] => {
                u.push(parse(a)?);
                ut.push(0.0);
            }
            [a, b] => {
                u.push(parse(a)?);
                ut.push(parse(b)?);
            }
            _ => {
                return Err(ConfigError::Invalid {
                    field,
                    message: format!("{}:{}: expected `u` or `u, ut`", path.display(), i + 1),
                })
            }
        }
    }
    if u.len() != n {
        return Err(ConfigError::Invalid {
            field,
            message: format!("{} has {} samples but n_points = {n}", path.display(), u.len()),
        });
    }
    Ok(Profile::Samples { u, ut })
}

fn split_line(raw: &str, line: usize) -> Result<Option<(String, String)>, ConfigError> {
    let text = raw.split('#').next().unwrap().trim();
    if text.is_empty() {
        return Ok(None);
    }
    let (k, v) = text.split_once('=').ok_or_else(|| ConfigError::Syntax {
        line,
        message: format!("expected `key = value`, got `{text}`"),
    })?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || k.contains(char::is_whitespace) {
        return Err(ConfigError::Syntax {
            line,
            message: format!("malformed key `{k}`"),
        });
    }
    if v.is_empty() {
        return Err(ConfigError::Syntax {
            line,
            message: format!("missing value for `{k}`"),
        });
    }
    Ok(Some((k.to_string(), v.to_string())))
}

/// Parse a file whose `experiment` key names the scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut experiment = None;
    for (i, raw) in text.lines().enumerate() {
        if let Some((k, v)) = split_line(raw, i + 1)? {
            if k == "experiment" {
                experiment = Some(v.parse::<Experiment>().map_err(|m| ConfigError::Value {
                    line: i + 1,
                    field: k,
                    message: m,
                })?);
                break;
            }
        }
    }
    let experiment = experiment.ok_or_else(|| ConfigError::Invalid {
        field: "experiment".into(),
        message: "missing".into(),
    })?;
    parse_config_for(experiment, text, &[])
}

/// Parse `text` for a given experiment, then apply `key=value` overrides.
pub fn parse_config_for(
    experiment: Experiment,
    text: &str,
    overrides: &[String],
) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::defaults(experiment);
    let mut seen = std::collections::BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if let Some((k, v)) = split_line(raw, line)? {
            if !KEYS.contains(&k.as_str()) {
                return Err(ConfigError::UnknownKey { line, key: k });
            }
            if !seen.insert(k.clone()) {
                return Err(ConfigError::Duplicate { line, key: k });
            }
            cfg.set(&k, &v, line)?;
        }
    }
    for o in overrides {
        // overrides are reported as line 0
        let (k, v) = split_line(o, 0)?.ok_or_else(|| ConfigError::Syntax {
            line: 0,
            message: format!("empty override `{o}`"),
        })?;
        if !KEYS.contains(&k.as_str()) {
            return Err(ConfigError::UnknownKey { line: 0, key: k });
        }
        cfg.set(&k, &v, 0)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("experiment = simulate\n").unwrap();
        assert_eq!(c, ScenarioConfig::defaults(Experiment::Simulate));
        assert_eq!(c.n_points, 4096);
        assert_eq!(c.s, 0.6);
    }

    #[test]
    fn odd_grid_is_rejected() {
        let e = parse_config("experiment = simulate\nn_points = 1023\n").unwrap_err();
        assert!(e.to_string().contains("n_points must be even"), "{e}");
    }

    #[test]
    fn exponent_range_is_enforced() {
        let e = parse_config("experiment = scattering\ns = 0.95\n").unwrap_err();
        assert!(e.to_string().contains("[1/2, 11/12)"), "{e}");
        assert!(parse_config("experiment = scattering\ns = 0.5\n").is_ok());
    }

    #[test]
    fn diagnostics_carry_location() {
        let e = parse_config("experiment = simulate\n\n# note\nbogus = 1\n").unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey { line: 4, key: "bogus".into() });
        let e = parse_config("experiment = simulate\ndt 0.1\n").unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 2, .. }));
        let e = parse_config("experiment = simulate\ndt = fast\n").unwrap_err();
        assert!(matches!(e, ConfigError::Value { line: 2, ref field, .. } if field == "dt"));
        let e = parse_config("experiment = simulate\ndt = 0.1\ndt = 0.2\n").unwrap_err();
        assert!(matches!(e, ConfigError::Duplicate { line: 3, .. }));
    }

    #[test]
    fn comments_lists_and_overrides() {
        let text = "experiment = scattering # trailing\namplitudes = 0.25, 0.5,1\n";
        let c = parse_config_for(Experiment::Scattering, text, &["dt=0.02".into()]).unwrap();
        assert_eq!(c.amplitudes, vec![0.25, 0.5, 1.0]);
        assert_eq!(c.dt, 0.02);
        let e = parse_config_for(Experiment::Simulate, text, &[]).unwrap_err();
        assert!(e.to_string().contains("file is for `scattering`"), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        for e in Experiment::ALL {
            let c = ScenarioConfig::defaults(e);
            let text: String = c.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
            assert_eq!(parse_config(&text).unwrap(), c, "{e}");
        }
    }

    #[test]
    fn experiment_names_parse() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!("soliton_death".parse::<Experiment>().unwrap(), Experiment::SolitonDeath);
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn threshold_requires_quintic_focusing() {
        let e = parse_config("experiment = threshold\nnonlinearity = defocusing_exp\n").unwrap_err();
        assert!(e.to_string().contains("quintic_focusing"));
    }
}
