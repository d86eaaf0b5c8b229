use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::Axis;
use crate::propagator::{Engine, PropagatorOptions};
use crate::sequence::{build_single_tone, build_three_tone, build_two_tone, PulseSchedule, SequenceError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// Name of the offending key, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

impl From<SequenceError> for ConfigError {
    fn from(e: SequenceError) -> Self {
        match e {
            SequenceError::InvalidParameter { key, reason } => ConfigError::Invalid {
                key: format!("schedule.{key}"),
                reason,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// One operating point, with the matching AC-off baseline.
    Run,
    Sweep,
    Dome,
    /// Disorder sweep with and without the AC field.
    Noise,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Run => "run",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Dome => "dome",
            ExperimentKind::Noise => "noise",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub n_spins: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Graphs per operating point.
    pub n_samples: usize,
    /// Sample `i` uses graph seed `seed + i`.
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            n_spins: 10,
            r_min: 0.9,
            r_max: 1.1,
            n_samples: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    SingleTone,
    TwoTone,
    ThreeTone,
}

/// Times are in units of `1 / J`, with `J` the median coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub kind: ScheduleChoice,
    pub n_pulses: usize,
    /// Second block size, three-tone only.
    pub n_pulses_2: Option<usize>,
    pub tau: f64,
    pub tau_x: f64,
    pub tau_y: f64,
    pub theta_x: f64,
    pub gamma_y: f64,
    /// Number of super-periods `M`.
    pub cycles: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: ScheduleChoice::TwoTone,
            n_pulses: 16,
            n_pulses_2: None,
            tau: 0.025,
            tau_x: 0.0375,
            tau_y: 0.075,
            theta_x: PI / 2.0,
            gamma_y: 0.98 * PI,
            cycles: DESK_CYCLES,
        }
    }
}

/// Desk-scale cycle count, from the L=10 pilot (see `pilot/README.md`).
pub const DESK_CYCLES: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    pub amplitude: f64,
    pub phase: f64,
    /// Absolute frequency. When absent the drive sits at `f_res + detuning`.
    pub frequency: Option<f64>,
    pub detuning: f64,
    /// Which resonance to use for multi-block schedules.
    pub resonance: usize,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0 / PI,
            phase: PI / 2.0,
            frequency: None,
            detuning: 0.0,
            resonance: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderConfig {
    pub sigma: f64,
    /// Sample `i` uses disorder seed `seed + i`.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub engine: Engine,
    pub krylov_tol: f64,
    pub krylov_dim: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let o = PropagatorOptions::default();
        Self {
            engine: o.engine,
            krylov_tol: o.krylov_tol,
            krylov_dim: o.krylov_dim,
        }
    }
}

impl EngineConfig {
    pub fn options(&self) -> PropagatorOptions {
        PropagatorOptions {
            engine: self.engine,
            krylov_tol: self.krylov_tol,
            krylov_dim: self.krylov_dim,
            ..PropagatorOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Phase,
    Amplitude,
    Frequency,
    /// Offset from the realized resonance.
    Detuning,
    GammaY,
    NPulses,
    Sigma,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::Phase => "phase",
            SweepParameter::Amplitude => "amplitude",
            SweepParameter::Frequency => "frequency",
            SweepParameter::Detuning => "detuning",
            SweepParameter::GammaY => "gamma_y",
            SweepParameter::NPulses => "n_pulses",
            SweepParameter::Sigma => "sigma",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Also run every point with the AC field off.
    #[serde(default)]
    pub compare_off: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomeConfig {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub n_gamma: usize,
}

impl Default for DomeConfig {
    fn default() -> Self {
        Self {
            gamma_min: 0.0,
            gamma_max: 1.25 * PI,
            n_gamma: 21,
        }
    }
}

impl DomeConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.n_gamma == 1 {
            return vec![self.gamma_min];
        }
        let step = (self.gamma_max - self.gamma_min) / (self.n_gamma - 1) as f64;
        (0..self.n_gamma).map(|i| self.gamma_min + step * i as f64).collect()
    }
}

/// Complete description of one experiment, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    /// Initial polarisation and observed component. Defaults to `x`, or `z`
    /// for single-tone schedules.
    #[serde(default)]
    pub axis: Option<Axis>,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub disorder: DisorderConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub dome: Option<DomeConfig>,
}

fn check_positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("must be positive, got {v}")))
    }
}

fn check_finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("must be finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let s = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn observed_axis(&self) -> Axis {
        self.axis.unwrap_or(match self.schedule.kind {
            ScheduleChoice::SingleTone => Axis::Z,
            _ => Axis::X,
        })
    }

    /// Full size: at least 15 spins and 50 samples.
    pub fn apply_scale(&mut self, scale: Scale) {
        if scale == Scale::Full {
            self.graph.n_spins = self.graph.n_spins.max(15);
            self.graph.n_samples = self.graph.n_samples.max(50);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::invalid("name", "must not be empty"));
        }
        let g = &self.graph;
        if g.n_spins < 2 || g.n_spins > crate::operators::MAX_SPINS {
            return Err(ConfigError::invalid(
                "graph.n_spins",
                format!("must be in 2..={}, got {}", crate::operators::MAX_SPINS, g.n_spins),
            ));
        }
        check_positive("graph.r_min", g.r_min)?;
        if !(g.r_max > g.r_min) {
            return Err(ConfigError::invalid("graph.r_max", "must exceed r_min"));
        }
        if g.n_samples == 0 {
            return Err(ConfigError::invalid("graph.n_samples", "must be at least 1"));
        }
        let s = &self.schedule;
        check_positive("tau", s.tau)?;
        if s.kind != ScheduleChoice::SingleTone {
            check_positive("tau_x", s.tau_x)?;
            check_positive("tau_y", s.tau_y)?;
        } else if !(s.tau_y >= 0.0) {
            return Err(ConfigError::invalid("tau_y", format!("must be >= 0, got {}", s.tau_y)));
        }
        check_finite("theta_x", s.theta_x)?;
        check_finite("gamma_y", s.gamma_y)?;
        if s.cycles == 0 {
            return Err(ConfigError::invalid("schedule.cycles", "must be at least 1"));
        }
        if s.kind == ScheduleChoice::ThreeTone && s.n_pulses_2.is_none() {
            return Err(ConfigError::invalid("schedule.n_pulses_2", "required for three_tone"));
        }
        let d = &self.drive;
        if !(d.amplitude >= 0.0) || !d.amplitude.is_finite() {
            return Err(ConfigError::invalid("drive.amplitude", format!("must be >= 0, got {}", d.amplitude)));
        }
        check_finite("drive.phase", d.phase)?;
        check_finite("drive.detuning", d.detuning)?;
        if let Some(f) = d.frequency {
            if !(f >= 0.0) || !f.is_finite() {
                return Err(ConfigError::invalid("drive.frequency", format!("must be >= 0, got {f}")));
            }
        }
        if !(self.disorder.sigma >= 0.0) || !self.disorder.sigma.is_finite() {
            return Err(ConfigError::invalid("disorder.sigma", format!("must be >= 0, got {}", self.disorder.sigma)));
        }
        check_positive("engine.krylov_tol", self.engine.krylov_tol)?;
        if self.engine.krylov_dim < 2 {
            return Err(ConfigError::invalid("engine.krylov_dim", "must be at least 2"));
        }
        if self.engine.engine == Engine::Dense && g.n_spins > crate::operators::DENSE_MAX_SPINS {
            return Err(ConfigError::invalid(
                "engine.engine",
                format!("dense engine supports at most {} spins", crate::operators::DENSE_MAX_SPINS),
            ));
        }
        match self.kind {
            ExperimentKind::Sweep | ExperimentKind::Noise => {
                let sw = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| ConfigError::invalid("sweep", "section required for this kind"))?;
                if sw.values.is_empty() {
                    return Err(ConfigError::invalid("sweep.values", "must not be empty"));
                }
                if self.kind == ExperimentKind::Noise && sw.parameter != SweepParameter::Sigma {
                    return Err(ConfigError::invalid("sweep.parameter", "noise experiments sweep `sigma`"));
                }
                for v in &sw.values {
                    check_finite("sweep.values", *v)?;
                    let bad = match sw.parameter {
                        SweepParameter::Amplitude | SweepParameter::Frequency | SweepParameter::Sigma => *v < 0.0,
                        SweepParameter::NPulses => *v < 0.0 || v.fract() != 0.0,
                        _ => false,
                    };
                    if bad {
                        return Err(ConfigError::invalid(
                            "sweep.values",
                            format!("{v} is not a valid {}", sw.parameter.as_str()),
                        ));
                    }
                }
            }
            ExperimentKind::Dome => {
                let dome = self.dome.clone().unwrap_or_default();
                if dome.n_gamma == 0 {
                    return Err(ConfigError::invalid("dome.n_gamma", "must be at least 1"));
                }
                check_finite("dome.gamma_min", dome.gamma_min)?;
                check_finite("dome.gamma_max", dome.gamma_max)?;
            }
            ExperimentKind::Run => {}
        }
        // Builds the schedule once so timing errors surface here.
        self.schedule.build(None, None)?;
        Ok(())
    }
}

impl ScheduleConfig {
    /// Realize the schedule, optionally overriding `gamma_y` and `n_pulses`.
    pub fn build(&self, gamma_y: Option<f64>, n_pulses: Option<usize>) -> Result<PulseSchedule<f64>, ConfigError> {
        let gamma = gamma_y.unwrap_or(self.gamma_y);
        let n = n_pulses.unwrap_or(self.n_pulses);
        let s = match self.kind {
            ScheduleChoice::SingleTone => build_single_tone(self.tau, self.tau_y, gamma, self.cycles)?,
            ScheduleChoice::TwoTone => {
                build_two_tone(n, self.tau, self.tau_x, self.tau_y, self.theta_x, gamma, self.cycles)?
            }
            ScheduleChoice::ThreeTone => build_three_tone(
                n,
                self.n_pulses_2.unwrap_or(n),
                self.tau,
                self.tau_x,
                self.tau_y,
                self.theta_x,
                gamma,
                self.cycles,
            )?,
        };
        Ok(s)
    }
}
