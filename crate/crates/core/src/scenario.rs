//! JSON scenario files: system description, sweep, and Monte Carlo settings.
//!
//! Physical values are SI (metres, radians, watts, linear SNR). The only
//! logarithmic quantity is the `p_t_dbm` sweep axis.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{Estimator, System};
use crate::channel::{BeamSpec, Channel, ChannelSpec, LinkPath, ObstructionSpec};
use crate::error::Error;
use crate::geometry::{JitterSpec, LinkGeometry, DEFAULT_INCIDENCE_ANGLE};
use crate::montecarlo::{BerEstimator, McConfig, DEFAULT_CHUNK_SIZE};
use crate::units::dbm_to_watts;

/// Invalid scenario, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn from_model(prefix: &str, e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => {
                Self::new(format!("{prefix}.{name}"), reason)
            }
            other => Self::new(prefix, other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Reflected {
        w: f64,
        l: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        incidence_angle: Option<f64>,
        aperture_radius: f64,
        divergence: f64,
        sigma_theta: f64,
        sigma_beta: f64,
        eta: f64,
    },
    Direct {
        length: f64,
        aperture_radius: f64,
        divergence: f64,
        sigma_theta: f64,
        eta: f64,
    },
}

impl ChannelConfig {
    pub fn eta(&self) -> f64 {
        match self {
            Self::Reflected { eta, .. } | Self::Direct { eta, .. } => *eta,
        }
    }

    pub fn with_eta(&self, value: f64) -> Self {
        let mut c = self.clone();
        match &mut c {
            Self::Reflected { eta, .. } | Self::Direct { eta, .. } => *eta = value,
        }
        c
    }

    pub fn build(&self) -> crate::Result<Channel> {
        let spec = match *self {
            Self::Reflected {
                w,
                l,
                incidence_angle,
                aperture_radius,
                divergence,
                sigma_theta,
                sigma_beta,
                eta,
            } => ChannelSpec {
                beam: BeamSpec::new(aperture_radius, divergence)?,
                path: LinkPath::Reflected(LinkGeometry::new(
                    w,
                    l,
                    incidence_angle.unwrap_or(DEFAULT_INCIDENCE_ANGLE),
                )?),
                jitter: JitterSpec::new(sigma_theta, sigma_beta)?,
                obstruction: ObstructionSpec::new(eta)?,
            },
            Self::Direct {
                length,
                aperture_radius,
                divergence,
                sigma_theta,
                eta,
            } => ChannelSpec {
                beam: BeamSpec::new(aperture_radius, divergence)?,
                path: LinkPath::direct(length)?,
                jitter: JitterSpec::new(sigma_theta, 0.0)?,
                obstruction: ObstructionSpec::new(eta)?,
            },
        };
        Channel::new(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub channels: Vec<ChannelConfig>,
    /// Defaults to an equal split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Total transmit power (W). Omitted when sweeping `p_t_dbm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_t: Option<f64>,
    pub sigma_n_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PTDbm,
    Eta,
    /// Number of identical copies of the first channel.
    N,
}

impl SweepVariable {
    pub fn column(&self) -> &'static str {
        match self {
            Self::PTDbm => "p_t_dbm",
            Self::Eta => "eta",
            Self::N => "n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepConfig {
    /// Sweep values in order. Channel-count sweeps step by one from `start`
    /// to `stop` and ignore `points`/`spacing`.
    pub fn values(&self) -> Vec<f64> {
        match (self.variable, self.spacing) {
            (SweepVariable::N, _) => {
                let (a, b) = (self.start as u64, self.stop as u64);
                (a..=b).map(|v| v as f64).collect()
            }
            (_, Spacing::Linear) => {
                let step = (self.stop - self.start) / (self.points - 1) as f64;
                (0..self.points)
                    .map(|i| {
                        if i + 1 == self.points {
                            self.stop
                        } else {
                            self.start + step * i as f64
                        }
                    })
                    .collect()
            }
            (_, Spacing::Log) => {
                let (la, lb) = (self.start.ln(), self.stop.ln());
                let step = (lb - la) / (self.points - 1) as f64;
                (0..self.points)
                    .map(|i| {
                        if i + 1 == self.points {
                            self.stop
                        } else {
                            (la + step * i as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: u64,
    #[serde(default)]
    pub estimator: BerEstimator,
}

fn default_trials() -> u64 {
    1_000_000
}

fn default_seed() -> u64 {
    42
}

fn default_chunk_size() -> u64 {
    DEFAULT_CHUNK_SIZE
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            seed: default_seed(),
            chunk_size: default_chunk_size(),
            estimator: BerEstimator::SemiAnalytic,
        }
    }
}

impl McSettings {
    pub fn config(&self) -> McConfig {
        McConfig::new(self.trials, self.seed)
            .with_chunk_size(self.chunk_size)
            .with_estimator(self.estimator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    /// Obstruction coefficients to compare; each produces one block of rows.
    pub etas: Vec<f64>,
}

fn default_gamma_th() -> f64 {
    // 5 dB
    10f64.powf(0.5)
}

fn default_outputs() -> Vec<Estimator> {
    vec![
        Estimator::Asymptotic,
        Estimator::ClosedForm,
        Estimator::Quadrature,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemConfig,
    pub sweep: SweepConfig,
    /// Outage threshold on the combined SNR (linear).
    #[serde(default = "default_gamma_th")]
    pub gamma_th: f64,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Estimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<GainConfig>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.to_string();
            // a missing field is reported against its parent; name the field itself
            let path = match missing_field(&message) {
                Some(field) if path == "." => field.to_string(),
                Some(field) => format!("{path}.{field}"),
                None => path,
            };
            ConfigError::new(path, message)
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("scenario", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical compact serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sys = &self.system;
        if sys.channels.is_empty() {
            return Err(ConfigError::new(
                "system.channels",
                "at least one channel is required",
            ));
        }
        for (i, c) in sys.channels.iter().enumerate() {
            c.build()
                .map_err(|e| ConfigError::from_model(&format!("system.channels[{i}]"), e))?;
        }
        if !(sys.sigma_n_sq.is_finite() && sys.sigma_n_sq > 0.0) {
            return Err(ConfigError::new(
                "system.sigma_n_sq",
                "must be finite and > 0",
            ));
        }
        let sweeping_power = self.sweep.variable == SweepVariable::PTDbm;
        match (sys.p_t, sweeping_power) {
            (Some(_), true) => {
                return Err(ConfigError::new(
                    "system.p_t",
                    "must be omitted when sweeping p_t_dbm",
                ))
            }
            (None, false) => return Err(ConfigError::new("system.p_t", "missing field `p_t`")),
            (Some(p), false) if !(p.is_finite() && p > 0.0) => {
                return Err(ConfigError::new("system.p_t", "must be finite and > 0"))
            }
            _ => {}
        }
        if let Some(alphas) = &sys.alphas {
            if self.sweep.variable == SweepVariable::N {
                return Err(ConfigError::new(
                    "system.alphas",
                    "must be omitted when sweeping the channel count",
                ));
            }
            if alphas.len() != sys.channels.len() {
                return Err(ConfigError::new(
                    "system.alphas",
                    format!(
                        "{} coefficients for {} channels",
                        alphas.len(),
                        sys.channels.len()
                    ),
                ));
            }
        }
        self.validate_sweep()?;
        if !(self.gamma_th.is_finite() && self.gamma_th > 0.0) {
            return Err(ConfigError::new("gamma_th", "must be finite and > 0"));
        }
        self.mc
            .config()
            .validate()
            .map_err(|e| ConfigError::from_model("mc", e))?;
        if let Some(g) = &self.gain {
            if g.etas.is_empty() {
                return Err(ConfigError::new(
                    "gain.etas",
                    "at least one value is required",
                ));
            }
            if g.etas.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                return Err(ConfigError::new(
                    "gain.etas",
                    "values must be finite and >= 0",
                ));
            }
        }
        // every sweep point must yield a valid system
        for (i, v) in self.sweep.values().into_iter().enumerate() {
            self.system_at(v)
                .map_err(|e| ConfigError::new(format!("sweep[{i}]"), e.message))?;
        }
        Ok(())
    }

    fn validate_sweep(&self) -> Result<(), ConfigError> {
        let s = &self.sweep;
        if !(s.start.is_finite() && s.stop.is_finite()) {
            return Err(ConfigError::new("sweep", "start and stop must be finite"));
        }
        match s.variable {
            SweepVariable::N => {
                if s.start.fract() != 0.0 || s.stop.fract() != 0.0 || s.start < 1.0 {
                    return Err(ConfigError::new(
                        "sweep.start",
                        "channel-count sweeps need integer bounds >= 1",
                    ));
                }
                if s.stop <= s.start {
                    return Err(ConfigError::new("sweep.stop", "must exceed start"));
                }
                if s.stop > 64.0 {
                    return Err(ConfigError::new("sweep.stop", "at most 64 channels"));
                }
            }
            _ => {
                if s.points < 2 {
                    return Err(ConfigError::new(
                        "sweep.points",
                        "at least 2 points are required",
                    ));
                }
                if s.spacing == Spacing::Log && !(s.start > 0.0 && s.stop > 0.0) {
                    return Err(ConfigError::new(
                        "sweep.spacing",
                        "log spacing needs positive bounds",
                    ));
                }
                if s.variable == SweepVariable::Eta && (s.start < 0.0 || s.stop < 0.0) {
                    return Err(ConfigError::new(
                        "sweep.start",
                        "obstruction coefficients must be >= 0",
                    ));
                }
            }
        }
        Ok(())
    }

    /// The system at one sweep value.
    pub fn system_at(&self, value: f64) -> Result<System, ConfigError> {
        let sys = &self.system;
        let (configs, alphas, p_t) = match self.sweep.variable {
            SweepVariable::PTDbm => (
                sys.channels.clone(),
                sys.alphas.clone(),
                dbm_to_watts(value),
            ),
            SweepVariable::Eta => (
                sys.channels.iter().map(|c| c.with_eta(value)).collect(),
                sys.alphas.clone(),
                sys.p_t.unwrap_or(f64::NAN),
            ),
            SweepVariable::N => (
                vec![sys.channels[0].clone(); value as usize],
                None,
                sys.p_t.unwrap_or(f64::NAN),
            ),
        };
        let channels = configs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.build()
                    .map_err(|e| ConfigError::from_model(&format!("system.channels[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let built = match alphas {
            Some(a) => System::new(channels, a, p_t, sys.sigma_n_sq),
            None => System::uniform(channels, p_t, sys.sigma_n_sq),
        };
        built.map_err(|e| ConfigError::from_model("system", e))
    }

    /// The system at the scenario's fixed power, or at the sweep start.
    pub fn base_system(&self) -> Result<System, ConfigError> {
        self.system_at(self.sweep.values()[0])
    }
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}
