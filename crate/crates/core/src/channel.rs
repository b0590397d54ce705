//! Composite channel fading: Gaussian-beam collection loss under pointing
//! error, times a binary obstruction state.
//!
//! With a Rayleigh superimposed angle the pointing loss `h_p` follows the
//! power law `(m/A0)(h/A0)^(m−1)` on `(0, A0)`. Obstruction zeroes the channel
//! with probability `1 − n`, so `h` is a mixture of a point mass at zero and
//! that power law. The point mass is always carried as a probability value.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::geometry::{
    displacement_cdf, sample_jitter, superimposed_angle, JitterSpec, LinkGeometry, PointingState,
};
use crate::special::erf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    aperture_radius: f64,
    divergence: f64,
}

impl BeamSpec {
    pub fn new(aperture_radius: f64, divergence: f64) -> Result<Self> {
        Ok(Self {
            aperture_radius: check_positive("aperture_radius", aperture_radius)?,
            divergence: check_positive("divergence", divergence)?,
        })
    }

    pub fn aperture_radius(&self) -> f64 {
        self.aperture_radius
    }

    pub fn divergence(&self) -> f64 {
        self.divergence
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamDerived {
    /// Beam radius at the receiver (m).
    pub w_z: f64,
    /// `sqrt(π/2)·a/w_z`.
    pub u: f64,
    /// Collected power fraction at zero displacement.
    pub a0: f64,
    /// Squared equivalent beam width (m²).
    pub w_zeq_sq: f64,
}

/// Beam quantities after propagating `total_length` metres.
pub fn beam_at_distance(b: &BeamSpec, total_length: f64) -> BeamDerived {
    let w_z = b.divergence * total_length;
    if w_z / b.aperture_radius <= 6.0 {
        warn!(
            "beam radius {w_z:.4} m is within 6x the aperture radius {:.4} m; \
             the Gaussian collection approximation is inaccurate here",
            b.aperture_radius
        );
    }
    let u = (std::f64::consts::PI / 2.0).sqrt() * b.aperture_radius / w_z;
    let erf_u = erf(u);
    BeamDerived {
        w_z,
        u,
        a0: erf_u * erf_u,
        w_zeq_sq: w_z * w_z * std::f64::consts::PI.sqrt() * erf_u / (2.0 * u * (-u * u).exp()),
    }
}

pub fn derive_beam(b: &BeamSpec, g: &LinkGeometry) -> BeamDerived {
    beam_at_distance(b, g.total_length())
}

/// Pointing-error fading exponent `m = w_zeq² / (4σθ²(l+w)² + 16σβ²l²)`.
pub fn fading_exponent(bd: &BeamDerived, g: &LinkGeometry, j: &JitterSpec) -> Result<f64> {
    let (st, sb) = (j.sigma_theta(), j.sigma_beta());
    let lw = g.total_length();
    let denom = 4.0 * st * st * lw * lw + 16.0 * sb * sb * g.l() * g.l();
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "fading exponent undefined without jitter; the fading is a point mass at A0".into(),
        ));
    }
    Ok(bd.w_zeq_sq / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstructionSpec {
    eta: f64,
}

impl ObstructionSpec {
    pub fn new(eta: f64) -> Result<Self> {
        Ok(Self {
            eta: check_nonnegative("eta", eta)?,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Probability the path of length `total_len` is unobstructed.
pub fn obstruction_survival(o: &ObstructionSpec, total_len: f64) -> Result<f64> {
    check_positive("total_len", total_len)?;
    Ok((-o.eta * total_len).exp())
}

/// Collected fraction `A0·exp(−2θ²l²/w_zeq²)` at superimposed angle `theta_s`.
pub fn pointing_fading(theta_s: f64, g: &LinkGeometry, bd: &BeamDerived) -> f64 {
    let r = theta_s * g.l();
    bd.a0 * (-2.0 * r * r / bd.w_zeq_sq).exp()
}

/// Path followed by a branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkPath {
    /// Transmitter → reflector → receiver.
    Reflected(LinkGeometry),
    /// Line-of-sight reference path: only beam jitter, over the full length.
    Direct { length: f64 },
}

impl LinkPath {
    pub fn direct(length: f64) -> Result<Self> {
        Ok(Self::Direct {
            length: check_positive("length", length)?,
        })
    }

    pub fn total_length(&self) -> f64 {
        match self {
            Self::Reflected(g) => g.total_length(),
            Self::Direct { length } => *length,
        }
    }

    /// Per-axis variance of the receiver-plane displacement.
    pub fn displacement_variance(&self, j: &JitterSpec) -> f64 {
        match self {
            Self::Reflected(g) => g.l() * g.l() * g.angle_variance(j),
            Self::Direct { length } => length * length * j.sigma_theta() * j.sigma_theta(),
        }
    }

    /// CDF of the receiver-plane displacement `r`.
    pub fn displacement_cdf(&self, j: &JitterSpec, r: f64) -> Result<f64> {
        match self {
            Self::Reflected(g) => displacement_cdf(r, g, j),
            Self::Direct { .. } => {
                if !(r >= 0.0) {
                    return Err(Error::Domain {
                        function: "displacement_cdf",
                        value: r,
                    });
                }
                let var = self.displacement_variance(j);
                if var == 0.0 {
                    return Ok(1.0);
                }
                Ok(-(-r * r / (2.0 * var)).exp_m1())
            }
        }
    }

    pub fn sample_pointing<R: Rng + ?Sized>(&self, j: &JitterSpec, rng: &mut R) -> PointingState {
        let s = sample_jitter(j, rng);
        match self {
            Self::Reflected(g) => superimposed_angle(&s, g),
            Self::Direct { length } => {
                let theta_s = s.theta_x.hypot(s.theta_y);
                PointingState {
                    theta_s,
                    r: theta_s * length,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub beam: BeamSpec,
    pub path: LinkPath,
    pub jitter: JitterSpec,
    pub obstruction: ObstructionSpec,
}

/// Point mass at zero plus the continuous power-law part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedFading {
    pub mass_at_zero: f64,
    pub survival: f64,
    pub m: f64,
    pub a0: f64,
}

impl MixedFading {
    /// Density of the continuous part on `(0, A0)`; integrates to `survival`.
    pub fn continuous_density(&self, h: f64) -> f64 {
        if h <= 0.0 || h >= self.a0 {
            return 0.0;
        }
        self.survival * self.m / self.a0 * (h / self.a0).powf(self.m - 1.0)
    }
}

/// A validated channel with its derived beam, obstruction, and fading
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    spec: ChannelSpec,
    beam: BeamDerived,
    n: f64,
    m: Option<f64>,
}

impl Channel {
    pub fn new(spec: ChannelSpec) -> Result<Self> {
        let length = spec.path.total_length();
        let beam = beam_at_distance(&spec.beam, length);
        let n = obstruction_survival(&spec.obstruction, length)?;
        let var = spec.path.displacement_variance(&spec.jitter);
        let m = (var > 0.0).then(|| beam.w_zeq_sq / (4.0 * var));
        Ok(Self { spec, beam, n, m })
    }

    /// Reflected channel from raw parameters.
    pub fn reflected(
        w: f64,
        l: f64,
        aperture_radius: f64,
        divergence: f64,
        sigma_theta: f64,
        sigma_beta: f64,
        eta: f64,
    ) -> Result<Self> {
        Self::new(ChannelSpec {
            beam: BeamSpec::new(aperture_radius, divergence)?,
            path: LinkPath::Reflected(LinkGeometry::with_distances(w, l)?),
            jitter: JitterSpec::new(sigma_theta, sigma_beta)?,
            obstruction: ObstructionSpec::new(eta)?,
        })
    }

    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    pub fn beam(&self) -> &BeamDerived {
        &self.beam
    }

    pub fn a0(&self) -> f64 {
        self.beam.a0
    }

    /// Survival probability `n = exp(−η·(l+w))`.
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn m(&self) -> Result<f64> {
        self.m.ok_or_else(|| {
            Error::Degenerate("channel has no jitter; fading exponent is undefined".into())
        })
    }

    pub fn has_jitter(&self) -> bool {
        self.m.is_some()
    }

    /// Same channel with the fading exponent multiplied by `factor`. Only
    /// meant for sensitivity checks of the validators.
    pub fn with_scaled_exponent(mut self, factor: f64) -> Self {
        self.m = self.m.map(|m| m * factor);
        self
    }

    pub fn sample_pointing<R: Rng + ?Sized>(&self, rng: &mut R) -> PointingState {
        self.spec.path.sample_pointing(&self.spec.jitter, rng)
    }

    /// Draws one fading realization `h = h_p·h_o`. Always consumes the same
    /// number of random values (four normals, one uniform).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.sample_pointing(rng);
        let open = rng.random::<f64>() < self.n;
        if !open {
            return 0.0;
        }
        if self.m.is_none() {
            return self.beam.a0;
        }
        self.beam.a0 * (-2.0 * p.r * p.r / self.beam.w_zeq_sq).exp()
    }

    /// Right-continuous CDF of `h`.
    pub fn h_cdf(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain {
                function: "h_cdf",
                value: x,
            });
        }
        let a0 = self.beam.a0;
        if x >= a0 {
            return Ok(1.0);
        }
        Ok(match self.m {
            None => 1.0 - self.n,
            Some(m) if x > 0.0 => 1.0 - self.n + self.n * (x / a0).powf(m),
            Some(_) => 1.0 - self.n,
        })
    }

    /// Left limit `P(h < x)`.
    pub fn h_cdf_left(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain {
                function: "h_cdf_left",
                value: x,
            });
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        match self.m {
            None if x <= self.beam.a0 => Ok(1.0 - self.n),
            _ => self.h_cdf(x),
        }
    }

    pub fn h_pdf_parts(&self) -> Result<MixedFading> {
        Ok(MixedFading {
            mass_at_zero: 1.0 - self.n,
            survival: self.n,
            m: self.m()?,
            a0: self.beam.a0,
        })
    }

    /// `E[h] = n·A0·m/(m+1)`.
    pub fn mean_h(&self) -> f64 {
        match self.m {
            Some(m) => self.n * self.beam.a0 * m / (m + 1.0),
            None => self.n * self.beam.a0,
        }
    }
}
