//! Pointing-error geometry of a single reflected link.
//!
//! Transmitter beam jitter `θ` and reflector normal jitter `β` combine into a
//! superimposed angle at the receiver. In the small-angle regime each plane
//! contributes `(1 + w/l)·θ + 2β`, and with i.i.d. Gaussian components the
//! magnitude is Rayleigh. [`raytrace`] performs the exact reflection so the
//! linearization can be checked rather than assumed.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};

/// Largest jitter angle the ray tracer accepts.
pub const MAX_TRACE_ANGLE: f64 = 0.3;

pub const DEFAULT_INCIDENCE_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

/// Per-axis standard deviations of the beam (`sigma_theta`) and reflector
/// (`sigma_beta`) jitter angles, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterSpec {
    sigma_theta: f64,
    sigma_beta: f64,
}

impl JitterSpec {
    pub fn new(sigma_theta: f64, sigma_beta: f64) -> Result<Self> {
        Ok(Self {
            sigma_theta: check_nonnegative("sigma_theta", sigma_theta)?,
            sigma_beta: check_nonnegative("sigma_beta", sigma_beta)?,
        })
    }

    pub fn sigma_theta(&self) -> f64 {
        self.sigma_theta
    }

    pub fn sigma_beta(&self) -> f64 {
        self.sigma_beta
    }

    pub fn is_still(&self) -> bool {
        self.sigma_theta == 0.0 && self.sigma_beta == 0.0
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.sigma_theta * factor, self.sigma_beta * factor)
    }
}

/// Transmitter→reflector distance `w`, reflector→receiver distance `l`, and
/// the nominal incidence angle on the reflector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    w: f64,
    l: f64,
    incidence_angle: f64,
}

impl LinkGeometry {
    pub fn new(w: f64, l: f64, incidence_angle: f64) -> Result<Self> {
        check_positive("w", w)?;
        check_positive("l", l)?;
        if !(incidence_angle.is_finite()
            && (0.0..std::f64::consts::FRAC_PI_2).contains(&incidence_angle))
        {
            return Err(Error::InvalidParameter {
                name: "incidence_angle",
                reason: format!("must lie in [0, pi/2), got {incidence_angle}"),
            });
        }
        Ok(Self {
            w,
            l,
            incidence_angle,
        })
    }

    /// Geometry with the default incidence angle of π/4.
    pub fn with_distances(w: f64, l: f64) -> Result<Self> {
        Self::new(w, l, DEFAULT_INCIDENCE_ANGLE)
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn incidence_angle(&self) -> f64 {
        self.incidence_angle
    }

    pub fn total_length(&self) -> f64 {
        self.w + self.l
    }

    /// Beam-jitter amplification `1 + w/l` at the receiver.
    pub fn amplification(&self) -> f64 {
        1.0 + self.w / self.l
    }

    /// Per-component variance of the superimposed angle.
    pub fn angle_variance(&self, jitter: &JitterSpec) -> f64 {
        let k = self.amplification();
        k * k * jitter.sigma_theta * jitter.sigma_theta
            + 4.0 * jitter.sigma_beta * jitter.sigma_beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterSample {
    pub theta_x: f64,
    pub theta_y: f64,
    pub beta_x: f64,
    pub beta_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingState {
    /// Superimposed pointing error angle (rad).
    pub theta_s: f64,
    /// Beam displacement from the receiver centre (m).
    pub r: f64,
}

pub fn sample_jitter<R: Rng + ?Sized>(spec: &JitterSpec, rng: &mut R) -> JitterSample {
    let mut draw = |sigma: f64| sigma * rng.sample::<f64, _>(StandardNormal);
    JitterSample {
        theta_x: draw(spec.sigma_theta),
        theta_y: draw(spec.sigma_theta),
        beta_x: draw(spec.sigma_beta),
        beta_y: draw(spec.sigma_beta),
    }
}

pub fn superimposed_angle(s: &JitterSample, g: &LinkGeometry) -> PointingState {
    let k = g.amplification();
    let x = k * s.theta_x + 2.0 * s.beta_x;
    let y = k * s.theta_y + 2.0 * s.beta_y;
    let theta_s = x.hypot(y);
    PointingState {
        theta_s,
        r: theta_s * g.l,
    }
}

fn nonnegative_arg(function: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain { function, value })
    }
}

/// Rayleigh density of the superimposed angle.
pub fn theta_s_pdf(x: f64, g: &LinkGeometry, j: &JitterSpec) -> Result<f64> {
    let x = nonnegative_arg("theta_s_pdf", x)?;
    let var = g.angle_variance(j);
    if var == 0.0 {
        return Err(Error::Degenerate(
            "zero jitter: the angle is identically 0 and has no density".into(),
        ));
    }
    Ok(x / var * (-x * x / (2.0 * var)).exp())
}

pub fn theta_s_cdf(x: f64, g: &LinkGeometry, j: &JitterSpec) -> Result<f64> {
    let x = nonnegative_arg("theta_s_cdf", x)?;
    let var = g.angle_variance(j);
    if var == 0.0 {
        return Ok(1.0);
    }
    Ok(-(-x * x / (2.0 * var)).exp_m1())
}

/// CDF of the receiver-plane displacement `r = θ_s·l`.
pub fn displacement_cdf(r: f64, g: &LinkGeometry, j: &JitterSpec) -> Result<f64> {
    let r = nonnegative_arg("displacement_cdf", r)?;
    let (st, sb) = (j.sigma_theta, j.sigma_beta);
    let lw = g.l + g.w;
    let denom = 2.0 * lw * lw * st * st + 8.0 * sb * sb * g.l * g.l;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok(-(-r * r / denom).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TracePlane {
    /// Contains the incident beam and the reflector normal; uses the
    /// geometry's incidence angle.
    Horizontal,
    /// Orthogonal plane; the projected incidence is zero.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTraceResult {
    pub icrn_offset: f64,
    pub exact_receiver_offset: f64,
    pub linear_receiver_offset: f64,
    /// `|exact − linear|` on the signed offsets.
    pub linearization_error: f64,
}

type Vec2 = [f64; 2];

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Exact one-plane reflection of a jittered beam off a tilted mirror.
///
/// The mirror pivots about the nominal reflection point `O` (the origin) with
/// nominal normal `+y`. The beam leaves the transmitter at `−w·d` rotated by
/// `−theta` (the sign that makes both jitters deflect the spot the same way),
/// hits the tilted mirror wherever it actually lies, reflects, and is
/// intersected with the receiver plane, which is perpendicular to the nominal
/// reflected ray at distance `l`.
pub fn raytrace(
    plane: TracePlane,
    theta: f64,
    beta: f64,
    g: &LinkGeometry,
) -> Result<RayTraceResult> {
    for (name, v) in [("theta", theta), ("beta", beta)] {
        if !v.is_finite() || v.abs() >= MAX_TRACE_ANGLE {
            return Err(Error::Geometry(format!(
                "{name} = {v} outside the small-angle range (< {MAX_TRACE_ANGLE} rad)"
            )));
        }
    }
    let alpha = match plane {
        TracePlane::Horizontal => g.incidence_angle,
        TracePlane::Vertical => 0.0,
    };
    let (w, l) = (g.w, g.l);
    let (sa, ca) = alpha.sin_cos();

    let incoming = [sa, -ca];
    let reflected_nominal = [sa, ca];
    let lateral = [-ca, sa];
    let transmitter = [-w * incoming[0], -w * incoming[1]];
    let receiver_centre = [l * reflected_nominal[0], l * reflected_nominal[1]];

    let dir = rotate(incoming, -theta);
    let normal = rotate([0.0, 1.0], beta);

    let approach = dot(dir, normal);
    if approach >= 0.0 {
        return Err(Error::Geometry("beam does not reach the reflector".into()));
    }
    let t = -dot(transmitter, normal) / approach;
    let hit = [transmitter[0] + t * dir[0], transmitter[1] + t * dir[1]];
    let out = [
        dir[0] - 2.0 * approach * normal[0],
        dir[1] - 2.0 * approach * normal[1],
    ];

    let closing = dot(out, reflected_nominal);
    if closing <= 0.0 {
        return Err(Error::Geometry(
            "reflected ray is parallel to or diverges from the receiver plane".into(),
        ));
    }
    let to_plane = [receiver_centre[0] - hit[0], receiver_centre[1] - hit[1]];
    let s = dot(to_plane, reflected_nominal) / closing;
    if s <= 0.0 {
        return Err(Error::Geometry(
            "receiver plane lies behind the reflector".into(),
        ));
    }
    let spot = [
        hit[0] + s * out[0] - receiver_centre[0],
        hit[1] + s * out[1] - receiver_centre[1],
    ];

    let exact = dot(spot, lateral);
    let linear = (g.amplification() * theta + 2.0 * beta) * l;
    Ok(RayTraceResult {
        icrn_offset: (theta.tan() * w / ca).abs(),
        exact_receiver_offset: exact.abs(),
        linear_receiver_offset: linear.abs(),
        linearization_error: (exact - linear).abs(),
    })
}

/// Least-squares slope of `log |exact − linear|` against `log θ` for
/// `θ` over `angles` with `β = beta_ratio·θ`.
pub fn linearization_slope(
    plane: TracePlane,
    g: &LinkGeometry,
    angles: &[f64],
    beta_ratio: f64,
) -> Result<f64> {
    if angles.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "angles",
            reason: "need at least two ladder points".into(),
        });
    }
    let mut pts = Vec::with_capacity(angles.len());
    for &a in angles {
        let e = raytrace(plane, a, beta_ratio * a, g)?.linearization_error;
        if !(e > 0.0) {
            return Err(Error::Degenerate(format!(
                "zero linearization error at angle {a}"
            )));
        }
        pts.push((a.ln(), e.ln()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
