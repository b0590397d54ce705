//! Closed-form and quadrature performance of single- and multi-branch links
//! with IM/DD on-off keying (conditional BER `Q(sqrt(γ/2))`).
//!
//! Everything here is deterministic. Monte Carlo lives in [`crate::montecarlo`]
//! and never calls into this module.

use std::collections::BTreeSet;

use crate::channel::Channel;
use crate::error::{check_positive, Error, Result};
use crate::special::{gamma, integrate, lower_incomplete_gamma, q_function, scaled_lower_gamma};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Average SNR `2·P_t²/σ_n²` of a branch carrying the full power.
pub fn mean_snr(p_t: f64, sigma_n_sq: f64) -> f64 {
    2.0 * p_t * p_t / sigma_n_sq
}

/// Leading-term description `f_μ(μ) ≈ g_c·μ^t` of a fading density near zero,
/// together with the modulation constants of a conditional error rate
/// `ρ·Q(sqrt(ζ·γ̄·μ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSpec {
    pub g_c: f64,
    pub t: f64,
    pub rho: f64,
    pub zeta: f64,
}

impl AsymptoticSpec {
    pub fn new(g_c: f64, t: f64, rho: f64, zeta: f64) -> Result<Self> {
        check_positive("g_c", g_c)?;
        if !(t > -1.0) {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("must exceed -1, got {t}"),
            });
        }
        Ok(Self { g_c, t, rho, zeta })
    }

    /// Continuous part of `μ = h²` for an OOK channel:
    /// `g_c = m·n/(2·A0^m)`, `t = m/2 − 1`.
    pub fn for_channel(ch: &Channel) -> Result<Self> {
        let m = ch.m()?;
        Self::new(
            m * ch.n() / (2.0 * ch.a0().powf(m)),
            m / 2.0 - 1.0,
            1.0,
            0.5,
        )
    }

    /// Leading term of the outage probability.
    pub fn outage(&self, gamma_th: f64, mean_snr: f64) -> f64 {
        self.g_c / (self.t + 1.0) * (gamma_th / mean_snr).powf(self.t + 1.0)
    }

    /// Leading term of the average error rate.
    pub fn ber(&self, mean_snr: f64) -> f64 {
        let t = self.t;
        2f64.powf(t) * self.g_c * self.rho * gamma(t + 1.5)
            / (SQRT_PI * (t + 1.0) * (self.zeta * mean_snr).powf(t + 1.0))
    }

    /// Leading term of the MGF `E[exp(−vγ)]`.
    pub fn mgf(&self, v: f64, mean_snr: f64) -> f64 {
        self.g_c * gamma(self.t + 1.0) / (mean_snr * v).powf(self.t + 1.0)
    }
}

/// Average BER by adaptive quadrature of `Q(sqrt(γ̄μ/2))` against the
/// channel's fading density. The obstruction mass contributes `(1−n)/2`
/// analytically; the continuous part is integrated in `s = (h/A0)^m`, which
/// maps the power law onto the uniform density on `[0, 1]`.
pub fn single_ber_quadrature(ch: &Channel, snr: f64) -> f64 {
    let n = ch.n();
    let peak = snr * ch.a0() * ch.a0();
    let floor = 0.5 * (1.0 - n);
    let Ok(m) = ch.m() else {
        return floor + n * q_function((peak / 2.0).sqrt());
    };
    if n == 0.0 {
        return 0.5;
    }
    let exponent = 2.0 / m;
    let cont = integrate(
        |s: f64| q_function((0.5 * peak * s.powf(exponent)).sqrt()),
        0.0,
        1.0,
        1e-10,
        1e-300,
    );
    floor + n * cont.value
}

/// Exact finite-SNR BER in incomplete-gamma form. Integration by parts over
/// the bounded support `[0, γ̄A0²]` gives a boundary term `n·Q(sqrt(γ̄A0²/2))`
/// and an incomplete gamma evaluated at `γ̄A0²/4`.
pub fn single_ber_exact(ch: &Channel, snr: f64) -> Result<f64> {
    let m = ch.m()?;
    let n = ch.n();
    let peak = snr * ch.a0() * ch.a0();
    let tail = (4.0 / peak).powf(m / 2.0) * lower_incomplete_gamma((m + 1.0) / 2.0, peak / 4.0)
        / (2.0 * SQRT_PI);
    Ok(0.5 * (1.0 - n) + n * q_function((peak / 2.0).sqrt()) + n * tail)
}

/// The finite-SNR incomplete-gamma expression in the form usually quoted for
/// this channel: no boundary term and the incomplete gamma at `γ̄A0²`.
/// Kept for comparison against [`single_ber_quadrature`]; it over-reports the
/// continuous part at moderate SNR.
pub fn single_ber_printed(ch: &Channel, snr: f64) -> Result<f64> {
    let m = ch.m()?;
    let n = ch.n();
    let peak = snr * ch.a0() * ch.a0();
    Ok(0.5 * (1.0 - n)
        + n * (4.0 / peak).powf(m / 2.0) * lower_incomplete_gamma((m + 1.0) / 2.0, peak)
            / (2.0 * SQRT_PI))
}

/// High-SNR BER: `(1−n)/2 + n·(4/(γ̄A0²))^(m/2)·Γ((m+1)/2)/(2√π)`.
pub fn single_ber_asymptotic(ch: &Channel, snr: f64) -> Result<f64> {
    let m = ch.m()?;
    let n = ch.n();
    let peak = snr * ch.a0() * ch.a0();
    Ok(0.5 * (1.0 - n) + n * (4.0 / peak).powf(m / 2.0) * gamma((m + 1.0) / 2.0) / (2.0 * SQRT_PI))
}

/// Outage probability `P(γ < γ_th)`; exact for this fading model.
pub fn single_outage(ch: &Channel, snr: f64, gamma_th: f64) -> f64 {
    let n = ch.n();
    let peak = snr * ch.a0() * ch.a0();
    if gamma_th >= peak {
        return 1.0;
    }
    match ch.m() {
        Ok(m) => (1.0 - n + n * (gamma_th / peak).powf(m / 2.0)).min(1.0),
        Err(_) => 1.0 - n,
    }
}

/// Exact MGF `E[exp(−vγ)]` over the bounded support.
pub fn single_mgf_exact(ch: &Channel, snr: f64, v: f64) -> Result<f64> {
    let n = ch.n();
    let x = v * snr * ch.a0() * ch.a0();
    match ch.m() {
        Ok(m) => Ok(1.0 - n + n * scaled_lower_gamma(m / 2.0, x)),
        Err(_) => Ok(1.0 - n + n * (-x).exp()),
    }
}

/// High-SNR MGF `1 − n + (m·n/2)·(v·γ̄A0²)^(−m/2)·Γ(m/2)`.
pub fn single_mgf_asymptotic(ch: &Channel, snr: f64, v: f64) -> Result<f64> {
    let m = ch.m()?;
    let n = ch.n();
    let x = v * snr * ch.a0() * ch.a0();
    Ok(1.0 - n + m * n / 2.0 * x.powf(-m / 2.0) * gamma(m / 2.0))
}

/// Branches, power split, transmit power, and receiver noise.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    channels: Vec<Channel>,
    alphas: Vec<f64>,
    p_t: f64,
    sigma_n_sq: f64,
}

impl System {
    pub fn new(
        channels: Vec<Channel>,
        alphas: Vec<f64>,
        p_t: f64,
        sigma_n_sq: f64,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidParameter {
                name: "channels",
                reason: "at least one channel is required".into(),
            });
        }
        if alphas.len() != channels.len() {
            return Err(Error::InvalidParameter {
                name: "alphas",
                reason: format!(
                    "{} coefficients for {} channels",
                    alphas.len(),
                    channels.len()
                ),
            });
        }
        if alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "alphas",
                reason: "coefficients must be finite and >= 0".into(),
            });
        }
        let total: f64 = alphas.iter().sum();
        if (total - 1.0).abs() >= 1e-12 {
            return Err(Error::InvalidParameter {
                name: "alphas",
                reason: format!("coefficients must sum to 1, got {total}"),
            });
        }
        check_positive("p_t", p_t)?;
        check_positive("sigma_n_sq", sigma_n_sq)?;
        Ok(Self {
            channels,
            alphas,
            p_t,
            sigma_n_sq,
        })
    }

    /// Equal power split across all channels.
    pub fn uniform(channels: Vec<Channel>, p_t: f64, sigma_n_sq: f64) -> Result<Self> {
        let k = channels.len().max(1);
        // Exactly 1/k each so the sum check passes for any k.
        let alphas = vec![1.0 / k as f64; channels.len()];
        let sum: f64 = alphas.iter().sum();
        let alphas = alphas.into_iter().map(|a| a / sum).collect();
        Self::new(channels, alphas, p_t, sigma_n_sq)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn p_t(&self) -> f64 {
        self.p_t
    }

    pub fn sigma_n_sq(&self) -> f64 {
        self.sigma_n_sq
    }

    pub fn mean_snr(&self) -> f64 {
        mean_snr(self.p_t, self.sigma_n_sq)
    }

    pub fn with_p_t(&self, p_t: f64) -> Result<Self> {
        Self::new(
            self.channels.clone(),
            self.alphas.clone(),
            p_t,
            self.sigma_n_sq,
        )
    }

    pub fn with_alphas(&self, alphas: Vec<f64>) -> Result<Self> {
        Self::new(self.channels.clone(), alphas, self.p_t, self.sigma_n_sq)
    }

    /// Channels that receive power, with their coefficients.
    pub fn active(&self) -> impl Iterator<Item = (&Channel, f64)> {
        self.channels
            .iter()
            .zip(self.alphas.iter().copied())
            .filter(|(_, a)| *a > 0.0)
    }
}

/// Per-branch constants of the high-SNR MGF `B_k + K_k·v^(−m_k/2)`.
#[derive(Debug, Clone, Copy)]
struct BranchTerms {
    blocked: f64,
    k: f64,
    m: f64,
}

fn branch_terms(sys: &System) -> Result<Vec<BranchTerms>> {
    let snr = sys.mean_snr();
    sys.active()
        .map(|(ch, alpha)| {
            let m = ch.m()?;
            let n = ch.n();
            let c = (snr * ch.a0() * ch.a0() * alpha * alpha).powf(-m / 2.0);
            Ok(BranchTerms {
                blocked: 1.0 - n,
                k: m * n / 2.0 * c * gamma(m / 2.0),
                m,
            })
        })
        .collect()
}

/// One product term of the expanded MGF: the listed branches survive, the
/// rest are blocked.
struct ExpansionTerm {
    label: String,
    weight: f64,
    /// Power of `1/v`; zero for the all-blocked term.
    order: f64,
}

/// Survivor counts retained by the truncated expansion: none, one, all but
/// one, all. Counts are deduplicated, so for one or two branches the result
/// is the full product expansion.
fn retained_counts(branches: usize) -> BTreeSet<usize> {
    [0, 1, branches.saturating_sub(1), branches]
        .into_iter()
        .collect()
}

fn expansion_terms(terms: &[BranchTerms]) -> Result<Vec<ExpansionTerm>> {
    let total = terms.len();
    let mut out = Vec::new();
    let mut bad = Vec::new();
    for survivors in retained_counts(total) {
        let subsets: Vec<Vec<usize>> = match survivors {
            0 => vec![vec![]],
            s if s == total => vec![(0..total).collect()],
            1 => (0..total).map(|k| vec![k]).collect(),
            _ => (0..total)
                .map(|skip| (0..total).filter(|&i| i != skip).collect())
                .collect(),
        };
        for set in subsets {
            let mut weight = 1.0;
            let mut order = 0.0;
            for (i, t) in terms.iter().enumerate() {
                if set.contains(&i) {
                    weight *= t.k;
                    order += t.m / 2.0;
                } else {
                    weight *= t.blocked;
                }
            }
            let label = format!("survivors{set:?}");
            if !set.is_empty() && !(order > 0.0) {
                bad.push(label);
                continue;
            }
            out.push(ExpansionTerm {
                label,
                weight,
                order,
            });
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::InvalidRegime { terms: bad })
    }
}

/// `∫₀^∞ Q(sqrt(γ/2))·γ^(a−1)/Γ(a) dγ`.
fn ber_moment(a: f64) -> f64 {
    4f64.powf(a) * gamma(a + 0.5) / (2.0 * a * SQRT_PI * gamma(a))
}

/// `∫₀^γ_th γ^(a−1)/Γ(a) dγ`.
fn outage_moment(a: f64, gamma_th: f64) -> f64 {
    gamma_th.powf(a) / gamma(a + 1.0)
}

/// Truncated high-SNR MGF of the combined SNR `Σ α_k²·γ_k`.
pub fn multi_mgf_approx(sys: &System, v: f64) -> Result<f64> {
    check_positive("v", v)?;
    let terms = branch_terms(sys)?;
    Ok(expansion_terms(&terms)?
        .iter()
        .map(|t| t.weight * v.powf(-t.order))
        .sum())
}

/// Untruncated product of the per-branch high-SNR MGFs.
pub fn multi_mgf_product(sys: &System, v: f64) -> Result<f64> {
    check_positive("v", v)?;
    Ok(branch_terms(sys)?
        .iter()
        .map(|t| t.blocked + t.k * v.powf(-t.m / 2.0))
        .product())
}

pub fn multi_ber_asymptotic(sys: &System) -> Result<f64> {
    let terms = branch_terms(sys)?;
    Ok(expansion_terms(&terms)?
        .iter()
        .map(|t| {
            if t.order == 0.0 {
                0.5 * t.weight
            } else {
                t.weight * ber_moment(t.order)
            }
        })
        .sum())
}

pub fn multi_outage_asymptotic(sys: &System, gamma_th: f64) -> Result<f64> {
    check_positive("gamma_th", gamma_th)?;
    let terms = branch_terms(sys)?;
    Ok(expansion_terms(&terms)?
        .iter()
        .map(|t| {
            if t.order == 0.0 {
                t.weight
            } else {
                t.weight * outage_moment(t.order, gamma_th)
            }
        })
        .sum())
}

/// Labels of the expansion terms that would be evaluated for `sys`.
pub fn expansion_labels(sys: &System) -> Result<Vec<String>> {
    let terms = branch_terms(sys)?;
    Ok(expansion_terms(&terms)?
        .into_iter()
        .map(|t| t.label)
        .collect())
}

/// BER floor `Π(1−n_k)/2` left by obstruction alone.
pub fn ber_floor(sys: &System) -> f64 {
    0.5 * outage_floor(sys)
}

pub fn outage_floor(sys: &System) -> f64 {
    sys.active().map(|(c, _)| 1.0 - c.n()).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// High-SNR BER of `count` identical branches sharing `p_t` equally.
///
/// Evaluated class by class: `C(N, s)` equal terms for `s` survivors, for
/// `s ∈ {0, 1, N−1, N}`.
pub fn identical_ber_n(ch: &Channel, count: usize, p_t: f64, sigma_n_sq: f64) -> Result<f64> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "need at least one channel".into(),
        });
    }
    let m = ch.m()?;
    let n = ch.n();
    let blocked = 1.0 - n;
    let nf = count as f64;
    let c = (mean_snr(p_t, sigma_n_sq) * ch.a0() * ch.a0() / (nf * nf)).powf(-m / 2.0);
    let k = m * n / 2.0 * c * gamma(m / 2.0);
    Ok(retained_counts(count)
        .into_iter()
        .map(|s| {
            let mult = binomial(count, s) * blocked.powi((count - s) as i32) * k.powi(s as i32);
            if s == 0 {
                0.5 * mult
            } else {
                mult * ber_moment(s as f64 * m / 2.0)
            }
        })
        .sum())
}

/// BER ratio `P_e(N)/P_e(N+1)` from adding one more identical branch.
pub fn gain(ch: &Channel, count: usize, p_t: f64, sigma_n_sq: f64) -> Result<f64> {
    Ok(identical_ber_n(ch, count, p_t, sigma_n_sq)?
        / identical_ber_n(ch, count + 1, p_t, sigma_n_sq)?)
}

/// Limit of [`gain`] as `P_t → ∞`: `1/(1−n)`.
pub fn gain_infinite_snr(ch: &Channel) -> f64 {
    1.0 / (1.0 - ch.n())
}

/// Limit of [`gain`] as `1 − n → 0`, where only the all-survive terms remain.
pub fn gain_low_obstruction(ch: &Channel, count: usize, p_t: f64, sigma_n_sq: f64) -> Result<f64> {
    let m = ch.m()?;
    let n = ch.n();
    let nf = count as f64;
    let c = (mean_snr(p_t, sigma_n_sq) * ch.a0() * ch.a0()).powf(-m / 2.0);
    let num = gamma((nf + 1.0) * m / 2.0) * gamma((nf * m + 1.0) / 2.0) * nf.powf(nf * m - 1.0);
    let den = gamma(nf * m / 2.0)
        * gamma(((nf + 1.0) * m + 1.0) / 2.0)
        * (nf + 1.0).powf((nf + 1.0) * m - 1.0)
        * m
        * n
        * 2f64.powf(m - 1.0)
        * c
        * gamma(m / 2.0);
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    ClosedForm,
    Asymptotic,
    Quadrature,
    MonteCarlo,
}

/// One point of a performance curve. BER is clamped to `[0, 0.5]` and
/// outage to `[0, 1]`; asymptotic expressions can leave those ranges at low
/// SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfPoint {
    pub sweep_value: f64,
    pub ber: f64,
    pub outage: f64,
    pub estimator: Estimator,
}

impl PerfPoint {
    pub fn new(sweep_value: f64, ber: f64, outage: f64, estimator: Estimator) -> Self {
        Self {
            sweep_value,
            ber: ber.clamp(0.0, 0.5),
            outage: outage.clamp(0.0, 1.0),
            estimator,
        }
    }
}

/// Asymptotic BER and outage of `sys` over a transmit-power sweep in dBm.
pub fn asymptotic_curve(sys: &System, p_t_dbm: &[f64], gamma_th: f64) -> Result<Vec<PerfPoint>> {
    p_t_dbm
        .iter()
        .map(|&dbm| {
            let s = sys.with_p_t(crate::units::dbm_to_watts(dbm))?;
            Ok(PerfPoint::new(
                dbm,
                multi_ber_asymptotic(&s)?,
                multi_outage_asymptotic(&s, gamma_th)?,
                Estimator::Asymptotic,
            ))
        })
        .collect()
}
