//! High-SNR power allocation across branches.
//!
//! Keeping only the floor and single-survivor terms, the BER of an MRC
//! system reads `½·Π(1−n_k) + Σ b_i·α_i^(−m_i)`. Minimising that over the
//! simplex gives the stationarity system `m_i·b_i·α_i^(−m_i−1) = λ`.

use crate::analytic::{multi_ber_asymptotic, System};
use crate::error::{Error, Result};
use crate::special::gamma;

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocProblem {
    b: Vec<f64>,
    m: Vec<f64>,
    floor: f64,
}

impl AllocProblem {
    pub fn new(b: Vec<f64>, m: Vec<f64>, floor: f64) -> Result<Self> {
        if b.is_empty() || b.len() != m.len() {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("{} coefficients for {} exponents", b.len(), m.len()),
            });
        }
        if b.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: "coefficients must be finite and positive".into(),
            });
        }
        if m.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Degenerate(
                "fading exponents must be positive".into(),
            ));
        }
        Ok(Self { b, m, floor })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Obstruction floor `½·Π(1−n_k)`.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Same problem with every `b_i` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.b.iter().map(|b| b * factor).collect(),
            self.m.clone(),
            self.floor * factor,
        )
    }

    /// `½·Π(1−n_k) + Σ b_i·α_i^(−m_i)`; infinite when any `α_i ≤ 0`.
    pub fn objective(&self, alphas: &[f64]) -> f64 {
        self.floor
            + self
                .b
                .iter()
                .zip(&self.m)
                .zip(alphas)
                .map(|((b, m), a)| {
                    if *a > 0.0 {
                        b * a.powf(-m)
                    } else {
                        f64::INFINITY
                    }
                })
                .sum::<f64>()
    }

    /// Per-branch stationarity values `m_i·b_i·α_i^(−m_i−1)`.
    pub fn multipliers(&self, alphas: &[f64]) -> Vec<f64> {
        self.b
            .iter()
            .zip(&self.m)
            .zip(alphas)
            .map(|((b, m), a)| m * b * a.powf(-m - 1.0))
            .collect()
    }
}

/// Coefficients of the truncated BER for the channels of `sys`. Channels
/// with zero power are kept; their `α` is a free variable here.
pub fn build_problem(sys: &System) -> Result<AllocProblem> {
    let snr = sys.mean_snr();
    let channels = sys.channels();
    let blocked: Vec<f64> = channels.iter().map(|c| 1.0 - c.n()).collect();
    let mut b = Vec::with_capacity(channels.len());
    let mut m = Vec::with_capacity(channels.len());
    for (i, ch) in channels.iter().enumerate() {
        let mi = ch.m()?;
        let others: f64 = blocked
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v)
            .product();
        let c = (snr * ch.a0() * ch.a0()).powf(-mi / 2.0);
        b.push(ch.n() * 2f64.powf(mi - 1.0) * c * gamma((mi + 1.0) / 2.0) * others / SQRT_PI);
        m.push(mi);
    }
    AllocProblem::new(b, m, 0.5 * blocked.iter().product::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub alphas: Vec<f64>,
    pub objective: f64,
}

fn normalized(p: &AllocProblem, raw: Vec<f64>) -> Allocation {
    let total: f64 = raw.iter().sum();
    let alphas: Vec<f64> = raw.into_iter().map(|a| a / total).collect();
    let objective = p.objective(&alphas);
    Allocation { alphas, objective }
}

/// Exact minimiser of the truncated BER: solves `Σ (m_i·b_i/λ)^(1/(m_i+1)) = 1`
/// for `ln λ` by safeguarded Newton iteration. With equal exponents this is
/// `α_i ∝ (b_i·m_i)^(1/(m+1))`.
pub fn optimal_alloc(p: &AllocProblem) -> Allocation {
    if p.b.windows(2).all(|w| w[0] == w[1]) && p.m.windows(2).all(|w| w[0] == w[1]) {
        return uniform_alloc(p);
    }
    let logs: Vec<f64> = p.b.iter().zip(&p.m).map(|(b, m)| (m * b).ln()).collect();
    let alphas_at = |log_lambda: f64| -> Vec<f64> {
        logs.iter()
            .zip(&p.m)
            .map(|(lg, m)| ((lg - log_lambda) / (m + 1.0)).exp())
            .collect()
    };
    // f is decreasing and convex in ln λ
    let f = |x: f64| alphas_at(x).iter().sum::<f64>() - 1.0;
    let df = |x: f64| -> f64 {
        alphas_at(x)
            .iter()
            .zip(&p.m)
            .map(|(a, m)| -a / (m + 1.0))
            .sum()
    };
    let (mut lo, mut hi) = (
        logs.iter().copied().fold(f64::INFINITY, f64::min) - 1.0,
        logs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0,
    );
    while f(lo) < 0.0 {
        lo -= (hi - lo).max(1.0);
    }
    while f(hi) > 0.0 {
        hi += (hi - lo).max(1.0);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / df(x);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    normalized(p, alphas_at(x))
}

/// `α_i ∝ (b_i·m_i)^(1/(m_i+1))`. Stationary only when all exponents are
/// equal; kept to quantify the gap otherwise.
pub fn proportional_alloc(p: &AllocProblem) -> Allocation {
    let raw =
        p.b.iter()
            .zip(&p.m)
            .map(|(b, m)| (b * m).powf(1.0 / (m + 1.0)))
            .collect();
    normalized(p, raw)
}

pub fn uniform_alloc(p: &AllocProblem) -> Allocation {
    normalized(p, vec![1.0; p.len()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocCheck {
    pub kkt_residual: f64,
    /// `objective(candidate) − objective(numeric minimiser)`.
    pub grid_optimum_gap: f64,
    pub grid_alphas: Vec<f64>,
    /// Untruncated high-SNR BER at the candidate, when a system is supplied.
    pub full_ber: Option<f64>,
}

/// Relative spread of the stationarity values around their mean.
pub fn kkt_residual(p: &AllocProblem, alphas: &[f64]) -> f64 {
    let v = p.multipliers(alphas);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter()
        .map(|x| (x - mean).abs() / mean)
        .fold(0.0, f64::max)
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Numeric minimiser of the truncated BER over the simplex. A lattice
/// search at spacing `1/resolution` (two branches) or a coarse lattice
/// (three or more) picks a start, then pairwise mass exchange with
/// golden-section line searches refines it.
pub fn numeric_minimizer(p: &AllocProblem, resolution: usize) -> Vec<f64> {
    let k = p.len();
    if k == 1 {
        return vec![1.0];
    }
    let mut best = vec![1.0 / k as f64; k];
    let mut best_val = p.objective(&best);
    let mut consider = |cand: Vec<f64>| {
        let v = p.objective(&cand);
        if v < best_val {
            best_val = v;
            best = cand;
        }
    };
    match k {
        2 => {
            for i in 1..resolution {
                let a = i as f64 / resolution as f64;
                consider(vec![a, 1.0 - a]);
            }
        }
        3 => {
            let steps = 200;
            for i in 1..steps {
                for j in 1..steps - i {
                    let (a, b) = (i as f64 / steps as f64, j as f64 / steps as f64);
                    consider(vec![a, b, 1.0 - a - b]);
                }
            }
        }
        _ => {}
    }
    let mut alphas = best;
    for _ in 0..500 {
        let before = p.objective(&alphas);
        for i in 0..k {
            for j in i + 1..k {
                let pool = alphas[i] + alphas[j];
                let trial = |t: f64| {
                    let mut a = alphas.clone();
                    a[i] = t;
                    a[j] = pool - t;
                    p.objective(&a)
                };
                let t = golden_section(trial, 0.0, pool, 1e-14 * pool);
                alphas[i] = t;
                alphas[j] = pool - t;
            }
        }
        let after = p.objective(&alphas);
        if before - after <= 1e-15 * after {
            break;
        }
    }
    alphas
}

pub fn verify_alloc(p: &AllocProblem, a: &Allocation, sys: Option<&System>) -> Result<AllocCheck> {
    let grid = numeric_minimizer(p, 100_000);
    let full_ber = match sys {
        Some(s) => Some(multi_ber_asymptotic(&s.with_alphas(a.alphas.clone())?)?),
        None => None,
    };
    Ok(AllocCheck {
        kkt_residual: kkt_residual(p, &a.alphas),
        grid_optimum_gap: p.objective(&a.alphas) - p.objective(&grid),
        grid_alphas: grid,
        full_ber,
    })
}
