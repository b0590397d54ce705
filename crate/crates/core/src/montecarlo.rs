//! Monte Carlo ground truth for BER, outage, and fading distributions.
//!
//! Trials are split into fixed-size chunks. Chunk `i` draws from
//! `substream(seed, i)` and the per-chunk partial results are folded in
//! chunk order, so estimates are bit-identical for any worker count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::System;
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng};
use crate::special::q_function;

pub const DEFAULT_CHUNK_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BerEstimator {
    /// Average of the conditional error rate `Q(sqrt(γ/2))` over channel draws.
    #[default]
    SemiAnalytic,
    /// Explicit OOK symbols, Gaussian noise, and threshold detection.
    BitLevel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub chunk_size: u64,
    pub estimator: BerEstimator,
    /// Worker threads; `None` uses the global pool. Never affects results.
    pub workers: Option<usize>,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
            estimator: BerEstimator::SemiAnalytic,
            workers: None,
        }
    }

    pub fn with_chunk_size(mut self, chunk_size: u64) -> Self {
        self.chunk_size = chunk_size;
        self
    }

    pub fn with_estimator(mut self, estimator: BerEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "must be at least 1".into(),
            });
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidParameter {
                name: "chunk_size",
                reason: "must be at least 1".into(),
            });
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidParameter {
                name: "workers",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    fn chunks(&self) -> impl IndexedParallelIterator<Item = (u64, u64)> {
        let count = self.trials.div_ceil(self.chunk_size) as usize;
        let (trials, size) = (self.trials, self.chunk_size);
        (0..count).into_par_iter().map(move |i| {
            let i = i as u64;
            (i, size.min(trials - i * size))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Batch-means standard error; `None` with fewer than two chunks.
    pub std_error: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean − reference| ≤ k·std_error`; a missing or zero error demands
    /// exact agreement up to `1e-15` relative.
    pub fn within_sigmas(&self, reference: f64, k: f64) -> bool {
        let gap = (self.mean - reference).abs();
        match self.std_error {
            Some(se) if se > 0.0 => gap <= k * se,
            _ => gap <= 1e-15 * reference.abs().max(1e-300),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPerf {
    pub ber: McEstimate,
    pub outage: McEstimate,
}

fn run_chunks<T, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut SimRng, u64) -> T + Sync + Send,
{
    cfg.validate()?;
    let work = || {
        cfg.chunks()
            .map(|(index, len)| {
                let mut rng = substream(cfg.seed, index);
                f(&mut rng, len)
            })
            .collect::<Vec<T>>()
    };
    match cfg.workers {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter {
                    name: "workers",
                    reason: e.to_string(),
                })?;
            Ok(pool.install(work))
        }
    }
}

/// Folds per-chunk `(sum, count)` pairs in chunk order.
fn batch_means(parts: &[(f64, u64)], cfg: &McConfig) -> McEstimate {
    let total: u64 = parts.iter().map(|p| p.1).sum();
    let sum: f64 = parts.iter().map(|p| p.0).sum();
    let mean = sum / total as f64;
    let std_error = (parts.len() >= 2).then(|| {
        let c = parts.len() as f64;
        let spread: f64 = parts
            .iter()
            .map(|&(s, n)| {
                let w = n as f64 / total as f64;
                let dev = s / n as f64 - mean;
                w * w * dev * dev
            })
            .sum();
        (spread * c / (c - 1.0)).sqrt()
    });
    McEstimate {
        mean,
        std_error,
        trials: total,
        seed: cfg.seed,
    }
}

/// Per-branch received fading for one trial.
fn draw_fading(channels: &[(Channel, f64)], rng: &mut SimRng, out: &mut [f64]) {
    for ((ch, _), h) in channels.iter().zip(out.iter_mut()) {
        *h = ch.sample(rng);
    }
}

/// Combined SNR `Σ α_k²·γ̄·h_k²`.
fn combined_snr(channels: &[(Channel, f64)], snr: f64, h: &[f64]) -> f64 {
    channels
        .iter()
        .zip(h)
        .map(|((_, a), h)| a * a * snr * h * h)
        .sum()
}

/// One OOK symbol through all branches with combining weights `α_k·h_k`.
/// Symbol 1 puts `2α_k·P_t` on branch `k`; the threshold sits halfway
/// between the noiseless combiner outputs.
fn bit_error(
    channels: &[(Channel, f64)],
    p_t: f64,
    sigma: f64,
    h: &[f64],
    rng: &mut SimRng,
) -> bool {
    let one: bool = rng.random();
    let mut z = 0.0;
    let mut energy = 0.0;
    for ((_, a), &hk) in channels.iter().zip(h) {
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
        let level = if one { 2.0 * a * p_t * hk } else { 0.0 };
        z += a * hk * (level + noise);
        energy += a * a * hk * hk;
    }
    let decided_one = z > p_t * energy;
    decided_one != one
}

fn active_channels(sys: &System) -> Vec<(Channel, f64)> {
    sys.active().map(|(c, a)| (*c, a)).collect()
}

/// BER and outage of the MRC system `sys` at threshold `gamma_th`.
pub fn mc_perf(sys: &System, gamma_th: f64, cfg: &McConfig) -> Result<McPerf> {
    let channels = active_channels(sys);
    let snr = sys.mean_snr();
    let (p_t, sigma) = (sys.p_t(), sys.sigma_n_sq().sqrt());
    let estimator = cfg.estimator;
    let parts = run_chunks(cfg, |rng, len| {
        let mut h = vec![0.0; channels.len()];
        let mut ber = 0.0;
        let mut outages = 0u64;
        for _ in 0..len {
            draw_fading(&channels, rng, &mut h);
            let gamma = combined_snr(&channels, snr, &h);
            if gamma < gamma_th {
                outages += 1;
            }
            ber += match estimator {
                BerEstimator::SemiAnalytic => q_function((gamma / 2.0).sqrt()),
                BerEstimator::BitLevel => {
                    f64::from(u8::from(bit_error(&channels, p_t, sigma, &h, rng)))
                }
            };
        }
        ((ber, len), (outages as f64, len))
    })?;
    let ber: Vec<_> = parts.iter().map(|p| p.0).collect();
    let out: Vec<_> = parts.iter().map(|p| p.1).collect();
    Ok(McPerf {
        ber: batch_means(&ber, cfg),
        outage: batch_means(&out, cfg),
    })
}

/// Bit-level BER of a single branch carrying the full power.
pub fn mc_bitlevel_single(
    ch: &Channel,
    p_t: f64,
    sigma_n_sq: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let sys = System::new(vec![*ch], vec![1.0], p_t, sigma_n_sq)?;
    let cfg = cfg.with_estimator(BerEstimator::BitLevel);
    Ok(mc_perf(&sys, 0.0, &cfg)?.ber)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Receiver-plane displacement.
    R,
    ThetaS,
    H,
    /// Combined SNR of the whole system.
    Gamma,
}

/// Sorted samples of `quantity`. Branch quantities use the first active
/// channel and require a single-branch system. Draws are consumed exactly as
/// in [`mc_perf`], so `Gamma` samples reproduce its outage counts.
pub fn mc_empirical_cdf(quantity: Quantity, sys: &System, cfg: &McConfig) -> Result<Vec<f64>> {
    let channels = active_channels(sys);
    if quantity != Quantity::Gamma && channels.len() != 1 {
        return Err(Error::InvalidParameter {
            name: "system",
            reason: format!("{quantity:?} samples need exactly one active channel"),
        });
    }
    let snr = sys.mean_snr();
    let chunks = run_chunks(cfg, |rng, len| {
        let mut h = vec![0.0; channels.len()];
        (0..len)
            .map(|_| match quantity {
                Quantity::R => channels[0].0.sample_pointing(rng).r,
                Quantity::ThetaS => channels[0].0.sample_pointing(rng).theta_s,
                Quantity::H => channels[0].0.sample(rng),
                Quantity::Gamma => {
                    draw_fading(&channels, rng, &mut h);
                    combined_snr(&channels, snr, &h)
                }
            })
            .collect::<Vec<f64>>()
    })?;
    let mut samples: Vec<f64> = chunks.into_iter().flatten().collect();
    samples.sort_by(f64::total_cmp);
    Ok(samples)
}

/// Fraction of `sorted` strictly below `x`.
pub fn fraction_below(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&s| s < x) as f64 / sorted.len() as f64
}

/// Kolmogorov–Smirnov distance between sorted samples and a CDF that may
/// have atoms. `cdf` is `P(X ≤ x)`, `cdf_left` is `P(X < x)`.
pub fn ks_distance<F, G>(sorted: &[f64], cdf: F, cdf_left: G) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / n - cdf(x);
            let below = cdf_left(x) - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}
