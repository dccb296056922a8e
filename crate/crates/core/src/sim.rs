//! Monte Carlo simulation of the zero-wait retrieval loop.
//!
//! Each epoch draws one scheme from the mixture, then sums one delay per
//! downloaded bit. The age sawtooth over epoch `j` starts at `T_{j-1}` and
//! rises to `T_{j-1} + T_j`, so its peak is `T_{j-1} + T_j` and its area is
//! `T_{j-1} T_j + T_j² / 2`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MixturePolicy, ServerStats, SystemConfig};
use crate::scalar::Scalar;

/// Identifier of the pseudo-random generator behind every run.
pub const RNG_ALGORITHM: &str = "chacha8";

const BATCHES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Deterministic,
    Exponential,
    Gamma,
    ShiftedExponential,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Deterministic => "deterministic",
            Family::Exponential => "exponential",
            Family::Gamma => "gamma",
            Family::ShiftedExponential => "shifted-exponential",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Family::Deterministic),
            "exponential" => Ok(Family::Exponential),
            "gamma" => Ok(Family::Gamma),
            "shifted-exponential" | "shifted_exponential" => Ok(Family::ShiftedExponential),
            other => Err(Error::InvalidConfig(format!(
                "unknown delay family `{other}`"
            ))),
        }
    }
}

/// Per-bit delay law matched to a target mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayDistribution {
    Deterministic { value: f64 },
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
    ShiftedExponential { shift: f64, mean_excess: f64 },
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl DelayDistribution {
    /// Moment-matched member of `family`.
    pub fn fit(family: Family, mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || mean <= 0.0 || variance < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "cannot fit a delay law to mean {mean}, variance {variance}"
            )));
        }
        match family {
            Family::Deterministic if variance == 0.0 => Ok(Self::Deterministic { value: mean }),
            Family::Deterministic => Err(Error::InvalidConfig(format!(
                "deterministic delays need zero variance, got {variance}"
            ))),
            Family::Exponential if close(variance, mean * mean) => Ok(Self::Exponential { mean }),
            Family::Exponential => Err(Error::InvalidConfig(format!(
                "exponential delays need variance = mean² = {}, got {variance}",
                mean * mean
            ))),
            Family::Gamma if variance > 0.0 => Ok(Self::Gamma {
                shape: mean * mean / variance,
                scale: variance / mean,
            }),
            Family::Gamma => Err(Error::InvalidConfig(
                "gamma delays need positive variance".into(),
            )),
            Family::ShiftedExponential => {
                let sd = variance.sqrt();
                if sd > mean {
                    return Err(Error::InvalidConfig(format!(
                        "shifted-exponential delays need variance <= mean², got {variance}"
                    )));
                }
                Ok(Self::ShiftedExponential {
                    shift: mean - sd,
                    mean_excess: sd,
                })
            }
        }
    }

    /// Gamma when the variance is positive, deterministic otherwise.
    pub fn fit_default(mean: f64, variance: f64) -> Result<Self> {
        if variance == 0.0 {
            Self::fit(Family::Deterministic, mean, variance)
        } else {
            Self::fit(Family::Gamma, mean, variance)
        }
    }

    pub fn from_stats<T: Scalar>(stats: &ServerStats<T>, family: Option<Family>) -> Result<Self> {
        let (m, v) = (stats.mu().to_f64(), stats.sigma2().to_f64());
        match family {
            Some(f) => Self::fit(f, m, v),
            None => Self::fit_default(m, v),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Deterministic { .. } => Family::Deterministic,
            Self::Exponential { .. } => Family::Exponential,
            Self::Gamma { .. } => Family::Gamma,
            Self::ShiftedExponential { .. } => Family::ShiftedExponential,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { mean } => mean,
            Self::Gamma { shape, scale } => shape * scale,
            Self::ShiftedExponential { shift, mean_excess } => shift + mean_excess,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Deterministic { .. } => 0.0,
            Self::Exponential { mean } => mean * mean,
            Self::Gamma { shape, scale } => shape * scale * scale,
            Self::ShiftedExponential { mean_excess, .. } => mean_excess * mean_excess,
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            Self::Deterministic { value } => Sampler::Constant(value),
            Self::Exponential { mean } => {
                Sampler::Exp(0.0, Exp::new(1.0 / mean).expect("positive rate"))
            }
            Self::Gamma { shape, scale } => {
                Sampler::Gamma(Gamma::new(shape, scale).expect("positive parameters"))
            }
            Self::ShiftedExponential {
                shift,
                mean_excess: 0.0,
            } => Sampler::Constant(shift),
            Self::ShiftedExponential { shift, mean_excess } => {
                Sampler::Exp(shift, Exp::new(1.0 / mean_excess).expect("positive rate"))
            }
        }
    }
}

enum Sampler {
    Constant(f64),
    Exp(f64, Exp<f64>),
    Gamma(Gamma<f64>),
}

impl Sampler {
    fn sum<R: Rng + ?Sized>(&self, bits: u64, rng: &mut R) -> f64 {
        match self {
            Sampler::Constant(v) => (0..bits).fold(0.0, |acc, _| acc + v),
            Sampler::Exp(shift, e) => (0..bits).fold(0.0, |acc, _| acc + shift + e.sample(rng)),
            Sampler::Gamma(g) => (0..bits).fold(0.0, |acc, _| acc + g.sample(rng)),
        }
    }
}

/// A mixture with integral bit counts, ready to sample.
pub struct EpochSampler {
    counts: Vec<Vec<u64>>,
    cumulative: Vec<f64>,
    samplers: Vec<Sampler>,
}

impl EpochSampler {
    pub fn new<T: Scalar>(policy: &MixturePolicy<T>, dists: &[DelayDistribution]) -> Result<Self> {
        if policy.num_servers() != dists.len() {
            return Err(Error::DimensionMismatch {
                expected: policy.num_servers(),
                got: dists.len(),
            });
        }
        let mut counts = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for c in policy.components() {
            let row = c
                .allocation
                .entries()
                .iter()
                .map(|v| {
                    let x = v.to_f64();
                    if x.fract() != 0.0 || x < 0.0 || !x.is_finite() {
                        Err(Error::FractionalAllocation(v.to_string()))
                    } else {
                        Ok(x as u64)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
            acc += c.probability.to_f64();
            cumulative.push(acc);
        }
        // guard against rounding in the last cumulative weight
        if let Some(last) = cumulative.last_mut() {
            *last = f64::INFINITY;
        }
        Ok(Self {
            counts,
            cumulative,
            samplers: dists.iter().map(|d| d.sampler()).collect(),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = if self.counts.len() == 1 {
            0
        } else {
            let u: f64 = rng.random();
            self.cumulative
                .iter()
                .position(|&c| u < c)
                .expect("last weight is infinite")
        };
        self.counts[k]
            .iter()
            .zip(&self.samplers)
            .fold(0.0, |acc, (&bits, s)| acc + s.sum(bits, rng))
    }
}

/// Duration of one epoch under `policy`.
pub fn sample_epoch<T: Scalar, R: Rng + ?Sized>(
    policy: &MixturePolicy<T>,
    dists: &[DelayDistribution],
    rng: &mut R,
) -> Result<f64> {
    Ok(EpochSampler::new(policy, dists)?.sample(rng))
}

/// Empirical ages from one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub num_epochs: u64,
    pub empirical_peak: f64,
    pub empirical_avg: f64,
    pub peak_se: f64,
    pub avg_se: f64,
    pub mean_epoch: f64,
    pub seed: u64,
    pub rng: &'static str,
}

/// Ratio estimate `Σa / Σb` with its batch-means standard error (delta method).
fn ratio_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let r = sa / sb;
    let k = a.len() as f64;
    if a.len() < 2 {
        return (r, f64::NAN);
    }
    let mean_b = sb / k;
    let resid: f64 = a.iter().zip(b).map(|(x, y)| (x - r * y).powi(2)).sum();
    (r, (resid / (k * (k - 1.0))).sqrt() / mean_b)
}

/// Simulates `num_epochs` measured epochs after one warm-up epoch started from `T_0 = 0`.
pub fn run<T: Scalar>(
    policy: &MixturePolicy<T>,
    config: &SystemConfig<T>,
    dists: &[DelayDistribution],
    num_epochs: u64,
    seed: u64,
) -> Result<SimResult> {
    if num_epochs < 2 {
        return Err(Error::InvalidConfig("need at least 2 epochs".into()));
    }
    if dists.len() != config.num_servers() {
        return Err(Error::DimensionMismatch {
            expected: config.num_servers(),
            got: dists.len(),
        });
    }
    let sampler = EpochSampler::new(policy, dists)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let batches = (num_epochs as usize).min(BATCHES);
    let mut peak_sum = vec![0.0; batches];
    let mut area_sum = vec![0.0; batches];
    let mut time_sum = vec![0.0; batches];
    let mut count = vec![0.0; batches];

    let mut prev = sampler.sample(&mut rng);
    for j in 0..num_epochs {
        let b = (j as u128 * batches as u128 / num_epochs as u128) as usize;
        let t = sampler.sample(&mut rng);
        peak_sum[b] += prev + t;
        area_sum[b] += prev * t + t * t / 2.0;
        time_sum[b] += t;
        count[b] += 1.0;
        prev = t;
    }
    let (empirical_peak, peak_se) = ratio_with_se(&peak_sum, &count);
    let (empirical_avg, avg_se) = ratio_with_se(&area_sum, &time_sum);
    Ok(SimResult {
        num_epochs,
        empirical_peak,
        empirical_avg,
        peak_se,
        avg_se,
        mean_epoch: time_sum.iter().sum::<f64>() / num_epochs as f64,
        seed,
        rng: RNG_ALGORITHM,
    })
}

/// Independent runs with seeds `base_seed, base_seed + 1, …`, evaluated in parallel.
pub fn replications<T: Scalar>(
    policy: &MixturePolicy<T>,
    config: &SystemConfig<T>,
    dists: &[DelayDistribution],
    num_epochs: u64,
    base_seed: u64,
    count: usize,
) -> Result<Vec<SimResult>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| run(policy, config, dists, num_epochs, base_seed.wrapping_add(i)))
        .collect()
}
