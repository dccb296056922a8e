//! Value types and the closed-form age formulas.
//!
//! Under a zero-wait policy with i.i.d. per-bit delays the epoch length `T`
//! has `E[T] = μᵀd` and `E[T²] = σᵀd + (μᵀd)²`, where `μ` holds per-bit
//! mean delays and `σ` per-bit delay variances. Peak age is `2 E[T]` and
//! average age is `E[T] + E[T²] / (2 E[T])`.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;

use crate::capacity::pir_capacity;
use crate::error::{Error, Result};
use crate::scalar::{FloatScalar, Scalar};

/// Per-bit delay statistics of one server.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerStats<T> {
    mu: T,
    sigma2: T,
}

impl<T: Scalar> ServerStats<T> {
    pub fn new(mu: T, sigma2: T) -> Result<Self> {
        if mu <= T::zero() {
            return Err(Error::InvalidConfig(format!(
                "mean delay must be positive, got {mu}"
            )));
        }
        if sigma2 < T::zero() {
            return Err(Error::InvalidConfig(format!(
                "delay variance must be non-negative, got {sigma2}"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn mu(&self) -> &T {
        &self.mu
    }

    pub fn sigma2(&self) -> &T {
        &self.sigma2
    }
}

impl ServerStats<BigRational> {
    pub fn to_float<F: FloatScalar>(&self) -> ServerStats<F> {
        ServerStats {
            mu: F::from_rational(&self.mu),
            sigma2: F::from_rational(&self.sigma2),
        }
    }
}

/// Problem instance: `N` servers, `M` messages of `L` bits, and a minimum rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    num_messages: usize,
    message_size: u64,
    servers: Vec<ServerStats<T>>,
    r_min: T,
}

impl<T: Scalar> SystemConfig<T> {
    /// Validates `N >= 2`, `M ∈ {2, 3}`, `L > 0` and `1/M <= r_min <= C_PIR(N, M)`.
    pub fn new(
        num_messages: usize,
        message_size: u64,
        servers: Vec<ServerStats<T>>,
        r_min: T,
    ) -> Result<Self> {
        if servers.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 servers, got {}",
                servers.len()
            )));
        }
        if !(2..=3).contains(&num_messages) {
            return Err(Error::UnsupportedMessages(num_messages));
        }
        if message_size == 0 {
            return Err(Error::InvalidConfig(
                "message size L must be positive".into(),
            ));
        }
        let config = Self {
            num_messages,
            message_size,
            servers,
            r_min,
        };
        config.check_rate(&config.r_min)?;
        Ok(config)
    }

    fn check_rate(&self, r_min: &T) -> Result<()> {
        let lower = T::from_ratio(1, self.num_messages as i64);
        let cap = pir_capacity(self.num_servers(), self.num_messages);
        let upper = T::from_rational(&cap);
        let tol = T::tolerance();
        if *r_min < lower.clone() - tol.clone() || *r_min > upper.clone() + tol {
            return Err(Error::RateOutOfRange {
                r_min: r_min.to_string(),
                lower: format!("1/{}", self.num_messages),
                upper: cap.to_string(),
            });
        }
        Ok(())
    }

    /// Same system with a different minimum rate.
    pub fn with_r_min(&self, r_min: T) -> Result<Self> {
        self.check_rate(&r_min)?;
        Ok(Self {
            r_min,
            ..self.clone()
        })
    }

    pub fn num_servers(&self) -> usize {
        self.servers.len()
    }

    pub fn num_messages(&self) -> usize {
        self.num_messages
    }

    pub fn message_size(&self) -> u64 {
        self.message_size
    }

    /// `L` as a scalar.
    pub fn l(&self) -> T {
        T::from_ratio(self.message_size as i64, 1)
    }

    pub fn servers(&self) -> &[ServerStats<T>] {
        &self.servers
    }

    pub fn r_min(&self) -> &T {
        &self.r_min
    }

    /// Largest admissible expected download `L / r_min`.
    pub fn d_max(&self) -> T {
        self.l() / self.r_min.clone()
    }

    pub fn mus(&self) -> Vec<T> {
        self.servers.iter().map(|s| s.mu.clone()).collect()
    }

    pub fn sigma2s(&self) -> Vec<T> {
        self.servers.iter().map(|s| s.sigma2.clone()).collect()
    }

    /// Same system with servers reordered: entry `k` is old server `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            servers: order.iter().map(|&i| self.servers[i].clone()).collect(),
            ..self.clone()
        }
    }
}

impl SystemConfig<BigRational> {
    pub fn to_float<F: FloatScalar>(&self) -> SystemConfig<F> {
        SystemConfig {
            num_messages: self.num_messages,
            message_size: self.message_size,
            servers: self.servers.iter().map(|s| s.to_float()).collect(),
            r_min: F::from_rational(&self.r_min),
        }
    }
}

/// Per-server download sizes `d` and their total `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DownloadAllocation<T> {
    d: Vec<T>,
    total: T,
}

impl<T: Scalar> DownloadAllocation<T> {
    /// Rejects negative entries. Float entries within tolerance of zero are clamped to zero.
    pub fn new(d: Vec<T>) -> Result<Self> {
        let mut d = d;
        for v in d.iter_mut() {
            if *v < T::zero() {
                if v.near_zero() {
                    *v = T::zero();
                } else {
                    return Err(Error::InvalidConfig(format!(
                        "download sizes must be non-negative, got {v}"
                    )));
                }
            }
        }
        let total = d.iter().fold(T::zero(), |acc, v| acc + v.clone());
        Ok(Self { d, total })
    }

    pub fn entries(&self) -> &[T] {
        &self.d
    }

    pub fn total(&self) -> &T {
        &self.total
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn scaled(&self, factor: &T) -> Self {
        Self {
            d: self.d.iter().map(|v| v.clone() * factor.clone()).collect(),
            total: self.total.clone() * factor.clone(),
        }
    }

    /// Entries reordered: entry `k` is old entry `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            d: order.iter().map(|&i| self.d[i].clone()).collect(),
            total: self.total.clone(),
        }
    }

    /// Inverse of [`permuted`](Self::permuted).
    pub fn unpermuted(&self, order: &[usize]) -> Self {
        let mut d = vec![T::zero(); self.d.len()];
        for (k, &i) in order.iter().enumerate() {
            d[i] = self.d[k].clone();
        }
        Self {
            d,
            total: self.total.clone(),
        }
    }

    /// Entries sorted non-increasing.
    pub fn sorted_desc(&self) -> Vec<T> {
        let mut v = self.d.clone();
        v.sort_by(|a, b| b.partial_cmp(a).expect("comparable"));
        v
    }
}

impl<T: Scalar> fmt::Display for DownloadAllocation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.d.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent<T> {
    pub allocation: DownloadAllocation<T>,
    pub probability: T,
}

/// Stochastic time sharing: each epoch independently draws one component.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePolicy<T> {
    components: Vec<MixtureComponent<T>>,
}

impl<T: Scalar> MixturePolicy<T> {
    pub fn new(components: Vec<MixtureComponent<T>>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidMixture("no components".into()));
        };
        let n = first.allocation.len();
        let mut sum = T::zero();
        for c in &components {
            if c.allocation.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.allocation.len(),
                });
            }
            if c.probability < T::zero() - T::tolerance() {
                return Err(Error::InvalidMixture(format!(
                    "negative probability {}",
                    c.probability
                )));
            }
            sum = sum + c.probability.clone();
        }
        if !(sum.clone() - T::one()).near_zero() {
            return Err(Error::InvalidMixture(format!("probabilities sum to {sum}")));
        }
        Ok(Self { components })
    }

    pub fn degenerate(allocation: DownloadAllocation<T>) -> Self {
        Self {
            components: vec![MixtureComponent {
                allocation,
                probability: T::one(),
            }],
        }
    }

    pub fn components(&self) -> &[MixtureComponent<T>] {
        &self.components
    }

    pub fn num_servers(&self) -> usize {
        self.components[0].allocation.len()
    }

    /// Probability-weighted sum of the component allocations.
    pub fn expected_allocation(&self) -> DownloadAllocation<T> {
        let n = self.num_servers();
        let mut d = vec![T::zero(); n];
        for c in &self.components {
            for (acc, v) in d.iter_mut().zip(c.allocation.entries()) {
                *acc = acc.clone() + c.probability.clone() * v.clone();
            }
        }
        DownloadAllocation::new(d).expect("convex combination of non-negative vectors")
    }

    pub fn unpermuted(&self, order: &[usize]) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| MixtureComponent {
                    allocation: c.allocation.unpermuted(order),
                    probability: c.probability.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Peak,
    Average,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Peak => "peak",
            Metric::Average => "avg",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peak" | "pAoI" | "paoi" => Ok(Metric::Peak),
            "avg" | "average" | "aAoI" | "aaoi" => Ok(Metric::Average),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

/// Which solution path produced a [`Solution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// N = 2, M = 3 peak-age corner candidates.
    PeakClosedForm,
    /// Exact LP over the full constraint polytope.
    PeakLp,
    /// Stationary `t*(D)` feasible; least feasible `D`.
    Interior,
    /// Inner optimum clamped to the boundary of the fixed-`D` feasible interval.
    Boundary,
    /// Equal mean delays; one-dimensional convex search over `D`.
    EqualMean,
    /// All traffic on the single best server at rate 1/3.
    SingleServer,
    /// Identical statistics at every server; symmetric allocation.
    Symmetric,
    /// Nested numeric search for arbitrary `N`.
    General,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::PeakClosedForm => "peak-closed-form",
            Branch::PeakLp => "peak-lp",
            Branch::Interior => "interior",
            Branch::Boundary => "boundary",
            Branch::EqualMean => "equal-mean",
            Branch::SingleServer => "single-server",
            Branch::Symmetric => "symmetric",
            Branch::General => "general",
        })
    }
}

/// Optimal policy for one metric at one `r_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub metric: Metric,
    /// Expected allocation realized by `mixture`.
    pub allocation: DownloadAllocation<T>,
    pub mixture: MixturePolicy<T>,
    /// Age achieved by the mixture itself. For peak age this equals `idealized_objective`.
    pub objective: T,
    /// Age formula evaluated on the expected allocation.
    pub idealized_objective: T,
    /// `L / E[D]`.
    pub achieved_rate: T,
    pub branch: Branch,
}

fn check_len<T>(stats: &[ServerStats<T>], d: &DownloadAllocation<T>) -> Result<()> {
    if stats.len() != d.d.len() {
        return Err(Error::DimensionMismatch {
            expected: stats.len(),
            got: d.d.len(),
        });
    }
    Ok(())
}

fn dot<T: Scalar>(a: impl Iterator<Item = T>, d: &[T]) -> T {
    a.zip(d).fold(T::zero(), |acc, (x, y)| acc + x * y.clone())
}

/// `E[T] = μᵀd`.
pub fn epoch_mean<T: Scalar>(stats: &[ServerStats<T>], d: &DownloadAllocation<T>) -> Result<T> {
    check_len(stats, d)?;
    Ok(dot(stats.iter().map(|s| s.mu.clone()), &d.d))
}

/// `σᵀd`, the variance of one epoch.
pub fn epoch_variance<T: Scalar>(stats: &[ServerStats<T>], d: &DownloadAllocation<T>) -> Result<T> {
    check_len(stats, d)?;
    Ok(dot(stats.iter().map(|s| s.sigma2.clone()), &d.d))
}

/// `E[T²] = σᵀd + (μᵀd)²`.
pub fn epoch_second_moment<T: Scalar>(
    stats: &[ServerStats<T>],
    d: &DownloadAllocation<T>,
) -> Result<T> {
    let mean = epoch_mean(stats, d)?;
    let var = epoch_variance(stats, d)?;
    Ok(var + mean.clone() * mean)
}

pub fn peak_aoi<T: Scalar>(stats: &[ServerStats<T>], d: &DownloadAllocation<T>) -> Result<T> {
    check_len(stats, d)?;
    if d.total.near_zero() {
        return Err(Error::EmptyPolicy);
    }
    let mean = epoch_mean(stats, d)?;
    Ok(mean.clone() + mean)
}

/// `(3/2) μᵀd + (1/2) σᵀd / μᵀd`.
pub fn avg_aoi<T: Scalar>(stats: &[ServerStats<T>], d: &DownloadAllocation<T>) -> Result<T> {
    check_len(stats, d)?;
    if d.total.near_zero() {
        return Err(Error::EmptyPolicy);
    }
    let mean = epoch_mean(stats, d)?;
    let var = epoch_variance(stats, d)?;
    Ok(T::from_ratio(3, 2) * mean.clone() + var / (T::from_ratio(2, 1) * mean))
}

/// `(E[T], E[T²])` when every epoch draws its allocation from `policy`.
pub fn mixture_moments<T: Scalar>(
    policy: &MixturePolicy<T>,
    stats: &[ServerStats<T>],
) -> Result<(T, T)> {
    let mut first = T::zero();
    let mut second = T::zero();
    for c in &policy.components {
        let m = epoch_mean(stats, &c.allocation)?;
        let m2 = epoch_second_moment(stats, &c.allocation)?;
        first = first + c.probability.clone() * m;
        second = second + c.probability.clone() * m2;
    }
    Ok((first, second))
}

/// Renewal-reward average age of a time-shared policy, `E[T] + E[T²] / (2 E[T])`.
pub fn mixture_avg_aoi<T: Scalar>(
    policy: &MixturePolicy<T>,
    stats: &[ServerStats<T>],
) -> Result<T> {
    let (m1, m2) = mixture_moments(policy, stats)?;
    if m1.near_zero() {
        return Err(Error::EmptyPolicy);
    }
    Ok(m1.clone() + m2 / (T::from_ratio(2, 1) * m1))
}

/// Peak age of a time-shared policy, `2 E[T]`.
pub fn mixture_peak_aoi<T: Scalar>(
    policy: &MixturePolicy<T>,
    stats: &[ServerStats<T>],
) -> Result<T> {
    let (m1, _) = mixture_moments(policy, stats)?;
    if m1.near_zero() {
        return Err(Error::EmptyPolicy);
    }
    Ok(m1.clone() + m1)
}

/// Age formula for `metric` on a single allocation.
pub fn aoi<T: Scalar>(
    metric: Metric,
    stats: &[ServerStats<T>],
    d: &DownloadAllocation<T>,
) -> Result<T> {
    match metric {
        Metric::Peak => peak_aoi(stats, d),
        Metric::Average => avg_aoi(stats, d),
    }
}
