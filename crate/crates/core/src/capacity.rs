//! PIR capacity under asymmetric traffic, the download constraint system and
//! its corner points.

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lp::Sense;
use crate::model::{DownloadAllocation, SystemConfig};
use crate::polytope::{enumerate_vertices, HalfSpace, DEFAULT_SUBSET_LIMIT};
use crate::scalar::Scalar;

/// Largest `N` for which the permutation-complete system is generated.
pub const MAX_SERVERS: usize = 8;

/// `(1 + 1/N + … + 1/N^{M-1})^{-1}`.
pub fn pir_capacity(num_servers: usize, num_messages: usize) -> BigRational {
    let n = BigRational::from_integer(num_servers.into());
    let mut sum = BigRational::zero();
    let mut term = BigRational::one();
    for _ in 0..num_messages {
        sum += &term;
        term /= &n;
    }
    sum.recip()
}

/// Fraction of the total download served by each server.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRatio<T> {
    tau: Vec<T>,
}

impl<T: Scalar> TrafficRatio<T> {
    pub fn new(tau: Vec<T>) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::InvalidConfig("empty traffic ratio".into()));
        }
        let tol = T::tolerance();
        let mut sum = T::zero();
        for t in &tau {
            if *t < T::zero() - tol.clone() || *t > T::one() + tol.clone() {
                return Err(Error::InvalidConfig(format!(
                    "traffic ratio entry {t} outside [0, 1]"
                )));
            }
            sum = sum + t.clone();
        }
        if !(sum.clone() - T::one()).near_zero() {
            return Err(Error::InvalidConfig(format!(
                "traffic ratios sum to {sum}, not 1"
            )));
        }
        Ok(Self { tau })
    }

    /// `τ = d / D`.
    pub fn from_allocation(d: &DownloadAllocation<T>) -> Result<Self> {
        if d.total().near_zero() {
            return Err(Error::EmptyPolicy);
        }
        Self::new(
            d.entries()
                .iter()
                .map(|v| v.clone() / d.total().clone())
                .collect(),
        )
    }

    pub fn entries(&self) -> &[T] {
        &self.tau
    }

    pub fn is_sorted(&self) -> bool {
        self.tau.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn sorted(&self) -> Self {
        let mut tau = self.tau.clone();
        tau.sort_by(|a, b| b.partial_cmp(a).expect("comparable"));
        Self { tau }
    }
}

fn tail_sum<T: Scalar>(v: &[T], from: usize) -> T {
    v[from..].iter().fold(T::zero(), |acc, x| acc + x.clone())
}

fn recip<T: Scalar>(n: usize) -> T {
    T::from_ratio(1, n as i64)
}

/// Index pairs `(n0, n1)` of the capacity expression, 1-based. For `M = 2` only `n0` is used.
fn index_pairs(num_servers: usize, num_messages: usize) -> Result<Vec<(usize, usize)>> {
    match num_messages {
        2 => Ok((1..=num_servers).map(|n0| (n0, num_servers)).collect()),
        3 => Ok((1..=num_servers)
            .flat_map(|n0| (n0..=num_servers).map(move |n1| (n0, n1)))
            .collect()),
        m => Err(Error::UnsupportedMessages(m)),
    }
}

/// Weights `(a, b, c)` of one capacity term: `L·c <= D + a·Σ_{n>n0} d_n + b·Σ_{n>n1} d_n`.
fn term_weights<T: Scalar>(num_messages: usize, n0: usize, n1: usize) -> (T, T, T) {
    if num_messages == 2 {
        (recip(n0), T::zero(), T::one() + recip(n0))
    } else {
        let b = recip::<T>(n0) * recip(n1);
        (recip(n0), b.clone(), T::one() + recip(n0) + b)
    }
}

/// `C(τ)` for non-increasing `τ`.
pub fn capacity_asym<T: Scalar>(tau: &TrafficRatio<T>, num_messages: usize) -> Result<T> {
    let pairs = index_pairs(tau.tau.len(), num_messages)?;
    if !tau.is_sorted() {
        return Err(Error::UnsortedTraffic);
    }
    let mut best: Option<T> = None;
    for (n0, n1) in pairs {
        let (a, b, c) = term_weights::<T>(num_messages, n0, n1);
        let num = T::one() + a * tail_sum(&tau.tau, n0) + b * tail_sum(&tau.tau, n1);
        let value = num / c;
        if best.as_ref().is_none_or(|v| value < *v) {
            best = Some(value);
        }
    }
    Ok(best.expect("at least one index pair"))
}

/// `C(τ)` for any ordering of `τ`.
pub fn capacity_asym_unsorted<T: Scalar>(tau: &TrafficRatio<T>, num_messages: usize) -> Result<T> {
    capacity_asym(&tau.sorted(), num_messages)
}

/// `coeffs · (d_1, …, d_N) + d_coeff · D  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T> {
    pub coeffs: Vec<T>,
    pub d_coeff: T,
    pub sense: Sense,
    pub rhs: T,
    pub label: String,
}

impl<T: Scalar> LinearConstraint<T> {
    /// Coefficients on `d` alone, with `D = 1ᵀd` substituted.
    pub fn folded(&self) -> Vec<T> {
        self.coeffs
            .iter()
            .map(|c| c.clone() + self.d_coeff.clone())
            .collect()
    }

    /// Left side minus right side at `d`.
    pub fn slack(&self, d: &[T]) -> T {
        self.folded()
            .iter()
            .zip(d)
            .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone())
            - self.rhs.clone()
    }

    pub fn is_satisfied(&self, d: &[T]) -> bool {
        let s = self.slack(d);
        let tol = T::tolerance() * (T::one() + self.rhs.abs());
        match self.sense {
            Sense::Ge => s >= T::zero() - tol,
            Sense::Le => s <= tol,
            Sense::Eq => s.abs() <= tol,
        }
    }

    /// The constraint as `a · d >= b` (only for `>=` and `<=` rows).
    pub fn half_space(&self) -> HalfSpace<T> {
        let folded = self.folded();
        match self.sense {
            Sense::Le => {
                HalfSpace::new(folded.into_iter().map(|c| -c).collect(), -self.rhs.clone())
            }
            _ => HalfSpace::new(folded, self.rhs.clone()),
        }
    }
}

fn num_permutations(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn check_servers(num_servers: usize) -> Result<()> {
    if num_servers == 0 {
        return Err(Error::InvalidConfig("need at least one server".into()));
    }
    if num_servers > MAX_SERVERS {
        return Err(Error::TooLarge {
            what: "permutation constraint system",
            size: num_permutations(num_servers),
            limit: num_permutations(MAX_SERVERS),
        });
    }
    Ok(())
}

fn pir_row<T: Scalar>(
    perm: &[usize],
    num_messages: usize,
    l: &T,
    n0: usize,
    n1: usize,
) -> LinearConstraint<T> {
    let (a, b, c) = term_weights::<T>(num_messages, n0, n1);
    let mut coeffs = vec![T::zero(); perm.len()];
    for (pos, &server) in perm.iter().enumerate() {
        let rank = pos + 1;
        if rank > n0 {
            coeffs[server] = coeffs[server].clone() + a.clone();
        }
        if num_messages == 3 && rank > n1 {
            coeffs[server] = coeffs[server].clone() + b.clone();
        }
    }
    let order = perm.iter().map(|i| (i + 1).to_string()).join(",");
    let label = if num_messages == 2 {
        format!("order ({order}), n0={n0}")
    } else {
        format!("order ({order}), n0={n0}, n1={n1}")
    };
    LinearConstraint {
        coeffs,
        d_coeff: T::one(),
        sense: Sense::Ge,
        rhs: l.clone() * c,
        label,
    }
}

/// Every rate constraint for every ordering of the servers, before deduplication.
pub fn pir_constraints_raw<T: Scalar>(
    num_servers: usize,
    num_messages: usize,
    message_size: u64,
) -> Result<Vec<LinearConstraint<T>>> {
    let pairs = index_pairs(num_servers, num_messages)?;
    check_servers(num_servers)?;
    let l = T::from_ratio(message_size as i64, 1);
    let mut rows = Vec::new();
    for perm in (0..num_servers).permutations(num_servers) {
        for &(n0, n1) in &pairs {
            rows.push(pir_row(&perm, num_messages, &l, n0, n1));
        }
    }
    Ok(rows)
}

/// Rate constraints for every ordering with duplicates removed, plus `d >= 0`.
pub fn pir_constraints<T: Scalar>(
    num_servers: usize,
    num_messages: usize,
    message_size: u64,
) -> Result<Vec<LinearConstraint<T>>> {
    let raw = pir_constraints_raw::<T>(num_servers, num_messages, message_size)?;
    let mut out: Vec<LinearConstraint<T>> = Vec::new();
    for row in raw {
        let folded = row.folded();
        let duplicate = out.iter().any(|r| r.rhs == row.rhs && r.folded() == folded);
        if !duplicate {
            out.push(row);
        }
    }
    for n in 0..num_servers {
        let mut coeffs = vec![T::zero(); num_servers];
        coeffs[n] = T::one();
        out.push(LinearConstraint {
            coeffs,
            d_coeff: T::zero(),
            sense: Sense::Ge,
            rhs: T::zero(),
            label: format!("d{} >= 0", n + 1),
        });
    }
    Ok(out)
}

/// Rate constraints for the identity ordering only, valid when `d` is non-increasing.
pub fn sorted_pir_constraints<T: Scalar>(
    num_servers: usize,
    num_messages: usize,
    message_size: u64,
) -> Result<Vec<LinearConstraint<T>>> {
    let pairs = index_pairs(num_servers, num_messages)?;
    check_servers(num_servers)?;
    let l = T::from_ratio(message_size as i64, 1);
    let perm: Vec<usize> = (0..num_servers).collect();
    Ok(pairs
        .into_iter()
        .map(|(n0, n1)| pir_row(&perm, num_messages, &l, n0, n1))
        .collect())
}

fn rate_cap_row<T: Scalar>(config: &SystemConfig<T>) -> LinearConstraint<T> {
    LinearConstraint {
        coeffs: vec![T::zero(); config.num_servers()],
        d_coeff: T::one(),
        sense: Sense::Le,
        rhs: config.d_max(),
        label: "D <= L/r_min".into(),
    }
}

/// Labels of every violated constraint, including `D <= L / r_min`.
pub fn violations<T: Scalar>(
    d: &DownloadAllocation<T>,
    config: &SystemConfig<T>,
) -> Result<Vec<String>> {
    if d.len() != config.num_servers() {
        return Err(Error::DimensionMismatch {
            expected: config.num_servers(),
            got: d.len(),
        });
    }
    let mut rows = pir_constraints::<T>(
        config.num_servers(),
        config.num_messages(),
        config.message_size(),
    )?;
    rows.push(rate_cap_row(config));
    Ok(rows
        .into_iter()
        .filter(|r| !r.is_satisfied(d.entries()))
        .map(|r| r.label)
        .collect())
}

pub fn feasible<T: Scalar>(d: &DownloadAllocation<T>, config: &SystemConfig<T>) -> bool {
    violations(d, config).is_ok_and(|v| v.is_empty())
}

/// A vertex of the sorted download region and the rate it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerPoint<T> {
    pub allocation: DownloadAllocation<T>,
    pub rate: T,
}

/// Vertices of `{d_1 >= … >= d_N >= 0 : rate constraints}`, ordered by increasing total.
pub fn corner_points<T: Scalar>(
    num_servers: usize,
    num_messages: usize,
    message_size: u64,
) -> Result<Vec<CornerPoint<T>>> {
    let mut rows: Vec<HalfSpace<T>> =
        sorted_pir_constraints::<T>(num_servers, num_messages, message_size)?
            .iter()
            .map(|r| r.half_space())
            .collect();
    for n in 0..num_servers {
        let mut c = vec![T::zero(); num_servers];
        c[n] = T::one();
        if n + 1 < num_servers {
            c[n + 1] = -T::one();
        }
        rows.push(HalfSpace::new(c, T::zero()));
    }
    let l = T::from_ratio(message_size as i64, 1);
    let mut corners = enumerate_vertices(num_servers, &rows, DEFAULT_SUBSET_LIMIT)?
        .into_iter()
        .map(|v| {
            let allocation = DownloadAllocation::new(v)?;
            let rate = l.clone() / allocation.total().clone();
            Ok(CornerPoint { allocation, rate })
        })
        .collect::<Result<Vec<_>>>()?;
    corners.sort_by(|a, b| {
        a.allocation
            .total()
            .partial_cmp(b.allocation.total())
            .expect("comparable")
            .then_with(|| {
                a.allocation
                    .entries()
                    .partial_cmp(b.allocation.entries())
                    .expect("comparable")
            })
    });
    Ok(corners)
}

/// Every distinct reordering of every corner point; the extreme points of the full region
/// up to its recession directions.
pub fn all_corner_permutations<T: Scalar>(corners: &[CornerPoint<T>]) -> Vec<CornerPoint<T>> {
    let mut out: Vec<CornerPoint<T>> = Vec::new();
    for c in corners {
        let n = c.allocation.len();
        for perm in (0..n).permutations(n) {
            let p = CornerPoint {
                allocation: c.allocation.permuted(&perm),
                rate: c.rate.clone(),
            };
            if !out.iter().any(|q| q.allocation == p.allocation) {
                out.push(p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ServerStats;
    use crate::scalar::ratio;

    type Q = BigRational;

    fn tau(v: &[(i64, i64)]) -> TrafficRatio<Q> {
        TrafficRatio::new(v.iter().map(|&(n, d)| ratio(n, d)).collect()).unwrap()
    }

    fn alloc(v: &[i64]) -> DownloadAllocation<Q> {
        DownloadAllocation::new(v.iter().map(|&x| ratio(x, 1)).collect()).unwrap()
    }

    fn config(r: Q) -> SystemConfig<Q> {
        let s = ServerStats::new(ratio(1, 1), ratio(0, 1)).unwrap();
        SystemConfig::new(3, 8, vec![s.clone(), s], r).unwrap()
    }

    #[test]
    fn symmetric_capacity() {
        assert_eq!(pir_capacity(2, 3), ratio(4, 7));
        assert_eq!(pir_capacity(3, 3), ratio(9, 13));
        assert_eq!(pir_capacity(1, 3), ratio(1, 3));
        assert_eq!(pir_capacity(2, 2), ratio(2, 3));
    }

    #[test]
    fn asymmetric_capacity() {
        assert_eq!(
            capacity_asym(&tau(&[(1, 2), (1, 2)]), 3).unwrap(),
            ratio(4, 7)
        );
        assert_eq!(
            capacity_asym(&tau(&[(1, 1), (0, 1)]), 3).unwrap(),
            ratio(1, 3)
        );
        assert_eq!(
            capacity_asym(&tau(&[(3, 4), (1, 4)]), 3).unwrap(),
            ratio(1, 2)
        );
        assert_eq!(
            capacity_asym(&tau(&[(1, 1), (0, 1)]), 2).unwrap(),
            ratio(1, 2)
        );
        assert_eq!(
            capacity_asym(&tau(&[(1, 4), (3, 4)]), 3),
            Err(Error::UnsortedTraffic)
        );
        assert_eq!(
            capacity_asym_unsorted(&tau(&[(1, 4), (3, 4)]), 3).unwrap(),
            ratio(1, 2)
        );
        assert!(matches!(
            capacity_asym(&tau(&[(1, 1), (0, 1)]), 4),
            Err(Error::UnsupportedMessages(4))
        ));
    }

    #[test]
    fn explicit_two_server_constraints() {
        // d1 >= d2 ordering: d2 >= 12 - D/2, d2 >= 20 - D, D >= 14 with L = 8
        let rows = sorted_pir_constraints::<Q>(2, 3, 8).unwrap();
        let folded: Vec<(Vec<Q>, Q)> = rows.iter().map(|r| (r.folded(), r.rhs.clone())).collect();
        assert!(folded.contains(&(vec![ratio(1, 1), ratio(3, 1)], ratio(24, 1))));
        assert!(folded.contains(&(vec![ratio(1, 1), ratio(2, 1)], ratio(20, 1))));
        assert!(folded.contains(&(vec![ratio(1, 1), ratio(1, 1)], ratio(14, 1))));
        assert_eq!(rows.len(), 3);
    }

    #[test]
    fn raw_and_deduplicated_counts() {
        assert_eq!(pir_constraints_raw::<Q>(2, 3, 8).unwrap().len(), 6);
        assert_eq!(pir_constraints_raw::<Q>(3, 3, 8).unwrap().len(), 36);
        assert_eq!(pir_constraints_raw::<Q>(3, 2, 8).unwrap().len(), 18);
        // (n0, n1) = (2, 2) is shared by both orderings, plus two non-negativity rows
        assert_eq!(pir_constraints::<Q>(2, 3, 8).unwrap().len(), 5 + 2);
    }

    #[test]
    fn feasibility_examples() {
        assert!(feasible(&alloc(&[8, 6]), &config(ratio(4, 7))));
        assert!(feasible(&alloc(&[7, 7]), &config(ratio(4, 7))));
        assert!(!feasible(&alloc(&[7, 6]), &config(ratio(1, 3))));
        assert!(feasible(&alloc(&[24, 0]), &config(ratio(1, 3))));
        assert!(feasible(&alloc(&[0, 24]), &config(ratio(1, 3))));
        assert!(!feasible(&alloc(&[24, 0]), &config(ratio(1, 2))));
        let v = violations(&alloc(&[7, 6]), &config(ratio(1, 3))).unwrap();
        assert!(v.iter().any(|l| l.contains("n0=2, n1=2")));
    }

    #[test]
    fn two_server_corners() {
        let corners = corner_points::<Q>(2, 3, 8).unwrap();
        let got: Vec<Vec<Q>> = corners
            .iter()
            .map(|c| c.allocation.entries().to_vec())
            .collect();
        let want: Vec<Vec<Q>> = [[7, 7], [8, 6], [12, 4], [24, 0]]
            .iter()
            .map(|p| p.iter().map(|&x| ratio(x, 1)).collect())
            .collect();
        assert_eq!(got, want);
        let rates: Vec<Q> = corners.iter().map(|c| c.rate.clone()).collect();
        assert_eq!(
            rates,
            vec![ratio(4, 7), ratio(4, 7), ratio(1, 2), ratio(1, 3)]
        );

        let m2 = corner_points::<Q>(2, 2, 4).unwrap();
        assert_eq!(m2.len(), 3);
        assert_eq!(m2[2].allocation.entries(), &[ratio(8, 1), ratio(0, 1)]);
    }

    #[test]
    fn corners_meet_capacity() {
        for (n, m) in [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (4, 3)] {
            let corners = corner_points::<Q>(n, m, 72).unwrap();
            let binom = (0..m).fold(1usize, |acc, i| acc * (n + m - 1 - i) / (i + 1));
            assert_eq!(corners.len(), binom, "N={n} M={m}");
            for c in &corners {
                let t = TrafficRatio::from_allocation(&c.allocation).unwrap();
                assert_eq!(capacity_asym(&t, m).unwrap(), c.rate, "N={n} M={m}");
            }
        }
    }

    #[test]
    fn uniform_allocation_is_feasible() {
        for (n, m) in [(2, 3), (3, 3), (3, 2), (4, 3)] {
            let cap = pir_capacity(n, m);
            let each = ratio(72, 1) / (cap * ratio(n as i64, 1));
            let d = DownloadAllocation::new(vec![each; n]).unwrap();
            let rows = pir_constraints::<Q>(n, m, 72).unwrap();
            assert!(rows.iter().all(|r| r.is_satisfied(d.entries())));
        }
    }
}
