//! Brute-force verifier: exhaustive search over a uniform grid of allocations.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::capacity::{pir_capacity, pir_constraints, violations};
use crate::error::{Error, Result};
use crate::model::{
    aoi, Branch, DownloadAllocation, Metric, MixturePolicy, Solution, SystemConfig,
};
use crate::scalar::Scalar;

/// Largest number of grid points visited by [`grid_search`].
pub const MAX_GRID_POINTS: u128 = 50_000_000;

/// Default grid spacing `L / 32`.
pub fn default_resolution<T: Scalar>(config: &SystemConfig<T>) -> T {
    config.l() / T::from_ratio(32, 1)
}

fn steps<T: Scalar>(span: &T, resolution: &T) -> usize {
    // slightly above the float quotient so exact multiples are kept
    let q = span.to_f64() / resolution.to_f64();
    (q + 1e-9).floor().max(0.0) as usize
}

type Candidate<T> = (T, Vec<T>, Vec<T>);

fn better<T: Scalar>(a: &Candidate<T>, b: &Candidate<T>) -> Ordering {
    a.0.partial_cmp(&b.0)
        .expect("comparable objectives")
        .then_with(|| a.1.partial_cmp(&b.1).expect("comparable"))
        .then_with(|| a.2.partial_cmp(&b.2).expect("comparable"))
}

/// Minimum of `metric` over `{0, h, 2h, …}^N ∩ [0, 3L]^N` restricted to feasible points.
///
/// Ties go to the smallest non-increasing rearrangement, then to the smallest `d`.
pub fn grid_search<T: Scalar>(
    config: &SystemConfig<T>,
    metric: Metric,
    resolution: &T,
) -> Result<Solution<T>> {
    if *resolution <= T::zero() {
        return Err(Error::InvalidConfig(
            "grid resolution must be positive".into(),
        ));
    }
    let n = config.num_servers();
    let l = config.l();
    let span = T::from_ratio(config.num_messages() as i64, 1) * l.clone();
    let k = steps(&span, resolution);
    let points = (k as u128 + 1).checked_pow(n as u32).unwrap_or(u128::MAX);
    if points > MAX_GRID_POINTS {
        return Err(Error::TooLarge {
            what: "oracle grid",
            size: points,
            limit: MAX_GRID_POINTS,
        });
    }
    let rows: Vec<(Vec<T>, T)> =
        pir_constraints::<T>(n, config.num_messages(), config.message_size())?
            .into_iter()
            .map(|r| (r.folded(), r.rhs))
            .collect();
    let tol = T::tolerance();
    let d_max = config.d_max();
    let d_min = l.clone() / T::from_rational(&pir_capacity(n, config.num_messages()));
    let grid: Vec<T> = (0..=k)
        .map(|i| T::from_usize(i) * resolution.clone())
        .collect();
    // admissible range of the index sum
    let sum_lo = (0..=n * k)
        .find(|&s| T::from_usize(s) * resolution.clone() >= d_min.clone() - tol.clone())
        .unwrap_or(n * k + 1);
    let sum_hi = (0..=n * k)
        .rev()
        .find(|&s| T::from_usize(s) * resolution.clone() <= d_max.clone() + tol.clone());
    let Some(sum_hi) = sum_hi else {
        return Err(Error::Infeasible(
            "no grid point meets the rate bound".into(),
        ));
    };
    let stats = config.servers();

    let shard = |first: usize| -> Option<Candidate<T>> {
        let mut best: Option<Candidate<T>> = None;
        let mut idx = vec![0usize; n];
        idx[0] = first;
        loop {
            let sum: usize = idx.iter().sum();
            if sum >= sum_lo && sum <= sum_hi {
                let d: Vec<T> = idx.iter().map(|&i| grid[i].clone()).collect();
                let ok = rows.iter().all(|(c, rhs)| {
                    let lhs = c
                        .iter()
                        .zip(&d)
                        .fold(T::zero(), |acc, (a, v)| acc + a.clone() * v.clone());
                    lhs >= rhs.clone() - tol.clone()
                });
                if ok {
                    let alloc = DownloadAllocation::new(d.clone()).expect("grid is non-negative");
                    let value = aoi(metric, stats, &alloc).expect("non-empty allocation");
                    let cand = (value, alloc.sorted_desc(), d);
                    if best
                        .as_ref()
                        .is_none_or(|b| better(&cand, b) == Ordering::Less)
                    {
                        best = Some(cand);
                    }
                }
            }
            // odometer over coordinates 1..n, skipping sums already too large
            let mut pos = n;
            loop {
                if pos == 1 {
                    return best;
                }
                pos -= 1;
                idx[pos] += 1;
                let partial: usize = idx[..=pos].iter().sum();
                if idx[pos] <= k && partial <= sum_hi {
                    break;
                }
                idx[pos] = 0;
            }
        }
    };

    let best = (0..=k)
        .into_par_iter()
        .filter_map(shard)
        .reduce_with(|a, b| {
            if better(&b, &a) == Ordering::Less {
                b
            } else {
                a
            }
        });
    let Some((_, _, d)) = best else {
        return Err(Error::Infeasible("no feasible grid point".into()));
    };
    let allocation = DownloadAllocation::new(d)?;
    let value = aoi(metric, stats, &allocation)?;
    Ok(Solution {
        metric,
        achieved_rate: l / allocation.total().clone(),
        mixture: MixturePolicy::degenerate(allocation.clone()),
        allocation,
        objective: value.clone(),
        idealized_objective: value,
        branch: Branch::General,
    })
}

/// Bound on how much the objective can rise when the optimum is moved to a grid point.
///
/// Uses `|∂α/∂d_n| <= G` on the region, with `G` from `μ`, `σ²` and the smallest possible
/// `μᵀd`, times an `L1` displacement of `2 N h`.
pub fn lipschitz_slack<T: Scalar>(config: &SystemConfig<T>, metric: Metric, resolution: &T) -> f64 {
    let n = config.num_servers();
    let mus: Vec<f64> = config.mus().iter().map(|m| m.to_f64()).collect();
    let vars: Vec<f64> = config.sigma2s().iter().map(|v| v.to_f64()).collect();
    let h = resolution.to_f64();
    let g = match metric {
        Metric::Peak => 2.0 * mus.iter().cloned().fold(0.0, f64::max),
        Metric::Average => {
            let d_min = config.l().to_f64() / pir_capacity(n, config.num_messages()).to_f64();
            let s_min = mus.iter().cloned().fold(f64::INFINITY, f64::min) * d_min;
            let ratio = mus
                .iter()
                .zip(&vars)
                .map(|(m, v)| v / m)
                .fold(0.0, f64::max);
            mus.iter()
                .zip(&vars)
                .map(|(m, v)| 1.5 * m + v / (2.0 * s_min) + m * ratio / (2.0 * s_min))
                .fold(0.0, f64::max)
        }
    };
    g * 2.0 * n as f64 * h
}

/// Outcome of [`verify`].
#[derive(Debug, Clone)]
pub struct VerifyReport<T> {
    pub metric: Metric,
    /// Labels of violated constraints; empty when feasible.
    pub violations: Vec<String>,
    pub reported: T,
    pub recomputed: T,
    pub oracle_objective: T,
    pub oracle_allocation: DownloadAllocation<T>,
    /// `recomputed − oracle_objective`.
    pub gap: f64,
    pub slack: f64,
    pub pass: bool,
}

impl<T: Scalar> VerifyReport<T> {
    pub fn summary(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut s = format!(
            "{verdict}: {} solver {} oracle {} at {} gap {:.3e} slack {:.3e}",
            self.metric,
            self.recomputed,
            self.oracle_objective,
            self.oracle_allocation,
            self.gap,
            self.slack
        );
        if !self.violations.is_empty() {
            s.push_str(&format!("; violated: {}", self.violations.join("; ")));
        }
        s
    }
}

/// Re-checks feasibility and the objective of `solution`, then compares it with the grid optimum.
pub fn verify<T: Scalar>(
    solution: &Solution<T>,
    config: &SystemConfig<T>,
    resolution: &T,
) -> Result<VerifyReport<T>> {
    let metric = solution.metric;
    let violated = violations(&solution.allocation, config)?;
    let recomputed = aoi(metric, config.servers(), &solution.allocation)?;
    let oracle = grid_search(config, metric, resolution)?;
    let slack = lipschitz_slack(config, metric, resolution);
    let gap = (recomputed.clone() - oracle.objective.clone()).to_f64();
    let scale = 1.0 + recomputed.to_f64().abs();
    let consistent = (recomputed.clone() - solution.idealized_objective.clone())
        .to_f64()
        .abs()
        <= 1e-9 * scale;
    let mut violated = violated;
    if !consistent {
        violated.push(format!(
            "reported objective {} differs from recomputed {}",
            solution.idealized_objective, recomputed
        ));
    }
    let pass = violated.is_empty() && gap <= slack + 1e-9 * scale;
    Ok(VerifyReport {
        metric,
        violations: violated,
        reported: solution.idealized_objective.clone(),
        recomputed,
        oracle_objective: oracle.objective,
        oracle_allocation: oracle.allocation,
        gap,
        slack,
        pass,
    })
}
