//! Peak-age minimization: `min 2μᵀd` over the download region.
//!
//! Ties are broken toward the lexicographically smallest non-increasing
//! rearrangement of `d` (the most balanced optimum), and the resulting sizes
//! are assigned to servers in order of increasing mean delay, lower index
//! first among equal means.

use itertools::Itertools;

use crate::capacity::{all_corner_permutations, corner_points, pir_constraints, CornerPoint};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Sense};
use crate::model::{
    mixture_peak_aoi, peak_aoi, Branch, DownloadAllocation, Metric, MixtureComponent,
    MixturePolicy, Solution, SystemConfig,
};
use crate::scalar::Scalar;

/// Server indices sorted by non-decreasing mean delay (stable).
pub fn order_by_mean<T: Scalar>(config: &SystemConfig<T>) -> Vec<usize> {
    let mus = config.mus();
    let mut order: Vec<usize> = (0..mus.len()).collect();
    order.sort_by(|&a, &b| mus[a].partial_cmp(&mus[b]).expect("comparable"));
    order
}

fn lex_key<T: Scalar>(d: &DownloadAllocation<T>) -> Vec<T> {
    d.sorted_desc()
}

fn alloc<T: Scalar>(l: &T, d1: T, d2: T) -> Result<DownloadAllocation<T>> {
    let s = l.clone() / T::from_ratio(8, 1);
    DownloadAllocation::new(vec![d1 * s.clone(), d2 * s])
}

fn corner<T: Scalar>(l: &T, d1: i64, d2: i64) -> Result<DownloadAllocation<T>> {
    alloc(l, T::from_ratio(d1, 1), T::from_ratio(d2, 1))
}

fn two_point<T: Scalar>(
    a: DownloadAllocation<T>,
    pa: T,
    b: DownloadAllocation<T>,
) -> Result<MixturePolicy<T>> {
    if pa.near_zero() {
        return Ok(MixturePolicy::degenerate(b));
    }
    if (pa.clone() - T::one()).near_zero() {
        return Ok(MixturePolicy::degenerate(a));
    }
    let pb = T::one() - pa.clone();
    MixturePolicy::new(vec![
        MixtureComponent {
            allocation: a,
            probability: pa,
        },
        MixtureComponent {
            allocation: b,
            probability: pb,
        },
    ])
}

/// Target allocation for `r ∈ [1/2, 4/7]` on the edge between `(8,6)` and `(12,4)` (scaled by `L/8`),
/// with its mixture. The `(8,6)` corner is drawn with probability `8 − 4/r`.
pub fn regime_one_point<T: Scalar>(l: &T, r: &T) -> Result<MixturePolicy<T>> {
    let inv = T::one() / r.clone();
    let p = T::from_ratio(8, 1) - T::from_ratio(4, 1) * inv;
    two_point(corner(l, 8, 6)?, p, corner(l, 12, 4)?)
}

/// Target allocation for `r ∈ [1/3, 1/2]` on the edge between `(12,4)` and `(24,0)`,
/// with `(24,0)` drawn with probability `θ = 1/r − 2`.
pub fn regime_two_point<T: Scalar>(l: &T, r: &T) -> Result<MixturePolicy<T>> {
    let theta = T::one() / r.clone() - T::from_ratio(2, 1);
    two_point(corner(l, 24, 0)?, theta, corner(l, 12, 4)?)
}

/// Peak age along the `(8,6)`–`(12,4)` edge: `2(L/8)·8[(5/2)(μ₂ − μ₁) + (2μ₁ − μ₂)/r]`, with `μ₁ <= μ₂`.
pub fn regime_one_peak<T: Scalar>(l: &T, r: &T, mu1: &T, mu2: &T) -> T {
    let inner = T::from_ratio(5, 2) * (mu2.clone() - mu1.clone())
        + (T::from_ratio(2, 1) * mu1.clone() - mu2.clone()) / r.clone();
    T::from_ratio(2, 1) * l.clone() * inner
}

/// Peak age along the `(12,4)`–`(24,0)` edge: `(L/8)·8[3(μ₂ − μ₁) + (3μ₁ − μ₂)/r]`.
pub fn regime_two_peak<T: Scalar>(l: &T, r: &T, mu1: &T, mu2: &T) -> T {
    let inner = T::from_ratio(3, 1) * (mu2.clone() - mu1.clone())
        + (T::from_ratio(3, 1) * mu1.clone() - mu2.clone()) / r.clone();
    l.clone() * inner
}

fn finish<T: Scalar>(
    config: &SystemConfig<T>,
    sorted_mixture: MixturePolicy<T>,
    order: &[usize],
    branch: Branch,
) -> Result<Solution<T>> {
    let mixture = sorted_mixture.unpermuted(order);
    let allocation = mixture.expected_allocation();
    let stats = config.servers();
    let idealized = peak_aoi(stats, &allocation)?;
    let objective = mixture_peak_aoi(&mixture, stats)?;
    Ok(Solution {
        metric: Metric::Peak,
        achieved_rate: config.l() / allocation.total().clone(),
        allocation,
        mixture,
        objective,
        idealized_objective: idealized,
        branch,
    })
}

/// Closed form for two servers and three messages.
pub fn solve_peak_n2m3<T: Scalar>(config: &SystemConfig<T>) -> Result<Solution<T>> {
    if config.num_servers() != 2 || config.num_messages() != 3 {
        return Err(Error::InvalidConfig(format!(
            "closed form needs N = 2, M = 3, got N = {}, M = {}",
            config.num_servers(),
            config.num_messages()
        )));
    }
    let order = order_by_mean(config);
    let sorted = config.permuted(&order);
    let l = config.l();
    let r = config.r_min().clone();
    let half = T::from_ratio(1, 2);

    let mut candidates = vec![
        MixturePolicy::degenerate(corner(&l, 7, 7)?),
        MixturePolicy::degenerate(corner(&l, 8, 6)?),
    ];
    if r >= half {
        candidates.push(regime_one_point(&l, &r)?);
    }
    if r <= half {
        candidates.push(MixturePolicy::degenerate(corner(&l, 12, 4)?));
        candidates.push(regime_two_point(&l, &r)?);
    }

    let stats = sorted.servers();
    let mut best: Option<(T, Vec<T>, MixturePolicy<T>)> = None;
    for m in candidates {
        let d = m.expected_allocation();
        let value = peak_aoi(stats, &d)?;
        let key = lex_key(&d);
        let better = match &best {
            None => true,
            Some((v, k, _)) => value < *v || (value == *v && key < *k),
        };
        if better {
            best = Some((value, key, m));
        }
    }
    let (_, _, mixture) = best.expect("non-empty candidate list");
    finish(config, mixture, &order, Branch::PeakClosedForm)
}

fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).combinations(k)
}

/// `min costᵀd` over the region with `D <= L/r_min`, then the balanced tie-break.
/// Returns the optimal sizes in non-increasing order.
pub fn lex_min_sorted<T: Scalar>(config: &SystemConfig<T>, cost: &[T]) -> Result<Vec<T>> {
    let n = config.num_servers();
    let rows = pir_constraints::<T>(n, config.num_messages(), config.message_size())?;

    // variables: d_1..d_N, z
    let mut base = LinearProgram::new(vec![T::zero(); n + 1]);
    for r in &rows {
        let mut c = r.folded();
        c.push(T::zero());
        base.push(c, r.sense, r.rhs.clone());
    }
    let mut cap = vec![T::one(); n];
    cap.push(T::zero());
    base.push(cap, Sense::Le, config.d_max());

    let mut lp = base.clone();
    lp.objective = cost.iter().cloned().chain([T::zero()]).collect();
    let (_, value) = match lp.solve() {
        LpOutcome::Optimal { x, value } => (x, value),
        LpOutcome::Infeasible => {
            return Err(Error::Infeasible(format!(
                "no allocation meets r_min = {}",
                config.r_min()
            )))
        }
        LpOutcome::Unbounded => {
            return Err(Error::Infeasible("objective unbounded below".into()));
        }
    };
    let mut fixed = base;
    fixed.push(
        cost.iter().cloned().chain([T::zero()]).collect(),
        Sense::Eq,
        value,
    );

    let mut sorted = Vec::with_capacity(n);
    let mut prefix = T::zero();
    for k in 1..=n {
        let mut lp = fixed.clone();
        let mut obj = vec![T::zero(); n + 1];
        obj[n] = T::one();
        lp.objective = obj;
        for s in subsets(n, k) {
            let mut c = vec![T::zero(); n + 1];
            for i in s {
                c[i] = T::one();
            }
            c[n] = -T::one();
            lp.push(c, Sense::Le, T::zero());
        }
        let (_, z) = lp.solve().optimal().ok_or_else(|| {
            Error::NonConvergence(format!("tie-break stage {k} lost feasibility"))
        })?;
        for s in subsets(n, k) {
            let mut c = vec![T::zero(); n + 1];
            for i in s {
                c[i] = T::one();
            }
            fixed.push(c, Sense::Le, z.clone());
        }
        sorted.push(z.clone() - prefix.clone());
        prefix = z;
    }
    Ok(sorted)
}

/// Exact LP over the full permutation constraint system.
pub fn solve_peak_lp<T: Scalar>(config: &SystemConfig<T>) -> Result<Solution<T>> {
    let order = order_by_mean(config);
    // sizes in non-increasing order go to servers in order of non-decreasing mean
    let d = DownloadAllocation::new(lex_min_sorted(config, &config.mus())?)?;
    let corners = corner_points::<T>(
        config.num_servers(),
        config.num_messages(),
        config.message_size(),
    )?;
    let mixture = time_share_policy(&d, &corners)?;
    finish(config, mixture, &order, Branch::PeakLp)
}

/// Closed form when it applies, LP otherwise.
pub fn solve_peak<T: Scalar>(config: &SystemConfig<T>) -> Result<Solution<T>> {
    if config.num_servers() == 2 && config.num_messages() == 3 {
        solve_peak_n2m3(config)
    } else {
        solve_peak_lp(config)
    }
}

/// Writes `target` as a convex combination of corner allocations (in every ordering).
///
/// Among all such combinations the one with the smallest `Σ p_k ‖d⁽ᵏ⁾‖²` is chosen,
/// so targets on a face of the hull use only that face's corners.
pub fn time_share_policy<T: Scalar>(
    target: &DownloadAllocation<T>,
    corners: &[CornerPoint<T>],
) -> Result<MixturePolicy<T>> {
    let weights = |c: &DownloadAllocation<T>| {
        c.entries()
            .iter()
            .fold(T::zero(), |acc, v| acc + v.clone() * v.clone())
    };
    time_share_weighted(target, corners, weights)
}

/// As [`time_share_policy`] with an arbitrary per-corner cost to minimize.
pub fn time_share_weighted<T: Scalar>(
    target: &DownloadAllocation<T>,
    corners: &[CornerPoint<T>],
    cost: impl Fn(&DownloadAllocation<T>) -> T,
) -> Result<MixturePolicy<T>> {
    let n = target.len();
    let pool = all_corner_permutations(corners);
    if pool.iter().any(|c| c.allocation.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pool[0].allocation.len(),
        });
    }
    if let Some(c) = pool.iter().find(|c| &c.allocation == target) {
        return Ok(MixturePolicy::degenerate(c.allocation.clone()));
    }
    let mut lp = LinearProgram::new(pool.iter().map(|c| cost(&c.allocation)).collect());
    for i in 0..n {
        lp.push(
            pool.iter()
                .map(|c| c.allocation.entries()[i].clone())
                .collect(),
            Sense::Eq,
            target.entries()[i].clone(),
        );
    }
    lp.push(vec![T::one(); pool.len()], Sense::Eq, T::one());
    let (p, _) = lp.solve().optimal().ok_or(Error::OutsideHull)?;

    let mut components: Vec<MixtureComponent<T>> = pool
        .into_iter()
        .zip(p)
        .filter(|(_, p)| *p > T::tolerance())
        .map(|(c, p)| MixtureComponent {
            allocation: c.allocation,
            probability: p,
        })
        .collect();
    if !T::is_exact() {
        let total = components
            .iter()
            .fold(T::zero(), |acc, c| acc + c.probability.clone());
        for c in components.iter_mut() {
            c.probability = c.probability.clone() / total.clone();
        }
    }
    MixturePolicy::new(components)
}
