//! Average-age minimization.
//!
//! With `s = μᵀd` the average age is `(3/2) s + σᵀd / (2 s)`. Substituting
//! `t = 1/s`, `x = d t` makes it `(3/2)/t + σᵀx / 2`, jointly convex in `(x, t)`
//! over a polyhedral cone, which is what every search below relies on.

use num_traits::Float;

use crate::capacity::{corner_points, feasible, pir_capacity, pir_constraints, CornerPoint};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, Sense};
use crate::model::{
    avg_aoi, mixture_avg_aoi, Branch, DownloadAllocation, Metric, Solution, SystemConfig,
};
use crate::peak_solver::time_share_weighted;
use crate::scalar::FloatScalar;

/// Relative tolerance used to decide that two float statistics are equal.
pub const EQUALITY_TOLERANCE: f64 = 1e-12;

/// Grid size of the outer search over `D` for two servers.
const N2_GRID: usize = 2049;
/// Grid size of the outer search over `D` for the general solver.
const GENERAL_GRID: usize = 33;
const GOLDEN_ITERS: usize = 100;

/// Charnes-Cooper image of an allocation: `t = 1/(μᵀd)`, `x = d t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedPoint<F> {
    pub x: Vec<F>,
    pub t: F,
    pub total: F,
}

impl<F: FloatScalar> TransformedPoint<F> {
    pub fn from_allocation(d: &DownloadAllocation<F>, mus: &[F]) -> Result<Self> {
        let s = d
            .entries()
            .iter()
            .zip(mus)
            .fold(F::zero(), |acc, (v, m)| acc + *v * *m);
        if s <= F::zero() {
            return Err(Error::EmptyPolicy);
        }
        let t = F::one() / s;
        Ok(Self {
            x: d.entries().iter().map(|v| *v * t).collect(),
            t,
            total: *d.total(),
        })
    }

    pub fn to_allocation(&self) -> Result<DownloadAllocation<F>> {
        DownloadAllocation::new(self.x.iter().map(|v| *v / self.t).collect())
    }
}

fn approx_eq<F: FloatScalar>(a: F, b: F) -> bool {
    Float::abs(a - b) <= F::c(EQUALITY_TOLERANCE) * Float::max(Float::abs(a), Float::abs(b))
}

/// `true` when every server has the same mean and variance.
pub fn is_symmetric<F: FloatScalar>(config: &SystemConfig<F>) -> bool {
    let s = config.servers();
    s.iter()
        .all(|x| approx_eq(*x.mu(), *s[0].mu()) && approx_eq(*x.sigma2(), *s[0].sigma2()))
}

fn golden<F: FloatScalar>(mut f: impl FnMut(F) -> F, lo: F, hi: F, iters: usize) -> (F, F) {
    let g = F::c((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if b - a <= F::epsilon() * Float::max(Float::abs(a), Float::abs(b)) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let candidates = [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd)];
    candidates
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .fold((lo, F::infinity()), |best, cand| {
            if cand.1 < best.1 {
                cand
            } else {
                best
            }
        })
}

fn uniform_grid<F: FloatScalar>(lo: F, hi: F, n: usize) -> Vec<F> {
    if n < 2 || hi <= lo {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * F::c(i as f64) / F::c((n - 1) as f64))
        .collect()
}

fn corners_for<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Vec<CornerPoint<F>>> {
    let exact = corner_points::<num_rational::BigRational>(
        config.num_servers(),
        config.num_messages(),
        config.message_size(),
    )?;
    exact
        .into_iter()
        .map(|c| {
            Ok(CornerPoint {
                allocation: DownloadAllocation::new(
                    c.allocation
                        .entries()
                        .iter()
                        .map(F::from_rational)
                        .collect(),
                )?,
                rate: F::from_rational(&c.rate),
            })
        })
        .collect()
}

/// Smallest-penalty realization of `d` by time sharing between corner schemes.
pub fn realize_average<F: FloatScalar>(
    config: &SystemConfig<F>,
    d: DownloadAllocation<F>,
    branch: Branch,
) -> Result<Solution<F>> {
    let corners = corners_for(config)?;
    let mus = config.mus();
    // E[T] and the σ part of E[T²] are fixed by the target, so only Σ p_k (μᵀd_k)² varies
    let mixture = time_share_weighted(&d, &corners, |c| {
        let s = c
            .entries()
            .iter()
            .zip(&mus)
            .fold(F::zero(), |acc, (v, m)| acc + *v * *m);
        s * s
    })?;
    let stats = config.servers();
    Ok(Solution {
        metric: Metric::Average,
        objective: mixture_avg_aoi(&mixture, stats)?,
        idealized_objective: avg_aoi(stats, &d)?,
        achieved_rate: config.l() / *d.total(),
        allocation: d,
        mixture,
        branch,
    })
}

/// Uniform allocation `d_n = L / (N C_PIR)`, optimal when all servers look alike.
pub fn symmetric_solution<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Solution<F>> {
    let n = config.num_servers();
    let cap = F::from_rational(&pir_capacity(n, config.num_messages()));
    let each = config.l() / (cap * F::c(n as f64));
    let d = DownloadAllocation::new(vec![each; n])?;
    realize_average(config, d, Branch::Symmetric)
}

/// Two servers sorted so that `μ₁ < μ₂`, with `Δ = μ₂ − μ₁` and `K = σ₁²μ₂ − σ₂²μ₁`.
struct TwoServer<F> {
    order: Vec<usize>,
    mu: [F; 2],
    var: [F; 2],
    delta: F,
    k: F,
    l: F,
}

impl<F: FloatScalar> TwoServer<F> {
    fn new(config: &SystemConfig<F>) -> Result<Self> {
        if config.num_servers() != 2 || config.num_messages() != 3 {
            return Err(Error::InvalidConfig(format!(
                "two-server solver needs N = 2, M = 3, got N = {}, M = {}",
                config.num_servers(),
                config.num_messages()
            )));
        }
        let s = config.servers();
        let order = if s[0].mu() <= s[1].mu() {
            vec![0, 1]
        } else {
            vec![1, 0]
        };
        let (a, b) = (&s[order[0]], &s[order[1]]);
        if approx_eq(*a.mu(), *b.mu()) {
            return Err(Error::InvalidConfig("mean delays are equal".into()));
        }
        let mu = [*a.mu(), *b.mu()];
        let var = [*a.sigma2(), *b.sigma2()];
        Ok(Self {
            order,
            delta: mu[1] - mu[0],
            k: var[0] * mu[1] - var[1] * mu[0],
            mu,
            var,
            l: config.l(),
        })
    }

    /// Lower bound on each entry at total `D`.
    fn floor(&self, total: F) -> F {
        let a = F::c(1.5) * self.l - total / F::c(2.0);
        let b = F::c(2.5) * self.l - total;
        Float::max(Float::max(a, b), F::zero())
    }

    fn t_star(&self, total: F) -> Option<F> {
        (self.k > F::zero()).then(|| Float::sqrt(F::c(3.0) * self.delta / (self.k * total)))
    }

    /// Best `s = μᵀd` at total `D`, whether it is the unclamped stationary point, and the age.
    fn profile(&self, total: F) -> (F, bool, F) {
        let b = self.floor(total);
        let lo = self.mu[0] * total + self.delta * b;
        let hi = self.mu[1] * total - self.delta * b;
        let (s, interior) = match self.t_star(total) {
            Some(t) => {
                let s = F::one() / t;
                if s < lo {
                    (lo, false)
                } else if s > hi {
                    (hi, false)
                } else {
                    (s, true)
                }
            }
            None => (lo, false),
        };
        (s, interior, self.age(total, s))
    }

    fn age(&self, total: F, s: F) -> F {
        F::c(1.5) * s
            + (self.k * total + (self.var[1] - self.var[0]) * s) / (F::c(2.0) * self.delta * s)
    }

    /// Sorted-frame allocation with total `D` and `μᵀd = s`.
    fn allocation(&self, total: F, s: F) -> [F; 2] {
        let d2 = (s - self.mu[0] * total) / self.delta;
        [total - d2, d2]
    }
}

/// Stationary point `(x*, t*)` of the inner problem at total `D` for two servers.
pub fn inner_solution<F: FloatScalar>(
    total: F,
    config: &SystemConfig<F>,
) -> Result<TransformedPoint<F>> {
    let two = TwoServer::new(config)?;
    let t = two.t_star(total).ok_or_else(|| {
        Error::NonRealStationaryPoint(format!("σ₁²μ₂ − σ₂²μ₁ = {} is not positive", two.k))
    })?;
    let x1 = (two.mu[1] * total * t - F::one()) / two.delta;
    let x2 = (F::one() - two.mu[0] * total * t) / two.delta;
    let mut x = vec![F::zero(); 2];
    x[two.order[0]] = x1;
    x[two.order[1]] = x2;
    Ok(TransformedPoint { x, t, total })
}

/// The inner objective `(3/2)/t + σᵀx(t)/2` at total `D`, with `x(t)` fixed by the two equalities.
pub fn inner_objective<F: FloatScalar>(total: F, t: F, config: &SystemConfig<F>) -> Result<F> {
    let two = TwoServer::new(config)?;
    let x1 = (two.mu[1] * total * t - F::one()) / two.delta;
    let x2 = (F::one() - two.mu[0] * total * t) / two.delta;
    Ok(F::c(1.5) / t + (two.var[0] * x1 + two.var[1] * x2) / F::c(2.0))
}

/// Two servers with distinct means: the best `s` for each `D`, then a search over `D`.
pub fn outer_minimize<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Solution<F>> {
    let two = TwoServer::new(config)?;
    let lo = F::c(1.75) * two.l;
    let hi = config.d_max();
    let grid = uniform_grid(lo, hi, N2_GRID);
    let ages: Vec<F> = grid.iter().map(|&d| two.profile(d).2).collect();

    let mut candidates: Vec<F> = vec![lo, hi];
    let kink = F::c(2.0) * two.l;
    if kink > lo && kink < hi {
        candidates.push(kink);
    }
    // least total at which the stationary point is feasible
    if let Some(i) = grid.iter().position(|&d| two.profile(d).1) {
        if i == 0 {
            candidates.push(grid[0]);
        } else {
            let (mut a, mut b) = (grid[i - 1], grid[i]);
            for _ in 0..200 {
                let m = (a + b) / F::c(2.0);
                if two.profile(m).1 {
                    b = m;
                } else {
                    a = m;
                }
            }
            candidates.push(b);
        }
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| ages[a].partial_cmp(&ages[b]).expect("finite ages"))
        .expect("non-empty grid");
    let (a, b) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(grid.len() - 1)],
    );
    candidates.push(golden(|d| two.profile(d).2, a, b, GOLDEN_ITERS).0);
    candidates.push(grid[best]);

    let total = candidates
        .into_iter()
        .min_by(|&a, &b| {
            two.profile(a)
                .2
                .partial_cmp(&two.profile(b).2)
                .expect("finite ages")
                .then(a.partial_cmp(&b).expect("finite totals"))
        })
        .expect("non-empty");
    let (s, interior, _) = two.profile(total);
    let sorted = two.allocation(total, s);
    let tiny = F::c(1e-9) * two.l;
    let branch = if sorted.iter().any(|v| *v <= tiny) {
        Branch::SingleServer
    } else if interior {
        Branch::Interior
    } else {
        Branch::Boundary
    };
    let mut d = vec![F::zero(); 2];
    d[two.order[0]] = sorted[0];
    d[two.order[1]] = sorted[1];
    if branch == Branch::SingleServer {
        // snap to the exact single-server allocation
        for v in d.iter_mut() {
            *v = if *v <= tiny { F::zero() } else { total };
        }
    }
    realize_average(config, DownloadAllocation::new(d)?, branch)
}

/// `(3/2)μD + ((σ₂²−σ₁²)/(2μ))·max{(3/2)L/D − 1/2, (5/2)L/D − 1} + σ₁²/(2μ)`.
pub fn equal_mean_objective<F: FloatScalar>(config: &SystemConfig<F>, total: F) -> F {
    let (mu, v1, v2) = equal_mean_parts(config);
    let l = config.l();
    let ratio = Float::max(
        F::c(1.5) * l / total - F::c(0.5),
        F::c(2.5) * l / total - F::one(),
    );
    F::c(1.5) * mu * total + (v2 - v1) / (F::c(2.0) * mu) * ratio + v1 / (F::c(2.0) * mu)
}

fn equal_mean_parts<F: FloatScalar>(config: &SystemConfig<F>) -> (F, F, F) {
    let s = config.servers();
    let (a, b) = (*s[0].sigma2(), *s[1].sigma2());
    (*s[0].mu(), Float::min(a, b), Float::max(a, b))
}

/// Two servers with equal means: bisection on the convex one-dimensional problem in `D`.
pub fn equal_mean_solver<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Solution<F>> {
    if config.num_servers() != 2 || config.num_messages() != 3 {
        return Err(Error::InvalidConfig(
            "equal-mean solver needs N = 2, M = 3".into(),
        ));
    }
    let s = config.servers();
    if !approx_eq(*s[0].mu(), *s[1].mu()) {
        return Err(Error::InvalidConfig("mean delays differ".into()));
    }
    let (mu, v1, v2) = equal_mean_parts(config);
    let l = config.l();
    let c = (v2 - v1) / (F::c(2.0) * mu);
    let right_slope = |d: F| {
        let k = if d < F::c(2.0) * l {
            F::c(2.5)
        } else {
            F::c(1.5)
        };
        F::c(1.5) * mu - c * k * l / (d * d)
    };
    let (mut lo, mut hi) = (F::c(1.75) * l, config.d_max());
    let total = if right_slope(lo) >= F::zero() {
        lo
    } else {
        for _ in 0..200 {
            let m = (lo + hi) / F::c(2.0);
            if right_slope(m) >= F::zero() {
                hi = m;
            } else {
                lo = m;
            }
        }
        hi
    };

    let higher = if s[0].sigma2() > s[1].sigma2() { 0 } else { 1 };
    let mut d = vec![total / F::c(2.0); 2];
    if c > F::zero() {
        let floor = Float::max(F::c(1.5) * l - total / F::c(2.0), F::c(2.5) * l - total);
        d[higher] = floor;
        d[1 - higher] = total - floor;
    }
    realize_average(config, DownloadAllocation::new(d)?, Branch::EqualMean)
}

/// All traffic on the single server with the smallest `(3/2)μ M L + σ²/(2μ)` at `r_min = 1/M`.
pub fn single_server_fallback<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Solution<F>> {
    let m = config.num_messages();
    let floor = F::c(1.0 / m as f64);
    if !approx_eq(*config.r_min(), floor) {
        return Err(Error::FallbackInfeasible(config.r_min().to_string()));
    }
    let total = F::c(m as f64) * config.l();
    let value = |i: usize| {
        let s = &config.servers()[i];
        F::c(1.5) * *s.mu() * total + *s.sigma2() / (F::c(2.0) * *s.mu())
    };
    let best = (0..config.num_servers())
        .reduce(|a, b| if value(b) < value(a) { b } else { a })
        .expect("at least two servers");
    let mut d = vec![F::zero(); config.num_servers()];
    d[best] = total;
    realize_average(config, DownloadAllocation::new(d)?, Branch::SingleServer)
}

/// Dense linear system shared by the general searches: folded rate rows over `d`.
struct Region<F> {
    rows: Vec<(Vec<F>, Sense, F)>,
    mus: Vec<F>,
    vars: Vec<F>,
}

impl<F: FloatScalar> Region<F> {
    fn new(config: &SystemConfig<F>) -> Result<Self> {
        let rows = pir_constraints::<F>(
            config.num_servers(),
            config.num_messages(),
            config.message_size(),
        )?
        .into_iter()
        .map(|r| (r.folded(), r.sense, r.rhs))
        .collect();
        Ok(Self {
            rows,
            mus: config.mus(),
            vars: config.sigma2s(),
        })
    }

    fn program(&self, objective: Vec<F>) -> LinearProgram<F> {
        let mut lp = LinearProgram::new(objective);
        for (c, sense, rhs) in &self.rows {
            lp.push(c.clone(), *sense, *rhs);
        }
        lp
    }

    /// `min` and `max` of `μᵀd` with the total pinned (`Some`) or capped (`None` uses `cap`).
    fn mean_range(&self, total: Option<F>, cap: F) -> Option<(F, F)> {
        let n = self.mus.len();
        let bound = |lp: &mut LinearProgram<F>| match total {
            Some(d) => lp.push(vec![F::one(); n], Sense::Eq, d),
            None => lp.push(vec![F::one(); n], Sense::Le, cap),
        };
        let mut lo = self.program(self.mus.clone());
        bound(&mut lo);
        let mut hi = self.program(self.mus.iter().map(|m| -*m).collect());
        bound(&mut hi);
        let (_, a) = lo.solve().optimal()?;
        let (_, b) = hi.solve().optimal()?;
        Some((a, -b))
    }

    /// `min σᵀd` with `μᵀd = s` and the total pinned or capped.
    fn min_variance(&self, s: F, total: Option<F>, cap: F) -> Option<(Vec<F>, F)> {
        let n = self.mus.len();
        let mut lp = self.program(self.vars.clone());
        lp.push(self.mus.clone(), Sense::Eq, s);
        match total {
            Some(d) => lp.push(vec![F::one(); n], Sense::Eq, d),
            None => lp.push(vec![F::one(); n], Sense::Le, cap),
        }
        lp.solve().optimal()
    }

    /// Best age over `μᵀd ∈ [lo, hi]`, searching in `t = 1/s` where the problem is convex.
    fn best_over_rate(&self, total: Option<F>, cap: F) -> Option<(F, Vec<F>)> {
        let (lo, hi) = self.mean_range(total, cap)?;
        let age = |t: F| -> F {
            let s = F::one() / t;
            match self.min_variance(s, total, cap) {
                Some((_, w)) => F::c(1.5) * s + w / (F::c(2.0) * s),
                None => F::infinity(),
            }
        };
        let (t, value) = if approx_eq(lo, hi) {
            let t = F::one() / lo;
            (t, age(t))
        } else {
            golden(age, F::one() / hi, F::one() / lo, GOLDEN_ITERS)
        };
        if !value.is_finite() {
            return None;
        }
        let (d, _) = self.min_variance(F::one() / t, total, cap)?;
        Some((value, d))
    }
}

fn clean<F: FloatScalar>(d: Vec<F>, l: F) -> Vec<F> {
    let tiny = F::c(1e-12) * l;
    d.into_iter()
        .map(|v| if Float::abs(v) <= tiny { F::zero() } else { v })
        .collect()
}

fn checked<F: FloatScalar>(
    config: &SystemConfig<F>,
    d: Vec<F>,
    branch: Branch,
) -> Result<Solution<F>> {
    let d = DownloadAllocation::new(clean(d, config.l()))?;
    if !feasible(&d, config) {
        return Err(Error::NonConvergence(format!(
            "search ended at infeasible allocation {d}"
        )));
    }
    realize_average(config, d, branch)
}

/// Nested search for any `N`: outer over `D ∈ [L/C_PIR, L/r_min]`, inner over `t` at fixed `D`.
pub fn solve_avg_general<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Solution<F>> {
    if is_symmetric(config) {
        return symmetric_solution(config);
    }
    let region = Region::new(config)?;
    let cap = F::from_rational(&pir_capacity(config.num_servers(), config.num_messages()));
    let lo = config.l() / cap;
    let hi = config.d_max();
    let eval = |d: F| region.best_over_rate(Some(d), hi);
    let value = |d: F| eval(d).map_or(F::infinity(), |(v, _)| v);

    let grid = uniform_grid(lo, hi, GENERAL_GRID);
    let ages: Vec<F> = grid.iter().map(|&d| value(d)).collect();
    let best = (0..grid.len())
        .filter(|&i| ages[i].is_finite())
        .min_by(|&a, &b| ages[a].partial_cmp(&ages[b]).expect("finite"))
        .ok_or_else(|| Error::NonConvergence("no feasible total on the outer grid".into()))?;
    let (a, b) = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(grid.len() - 1)],
    );
    let (refined, refined_value) = golden(value, a, b, GOLDEN_ITERS);
    let total = if refined_value <= ages[best] {
        refined
    } else {
        grid[best]
    };
    let (_, d) = eval(total)
        .ok_or_else(|| Error::NonConvergence(format!("inner problem failed at D = {total}")))?;
    checked(config, d, Branch::General)
}

/// Single convex search over `t = 1/(μᵀd)` with the total only capped by `L/r_min`.
///
/// Solves the same problem as [`solve_avg_general`] without an outer search over `D`;
/// used as an independent cross-check.
pub fn solve_avg_convex<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Solution<F>> {
    let region = Region::new(config)?;
    let (_, d) = region
        .best_over_rate(None, config.d_max())
        .ok_or_else(|| Error::NonConvergence("convex search found no feasible rate".into()))?;
    checked(config, d, Branch::General)
}

/// Dispatches to the closed-form branches for two servers and three messages,
/// and to the general search otherwise.
pub fn solve_avg<F: FloatScalar>(config: &SystemConfig<F>) -> Result<Solution<F>> {
    if is_symmetric(config) {
        return symmetric_solution(config);
    }
    if config.num_servers() == 2 && config.num_messages() == 3 {
        let s = config.servers();
        if approx_eq(*s[0].mu(), *s[1].mu()) {
            return equal_mean_solver(config);
        }
        return outer_minimize(config);
    }
    solve_avg_general(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ServerStats;

    fn cfg(mus: &[f64], vars: &[f64], l: u64, r: f64) -> SystemConfig<f64> {
        let servers = mus
            .iter()
            .zip(vars)
            .map(|(&m, &v)| ServerStats::new(m, v).unwrap())
            .collect();
        SystemConfig::new(3, l, servers, r).unwrap()
    }

    #[test]
    fn stationary_point_example() {
        let c = cfg(&[1.0, 2.0], &[4.0, 1.0], 8, 1.0 / 3.0);
        let p = inner_solution(16.0, &c).unwrap();
        assert!((p.t - (3.0f64 / 112.0).sqrt()).abs() < 1e-15);
        assert!((p.x[0] + 2.0 * p.x[1] - 1.0).abs() < 1e-12);
        assert!((p.x[0] + p.x[1] - 16.0 * p.t).abs() < 1e-12);

        let bad = cfg(&[1.0, 2.0], &[1.0, 4.0], 8, 1.0 / 3.0);
        assert!(matches!(
            inner_solution(16.0, &bad),
            Err(Error::NonRealStationaryPoint(_))
        ));
    }

    #[test]
    fn fallback_example() {
        let c = cfg(&[1.0, 2.0], &[1.0, 1.0], 8, 1.0 / 3.0);
        let s = single_server_fallback(&c).unwrap();
        assert_eq!(s.allocation.entries(), &[24.0, 0.0]);
        assert!((s.idealized_objective - 36.5).abs() < 1e-12);
        let tie = cfg(&[1.0, 1.0], &[1.0, 1.0], 8, 1.0 / 3.0);
        assert_eq!(
            single_server_fallback(&tie).unwrap().allocation.entries(),
            &[24.0, 0.0]
        );
        let high = cfg(&[1.0, 2.0], &[1.0, 1.0], 8, 0.5);
        assert!(matches!(
            single_server_fallback(&high),
            Err(Error::FallbackInfeasible(_))
        ));
    }

    #[test]
    fn boundary_beats_single_server() {
        // no feasible stationary point, yet (8,6) is far better than one server alone
        let c = cfg(&[1.0, 2.0], &[4.0, 1.0], 8, 1.0 / 3.0);
        let s = outer_minimize(&c).unwrap();
        assert!(
            (s.idealized_objective - 30.95).abs() < 1e-9,
            "{}",
            s.idealized_objective
        );
        assert_eq!(s.branch, Branch::Boundary);
    }

    #[test]
    fn symmetric_case() {
        let c = cfg(&[2.0, 2.0], &[3.0, 3.0], 8, 0.4);
        let s = solve_avg(&c).unwrap();
        assert_eq!(s.allocation.entries(), &[7.0, 7.0]);
        assert!((s.idealized_objective - (42.0 + 3.0 / 4.0)).abs() < 1e-12);
        assert_eq!(s.branch, Branch::Symmetric);
    }

    #[test]
    fn equal_mean_matches_stationary_points() {
        let c = cfg(&[1.0, 1.0], &[1.0, 9.0], 8, 1.0 / 3.0);
        let s = equal_mean_solver(&c).unwrap();
        let l = 8.0;
        let k = (9.0 - 1.0) / 2.0;
        let mut best = f64::INFINITY;
        for d in [
            (5.0 * k * l / 3.0f64).sqrt().clamp(1.75 * l, 2.0 * l),
            (k * l).sqrt().clamp(2.0 * l, 3.0 * l),
            1.75 * l,
            3.0 * l,
        ] {
            best = best.min(equal_mean_objective(&c, d));
        }
        assert!((s.idealized_objective - best).abs() < 1e-9 * best);
        assert!(
            (equal_mean_objective(&c, *s.allocation.total()) - s.idealized_objective).abs() < 1e-9
        );
    }

    #[test]
    fn general_agrees_with_two_server_paths() {
        for (mus, vars, r) in [
            ([1.0, 2.0], [4.0, 1.0], 1.0 / 3.0),
            ([1.0, 1.5], [20.0, 1.0], 1.0 / 3.0),
            ([1.0, 1.2], [30.0, 0.5], 0.45),
            ([1.0, 1.0], [1.0, 9.0], 0.4),
            ([2.0, 1.0], [1.0, 1.0], 1.0 / 3.0),
        ] {
            let c = cfg(&mus, &vars, 8, r);
            let a = solve_avg(&c).unwrap().idealized_objective;
            let b = solve_avg_general(&c).unwrap().idealized_objective;
            let d = solve_avg_convex(&c).unwrap().idealized_objective;
            assert!((a - b).abs() <= 1e-6 * a, "{mus:?} {vars:?}: {a} vs {b}");
            assert!((a - d).abs() <= 1e-6 * a, "{mus:?} {vars:?}: {a} vs {d}");
        }
    }

    #[test]
    fn round_trip() {
        let d = DownloadAllocation::new(vec![3.5, 1.25, 7.0]).unwrap();
        let p = TransformedPoint::from_allocation(&d, &[1.0, 5.0, 10.0]).unwrap();
        let back = p.to_allocation().unwrap();
        for (a, b) in back.entries().iter().zip(d.entries()) {
            assert!((a - b).abs() <= 1e-15 * b);
        }
    }
}
