//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use timely_pir::avg_solver::{inner_objective, inner_solution, solve_avg, TransformedPoint};
use timely_pir::capacity::{capacity_asym, corner_points, pir_capacity, TrafficRatio};
use timely_pir::cli::{linspace, tradeoff_rows};
use timely_pir::model::{avg_aoi, peak_aoi};
use timely_pir::oracle::{grid_search, lipschitz_slack};
use timely_pir::peak_solver::{
    regime_one_peak, regime_one_point, solve_peak, solve_peak_lp, solve_peak_n2m3,
};
use timely_pir::sim::{self, DelayDistribution, Family};
use timely_pir::{
    ratio, DownloadAllocation, ExactConfig, FloatConfig, Metric, MixturePolicy, Rational,
    ServerStats,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn q(n: i64, d: i64) -> Rational {
    ratio(n, d)
}

fn exact_config(m: usize, l: u64, stats: &[(Rational, Rational)], r: Rational) -> ExactConfig {
    let servers = stats
        .iter()
        .map(|(a, b)| ServerStats::new(a.clone(), b.clone()).unwrap())
        .collect();
    ExactConfig::new(m, l, servers, r).unwrap()
}

fn float_config(m: usize, l: u64, mus: &[f64], vars: &[f64], r: f64) -> FloatConfig {
    let servers = mus
        .iter()
        .zip(vars)
        .map(|(&a, &b)| ServerStats::new(a, b).unwrap())
        .collect();
    FloatConfig::new(m, l, servers, r).unwrap()
}

fn capacity_exactness() -> Check {
    let half = TrafficRatio::new(vec![q(1, 2), q(1, 2)]).map_err(|e| e.to_string())?;
    let c = capacity_asym(&half, 3).map_err(|e| e.to_string())?;
    ensure(c == q(4, 7), || format!("C(1/2, 1/2) = {c}"))?;
    ensure(pir_capacity(2, 3) == q(4, 7), || {
        "C_PIR(2, 3) != 4/7".into()
    })?;
    let one = TrafficRatio::new(vec![q(1, 1), q(0, 1)]).map_err(|e| e.to_string())?;
    let c1 = capacity_asym(&one, 3).map_err(|e| e.to_string())?;
    ensure(c1 == q(1, 3), || format!("C(1, 0) = {c1}"))?;
    Ok("C(1/2,1/2) = C_PIR = 4/7, C(1,0) = 1/3".into())
}

fn corner_recovery() -> Check {
    let corners = corner_points::<Rational>(2, 3, 8).map_err(|e| e.to_string())?;
    let got: Vec<(Vec<Rational>, Rational)> = corners
        .iter()
        .map(|c| (c.allocation.entries().to_vec(), c.rate.clone()))
        .collect();
    let want = vec![
        (vec![q(7, 1), q(7, 1)], q(4, 7)),
        (vec![q(8, 1), q(6, 1)], q(4, 7)),
        (vec![q(12, 1), q(4, 1)], q(1, 2)),
        (vec![q(24, 1), q(0, 1)], q(1, 3)),
    ];
    ensure(got == want, || format!("corners {got:?}"))?;
    Ok("(7,7) (8,6) (12,4) (24,0) with rates 4/7 4/7 1/2 1/3".into())
}

/// A strictly faster server never gets fewer bits.
fn ordered(config: &ExactConfig, d: &DownloadAllocation<Rational>) -> bool {
    let mus = config.mus();
    let e = d.entries();
    (0..mus.len()).all(|i| (0..mus.len()).all(|j| mus[i] >= mus[j] || e[i] >= e[j]))
}

fn random_rate(rng: &mut ChaCha8Rng, lo: &Rational, hi: &Rational) -> Rational {
    let k = rng.random_range(0..=840i64);
    lo + (hi - lo) * q(k, 840)
}

fn peak_closed_form_lp_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (lo, hi) = (q(1, 3), q(4, 7));
    let mut on_grid = 0;
    let trials = 200;
    for i in 0..trials {
        let mus = [
            q(rng.random_range(1..=40), rng.random_range(1..=8)),
            q(rng.random_range(1..=40), rng.random_range(1..=8)),
        ];
        let r = match i {
            0 => lo.clone(),
            1 => hi.clone(),
            2 => q(1, 2),
            _ => random_rate(&mut rng, &lo, &hi),
        };
        let c = exact_config(
            3,
            8,
            &[(mus[0].clone(), q(1, 1)), (mus[1].clone(), q(2, 1))],
            r.clone(),
        );
        let cf = solve_peak_n2m3(&c).map_err(|e| e.to_string())?;
        let lp = solve_peak_lp(&c).map_err(|e| e.to_string())?;
        ensure(
            cf.allocation == lp.allocation && cf.objective == lp.objective,
            || {
                format!(
                    "mu {mus:?} r {r}: closed form {} vs LP {}",
                    cf.allocation, lp.allocation
                )
            },
        )?;
        ensure(ordered(&c, &cf.allocation), || {
            format!("ordering violated at {}", cf.allocation)
        })?;
        let h = c.l() / q(32, 1);
        let oracle = grid_search(&c, Metric::Peak, &h).map_err(|e| e.to_string())?;
        let grid_point = cf
            .allocation
            .entries()
            .iter()
            .all(|v| (v / &h).is_integer());
        if grid_point {
            on_grid += 1;
            ensure(oracle.objective == cf.objective, || {
                format!(
                    "mu {mus:?} r {r}: oracle {} solver {}",
                    oracle.objective, cf.objective
                )
            })?;
        } else {
            let slack = lipschitz_slack(&c, Metric::Peak, &h);
            let gap = (oracle.objective.clone() - cf.objective.clone()).to_f64();
            ensure(gap >= 0.0 && gap <= slack, || {
                format!("off-grid gap {gap} slack {slack}")
            })?;
        }
    }
    Ok(format!(
        "{trials} configs, closed form = LP exactly, oracle gap 0 on {on_grid} on-grid optima"
    ))
}

trait ToF64 {
    fn to_f64(&self) -> f64;
}

impl ToF64 for Rational {
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap()
    }
}

fn ordering_and_symmetry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for _ in 0..60 {
        let n = rng.random_range(2..=4usize);
        let m = rng.random_range(2..=3usize);
        let stats: Vec<(Rational, Rational)> = (0..n)
            .map(|_| {
                (
                    q(rng.random_range(1..=20), rng.random_range(1..=4)),
                    q(1, 1),
                )
            })
            .collect();
        let cap = pir_capacity(n, m);
        let r = random_rate(&mut rng, &q(1, m as i64), &cap);
        let c = exact_config(m, 12, &stats, r);
        let s = solve_peak(&c).map_err(|e| e.to_string())?;
        ensure(ordered(&c, &s.allocation), || {
            format!("N={n} M={m} mus {:?}: {}", c.mus(), s.allocation)
        })?;
        checked += 1;
    }

    for (n, m, l) in [
        (2usize, 3usize, 8u64),
        (3, 3, 27),
        (3, 3, 72),
        (3, 2, 10),
        (4, 3, 64),
    ] {
        let each = q(l as i64, 1) / (pir_capacity(n, m) * q(n as i64, 1));
        let stats = vec![(q(3, 2), q(5, 1)); n];
        let cap = pir_capacity(n, m);
        let c = exact_config(m, l, &stats, cap.clone());
        let peak = solve_peak(&c).map_err(|e| e.to_string())?;
        ensure(peak.allocation.entries().iter().all(|v| *v == each), || {
            format!("peak N={n} M={m}: {} instead of {each}", peak.allocation)
        })?;
        for r in [cap.clone(), q(1, m as i64)] {
            let f = float_config(m, l, &vec![1.5; n], &vec![5.0; n], r.to_f64());
            let avg = solve_avg(&f).map_err(|e| e.to_string())?;
            let target = each.to_f64();
            ensure(
                avg.allocation
                    .entries()
                    .iter()
                    .all(|v| (v - target).abs() <= 1e-12 * target),
                || format!("avg N={n} M={m} r={r}: {}", avg.allocation),
            )?;
        }
    }
    let eg = q(13 * 72, 27);
    Ok(format!(
        "ordering on {checked} random peak optima; symmetric d = L/(N C_PIR) for both metrics, e.g. (7,7) and {eg} at L=72"
    ))
}

fn avg_vs_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 3];
    let mut branches = std::collections::BTreeMap::new();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut total = 0;
    let mut case = |mus: [f64; 2], vars: [f64; 2], r: f64, class: usize| -> Result<(), String> {
        let c = float_config(3, 8, &mus, &vars, r);
        let s = solve_avg(&c).map_err(|e| format!("{mus:?} {vars:?} {r}: {e}"))?;
        let h = c.l() / 64.0;
        let oracle = grid_search(&c, Metric::Average, &h).map_err(|e| e.to_string())?;
        let slack = lipschitz_slack(&c, Metric::Average, &h);
        let alpha = s.idealized_objective;
        let recomputed = avg_aoi(c.servers(), &s.allocation).map_err(|e| e.to_string())?;
        ensure((recomputed - alpha).abs() <= 1e-9 * alpha, || {
            "objective mismatch".into()
        })?;
        ensure(timely_pir::capacity::feasible(&s.allocation, &c), || {
            format!("{mus:?} {vars:?} r={r}: infeasible {}", s.allocation)
        })?;
        let scale = 1e-9 * (1.0 + oracle.objective.abs());
        ensure(alpha <= oracle.objective + slack + scale, || {
            format!(
                "{mus:?} {vars:?} r={r}: solver {alpha} above oracle {} + slack {slack}",
                oracle.objective
            )
        })?;
        ensure(alpha >= oracle.objective - slack - scale, || {
            format!("{mus:?} {vars:?} r={r}: solver {alpha} below certified bound")
        })?;
        // the grid minimum is attained at feasible points, so an optimal solver is never above it
        ensure(alpha <= oracle.objective + scale, || {
            format!(
                "{mus:?} {vars:?} r={r}: solver {alpha} above grid minimum {}",
                oracle.objective
            )
        })?;
        worst_gap = worst_gap.max(alpha - oracle.objective);
        counts[class] += 1;
        *branches.entry(s.branch.to_string()).or_insert(0) += 1;
        total += 1;
        Ok(())
    };
    let rate = |rng: &mut ChaCha8Rng| 1.0 / 3.0 + (4.0 / 7.0 - 1.0 / 3.0) * rng.random::<f64>();
    // distinct means
    for i in 0..30 {
        let m1 = rng.random_range(0.5..4.0);
        let m2 = m1 + rng.random_range(0.1..4.0);
        let (v1, v2) = if i % 2 == 0 {
            (rng.random_range(2.0..12.0), rng.random_range(0.0..2.0))
        } else {
            (rng.random_range(0.0..3.0), rng.random_range(0.0..6.0))
        };
        let (mus, vars) = if i % 3 == 0 {
            ([m2, m1], [v2, v1])
        } else {
            ([m1, m2], [v1, v2])
        };
        let r = if i % 5 == 0 {
            1.0 / 3.0
        } else {
            rate(&mut rng)
        };
        case(mus, vars, r, 0)?;
    }
    // variances chosen so the unclamped stationary point sits inside the feasible range
    for _ in 0..8 {
        let m1 = rng.random_range(0.5..2.0);
        let m2 = m1 + rng.random_range(0.5..2.0);
        let delta = m2 - m1;
        let total = 16.0;
        let s = m1 * total + rng.random_range(0.4..0.6) * delta * total;
        let k = 3.0 * delta * s * s / total;
        let v2 = rng.random_range(0.0..1.0);
        let v1 = (k + v2 * m1) / m2;
        case([m1, m2], [v1, v2], rate(&mut rng), 0)?;
    }
    // equal means
    for i in 0..12 {
        let m = rng.random_range(0.5..4.0);
        let vars = [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)];
        let r = if i % 4 == 0 {
            1.0 / 3.0
        } else {
            rate(&mut rng)
        };
        case([m, m], vars, r, 1)?;
    }
    // lowest rate with a clearly faster server: all traffic on one server
    for _ in 0..12 {
        let m1 = rng.random_range(0.5..2.0);
        let m2 = m1 * rng.random_range(3.0..8.0);
        let vars = [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
        case([m1, m2], vars, 1.0 / 3.0, 2)?;
    }
    ensure(
        branches.get("single-server").copied().unwrap_or(0) > 0,
        || format!("no single-server optimum among {branches:?}"),
    )?;
    ensure(branches.get("equal-mean").copied().unwrap_or(0) > 0, || {
        "no equal-mean case".into()
    })?;
    for b in ["interior", "boundary"] {
        ensure(branches.get(b).copied().unwrap_or(0) > 0, || {
            format!("no {b} case among {branches:?}")
        })?;
    }
    Ok(format!(
        "{total} configs ({} distinct-mean, {} equal-mean, {} lowest-rate), branches {branches:?}, max solver - grid = {worst_gap:.2e}",
        counts[0], counts[1], counts[2]
    ))
}

fn analytic_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_deriv: f64 = 0.0;
    let mut worst_trip: f64 = 0.0;
    let mut points = 0;
    for _ in 0..100 {
        let m1 = rng.random_range(0.5..4.0);
        let m2 = m1 + rng.random_range(0.1..4.0);
        let v2 = rng.random_range(0.0..3.0);
        // K = σ₁²μ₂ − σ₂²μ₁ > 0 so the stationary point is real
        let v1 = v2 * m1 / m2 + rng.random_range(0.1..8.0);
        let l = rng.random_range(4..=64u64);
        let c = float_config(3, l, &[m1, m2], &[v1, v2], 1.0 / 3.0);
        for k in 0..=10 {
            let total = c.l() * (1.75 + 1.25 * k as f64 / 10.0);
            let p = inner_solution(total, &c).map_err(|e| e.to_string())?;
            let f = |t: f64| inner_objective(total, t, &c).unwrap();
            let h = 1e-5 * p.t;
            let deriv = (f(p.t + h) - f(p.t - h)) / (2.0 * h);
            let rel = deriv.abs() / (f(p.t) / p.t);
            worst_deriv = worst_deriv.max(rel);
            ensure(rel < 1e-6, || format!("derivative {deriv} at D={total}"))?;
            points += 1;
        }
        for _ in 0..10 {
            let d: Vec<f64> = (0..2)
                .map(|_| rng.random_range(0.0..(3 * l) as f64))
                .collect();
            if d.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let d = DownloadAllocation::new(d).unwrap();
            let back = TransformedPoint::from_allocation(&d, &[m1, m2])
                .and_then(|p| p.to_allocation())
                .map_err(|e| e.to_string())?;
            let err = d
                .entries()
                .iter()
                .zip(back.entries())
                .map(|(a, b)| (a - b).abs() / d.total())
                .fold(0.0, f64::max);
            worst_trip = worst_trip.max(err);
            ensure(err < 1e-12, || format!("round trip error {err}"))?;
        }
    }
    Ok(format!(
        "{points} stationary points, worst relative derivative {worst_deriv:.1e}; worst round-trip error {worst_trip:.1e}"
    ))
}

fn simulator_agreement() -> Check {
    let config = float_config(3, 8, &[1.0, 2.0], &[0.0, 0.0], 1.0 / 3.0);
    let policy = MixturePolicy::degenerate(DownloadAllocation::new(vec![8.0, 6.0]).unwrap());
    let det: Vec<DelayDistribution> = config
        .servers()
        .iter()
        .map(|s| DelayDistribution::from_stats(s, Some(Family::Deterministic)).unwrap())
        .collect();
    let r = sim::run(&policy, &config, &det, 10_000, 1).map_err(|e| e.to_string())?;
    let d = DownloadAllocation::new(vec![8.0, 6.0]).unwrap();
    let want_peak = peak_aoi(config.servers(), &d).unwrap();
    ensure(r.empirical_peak == 40.0 && want_peak == 40.0, || {
        format!("deterministic peak {}", r.empirical_peak)
    })?;
    ensure(r.empirical_avg == 30.0, || {
        format!("deterministic avg {}", r.empirical_avg)
    })?;

    let config = float_config(3, 8, &[1.0, 2.0], &[4.0, 1.0], 1.0 / 3.0);
    let gamma: Vec<DelayDistribution> = config
        .servers()
        .iter()
        .map(|s| DelayDistribution::from_stats(s, Some(Family::Gamma)).unwrap())
        .collect();
    let peak = peak_aoi(config.servers(), &d).unwrap();
    let avg = avg_aoi(config.servers(), &d).unwrap();
    ensure(
        (peak - 40.0).abs() < 1e-12 && (avg - 30.95).abs() < 1e-12,
        || format!("targets {peak} {avg}"),
    )?;
    let runs = sim::replications(&policy, &config, &gamma, 1_000_000, 1000, 100)
        .map_err(|e| e.to_string())?;
    let peak_ok = runs
        .iter()
        .filter(|r| (r.empirical_peak - peak).abs() <= 3.0 * r.peak_se)
        .count();
    let avg_ok = runs
        .iter()
        .filter(|r| (r.empirical_avg - avg).abs() <= 3.0 * r.avg_se)
        .count();
    ensure(peak_ok >= 95 && avg_ok >= 95, || {
        format!("within 3 se: peak {peak_ok}/100, avg {avg_ok}/100")
    })?;
    Ok(format!(
        "deterministic 40 / 30 exact; gamma 100 x 10^6 epochs within 3 se: peak {peak_ok}/100, avg {avg_ok}/100"
    ))
}

fn tradeoff_curve() -> Check {
    let c = exact_config(
        3,
        72,
        &[(q(1, 1), q(10, 1)), (q(5, 1), q(5, 1)), (q(10, 1), q(1, 1))],
        q(1, 3),
    );
    let grid = linspace(&q(1, 3), &q(9, 13), 20);
    let rows = tradeoff_rows(&c, &grid).map_err(|e| e.to_string())?;
    let peaks: Vec<Rational> = rows
        .iter()
        .map(|r| timely_pir::config::parse_rational(&r.peak).unwrap())
        .collect();
    for w in peaks.windows(2) {
        ensure(w[0] <= w[1], || {
            format!("peak curve decreases: {} -> {}", w[0], w[1])
        })?;
    }
    for w in rows.windows(2) {
        let tol = 1e-9 * w[0].avg_idealized;
        ensure(w[0].avg_idealized <= w[1].avg_idealized + tol, || {
            format!(
                "avg curve decreases at r_min {}: {} -> {}",
                w[1].r_min, w[0].avg_idealized, w[1].avg_idealized
            )
        })?;
    }
    let mut max_gap: f64 = 0.0;
    for r in &rows {
        ensure(r.avg_mixture >= r.avg_idealized * (1.0 - 1e-12), || {
            format!("mixture below idealized at {}", r.r_min)
        })?;
        ensure(r.avg_gap < 0.10, || {
            format!("gap {} at {}", r.avg_gap, r.r_min)
        })?;
        max_gap = max_gap.max(r.avg_gap);
    }
    Ok(format!(
        "20 rates on [1/3, 9/13]: peak {} .. {}, avg {:.2} .. {:.2}, both non-decreasing, max mixture gap {:.2}%",
        peaks[0],
        peaks[19],
        rows[0].avg_idealized,
        rows[19].avg_idealized,
        100.0 * max_gap
    ))
}

fn edge_formula_regressions() -> Check {
    let l = q(8, 1);
    for (a, b) in [(1, 1), (1, 3), (2, 5), (7, 9), (3, 2)] {
        let (mu1, mu2) = (q(a, 1), q(b, 1));
        let v = regime_one_peak(&l, &q(4, 7), &mu1, &mu2);
        let want = q(16, 1) * &mu1 + q(12, 1) * &mu2;
        ensure(v == want, || format!("mu ({a},{b}): {v} vs {want}"))?;
    }
    for r in [q(1, 2), q(13, 25), q(4, 7)] {
        let d = regime_one_point(&l, &r)
            .map_err(|e| e.to_string())?
            .expected_allocation();
        ensure(*d.total() == &l / &r, || {
            format!("E[D] = {} at r = {r}", d.total())
        })?;
    }
    Ok("edge formula gives 16 mu1 + 12 mu2 at 4/7; E[D] = L/r_min at 1/2, 13/25, 4/7".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("capacity exactness", capacity_exactness),
        ("corner recovery", corner_recovery),
        (
            "peak closed form vs LP vs oracle",
            peak_closed_form_lp_oracle,
        ),
        ("ordering and symmetric allocation", ordering_and_symmetry),
        ("average-age solver vs oracle", avg_vs_oracle),
        (
            "stationary point and transform identities",
            analytic_identities,
        ),
        ("simulator agreement", simulator_agreement),
        ("three-server tradeoff curve", tradeoff_curve),
        ("edge formula regressions", edge_formula_regressions),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.1}s) {why}", i + 1)
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
