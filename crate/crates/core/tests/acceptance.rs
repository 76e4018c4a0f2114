//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use stable_rank::exact2d::{get_next_2d, ray_sweep, verify_2d};
use stable_rank::exactmd::{ArrangementState, MdOptions};
use stable_rank::geometry::rotation_matrix;
use stable_rank::randomized::{expected_samples_to_observe, MonteCarloState};
use stable_rank::sampler::{build_cap_cdf, cdf_3d, inverse_cdf_3d, sample_u, RoiSampler};
use stable_rank::{
    generate_synthetic, rank, AngleInterval, Dataset, Ranking, RegionOfInterest, ResultMode, RngStream, SyntheticMode,
    WeightVector,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

/// Absolute tolerance on quoted four-digit reference values.
const GOLDEN_TOL: f64 = 1e-3;
const WIDTH_SUM_TOL: f64 = 1e-9;
/// Agreement between the exact 2D result and the angle-grid oracle.
const GRID_ORACLE_TOL: f64 = 1e-5;
const RANK_TIME_LIMIT: Duration = Duration::from_millis(1);
const SKYLINE_ESTIMATE_TOL: f64 = 0.01;
const CAP_FRACTION_TOL: f64 = 0.005;
const ORTHOGONALITY_TOL: f64 = 1e-10;
/// Binomial standard deviations allowed between engines.
const SIGMA_MULT: f64 = 3.0;
const MIN_COVERAGE: f64 = 0.92;
const FIRST_HIT_REL_TOL: f64 = 0.1;
const SWEEP_TIME_LIMIT: Duration = Duration::from_secs(30);
const RANDOM_TIME_LIMIT: Duration = Duration::from_secs(300);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn toy() -> Dataset<f64> {
    Dataset::from_rows(&[
        ("t1", &[0.63, 0.71]),
        ("t2", &[0.83, 0.65]),
        ("t3", &[0.58, 0.78]),
        ("t4", &[0.70, 0.68]),
        ("t5", &[0.53, 0.82]),
    ])
    .unwrap()
}

fn skyline() -> Dataset<f64> {
    Dataset::from_rows(&[
        ("t1", &[1.0, 0.0]),
        ("t2", &[0.99, 0.99]),
        ("t3", &[0.98, 0.98]),
        ("t4", &[0.97, 0.97]),
        ("t5", &[0.0, 1.0]),
    ])
    .unwrap()
}

fn ranking(ids: &[&str]) -> Ranking {
    Ranking { order: ids.iter().map(|s| s.to_string()).collect() }
}

/// Fraction of a midpoint grid over `[0, pi/2]` where `pred` holds.
fn grid_fraction(points: usize, mut pred: impl FnMut(&[f64]) -> bool) -> f64 {
    let step = FRAC_PI_2 / points as f64;
    let hits = (0..points)
        .filter(|&i| {
            let (s, c) = ((i as f64 + 0.5) * step).sin_cos();
            pred(&[c, s])
        })
        .count();
    hits as f64 / points as f64
}

fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn toy_golden() -> Check {
    let ds = toy();
    let target = ranking(&["t2", "t4", "t3", "t5", "t1"]);
    let w = WeightVector::from_f64(&[1.0, 1.0]).map_err(err)?;
    let start = Instant::now();
    let r = rank(&ds, &w).map_err(err)?;
    let elapsed = start.elapsed();
    ensure(r == target, format!("rank(<1,1>) = {r}"))?;
    ensure(elapsed < RANK_TIME_LIMIT, format!("rank took {elapsed:?}"))?;

    let heap = ray_sweep(&ds, AngleInterval::quadrant()).map_err(err)?;
    ensure(heap.len() == 11, format!("{} regions", heap.len()))?;
    let total: f64 = heap.intervals().map(|i| i.width()).sum();
    ensure((total - FRAC_PI_2).abs() <= WIDTH_SUM_TOL, format!("widths sum to {total}"))?;

    let region = verify_2d(&ds, &target, None).map_err(err)?.feasible().ok_or("verify: infeasible")?;
    let (lo, hi) = (region.interval.lo, region.interval.hi);
    ensure((lo - 0.7378).abs() <= GOLDEN_TOL && (hi - 0.8761).abs() <= GOLDEN_TOL, format!("interval ({lo}, {hi})"))?;
    ensure((region.stability - 0.0880).abs() <= GOLDEN_TOL, format!("stability {}", region.stability))?;
    let grid = grid_fraction(1_000_000, |w| Ranking::from_indices(&ds, &ds.rank_indices(w)) == target);
    ensure((grid - region.stability).abs() <= GRID_ORACLE_TOL, format!("grid oracle {grid}"))?;

    let mut heap = heap;
    let seq: Vec<f64> = (0..3).filter_map(|_| get_next_2d(&mut heap, &ds)).map(|n| n.stability).collect();
    for (got, want) in seq.iter().zip([0.3948, 0.1444, 0.1015]) {
        ensure((got - want).abs() <= GOLDEN_TOL, format!("get-next sequence {seq:?}"))?;
    }
    Ok(format!(
        "rank {elapsed:?}, 11 regions, verify ({lo:.4}, {hi:.4}) S={:.4} grid={grid:.4}, get-next {:.4} {:.4} {:.4}",
        region.stability, seq[0], seq[1], seq[2]
    ))
}

fn skyline_suite() -> Check {
    let ds = skyline();
    let sampler = RoiSampler::new(RegionOfInterest::full(2)).map_err(err)?;
    let mut state = MonteCarloState::new(ResultMode::TopkSet(3), 2024);
    let r = state.get_next_fixed_budget(&ds, &sampler, 100_000, 0.05).map_err(err)?.ok_or("no result")?;
    ensure(r.key.members() == ["t2", "t3", "t4"], format!("top-3 {:?}", r.key.members()))?;
    let grid = grid_fraction(1_000_000, |w| {
        let mut top: Vec<&str> = ds.top_indices(w, 3).into_iter().map(|i| ds.id(i)).collect();
        top.sort();
        top == ["t2", "t3", "t4"]
    });
    ensure((grid - 0.9607).abs() <= GOLDEN_TOL, format!("grid oracle {grid}"))?;
    let s = r.estimate.value;
    ensure((s - 0.9607).abs() <= SKYLINE_ESTIMATE_TOL, format!("estimate {s}"))?;
    Ok(format!("{{t2,t3,t4}} S={s:.4} (grid {grid:.4})"))
}

fn sampler_suite() -> Check {
    let x = inverse_cdf_3d(0.13, PI / 20.0);
    ensure((x - PI / 55.5).abs() <= GOLDEN_TOL, format!("inverse cdf {x}"))?;

    let theta = PI / 20.0;
    let axis = [1.0 / 3f64.sqrt(); 3];
    let mut rng = RngStream::new(5);
    let n = 100_000;
    let inside = (0..n)
        .filter(|_| {
            let w = sample_u::<f64>(3, &mut rng);
            let c: f64 = w.as_slice().iter().zip(&axis).map(|(a, b)| a * b).sum();
            c.min(1.0).acos() <= theta
        })
        .count();
    let frac = inside as f64 / n as f64;
    let expected = 4.0 * (1.0 - theta.cos());
    ensure((frac - expected).abs() <= CAP_FRACTION_TOL, format!("cap fraction {frac} vs {expected}"))?;

    let gamma = 10_000;
    let table = build_cap_cdf(3, theta, gamma).map_err(err)?;
    let eps = theta / gamma as f64;
    let dev =
        table.values().iter().enumerate().map(|(i, &l)| (l - cdf_3d(i as f64 * eps, theta)).abs()).fold(0.0, f64::max);
    ensure(dev <= 1.0 / gamma as f64, format!("table deviation {dev}"))?;

    let mut worst = 0.0f64;
    for d in 3..=5 {
        for _ in 0..100 {
            let rho: Vec<f64> = (0..d - 1).map(|_| rng.uniform_in(0.0, FRAC_PI_2)).collect();
            let m = rotation_matrix(&rho);
            for i in 0..d {
                for j in 0..d {
                    let dot: f64 = (0..d).map(|k| m[k][i] * m[k][j]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot - id).abs());
                }
            }
        }
    }
    ensure(worst <= ORTHOGONALITY_TOL, format!("orthogonality error {worst:e}"))?;
    Ok(format!("x={x:.5}, cap fraction {frac:.4}, table dev {dev:.2e}, |M^T M - I| {worst:.1e}"))
}

fn cross_engine() -> Check {
    const N: u64 = 100_000;
    let modes = [SyntheticMode::Independent, SyntheticMode::Correlated, SyntheticMode::AntiCorrelated];
    let mut exact_matches = 0;
    let mut worst_z = 0.0f64;
    for seed in 0..20u64 {
        let n = 8 + 3 * (seed as usize % 5);
        let ds = generate_synthetic::<f64>(n, 2, modes[seed as usize % 3], seed).map_err(err)?;
        let roi = RegionOfInterest::full(2);
        let mut heap = ray_sweep(&ds, AngleInterval::quadrant()).map_err(err)?;
        let exact: Vec<(Ranking, f64)> =
            (0..3).filter_map(|_| get_next_2d(&mut heap, &ds)).map(|r| (r.ranking, r.stability)).collect();

        let draw_seed = 1000 + seed;
        let mut md =
            ArrangementState::new(&ds, roi.clone(), N as usize, draw_seed, MdOptions::default()).map_err(err)?;
        let sampler = RoiSampler::new(roi).map_err(err)?;
        let mut mc = MonteCarloState::new(ResultMode::Full, draw_seed);
        let mut engines: [Vec<(Ranking, f64)>; 2] = [Vec::new(), Vec::new()];
        for i in 0..exact.len() {
            let m = md.get_next_md(&ds).map_err(err)?.ok_or("md exhausted early")?;
            engines[0].push((m.ranking, m.stability.value));
            let budget = if i == 0 { N } else { 1 };
            let r =
                mc.get_next_fixed_budget(&ds, &sampler, budget, 0.05).map_err(err)?.ok_or("random exhausted early")?;
            engines[1].push((Ranking { order: r.key.members().to_vec() }, r.estimate.value));
        }
        for (name, results) in ["md", "random"].iter().zip(&engines) {
            for (i, ((r, s), (er, es))) in results.iter().zip(&exact).enumerate() {
                let p = verify_2d(&ds, r, None)
                    .map_err(err)?
                    .feasible()
                    .ok_or_else(|| format!("seed {seed}: {name} returned an infeasible ranking"))?
                    .stability;
                worst_z = worst_z.max((s - p).abs() / sigma(p, N).max(1e-12));
                ensure(
                    (s - p).abs() <= SIGMA_MULT * sigma(p, N) + 1e-12,
                    format!("seed {seed} {name} #{i}: estimate {s} vs exact {p}"),
                )?;
                // A different ranking is only acceptable when it is tied with
                // the exact answer at sampling resolution.
                let tie = SIGMA_MULT * (2.0 * es * (1.0 - es) / N as f64).sqrt();
                if r == er {
                    exact_matches += 1;
                } else {
                    ensure((p - es).abs() <= tie, format!("seed {seed} {name} #{i}: {r} (S={p}) vs {er} (S={es})"))?;
                }
            }
        }
    }
    Ok(format!(
        "20 datasets, {exact_matches}/120 positions identical, rest within 3 sigma ties, worst |z| {worst_z:.2}"
    ))
}

fn statistical_suite() -> Check {
    let ds = toy();
    let sampler = RoiSampler::new(RegionOfInterest::full(2)).map_err(err)?;
    let trials = 500;
    let mut covered = 0;
    for seed in 0..trials {
        let mut state = MonteCarloState::new(ResultMode::Full, 10_000 + seed);
        let r = state.get_next_fixed_budget(&ds, &sampler, 1000, 0.05).map_err(err)?.ok_or("no result")?;
        let p = verify_2d(&ds, &Ranking { order: r.key.members().to_vec() }, None)
            .map_err(err)?
            .feasible()
            .ok_or("infeasible")?
            .stability;
        let (s, e) = (r.estimate.value, r.estimate.confidence_error);
        if (s - e..=s + e).contains(&p) {
            covered += 1;
        }
    }
    let coverage = covered as f64 / trials as f64;
    ensure(coverage >= MIN_COVERAGE, format!("coverage {coverage}"))?;

    // B beats A exactly on angles above 3pi/8: a quarter of the quadrant.
    let ds = Dataset::<f64>::from_rows(&[("A", &[1.0, 0.0]), ("B", &[0.0, FRAC_PI_8.tan()])]).map_err(err)?;
    let b = ds.index_of("B").ok_or("B")?;
    let (mean, _) = expected_samples_to_observe(0.25).map_err(err)?;
    let mut total = 0u64;
    for seed in 0..1000 {
        let mut rng = RngStream::new(seed);
        let mut draws = 0u64;
        loop {
            draws += 1;
            let w = sampler.sample(&mut rng).map_err(err)?;
            if ds.rank_indices(w.as_slice())[0] == b {
                break;
            }
        }
        total += draws;
    }
    let empirical = total as f64 / 1000.0;
    ensure((empirical - mean).abs() <= FIRST_HIT_REL_TOL * mean, format!("first-hit mean {empirical} vs {mean}"))?;
    Ok(format!("coverage {coverage:.3}, first-hit mean {empirical:.3} vs {mean}"))
}

fn correlation_check() -> Check {
    let roi = RegionOfInterest::cone(WeightVector::from_f64(&[1.0, 1.0, 1.0]).map_err(err)?, PI / 50.0).map_err(err)?;
    let sampler = RoiSampler::new(roi).map_err(err)?;
    let mut votes = 0;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let mut best = Vec::new();
        for mode in [SyntheticMode::Correlated, SyntheticMode::Independent, SyntheticMode::AntiCorrelated] {
            let ds = generate_synthetic::<f64>(10_000, 3, mode, seed).map_err(err)?;
            let mut state = MonteCarloState::new(ResultMode::TopkSet(10), seed);
            let r = state.get_next_fixed_budget(&ds, &sampler, 5000, 0.05).map_err(err)?.ok_or("no result")?;
            best.push(r.estimate.value);
        }
        if best[0] > best[1] && best[1] > best[2] {
            votes += 1;
        }
        rows.push(format!("{:.3}/{:.3}/{:.3}", best[0], best[1], best[2]));
    }
    ensure(votes >= 3, format!("{votes}/5 seeds ordered: {}", rows.join(" ")))?;
    Ok(format!("{votes}/5 seeds ordered (corr/ind/anti: {})", rows.join(" ")))
}

fn performance() -> Check {
    let ds = generate_synthetic::<f64>(10_000, 2, SyntheticMode::Independent, 1).map_err(err)?;
    let start = Instant::now();
    let heap = ray_sweep(&ds, AngleInterval::quadrant()).map_err(err)?;
    let sweep = start.elapsed();
    ensure(sweep < SWEEP_TIME_LIMIT, format!("ray sweep took {sweep:?}"))?;

    let ds = generate_synthetic::<f64>(100_000, 3, SyntheticMode::Independent, 2).map_err(err)?;
    let sampler = RoiSampler::new(RegionOfInterest::full(3)).map_err(err)?;
    let start = Instant::now();
    let mut state = MonteCarloState::new(ResultMode::TopkSet(10), 3);
    state.get_next_fixed_budget(&ds, &sampler, 5000, 0.05).map_err(err)?.ok_or("no result")?;
    let random = start.elapsed();
    ensure(random < RANDOM_TIME_LIMIT, format!("randomized get-next took {random:?}"))?;
    Ok(format!("ray sweep n=1e4: {sweep:.2?} ({} regions); randomized n=1e5 N=5000: {random:.2?}", heap.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("toy golden suite", toy_golden),
        ("skyline top-3 suite", skyline_suite),
        ("sampler suite", sampler_suite),
        ("cross-engine equivalence", cross_engine),
        ("statistical suite", statistical_suite),
        ("correlation ordering", correlation_check),
        ("performance sanity", performance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{:.1?}]", start.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
