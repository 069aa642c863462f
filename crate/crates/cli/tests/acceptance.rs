//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Each criterion has a wall-clock budget that counts as part of it.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use feigenlab::conformal::{build_cutoff_measure, check_covariance, grid_cells, AtomicMeasure};
use feigenlab::dimension::{
    box_count_with, box_dimension, dyadic_resolutions, log_correction_fit, scaling_exponent, CellClass, Square,
    DEFAULT_HORIZON,
};
use feigenlab::dynamics::{doubling_limit_at_depth, find_doubling_limit, find_superstable, FamilyMap};
use feigenlab::fibonacci::{
    closest_returns, fibonacci_nest, find_fibonacci_parameter, geometry_diagnostics, GeometryVerdict,
    RealUnimodalMap,
};
use feigenlab::nest::{build_nest, RenormSchedule};
use feigenlab::poincare::{
    bound_delta_cr, closed_form_c0, divergence_diagnostic, poincare_partial_sums, SeriesVerdict, DEFAULT_SLOPE_EPS,
};
use feigenlab::renorm::{solve_cvitanovic, tower_eval};
use feigenlab::stats::{eta_xi_stats, verify_exp_lemma, Sampling, EXP_LEMMA_MAX_C};
use feigenlab::trichotomy::{classify, classify_stability, Regime, DEFAULT_CALIBRATION};
use feigenlab::{Extended, Real};
use num_complex::Complex;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn poincare_oracle() -> Outcome {
    let map = FamilyMap::real(0.0, 2).map_err(err)?;
    let mut worst: f64 = 0.0;
    for r in [2.0, 4.0, 8.0, 16.0] {
        for delta in [0.5, 1.0, 1.5, 2.0] {
            let acc = poincare_partial_sums(&map, Complex::new(r, 0.0), delta, 12, 0.0).map_err(err)?;
            for j in 0..=12 {
                let exact = closed_form_c0(r, delta, j).map_err(err)?;
                let rel = (acc.partial_sums[j] - exact).abs() / exact;
                worst = worst.max(rel);
                ensure(rel <= 1e-10, || format!("r={r} delta={delta} J={j}: relative error {rel:e}"))?;
            }
        }
    }
    Ok(format!("max relative error {worst:.1e}"))
}

fn critical_exponent_bracket() -> Outcome {
    let map = FamilyMap::real(0.0, 2).map_err(err)?;
    let z = Complex::new(4.0, 0.0);
    let diag = |delta: f64| {
        let acc = poincare_partial_sums(&map, z, delta, 16, 0.0).map_err(err)?;
        divergence_diagnostic(&acc, DEFAULT_SLOPE_EPS).map_err(err)
    };
    let low = diag(0.9)?;
    let target = 2f64.powf(0.1);
    ensure(low.verdict == SeriesVerdict::Diverging, || format!("delta=0.9 gave {:?}", low.verdict))?;
    ensure((low.growth - target).abs() <= 0.01, || format!("growth {} vs {target}", low.growth))?;
    let high = diag(1.5)?;
    ensure(high.verdict == SeriesVerdict::Converging, || format!("delta=1.5 gave {:?}", high.verdict))?;
    let b = bound_delta_cr(&map, z, 16, &[0.8, 0.9, 1.1, 1.3, 1.5], 0.0).map_err(err)?;
    ensure(b.low <= 1.0 && 1.0 <= b.high, || format!("bracket [{}, {}] misses 1", b.low, b.high))?;
    ensure(b.high <= 2.0, || format!("upper end {} above 2", b.high))?;
    Ok(format!("growth {:.5} at 0.9, bracket [{}, {}]", low.growth, b.low, b.high))
}

fn conformal_covariance() -> Outcome {
    let map = FamilyMap::real(-2.0, 2).map_err(err)?;
    let mu = build_cutoff_measure(&map, 1.0, 0.1, 12).map_err(err)?;
    let cells = grid_cells(-2.2, 2.2, -0.05, 0.05, 0.05);
    let ok = check_covariance(&mu, 1.0, &cells);
    ensure(ok.checked > 0, || "no interior boxes were checked".into())?;
    ensure(ok.max_residual <= 1e-9, || format!("residual {:e}", ok.max_residual))?;
    let bad = check_covariance(&mu, 1.3, &cells);
    ensure(bad.max_residual > 1e-2, || format!("mismatched residual only {:e}", bad.max_residual))?;
    Ok(format!("residual {:.1e} on {} boxes, {:.3} with delta 1.3", ok.max_residual, ok.checked, bad.max_residual))
}

fn fixed_point_solver() -> Outcome {
    let s20 = solve_cvitanovic::<f64>(2, 20, 1e-10).map_err(err)?;
    let s30 = solve_cvitanovic::<f64>(2, 30, 1e-10).map_err(err)?;
    ensure(s20.residual <= 1e-10, || format!("residual {:e}", s20.residual))?;
    let drift = (s20.alpha.abs() - s30.alpha.abs()).abs();
    ensure(drift <= 1e-8, || format!("|alpha| moved by {drift:e}"))?;
    let mut worst: f64 = 0.0;
    for m in 0..5 {
        for i in 0..64 {
            let t = std::f64::consts::TAU * (i as f64 + 0.25) / 64.0;
            let z = Complex::from_polar(0.6 / s20.alpha.abs().powi(m), t);
            let lhs = tower_eval(&s20, m + 1, z).map_err(err)?;
            let rhs = tower_eval(&s20, m, z * s20.alpha).map_err(err)? / s20.alpha;
            worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
        }
    }
    ensure(worst <= 1e-12, || format!("tower identity off by {worst:e}"))?;
    Ok(format!("alpha {:.12}, residual {:.1e}, drift {drift:.1e}, tower {worst:.1e}", s20.alpha, s20.residual))
}

fn box_dimension_oracles() -> Outcome {
    let window = Square::centered(0.0, 0.0, 4.0);
    let eps = dyadic_resolutions(4.0, 6, 11);
    let mut parts = Vec::new();
    for c in [0.0, -2.0] {
        let t = Instant::now();
        let map = FamilyMap::real(c, 2).map_err(err)?;
        let b = box_dimension(&map, window, &eps, DEFAULT_HORIZON, 4).map_err(err)?;
        ensure((b.slope - 1.0).abs() <= 0.05, || format!("c={c}: dimension {}", b.slope))?;
        ensure(t.elapsed() < Duration::from_secs(60), || format!("c={c} took {:?}", t.elapsed()))?;
        parts.push(format!("c={c}: {:.4}", b.slope));
    }
    let full = box_count_with(window, &eps, |_, _, _| CellClass::Boundary).map_err(err)?;
    ensure((full.slope - 2.0).abs() <= 0.01, || format!("full square: {}", full.slope))?;
    parts.push(format!("square: {:.4}", full.slope));
    Ok(parts.join(", "))
}

fn escape_structure() -> Outcome {
    let c = find_doubling_limit::<f64>(2, 1e-10).map_err(err)?.parameter;
    ensure((c + 1.401_155_189_0).abs() < 1e-10, || format!("doubling limit {c}"))?;
    let nest = build_nest(FamilyMap::real(c, 2).map_err(err)?, &RenormSchedule::doubling(5), 5, 0.5).map_err(err)?;
    let cfg = Sampling { samples: 1_000_000, seed: 2024, horizon: 1000 };
    let rows = eta_xi_stats(&nest, 0, 5, cfg).map_err(err)?;
    ensure(rows.windows(2).all(|w| w[1].eta.value <= w[0].eta.value), || {
        format!("eta not monotone: {:?}", rows.iter().map(|r| r.eta.value).collect::<Vec<_>>())
    })?;
    let rep = verify_exp_lemma(&rows).map_err(err)?;
    ensure(rep.rows.iter().map(|r| r.n).eq(1..=4), || "report does not cover n = 1..4".into())?;
    ensure(rep.feasible && (1.0..=EXP_LEMMA_MAX_C).contains(&rep.constant), || {
        format!("no single constant: C = {}", rep.constant)
    })?;
    let eta: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.eta.value)).collect();
    Ok(format!("eta_0,n = [{}], C = {:.3}", eta.join(", "), rep.constant))
}

fn trichotomy_classifier() -> Outcome {
    let levels = 12;
    let seq = |f: &dyn Fn(f64) -> f64| (1..=levels).map(|m| f(m as f64)).collect::<Vec<f64>>();
    let suites: [(&str, Vec<f64>, Vec<f64>, Regime); 3] = [
        ("lean", seq(&|m| 2f64.powf(-m)), seq(&|_| 0.3), Regime::Lean),
        ("black hole", seq(&|_| 0.3), seq(&|m| 2f64.powf(-m)), Regime::BlackHole),
        ("balanced", seq(&|m| 1.0 / m), seq(&|m| 1.0 / m), Regime::Balanced),
    ];
    let mut slope = f64::NAN;
    for (name, eta, xi, want) in &suites {
        let v = classify(eta, xi, DEFAULT_CALIBRATION).map_err(err)?;
        ensure(v.class == *want, || format!("{name}: got {:?}", v.class))?;
        let all = classify_stability(eta, xi).map_err(err)?;
        ensure(all.iter().all(|u| u.class == *want), || format!("{name}: unstable across calibrations"))?;
        if *want == Regime::Balanced {
            slope = v.inverse_eta_slope.slope;
        }
    }
    ensure((slope - 1.0).abs() <= 0.05, || format!("inverse-eta slope {slope}"))?;
    Ok(format!("three suites stable for C in {{3, 10, 30}}, inverse-eta slope {slope:.4}"))
}

fn parameter_finders() -> Outcome {
    let c2 = find_superstable::<f64>(2, 2, -1.5, -0.5).map_err(err)?;
    ensure((c2 + 1.0).abs() <= 1e-12, || format!("period-2 parameter {c2}"))?;
    let shallow = doubling_limit_at_depth::<Extended>(2, 9).map_err(err)?.parameter;
    let deep = doubling_limit_at_depth::<Extended>(2, 18).map_err(err)?.parameter;
    let shift = (shallow - deep).abs().as_f64();
    ensure(shift <= 1e-10, || format!("limit moved by {shift:e} from depth 9 to 18"))?;
    let ell = Extended::from(2.0);
    let a = find_fibonacci_parameter(ell, 7, Extended::from(0.0)).map_err(err)?;
    let returns = closest_returns(&RealUnimodalMap::new(ell, a).map_err(err)?, 21);
    ensure(returns == [1, 2, 3, 5, 8, 13, 21], || format!("closest returns {returns:?}"))?;
    Ok(format!("c_2 = {c2}, limit shift {shift:.1e}, a = {:.15}", a.as_f64()))
}

fn fibonacci_geometry() -> Outcome {
    let mut parts = Vec::new();
    for (ell, want) in [(2.0, GeometryVerdict::Decaying), (8.0, GeometryVerdict::Bounded)] {
        let nest = fibonacci_nest(Extended::from(ell), 11).map_err(err)?;
        let r = &nest.return_times;
        ensure((2..=8).all(|n| r[n] == r[n - 1] + r[n - 2]), || format!("ell={ell}: return times {r:?}"))?;
        let g = geometry_diagnostics(&nest);
        ensure(g.verdict == want, || format!("ell={ell}: {:?}, ratios {:?}", g.verdict, g.ratios))?;
        let min = g.ratios[3..=10].iter().copied().fold(f64::INFINITY, f64::min);
        if want == GeometryVerdict::Bounded {
            ensure(min >= 0.05, || format!("ell={ell}: min ratio {min}"))?;
        }
        parts.push(format!("ell={ell}: {:?}, min ratio over 3..10 = {min:.4}", g.verdict));
    }
    Ok(parts.join("; "))
}

fn ring_measure(radii: &[f64], law: impl Fn(f64) -> f64) -> AtomicMeasure {
    // Each annulus between consecutive radii carries its mass on a few atoms
    // at the geometric mean radius.
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut points = Vec::new();
    for (i, w) in radii.windows(2).enumerate() {
        let rho = (w[0] * w[1]).sqrt();
        let mass = law(w[0]) - law(w[1]);
        for k in 0..3 {
            points.push((Complex::from_polar(rho, golden * (3 * i + k) as f64), mass / 3.0));
        }
    }
    points.push((Complex::new(0.0, 0.0), law(*radii.last().unwrap())));
    AtomicMeasure::from_points(&points, 1.0, 0.0)
}

fn scaling_regressions() -> Outcome {
    let radii: Vec<f64> = (1..=10).map(|k| 0.5f64.powi(k)).collect();
    let origin = Complex::new(0.0, 0.0);
    let mut worst: f64 = 0.0;
    for sigma in [0.5, 1.0, 1.7, 2.0] {
        let fit = scaling_exponent(&ring_measure(&radii, |r| r.powf(sigma)), origin, &radii).map_err(err)?;
        worst = worst.max((fit.sigma - sigma).abs());
        ensure((fit.sigma - sigma).abs() <= 1e-3, || format!("sigma {sigma}: fitted {}", fit.sigma))?;
    }
    let log_law = |r: f64| r * r * (1.0 / r).ln();
    let lc = log_correction_fit(&ring_measure(&radii, log_law), origin, &radii).map_err(err)?;
    ensure(lc.consistent && lc.fit.r2 >= 0.999, || format!("log correction R² {}", lc.fit.r2))?;
    Ok(format!("max sigma error {worst:.1e}, log-correction R² {:.6}", lc.fit.r2))
}

fn cli(out: &Path, workers: &str, args: &[&str]) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_feigenlab"))
        .arg("--out")
        .arg(out)
        .args(["--workers", workers])
        .args(args)
        .output()
        .map_err(err)?;
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
    text.lines()
        .find_map(|l| l.strip_prefix("run directory: ").map(str::to_owned))
        .ok_or_else(|| "no run directory printed".into())
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let stats: &[&str] = &["stats", "--c", "-1.4011551890", "--levels", "0..4", "--samples", "2e4", "--seed", "7"];
    let measure: &[&str] = &["measure", "--c", "-2", "--depth", "10"];
    let mut compared = 0;
    for args in [stats, measure] {
        let a = cli(&tmp.path().join("w1"), "1", args)?;
        let b = cli(&tmp.path().join("w4"), "4", args)?;
        for name in ["results.csv", "results.json"] {
            let (x, y) = (fs::read(Path::new(&a).join(name)).map_err(err)?, fs::read(Path::new(&b).join(name)).map_err(err)?);
            ensure(x == y, || format!("{} {name} differs between 1 and 4 workers", args[0]))?;
            compared += 1;
        }
        let replay = Command::new(env!("CARGO_BIN_EXE_feigenlab"))
            .args(["--workers", "2", "report", &a, "--replay"])
            .output()
            .map_err(err)?;
        ensure(replay.status.success(), || format!("{} replay: {}", args[0], String::from_utf8_lossy(&replay.stdout)))?;
    }
    Ok(format!("{compared} files identical across worker counts, replays identical"))
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

const CRITERIA: [Criterion; 11] = [
    (1, "Poincaré oracle", 5, poincare_oracle),
    (2, "critical-exponent bracket at c=0", 10, critical_exponent_bracket),
    (3, "conformal covariance", 30, conformal_covariance),
    (4, "fixed-point solver", 20, fixed_point_solver),
    (5, "box-dimension oracles", 180, box_dimension_oracles),
    (6, "escape-stat structure at the doubling limit", 600, escape_structure),
    (7, "trichotomy classifier", 1, trichotomy_classifier),
    (8, "parameter finders", 30, parameter_finders),
    (9, "real Fibonacci geometry", 60, fibonacci_geometry),
    (10, "scaling regressions", 5, scaling_regressions),
    (11, "end-to-end determinism", 600, end_to_end_determinism),
];

fn main() -> ExitCode {
    let mut failed = 0;
    for (id, name, budget, check) in CRITERIA {
        let t = Instant::now();
        let outcome = check();
        let elapsed = t.elapsed();
        let outcome = outcome.and_then(|detail| {
            ensure(elapsed <= Duration::from_secs(budget), || format!("over budget: {elapsed:.2?} > {budget} s"))
                .map(|_| detail)
        });
        match outcome {
            Ok(detail) => println!("PASS  {id:>2} {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {id:>2} {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
