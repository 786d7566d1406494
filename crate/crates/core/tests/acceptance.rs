//! Acceptance criteria; one PASS/FAIL line per criterion.

use std::f64::consts::LN_2;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;

use perceptron_lab::binary_experiment::{
    constraints_for, count_solutions, first_moment_table, run_binary_trials, PerceptronInstance,
};
use perceptron_lab::gardner_derrida::{
    critical_alpha, gd_at, gd_at_half, gd_min, proposition_margin, GdPoint, DEFAULT_OPT_TOL,
};
use perceptron_lab::moment_bounds::annealed_rate;
use perceptron_lab::quadrature::{gaussian_expectation, QuadratureSpec};
use perceptron_lab::seeds;
use perceptron_lab::specfun::{gauss_pdf, gauss_tail, log_gauss_tail};
use perceptron_lab::spherical_experiment::{
    estimate_f_direct, estimate_f_sequential, run_direct_trials, spherical_feasibility, trial_seeds, variance_probe,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    check(
        elapsed <= limit,
        format!("{detail}; {:.2} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn log_tail_identity() -> Outcome {
    let start = Instant::now();
    let gh = gaussian_expectation(log_gauss_tail, &spec()).map_err(|e| e.to_string())?;
    let ad = gaussian_expectation(log_gauss_tail, &QuadratureSpec::adaptive(12.0, 1e-12).unwrap()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let err = (gh.value + 1.0).abs().max((ad.value + 1.0).abs());
    if err > 1e-10 {
        return Err(format!("E[ln H(u)] = {} / {}, error {err:e}", gh.value, ad.value));
    }
    within_time(elapsed, Duration::from_secs(1), format!("max error {err:.2e} over both rules"))
}

fn half_overlap_closed_form() -> Outcome {
    let exact = -0.847 + (1.0 + 0.5f64.ln()) / 2.0;
    let quad = gd_at(GdPoint::new(0.847, 0.5).unwrap(), &spec()).map_err(|e| e.to_string())?;
    let closed = gd_at_half(0.847);
    let term = (1.0 + 0.5f64.ln()) / 2.0;
    let ok = (quad - exact).abs() <= 1e-9
        && (closed - exact).abs() <= 1e-12
        && (exact - (-0.6935735903)).abs() < 1e-10
        && (term - 0.1534264097).abs() < 1e-10
        && format!("{term:.10}").starts_with("0.15342");
    check(
        ok,
        format!(
            "quadrature {quad:.13} (err {:.1e}), closed form {closed:.13} (err {:.1e}), entropy term {term:.10}",
            (quad - exact).abs(),
            (closed - exact).abs()
        ),
    )
}

fn margin_report() -> Outcome {
    let rep = proposition_margin(&spec()).map_err(|e| e.to_string())?;
    let half = -rep.half_overlap_margin;
    let exact = 0.5 * LN_2 - 0.347;
    let minimized = -rep.minimized_margin;
    let ok = (half - exact).abs() <= 1e-8 && minimized <= half && rep.quoted_margin_exceeds_computed;
    check(
        ok,
        format!(
            "GD(.847, 1/2) + ln 2 = {half:.6e}, minimized {minimized:.6e}, quoted {} flagged: {}",
            rep.quoted_margin, rep.quoted_margin_exceeds_computed
        ),
    )
}

fn critical_crossing() -> Outcome {
    let start = Instant::now();
    let alpha = critical_alpha(&spec(), 1e-6).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if (alpha - 0.84655).abs() > 5e-4 {
        return Err(format!("critical alpha {alpha}"));
    }
    within_time(elapsed, Duration::from_secs(10), format!("critical alpha {alpha:.7}"))
}

fn minimizer_location() -> Outcome {
    let e = gd_min(0.847, &spec(), DEFAULT_OPT_TOL).map_err(|e| e.to_string())?;
    check((0.5..=0.51).contains(&e.q_star), format!("q* = {:.6}", e.q_star))
}

fn annealed_degeneracy() -> Outcome {
    let mut rng = seeds::rng(20);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let alpha: f64 = rng.random_range(0.01..1.99);
        let v = gd_at(GdPoint::new(alpha, 0.0).unwrap(), &spec()).map_err(|e| e.to_string())?;
        worst = worst.max((v + alpha * LN_2).abs());
        worst = worst.max((LN_2 + v - annealed_rate(alpha).unwrap()).abs());
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e} over 20 alphas"))
}

fn sweep_reproduction() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("sweep.csv");
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_perceptron-lab"))
        .args(["sweep", "--out"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let mut reader = csv::Reader::from_path(&out).map_err(|e| e.to_string())?;
    let mut minima: Vec<(f64, f64)> = Vec::new();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let alpha: f64 = rec[0].parse().unwrap();
        let bits: f64 = rec[3].parse().unwrap();
        rows += 1;
        match minima.last_mut() {
            Some((a, m)) if *a == alpha => *m = m.min(bits),
            _ => minima.push((alpha, bits)),
        }
    }
    if rows != 999 * 21 || minima.len() != 21 {
        return Err(format!("{rows} rows over {} alphas", minima.len()));
    }
    let monotone = minima.windows(2).all(|w| w[1].1 < w[0].1);
    let crossing = minima.windows(2).find(|w| w[0].1 > -1.0 && w[1].1 <= -1.0).map(|w| (w[0].0, w[1].0));
    let ok = monotone && crossing.is_some_and(|(lo, hi)| lo >= 0.8465 && hi <= 0.8466);
    if !ok {
        return Err(format!("monotone {monotone}, crossing {crossing:?}"));
    }
    let (lo, hi) = crossing.unwrap();
    within_time(
        elapsed,
        Duration::from_secs(120),
        format!("21 minima decreasing, -1 bit crossed in ({lo}, {hi}]"),
    )
}

fn naive_counts(inst: &PerceptronInstance) -> Vec<u64> {
    let (n, m) = (inst.n_dim(), inst.n_constraints());
    let mut counts = vec![0u64; m + 1];
    for mask in 0u64..(1 << n) {
        let sigma: Vec<f64> = (0..n).map(|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let mut t = 0;
        counts[0] += 1;
        while t < m && inst.row(t).iter().zip(&sigma).map(|(a, s)| a * s).sum::<f64>() > 0.0 {
            t += 1;
            counts[t] += 1;
        }
    }
    counts
}

fn binary_first_moment() -> Outcome {
    let start = Instant::now();
    let trials = run_binary_trials(12, 12, 500, 8).map_err(|e| e.to_string())?;
    let table = first_moment_table(12, &trials);
    let worst = table
        .iter()
        .map(|m| if m.mean == m.expected { 0.0 } else { (m.mean - m.expected).abs() / m.stderr })
        .fold(0.0, f64::max);
    if worst > 4.0 {
        return Err(format!("max |z| = {worst:.2}"));
    }
    let mut compared = 0;
    for n in 1..=12 {
        for s in 0..4 {
            let inst = PerceptronInstance::sample(n, n + 2, seeds::derive_seed(n as u64, s)).unwrap();
            if count_solutions(&inst).unwrap().counts != naive_counts(&inst) {
                return Err(format!("Gray-code counts differ from enumeration at N = {n}"));
            }
            compared += 1;
        }
    }
    let caps = run_binary_trials(20, 40, 12, 9).map_err(|e| e.to_string())?;
    let capacity = caps.iter().map(|t| t.report.empirical_capacity_steps as f64 / 20.0).sum::<f64>() / caps.len() as f64;
    let elapsed = start.elapsed();
    if !(0.6..=1.1).contains(&capacity) {
        return Err(format!("empirical capacity {capacity:.3} at N = 20"));
    }
    within_time(
        elapsed,
        Duration::from_secs(120),
        format!("max |z| {worst:.2}; {compared} instances match enumeration; empirical capacity {capacity:.3} at N = 20"),
    )
}

fn spherical_free_energy() -> Outcome {
    let start = Instant::now();
    let gd = gd_min(0.5, &spec(), DEFAULT_OPT_TOL).map_err(|e| e.to_string())?.value;
    let (est, _) = run_direct_trials(20, constraints_for(0.5, 20), 20, 10_000_000, 21).map_err(|e| e.to_string())?;
    let mean = est.iter().map(|e| e.f_hat).sum::<f64>() / est.len() as f64;
    if (mean - gd).abs() > 0.05 {
        return Err(format!("mean f_hat {mean:.4} vs GD(.5) {gd:.4}"));
    }
    let mut worst: f64 = 0.0;
    for t in 0..5 {
        let (inst_seed, mc_seed) = trial_seeds(15, t);
        let inst = PerceptronInstance::sample(15, constraints_for(0.4, 15), inst_seed).unwrap();
        let d = estimate_f_direct(&inst, 2_000_000, mc_seed).map_err(|e| e.to_string())?;
        let s = estimate_f_sequential(&inst, 20_000, mc_seed).map_err(|e| e.to_string())?;
        worst = worst.max((d.f_hat - s.f_hat).abs() / (d.stderr.powi(2) + s.stderr.powi(2)).sqrt());
    }
    if worst > 3.0 {
        return Err(format!("sequential vs direct differ by {worst:.2} combined stderr"));
    }
    let (inst_seed, mc_seed) = trial_seeds(25, 0);
    let inst = PerceptronInstance::sample(25, constraints_for(1.5, 25), inst_seed).unwrap();
    let d = estimate_f_direct(&inst, 1_000_000, mc_seed).map_err(|e| e.to_string())?;
    let s = estimate_f_sequential(&inst, 5_000, mc_seed).map_err(|e| e.to_string())?;
    if !d.truncated || s.truncated {
        return Err(format!("N = 25, alpha = 1.5: direct truncated {}, sequential truncated {}", d.truncated, s.truncated));
    }
    within_time(
        start.elapsed(),
        Duration::from_secs(600),
        format!(
            "mean f_hat {mean:.4} vs GD(.5) {gd:.4}; estimators within {worst:.2} combined stderr; \
             sequential reaches f = {:.3} at alpha 1.5",
            s.f_hat
        ),
    )
}

fn spherical_capacity() -> Outcome {
    let rate = |alpha: f64| -> Result<usize, String> {
        let m = constraints_for(alpha, 40);
        let mut found = 0;
        for s in 0..50 {
            let inst = PerceptronInstance::sample(40, m, seeds::derive_seed(40, s)).unwrap();
            found += spherical_feasibility(&inst, 100_000).map_err(|e| e.to_string())?.is_witness() as usize;
        }
        Ok(found)
    };
    let below = rate(1.0)?;
    let above = rate(3.0)?;
    check(
        below >= 48 && above <= 2,
        format!("witnesses {below}/50 at alpha 1.0, {above}/50 at alpha 3.0"),
    )
}

fn concentration_trend() -> Outcome {
    let probe = variance_probe(0.5, 15, 50, 10_000_000, 30).map_err(|e| e.to_string())?;
    let (Some(small), Some(large)) = (probe.small.variance, probe.large.variance) else {
        return Err("variance unavailable".into());
    };
    let mean_gap = (probe.large.mean - probe.gd_reference).abs();
    check(
        probe.variance_decreases == Some(true) && mean_gap <= 0.05,
        format!(
            "var {small:.3e} at N = 15, {large:.3e} at N = 30 (ratio {:.2}); mean at N = 30 off GD by {mean_gap:.4}",
            small / large
        ),
    )
}

const LOG_TAIL_ORACLE: [(f64, f64); 5] = [
    (-40.0, -0.0),
    (-10.0, -7.619853024160526e-24),
    (0.0, -std::f64::consts::LN_2),
    (10.0, -53.23128515051247),
    (40.0, -804.6084420137538),
];

fn numerical_stability() -> Outcome {
    let mut worst: f64 = 0.0;
    for (x, want) in LOG_TAIL_ORACLE {
        let got = log_gauss_tail(x);
        if !got.is_finite() {
            return Err(format!("ln H({x}) not finite"));
        }
        let rel = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
        worst = worst.max(rel);
    }
    if worst > 1e-9 {
        return Err(format!("relative error {worst:e}"));
    }
    let mut deriv: f64 = 0.0;
    let h = 1e-5;
    for i in 0..=120 {
        let x = -6.0 + 0.1 * i as f64;
        let fd = (log_gauss_tail(x + h) - log_gauss_tail(x - h)) / (2.0 * h);
        deriv = deriv.max((fd + gauss_pdf(x) / gauss_tail(x)).abs());
    }
    check(
        deriv <= 1e-6,
        format!("max relative error {worst:.1e}; derivative identity error {deriv:.1e} on [-6, 6]"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("log-tail expectation identity", log_tail_identity),
        ("half-overlap closed form", half_overlap_closed_form),
        ("margin report", margin_report),
        ("critical crossing", critical_crossing),
        ("minimizer location", minimizer_location),
        ("annealed degeneracy", annealed_degeneracy),
        ("sweep reproduction", sweep_reproduction),
        ("binary first moment", binary_first_moment),
        ("spherical free energy", spherical_free_energy),
        ("spherical capacity trend", spherical_capacity),
        ("concentration trend", concentration_trend),
        ("numerical stability", numerical_stability),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
