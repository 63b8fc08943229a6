//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits nonzero if any fails.

#[path = "../../core/tests/support/kpr_enum.rs"]
mod kpr_enum;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mgame_core::engine::{Mode, Simulation, StrategyConfig, Trajectory};
use mgame_core::kpr::kpr_run;
use mgame_core::payoff::{infeasibility_scan, log_grid, payoff_curve, verify_no_cheat};
use mgame_core::solver::{lambda_gap, solve_lambda, ASYMPTOTE_GAP, DEFAULT_TOLERANCE};
use mgame_core::stats::{
    self, c_autocorrelation_at, fit_decay_rate, inefficiency_eta, mean_and_stderr, post_reset_magnitudes,
    reset_episodes, s_autocorrelation,
};
use mgame_core::stream_rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn etas(config: &StrategyConfig, seeds: u64, steps: usize) -> Result<Vec<f64>, String> {
    (0..seeds)
        .into_par_iter()
        .map(|s| {
            let traj = Simulation::on_stream(config, s)?.run(steps, false)?;
            inefficiency_eta(&traj.deltas, traj.n)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())
}

/// `(mean, 3·stderr)` bands, checked to be disjoint and increasing.
fn ordered_bands(bands: &[(f64, f64)]) -> Result<(), String> {
    for w in bands.windows(2) {
        let ((m0, s0), (m1, s1)) = (w[0], w[1]);
        ensure(
            m0 + 3.0 * s0 < m1 - 3.0 * s1,
            format!("bands overlap: {m0:.5}±{:.5} vs {m1:.5}±{:.5}", 3.0 * s0, 3.0 * s1),
        )?;
    }
    Ok(())
}

fn table_one() -> Outcome {
    const TABLE: [(u64, &str); 14] = [
        (1, "1.14619"),
        (2, "2.15592"),
        (3, "3.15942"),
        (4, "4.16121"),
        (5, "5.16229"),
        (6, "6.16302"),
        (7, "7.16354"),
        (8, "8.16393"),
        (9, "9.16423"),
        (10, "10.16448"),
        (20, "20.16557"),
        (30, "30.16594"),
        (40, "40.16612"),
        (50, "50.16623"),
    ];
    let start = Instant::now();
    for (delta, want) in TABLE {
        let got = format!("{:.5}", solve_lambda(delta, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?);
        ensure(got == want, format!("delta {delta}: {got} != {want}"))?;
    }
    let took = within(Duration::from_secs(1), start)?;
    Ok(format!("14/14 entries to 5 decimals in {took:.2?}"))
}

fn asymptote() -> Outcome {
    let start = Instant::now();
    let gaps: Vec<f64> = (1..=100).map(lambda_gap).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    for (i, w) in gaps.windows(2).enumerate() {
        ensure(w[1] > w[0], format!("gap not increasing at delta {}", i + 2))?;
    }
    let far = (lambda_gap(500).map_err(|e| e.to_string())? - ASYMPTOTE_GAP).abs();
    ensure(far < 2e-4, format!("|gap(500) - 1/6| = {far:.2e}"))?;
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("gap increasing on 1..=100, |gap(500) - 1/6| = {far:.2e}, {took:.2?}"))
}

fn cheat_proof() -> Outcome {
    let mut worst_bob = 0.0f64;
    let mut min_alice = f64::INFINITY;
    for delta in 1..=100 {
        let lambda = solve_lambda(delta, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
        let r = verify_no_cheat(delta, lambda, 1e-8).map_err(|e| e.to_string())?;
        ensure(r.bob_margin.abs() < 1e-8, format!("delta {delta}: Bob margin {:.2e}", r.bob_margin))?;
        ensure(r.alice_margin > 0.0, format!("delta {delta}: Alice margin {:.2e}", r.alice_margin))?;
        worst_bob = worst_bob.max(r.bob_margin.abs());
        min_alice = min_alice.min(r.alice_margin);
    }
    Ok(format!("max |Bob margin| {worst_bob:.1e}, min Alice margin {min_alice:.4}"))
}

fn payoff_trend() -> Outcome {
    let rows = payoff_curve(50).map_err(|e| e.to_string())?;
    for w in rows.windows(2) {
        ensure(w[1].alice_stay < w[0].alice_stay, format!("alice_stay rises at delta {}", w[1].delta))?;
        ensure(w[1].bob_stay > w[0].bob_stay, format!("bob_stay falls at delta {}", w[1].delta))?;
    }
    let last = rows.last().expect("50 rows");
    ensure(last.alice_stay > 0.5 && last.bob_stay < 0.5, "limits approached from the wrong side")?;
    let (a, b) = ((last.alice_stay - 0.5).abs(), (last.bob_stay - 0.5).abs());
    ensure(
        a < 0.05 && b < 0.05,
        format!("at delta 50: alice_stay {:.4}, bob_stay {:.4}", last.alice_stay, last.bob_stay),
    )?;
    Ok(format!("at delta 50: alice_stay {:.4}, bob_stay {:.4}", last.alice_stay, last.bob_stay))
}

fn marginal_infeasible() -> Outcome {
    let grid = log_grid(0.05, 20.0, 50);
    let r = infeasibility_scan(&grid, 1e-4).map_err(|e| e.to_string())?;
    ensure(grid.len() == 2500, "grid size")?;
    ensure(r.joint_roots == 0, format!("{} joint roots", r.joint_roots))?;
    ensure(r.ordering_violations == 0, format!("{} ordering violations", r.ordering_violations))?;
    ensure(r.min_joint_residual > 1e-4, format!("min joint residual {:.2e}", r.min_joint_residual))?;
    Ok(format!("2500 points, min joint residual {:.4} at {:?}", r.min_joint_residual, r.argmin))
}

fn baseline() -> Outcome {
    let config = StrategyConfig::new(2001, 0.5, 11).with_mode(Mode::Baseline);
    let eta = etas(&config, 1, 100_000)?[0];
    ensure((eta - 1.0).abs() < 0.05, format!("eta {eta:.4}"))?;
    Ok(format!("baseline eta {eta:.4}"))
}

fn efficiency() -> Outcome {
    let start = Instant::now();
    let mut bands = Vec::new();
    let mut detail = Vec::new();
    for eps in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7] {
        let e = etas(&StrategyConfig::new(2001, eps, 21), 20, 10_000)?;
        let worst = e.iter().copied().fold(0.0, f64::max);
        ensure(worst < 0.1, format!("eps {eps}: a run reached eta {worst:.4}"))?;
        let (m, se) = mean_and_stderr(&e);
        if [0.3, 0.5, 0.7].contains(&eps) {
            bands.push((m, se));
            detail.push(format!("{eps}: {m:.4}±{:.4}", 3.0 * se));
        }
    }
    ordered_bands(&bands)?;
    let took = within(Duration::from_secs(60), start)?;
    Ok(format!("every run eta < 0.1 for eps <= 0.7; {} in {took:.1?}", detail.join(", ")))
}

fn runs(n: usize, eps: f64, seeds: u64, steps: usize) -> Result<Vec<Trajectory>, String> {
    let config = StrategyConfig::new(n, eps, 31);
    (0..seeds)
        .into_par_iter()
        .map(|s| Simulation::on_stream(&config, s)?.run(steps, false))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())
}

fn fast_convergence() -> Outcome {
    let trajs = runs(2001, 0.5, 8, 25_000)?;
    let mags: Vec<f64> = trajs.iter().flat_map(post_reset_magnitudes).map(|x| x as f64).collect();
    let scale = 1000f64.powf(0.25);
    let med = stats::median(&mags);
    ensure(
        (0.5 * scale..=2.0 * scale).contains(&med),
        format!("post-reset median |delta| {med} vs M^(eps/2) = {scale:.2}"),
    )?;
    let eps: Vec<f64> = trajs.iter().flat_map(reset_episodes).map(|x| x as f64).collect();
    let ret = stats::median(&eps);
    ensure(ret <= 8.0, format!("median return time {ret}"))?;

    let mut medians = Vec::new();
    let mut means = Vec::new();
    for (n, steps) in [(201, 40_000), (2001, 40_000), (20001, 100_000)] {
        let e: Vec<f64> = runs(n, 0.5, 4, steps)?.iter().flat_map(reset_episodes).map(|x| x as f64).collect();
        ensure(e.len() > 300, format!("only {} episodes at N = {n}", e.len()))?;
        medians.push(stats::median(&e));
        means.push(stats::mean(&e));
    }
    ensure(medians.windows(2).all(|w| w[1] >= w[0]), format!("medians not monotone: {medians:?}"))?;
    ensure(means.windows(2).all(|w| w[1] > w[0]), format!("means not increasing: {means:?}"))?;
    let log_ratio = 20001f64.ln() / 201f64.ln();
    ensure(medians[2] / medians[0] < log_ratio, format!("median growth {medians:?} not sub-logarithmic"))?;
    ensure(means[2] / means[0] < log_ratio, format!("mean growth {means:?} not sub-logarithmic"))?;
    Ok(format!(
        "post-reset median |delta| {med} (M^(eps/2) = {scale:.2}), median return {ret} days; \
         N = 201/2001/20001 medians {medians:?}, means [{:.2}, {:.2}, {:.2}]",
        means[0], means[1], means[2]
    ))
}

fn correlations() -> Outcome {
    let mut detail = Vec::new();
    for eps in [0.3, 0.5, 0.7] {
        let traj = runs(2001, eps, 1, 100_000)?.remove(0);
        let acf = s_autocorrelation(&traj.minority_side, 10).map_err(|e| e.to_string())?;
        ensure(acf[3].abs() < 0.05, format!("eps {eps}: |acf(3)| = {:.4}", acf[3].abs()))?;
        let k = fit_decay_rate(&acf).ok_or(format!("eps {eps}: decay fit failed"))?;
        ensure((1.0..=4.0).contains(&k), format!("eps {eps}: K = {k:.3}"))?;
        detail.push(format!("eps {eps}: acf(3) {:.4}, K {k:.2}", acf[3]));
    }
    let mut c100 = Vec::new();
    for eps in [0.3, 0.5, 0.7] {
        let config = StrategyConfig::new(2001, eps, 41);
        let traj = Simulation::new(&config).and_then(|mut s| s.run(10_000, true)).map_err(|e| e.to_string())?;
        let m = traj.choices.as_ref().expect("recorded");
        c100.push(c_autocorrelation_at(m, &[100]).map_err(|e| e.to_string())?[0]);
    }
    ensure(c100[0] > c100[1] && c100[1] > c100[2], format!("C(100) not decreasing in eps: {c100:?}"))?;
    Ok(format!("{}; C(100) = {:.3}/{:.3}/{:.3}", detail.join("; "), c100[0], c100[1], c100[2]))
}

fn t_wait() -> Outcome {
    let base = StrategyConfig::new(2001, 0.5, 51);
    let (m10, s10) = mean_and_stderr(&etas(&base.clone().with_wait(10), 20, 10_000)?);
    let (m0, s0) = mean_and_stderr(&etas(&base, 20, 10_000)?);
    ordered_bands(&[(m10, s10), (m0, s0)])?;
    Ok(format!("eta(T=10) {m10:.5}±{:.5} < eta(T=0) {m0:.5}±{:.5}", 3.0 * s10, 3.0 * s0))
}

/// Served every day and, over each window of `n` days, at every rank once.
fn fair_cycle(n: usize, seed: u64, days: usize) -> Result<f64, String> {
    let mut rng = stream_rng(seed, 7);
    let (run, mut state) = kpr_run(n, 100_000, &mut rng).map_err(|e| e.to_string())?;
    let day = run.convergence_day.ok_or(format!("N {n} seed {seed}: no convergence"))?;
    ensure(run.utilization.last() == Some(&1.0), "utilization below 1 on the convergence day")?;
    let mut ranks = vec![Vec::with_capacity(days); n];
    for _ in 0..days {
        ensure(
            state.served_count() == n && state.utilization() == 1.0,
            format!("N {n} seed {seed}: someone unserved"),
        )?;
        for (agent, r) in ranks.iter_mut().enumerate() {
            r.push(state.served_rank(agent).expect("served"));
        }
        state.step(&mut rng).map_err(|e| e.to_string())?;
    }
    for r in &ranks {
        let mut count = vec![0u32; n + 1];
        for (t, &k) in r.iter().enumerate() {
            count[k as usize] += 1;
            if t >= n {
                count[r[t - n] as usize] -= 1;
            }
            if t + 1 >= n {
                ensure(count[1..].iter().all(|&c| c == 1), format!("N {n} seed {seed}: unfair window ending day {t}"))?;
            }
        }
    }
    Ok(day as f64)
}

fn kpr() -> Outcome {
    let sizes = [8usize, 16, 32, 64, 128, 256];
    let mut means = Vec::new();
    for &n in &sizes {
        let days: Vec<f64> = (0..200u64).into_par_iter().map(|s| fair_cycle(n, s, 2 * n)).collect::<Result<_, _>>()?;
        means.push(stats::mean(&days));
    }
    ensure(means.windows(2).all(|w| w[1] > w[0]), format!("means not increasing: {means:?}"))?;
    ensure(means.windows(2).all(|w| w[1] / w[0] < 2.0), format!("doubling N doubles the time: {means:?}"))?;
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let (mx, my) = (stats::mean(&xs), stats::mean(&means));
    let sxy: f64 = xs.iter().zip(&means).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = means.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    ensure(r2 > 0.95, format!("linear-in-ln N fit R^2 {r2:.3}"))?;

    let (exact, truncated) = kpr_enum::exact_distribution(2, 20);
    ensure(truncated == 0.0, "N = 2 enumeration truncated")?;
    let seeds = 20_000u64;
    let mut sim: BTreeMap<u64, u64> = BTreeMap::new();
    for s in 0..seeds {
        let (run, _) = kpr_run(2, 1000, &mut stream_rng(s, 0)).map_err(|e| e.to_string())?;
        *sim.entry(run.convergence_day.ok_or("N = 2 did not converge")?).or_default() += 1;
    }
    ensure(sim.keys().eq(exact.keys()), format!("N = 2 support {sim:?} vs {exact:?}"))?;
    for (day, &p) in &exact {
        let f = sim[day] as f64 / seeds as f64;
        let se = (p * (1.0 - p) / seeds as f64).sqrt();
        ensure((f - p).abs() < 4.0 * se, format!("N = 2 day {day}: {f:.4} vs exact {p}"))?;
    }
    Ok(format!(
        "fair cycles for 200 seeds x N in 8..=256; mean days {:?}, R^2 vs ln N {r2:.3}; N = 2 exact {exact:?}",
        means.iter().map(|m| (m * 100.0).round() / 100.0).collect::<Vec<_>>()
    ))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("readable"))
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("out");
    let invocations: [&[&str]; 4] = [
        &["simulate", "--seed", "7", "--steps", "3000", "--stats", "--record-choices", "--tau-max", "50"],
        &["sweep", "--epsilons", "0.3,0.7", "--seeds", "3", "--steps", "500", "--n", "201"],
        &["kpr", "--n", "32", "--seeds", "20"],
        &["solve-lambda", "--delta-max", "10"],
    ];
    let mut files = 0;
    for args in invocations {
        let mut snaps = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(&out);
            let status = Command::new(env!("CARGO_BIN_EXE_mgame"))
                .arg("--out-dir")
                .arg(&out)
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
            snaps.push(snapshot(&out));
        }
        ensure(snaps[0] == snaps[1], format!("{args:?}: outputs differ between runs"))?;
        files += snaps[0].len();
    }
    Ok(format!("{files} files byte-identical across repeated invocations"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("table of lambda(delta)", table_one),
        ("asymptotic gap", asymptote),
        ("cheat-proofness", cheat_proof),
        ("payoff trend", payoff_trend),
        ("marginal-state infeasibility", marginal_infeasible),
        ("baseline calibration", baseline),
        ("efficiency", efficiency),
        ("fast convergence", fast_convergence),
        ("correlations", correlations),
        ("T-wait", t_wait),
        ("KPR", kpr),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match check() {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail} ({:.1?})", i + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {why} ({:.1?})", i + 1, start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
