//! Acceptance criteria 1-10, one pass/fail line each.
//!
//! Each criterion runs in sequence so the printed runtimes are not skewed by
//! sibling tests; the lines are written straight to stderr so they show up
//! without `--nocapture`.

use std::f64::consts::FRAC_PI_4;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use delayflock::certificates::{
    certify_consensus, certify_flocking, halanay_gamma, halanay_residual, lambert_w, linear_threshold,
    z_closed_form, z_sequence, ScanOptions,
};
use delayflock::dde::InitialHistory;
use delayflock::diagnostics::{
    diameter_series, envelope_check, initial_spread, verify_lemma_inequalities, Block, LemmaOptions, Lyapunov,
    DEFAULT_REFINE,
};
use delayflock::exec::Exec;
use delayflock::influence::InfluenceFunction;
use delayflock::models::{
    random_history, simulate, tabulated_history, ModelKind, ModelSpec, RandomBox, Simulation,
};
use delayflock::spectral::{default_omega_grid, hopf_curve, simulate_toy, window_amplitude, HopfOptions};
use delayflock::sweep::{run_batch, SeededRun};

type Outcome = Result<String, String>;

fn check(cond: bool, what: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, format!("runtime {:.2}s exceeds {limit_s}s", elapsed.as_secs_f64()))
}

fn exit_code(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_delayflock"))
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("exit code")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let tau_star = linear_threshold();
    let from_w = 0.5 * (1.0 - lambert_w(std::f64::consts::E / 2.0).map_err(|e| e.to_string())?);
    check((tau_star - from_w).abs() < 1e-15, format!("threshold {tau_star} != {from_w}"))?;
    check((tau_star - 0.157).abs() <= 5e-3, format!("threshold {tau_star} not within 5e-3 of 0.157"))?;
    let below = exit_code(&["certify-consensus", "--sigma", "0.155", "--tau", "0.155", "--delta-x0", "1"]);
    let above = exit_code(&["certify-consensus", "--sigma", "0.160", "--tau", "0.160", "--delta-x0", "1"]);
    check(below == 0 && above == 1, format!("exit codes {below} at 0.155 and {above} at 0.160"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("tau* = {tau_star:.6}, exits 0 -> 1 across [0.155, 0.160]"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let pts = hopf_curve(0, &default_omega_grid(2000), &HopfOptions::default());
    let elapsed = start.elapsed();
    let hit = pts.iter().find(|p| {
        p.omega == 2.0 && (p.tau - FRAC_PI_4).abs() <= 1e-6 && (p.sigma - FRAC_PI_4).abs() <= 1e-6
    });
    let hit = hit.ok_or("no point at (pi/4, pi/4, omega = 2)")?;
    let worst = hit.residuals().into_iter().fold(0.0, f64::max);
    check(worst <= 1e-9, format!("residual {worst:e} at the pi/4 point"))?;
    let low = pts.iter().filter(|p| p.sigma.min(p.tau) <= 0.5).count();
    check(low == 0, format!("{low} points with min(sigma, tau) <= 1/2"))?;
    within(elapsed, 5.0)?;
    Ok(format!("{} points, pi/4 residual {worst:.1e}", pts.len()))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let stable = simulate_toy(0.4, 0.3, 1e-3, 50.0, None).map_err(|e| e.to_string())?;
    let u50 = stable.sample(50.0).map_err(|e| e.to_string())?[0].abs();
    within(start.elapsed(), 5.0)?;
    check(u50 < 1e-3, format!("|u(50)| = {u50:e} at (0.4, 0.3)"))?;

    let start = Instant::now();
    let unstable = simulate_toy(0.8, 0.8, 1e-3, 50.0, None).map_err(|e| e.to_string())?;
    let early = window_amplitude(&unstable, 10.0, 20.0);
    let late = window_amplitude(&unstable, 30.0, 40.0);
    within(start.elapsed(), 5.0)?;
    check(late >= early, format!("amplitude fell from {early:e} to {late:e} at (0.8, 0.8)"))?;
    Ok(format!("|u(50)| = {u50:.1e}; amplitude {early:.3e} -> {late:.3e}"))
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for sigma in [0.01, 0.1, 0.5, 1.0, 2.0] {
        let rec = z_sequence(sigma, 25).map_err(|e| e.to_string())?;
        for (k, r) in rec.iter().enumerate() {
            let c = z_closed_form(sigma, k as i64);
            worst = worst.max((c - r).abs() / r.abs());
        }
    }
    check(worst <= 1e-10, format!("closed form vs recurrence differ by {worst:e}"))?;
    let z1 = z_closed_form(0.3, 1);
    check(z_closed_form(0.3, 0) == 1.0, "Z^0 != 1".into())?;
    check((z1 - 2.6).abs() <= 1e-14, format!("Z^1 at sigma = 0.3 is {z1}"))?;
    let z2 = z_closed_form(1.0, 2);
    check((z2 - 14.0).abs() <= 1e-12, format!("Z^2 at sigma = 1 is {z2}"))?;
    Ok(format!("max relative gap {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let lin = |lo: f64, hi: f64, n: usize| (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    let alphas: Vec<f64> = lin(0.0, 0.45, 10).collect();
    let gammas: Vec<f64> = lin(0.0, 0.45, 10).collect();
    let etas: Vec<f64> = lin(0.3, 3.0, 10).collect();
    let taus = [0.0, 0.05, 0.1, 0.5, 1.0];
    let dims = [alphas.len(), gammas.len(), etas.len(), taus.len()];
    let mut table = vec![None; dims.iter().product()];
    let idx = |a: usize, g: usize, e: usize, t: usize| ((a * dims[1] + g) * dims[2] + e) * dims[3] + t;
    let (mut solved, mut worst_res) = (0usize, 0.0f64);
    for (ia, &a) in alphas.iter().enumerate() {
        for (ig, &g) in gammas.iter().enumerate() {
            for (ie, &e) in etas.iter().enumerate() {
                for (it, &t) in taus.iter().enumerate() {
                    if a + g >= e {
                        continue;
                    }
                    let gam = halanay_gamma(a, g, e, t).map_err(|err| err.to_string())?;
                    if t == 0.0 {
                        check(gam == e - (a + g), format!("tau = 0 gave {gam}, not {}", e - (a + g)))?;
                    }
                    worst_res = worst_res.max(halanay_residual(gam, a, g, e, t).abs());
                    table[idx(ia, ig, ie, it)] = Some(gam);
                    solved += 1;
                }
            }
        }
    }
    check(worst_res <= 1e-12, format!("worst residual {worst_res:e}"))?;
    // Nonincreasing in alpha, gamma, tau; nondecreasing in eta. Comparisons
    // allow 4 ulp of eta: f carries the term x - eta, so roots are only
    // resolved to that absolute level (it matters where alpha + gamma rounds
    // just below eta and Gamma is ~1e-16).
    let mut breaks = 0;
    for ia in 0..dims[0] {
        for ig in 0..dims[1] {
            for ie in 0..dims[2] {
                for it in 0..dims[3] {
                    let Some(here) = table[idx(ia, ig, ie, it)] else { continue };
                    let ulp = 4.0 * f64::EPSILON * etas[ie];
                    let next = [
                        (ia + 1 < dims[0]).then(|| table[idx(ia + 1, ig, ie, it)]).flatten().map(|v| v <= here + ulp),
                        (ig + 1 < dims[1]).then(|| table[idx(ia, ig + 1, ie, it)]).flatten().map(|v| v <= here + ulp),
                        (ie + 1 < dims[2]).then(|| table[idx(ia, ig, ie + 1, it)]).flatten().map(|v| v >= here),
                        (it + 1 < dims[3]).then(|| table[idx(ia, ig, ie, it + 1)]).flatten().map(|v| v <= here + ulp),
                    ];
                    breaks += next.iter().filter(|ok| **ok == Some(false)).count();
                }
            }
        }
    }
    check(breaks == 0, format!("{breaks} monotonicity breaks"))?;
    within(start.elapsed(), 2.0)?;
    Ok(format!("{solved} grid points, worst residual {worst_res:.1e}"))
}

fn consensus_run() -> Result<(ModelSpec, Simulation, f64), String> {
    let spec = ModelSpec::new(10, 2, 0.1, 0.1, ModelKind::FirstOrder, InfluenceFunction::unit()).map_err(|e| e.to_string())?;
    let bounds = RandomBox { position: [-1.0, 1.0], ..RandomBox::default() };
    let hist = random_history(&spec, 1e-3, 6, &bounds).map_err(|e| e.to_string())?;
    let dx0 = initial_spread(&spec, &hist, Block::Position, DEFAULT_REFINE).map_err(|e| e.to_string())?;
    let sim = simulate(&spec, hist, 1e-3, 50.0).map_err(|e| e.to_string())?;
    Ok((spec, sim, dx0))
}

fn criterion_6(run: &(ModelSpec, Simulation, f64), elapsed: Duration) -> Outcome {
    let start = Instant::now();
    let (spec, sim, dx0) = run;
    let cert = certify_consensus(spec.sigma, spec.tau, *dx0, &spec.influence, &ScanOptions::default(), Exec::default())
        .map_err(|e| e.to_string())?;
    check(cert.is_certified(), format!("not certified: {:?}", cert.reason))?;
    let rate = cert.rates.as_ref().ok_or("missing rates")?.decay_rate;
    check(rate > 0.0, format!("Gamma = {rate}"))?;
    let env = cert.envelope.as_ref().ok_or("missing envelope")?;
    let dx = diameter_series(sim, Block::Position).map_err(|e| e.to_string())?;
    let env_check = envelope_check(&dx, env, 1e-3);
    check(env_check.violations == 0, format!("{} envelope violations, max ratio {}", env_check.violations, env_check.max_ratio))?;
    let cal_z = cert.constants.as_ref().ok_or("missing constants")?.cal_z;
    let f = Lyapunov::new(sim, Block::Position, cert.beta.ok_or("missing beta")?)
        .and_then(|l| l.series())
        .map_err(|e| e.to_string())?;
    let cap = cal_z * dx0;
    let early_max = f.times.iter().zip(&f.values).filter(|(t, _)| **t <= 2.0 * spec.tau).map(|(_, v)| *v).fold(0.0, f64::max);
    check(early_max <= cap, format!("F reaches {early_max} above {cap} on [0, 2 tau]"))?;
    within(elapsed + start.elapsed(), 30.0)?;
    Ok(format!(
        "Gamma = {rate:.4}, {} samples, max ratio {:.3}, F/cap {:.3} on [0, 2 tau]",
        env_check.checked,
        env_check.max_ratio,
        early_max / cap
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let psi = InfluenceFunction::power_law(0.5).map_err(|e| e.to_string())?;
    let spec = ModelSpec::new(5, 2, 0.05, 0.05, ModelKind::SecondOrder, psi).map_err(|e| e.to_string())?;
    let bounds = RandomBox { position: [-1.0, 1.0], velocity: [-0.01, 0.01], ..RandomBox::default() };
    let hist = random_history(&spec, 1e-3, 11, &bounds).map_err(|e| e.to_string())?;
    let dx0 = initial_spread(&spec, &hist, Block::Position, DEFAULT_REFINE).map_err(|e| e.to_string())?;
    let dv0 = initial_spread(&spec, &hist, Block::Velocity, DEFAULT_REFINE).map_err(|e| e.to_string())?;
    let cert = certify_flocking(spec.sigma, spec.tau, dx0, dv0, &spec.influence, &ScanOptions::default(), Exec::default())
        .map_err(|e| e.to_string())?;
    check(cert.is_certified(), format!("not certified: {:?}", cert.reason))?;
    let (beta, c) = (cert.beta.ok_or("missing beta")?, cert.c.ok_or("missing C")?);
    let env = cert.envelope.as_ref().ok_or("missing envelope")?;
    let sim = simulate(&spec, hist, 1e-3, 50.0).map_err(|e| e.to_string())?;
    let dv = diameter_series(&sim, Block::Velocity).map_err(|e| e.to_string())?;
    let env_check = envelope_check(&dv, env, 1e-3);
    check(env_check.violations == 0, format!("{} velocity envelope violations", env_check.violations))?;
    let dx = diameter_series(&sim, Block::Position).map_err(|e| e.to_string())?;
    let cal_z = cert.constants.as_ref().ok_or("missing constants")?.cal_z;
    let drift = (2.0 * c * spec.tau).exp() * cal_z * dv0 / c;
    let sup = dx.values.iter().copied().fold(0.0, f64::max);
    check(sup <= dx.values[0] + drift, format!("sup d_x = {sup} above {}", dx.values[0] + drift))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!("beta = {beta:.4}, C = {c:.4}, max ratio {:.3}, sup d_x {sup:.4} <= {:.4}", env_check.max_ratio, dx.values[0] + drift))
}

fn lemma_config(i: u64) -> SeededRun {
    let n = 3 + (i % 5) as usize;
    let dim = 1 + (i % 3) as usize;
    let tau = 0.03 + 0.11 * ((i * 7) % 20) as f64 / 19.0;
    let sigma = tau * (0.25 + 0.75 * ((i * 3) % 10) as f64 / 9.0);
    let psi = match i % 3 {
        0 => InfluenceFunction::unit(),
        1 => InfluenceFunction::power_law(0.5).unwrap(),
        _ => InfluenceFunction::power_law(1.0).unwrap(),
    };
    let spec = ModelSpec::new(n, dim, sigma, tau, ModelKind::FirstOrder, psi).unwrap();
    let h = (sigma / 4.0).min(1e-3);
    SeededRun { spec, bounds: RandomBox::default(), seed: 100 + i, h, horizon: 5.0 }
}

fn criterion_8(run: &(ModelSpec, Simulation, f64)) -> Outcome {
    let (spec, sim, dx0) = run;
    let cert = certify_consensus(spec.sigma, spec.tau, *dx0, &spec.influence, &ScanOptions::default(), Exec::default())
        .map_err(|e| e.to_string())?;
    let beta = cert.beta.ok_or("missing beta")?;
    let key = ["derivative-bound", "windowed-spread[K=2]"];
    let report = verify_lemma_inequalities(sim, beta, &LemmaOptions::default()).map_err(|e| e.to_string())?;
    for name in key {
        let c = report.get(name).ok_or(format!("missing check {name}"))?;
        check(c.max_violation <= 1e-3, format!("{name}: violation {:e}", c.max_violation))?;
    }

    let runs: Vec<SeededRun> = (0..20).map(lemma_config).collect();
    let results = run_batch(&runs, Exec::default(), |run, sim| {
        let beta = delayflock::certificates::beta_min(run.spec.tau)?;
        verify_lemma_inequalities(sim, beta, &LemmaOptions::default())
    });
    let mut worst: f64 = 0.0;
    for (run, res) in runs.iter().zip(results) {
        let report = res.map_err(|e| format!("seed {}: {e}", run.seed))?;
        for c in report.checks.iter().filter(|c| c.name == "derivative-bound" || c.name.starts_with("windowed-spread")) {
            worst = worst.max(c.max_violation);
            check(c.max_violation <= 1e-3, format!("seed {}: {} violation {:e}", run.seed, c.name, c.max_violation))?;
        }
    }
    Ok(format!("criterion-6 run max violation {:.1e}; 20 seeded runs max {worst:.1e}", report.max_violation()))
}

fn mean(sim: &Simulation, t: f64) -> Vec<f64> {
    let (n, d) = (sim.spec.n_agents, sim.spec.dim);
    let x = sim.positions_at(t).unwrap();
    (0..d).map(|c| (0..n).map(|i| x[i * d + c]).sum::<f64>() / n as f64).collect()
}

fn max_mean_drift(sim: &Simulation) -> f64 {
    let m0 = mean(sim, 0.0);
    sim.traj
        .times()
        .iter()
        .filter(|t| **t >= 0.0)
        .map(|&t| mean(sim, t).iter().zip(&m0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Mean displacement at `T = 50` of the asymmetric regression case, frozen
/// from a run at `h = 1e-3 / 64`.
const FROZEN_DRIFT: f64 = 2.962_962_962_488_657_8e-3;

fn criterion_9() -> Outcome {
    let tol = 1e-6;
    let psi = InfluenceFunction::power_law(1.0).map_err(|e| e.to_string())?;
    let spec = ModelSpec::new(6, 2, 0.1, 0.1, ModelKind::FirstOrder, psi).map_err(|e| e.to_string())?;
    let hist = random_history(&spec, 1e-3, 21, &RandomBox::default()).map_err(|e| e.to_string())?;
    let dx0 = initial_spread(&spec, &hist, Block::Position, DEFAULT_REFINE).map_err(|e| e.to_string())?;
    let sim = simulate(&spec, hist, 1e-3, 50.0).map_err(|e| e.to_string())?;
    let rel = max_mean_drift(&sim) / dx0;
    check(rel <= tol, format!("sigma = tau drift {rel:e}"))?;

    let spec = ModelSpec::new(3, 1, 0.02, 0.1, ModelKind::FirstOrder, InfluenceFunction::unit()).map_err(|e| e.to_string())?;
    let hist = tabulated_history(&spec, vec![-0.1, 0.0], &[vec![0.0, 0.2, 1.2], vec![0.0, 0.2, 1.0]])
        .map_err(|e| e.to_string())?;
    let dx0 = initial_spread(&spec, &hist, Block::Position, DEFAULT_REFINE).map_err(|e| e.to_string())?;
    let sim = simulate(&spec, hist, 1e-3, 50.0).map_err(|e| e.to_string())?;
    let drift = mean(&sim, 50.0)[0] - mean(&sim, 0.0)[0];
    check(drift.abs() / dx0 >= 10.0 * tol, format!("regression drift {drift:e} too small"))?;
    let gap = (drift - FROZEN_DRIFT).abs() / FROZEN_DRIFT;
    check(gap <= 1e-8, format!("regression drift {drift:e} departs from {FROZEN_DRIFT:e} by {gap:e}"))?;
    Ok(format!("sigma = tau drift {rel:.1e}; sigma != tau drift {:.3e} (frozen gap {gap:.1e})", drift / dx0))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let (tau, sigma) = (1.0f64, 0.5f64);
    let end = sigma.min(tau);
    // one shared, finely sampled history so only the step size varies
    let hist = InitialHistory::from_fn_with_derivative(
        tau,
        sigma / 4096.0,
        1,
        |t, out| out[0] = (3.0 * t).cos(),
        |t, out| out[0] = -3.0 * (3.0 * t).sin(),
    )
    .map_err(|e| e.to_string())?;
    let at_end = |h: f64| -> Result<f64, String> {
        let traj = simulate_toy(tau, sigma, h, end, Some(hist.clone())).map_err(|e| e.to_string())?;
        traj.sample(end).map(|v| v[0]).map_err(|e| e.to_string())
    };
    let steps = [sigma / 8.0, sigma / 16.0, sigma / 32.0];
    let reference = at_end(steps[2] / 64.0)?;
    let errs: Vec<f64> = steps.iter().map(|&h| at_end(h).map(|u| (u - reference).abs())).collect::<Result<_, _>>()?;
    let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let p = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    check(p >= 3.5, format!("fitted order {p:.3} (errors {errs:?})"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!("fitted order {p:.3}, errors {:.2e} {:.2e} {:.2e}", errs[0], errs[1], errs[2]))
}

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    let mut report = |n: usize, out: Outcome| {
        let line = match &out {
            Ok(detail) => format!("criterion {n:>2}: PASS  {detail}"),
            Err(why) => format!("criterion {n:>2}: FAIL  {why}"),
        };
        let _ = writeln!(std::io::stderr(), "{line}");
        if out.is_err() {
            failed.push(n);
        }
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    report(5, criterion_5());
    let start = Instant::now();
    let run = consensus_run();
    let elapsed = start.elapsed();
    match &run {
        Ok(run) => {
            report(6, criterion_6(run, elapsed));
            report(7, criterion_7());
            report(8, criterion_8(run));
        }
        Err(e) => {
            report(6, Err(e.clone()));
            report(7, criterion_7());
            report(8, Err(e.clone()));
        }
    }
    report(9, criterion_9());
    report(10, criterion_10());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
