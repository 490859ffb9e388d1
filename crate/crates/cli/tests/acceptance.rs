//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so every line is printed; exits nonzero if any criterion fails.

use std::f64::consts::FRAC_1_SQRT_2;
use std::process::Command;
use std::time::{Duration, Instant};

use cavconc_cli::commands::verify_report;
use cavconc_cli::report::Verdict;
use cavity_concentration::dynamics::{evolve_no_jump, no_jump_amplitudes, t1_star, DynamicsParams, TransferSolution};
use cavity_concentration::protocol::{
    click_jump, closed_form_rho24, detection_no_click, event_distribution, one_click_state, phase_correct,
    reduce_rho24, run_step1, target_phi24, Detector, InputPair, ProtocolConfig,
};
use cavity_concentration::qcore::{fidelity_pure, StateVector, SubsystemLayout, E, G};
use cavity_concentration::trajectories::estimate;

type Outcome = Result<String, String>;

fn pair(a: f64) -> InputPair {
    InputPair::real(a, (1.0 - a * a).sqrt()).unwrap()
}

fn matched(a: f64, k: f64, t2: f64) -> ProtocolConfig {
    ProtocolConfig::matched(pair(a), DynamicsParams::new(1.0, k).unwrap(), t2).unwrap()
}

/// a ∈ {0.3, 0.6, 1/√2} × k/δ ∈ {0.05, 0.1, 0.2} × t₂δ ∈ {1, 2, 5}, δ = 1.
fn grid() -> Vec<ProtocolConfig> {
    let mut out = Vec::new();
    for a in [0.3, 0.6, FRAC_1_SQRT_2] {
        for k in [0.05, 0.1, 0.2] {
            for t2 in [1.0, 2.0, 5.0] {
                out.push(matched(a, k, t2));
            }
        }
    }
    out
}

fn unmatched() -> Vec<ProtocolConfig> {
    let d = DynamicsParams::new(1.0, 0.1).unwrap();
    vec![
        ProtocolConfig::new(pair(0.6), pair(0.8), d, 2.0).unwrap(),
        ProtocolConfig::new(pair(0.3), pair(FRAC_1_SQRT_2), d, 1.0).unwrap(),
        ProtocolConfig::new(pair(1.0), pair(0.5), d, 5.0).unwrap(),
    ]
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit {
        Ok(())
    } else {
        Err(format!("runtime {:.2}s over {limit}s budget", elapsed.as_secs_f64()))
    }
}

fn lossless_limit() -> Outcome {
    let start = Instant::now();
    let cfg = matched(FRAC_1_SQRT_2, 1e-9, 2.0);
    let alpha = TransferSolution::solve(&cfg.dynamics()).map_err(|e| e.to_string())?.alpha;
    let (_, p) = run_step1(&cfg).map_err(|e| e.to_string())?;
    within(start.elapsed(), 1.0)?;
    if alpha.abs() >= 1.0 - 1e-6 && p >= 1.0 - 1e-6 {
        Ok(format!("|alpha| = {:.12}, p_step1 = {p:.12}", alpha.abs()))
    } else {
        Err(format!("|alpha| = {}, p_step1 = {p}", alpha.abs()))
    }
}

fn closed_form_vs_integrator() -> Outcome {
    let start = Instant::now();
    let layout = SubsystemLayout::new([("atom", 2), ("cav", 3)]).unwrap();
    let e0 = StateVector::basis(&layout, &[E, 0]).unwrap();
    let mut worst: f64 = 0.0;
    for ratio in [0.01, 0.1, 0.5, 1.0, 1.9] {
        let p = DynamicsParams::new(1.0, ratio).unwrap();
        let t1 = t1_star(&p).unwrap();
        for i in 0..1000 {
            let t = 2.0 * t1 * i as f64 / 999.0;
            let (ce, cg) = no_jump_amplitudes(&p, t).unwrap();
            let psi = evolve_no_jump(&e0, &p, t, "atom", "cav").unwrap();
            worst = worst
                .max((psi.amp(&[E, 0]).unwrap() - ce).norm())
                .max((psi.amp(&[G, 1]).unwrap() - cg).norm());
        }
    }
    within(start.elapsed(), 5.0)?;
    if worst <= 1e-9 {
        Ok(format!("max abs error {worst:.2e} over 5 x 1000 points"))
    } else {
        Err(format!("max abs error {worst:.2e}"))
    }
}

fn closed_form_rho() -> Outcome {
    let (mut worst_rho, mut worst_f): (f64, f64) = (0.0, 0.0);
    for cfg in grid() {
        let rho = reduce_rho24(&one_click_state(&cfg, cfg.t2(), Detector::Plus).unwrap()).unwrap();
        worst_rho = worst_rho.max(rho.max_abs_diff(&closed_form_rho24(&cfg).unwrap()));
        let alpha = TransferSolution::solve(&cfg.dynamics()).unwrap().alpha;
        let a2 = cfg.pair12().amp_eg().norm_sqr();
        let b2 = cfg.pair12().amp_ge().norm_sqr();
        let x = alpha * alpha * (-2.0 * cfg.dynamics().k() * cfg.t2()).exp();
        let f = fidelity_pure(&rho, &target_phi24()).unwrap();
        worst_f = worst_f.max((f - b2 / (b2 + a2 * x)).abs());
    }
    if worst_rho <= 1e-12 && worst_f <= 1e-12 {
        Ok(format!("27 configs, rho {worst_rho:.2e}, F {worst_f:.2e}"))
    } else {
        Err(format!("rho {worst_rho:.2e}, F {worst_f:.2e}"))
    }
}

fn high_fidelity() -> Outcome {
    let mut lowest: f64 = 1.0;
    for k in [0.05, 0.1, 0.2] {
        for t2 in [1.0, 2.0, 5.0] {
            let cfg = matched(0.05, k, t2);
            let rho = reduce_rho24(&one_click_state(&cfg, t2, Detector::Plus).unwrap()).unwrap();
            lowest = lowest.min(fidelity_pure(&rho, &target_phi24()).unwrap());
        }
    }
    if lowest >= 0.997 {
        Ok(format!("min F = {lowest:.6}"))
    } else {
        Err(format!("min F = {lowest:.6}"))
    }
}

fn detector_symmetry() -> Outcome {
    let mut worst: f64 = 0.0;
    let configs: Vec<_> = grid().into_iter().chain(unmatched()).collect();
    for cfg in &configs {
        let (s, _) = run_step1(cfg).unwrap();
        let (s, _) = detection_no_click(&s, cfg, cfg.t2()).unwrap();
        let plus = reduce_rho24(&click_jump(&s, Detector::Plus).unwrap()).unwrap();
        let minus = reduce_rho24(&phase_correct(&click_jump(&s, Detector::Minus).unwrap()).unwrap()).unwrap();
        worst = worst.max(plus.max_abs_diff(&minus));
    }
    if worst <= 1e-12 {
        Ok(format!("{} configs, max diff {worst:.2e}", configs.len()))
    } else {
        Err(format!("max diff {worst:.2e}"))
    }
}

fn completeness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut configs: Vec<_> = grid().into_iter().chain(unmatched()).collect();
    configs.push(matched(0.05, 0.1, 2.0));
    configs.push(matched(0.0, 0.1, 2.0));
    configs.push(matched(1.0, 0.3, 10.0));
    for cfg in &configs {
        let ev = event_distribution(cfg, 64).unwrap().events.unwrap();
        worst = worst.max((ev.total() - 1.0).abs());
    }
    if worst <= 1e-9 {
        Ok(format!("{} configs, max |sum - 1| = {worst:.2e}", configs.len()))
    } else {
        Err(format!("max |sum - 1| = {worst:.2e}"))
    }
}

fn stochastic_agreement() -> Outcome {
    let start = Instant::now();
    let mut misses = Vec::new();
    let mut worst: f64 = 0.0;
    for cfg in grid() {
        let det = event_distribution(&cfg, 64).unwrap();
        let ev = det.events.unwrap();
        let mc = estimate(&cfg, 100_000, 42, 4).unwrap();
        let checks = [
            ("no_click", ev.no_click, mc.no_click.p, mc.no_click.std_err),
            ("click_plus", ev.click_plus, mc.click_plus.p, mc.click_plus.std_err),
            ("click_minus", ev.click_minus, mc.click_minus.p, mc.click_minus.std_err),
            ("two_clicks", ev.two_clicks, mc.two_clicks.p, mc.two_clicks.std_err),
        ];
        for (name, d, m, se) in checks {
            let z = (m - d).abs() / se;
            worst = worst.max(z);
            if z > 3.0 {
                misses.push(format!("{name}@a={:.3},k={},t2={} z={z:.2}", cfg.pair12().amp_eg().re, cfg.dynamics().k(), cfg.t2()));
            }
        }
        let fid = mc.conditional_fidelity.unwrap();
        let band = (3.0 * fid.std_err.unwrap_or(0.0)).max(1e-9);
        if (fid.mean - det.fidelity.unwrap()).abs() > band {
            misses.push(format!("fidelity diff {:.2e}", (fid.mean - det.fidelity.unwrap()).abs()));
        }
    }
    within(start.elapsed(), 60.0)?;
    if misses.is_empty() {
        Ok(format!("27 configs, worst |z| = {worst:.2}, {:.1}s", start.elapsed().as_secs_f64()))
    } else {
        Err(format!("{} outside 3 sigma: {}", misses.len(), misses.join("; ")))
    }
}

fn p_success_audit() -> Outcome {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for cfg in grid() {
        let first = verify_report(&cfg, 64, 10_000, 42, 2).map_err(|e| e.to_string())?;
        let again = verify_report(&cfg, 64, 10_000, 42, 3).map_err(|e| e.to_string())?;
        let (j1, j2) = (serde_json::to_string(&first).unwrap(), serde_json::to_string(&again).unwrap());
        if j1 != j2 {
            return Err("verify report not reproducible".into());
        }
        for q in ["p_success_paper", "p_success_ratio", "p_success_ratio_with_step1"] {
            let row = first.row(q).ok_or_else(|| format!("missing row {q}"))?;
            if row.verdict != Verdict::Info {
                return Err(format!("{q} verdict is {}", row.verdict.label()));
            }
        }
        let ratio = first.row("p_success_ratio").unwrap().deterministic.ok_or("ratio missing")?;
        if !ratio.is_finite() {
            return Err("non-finite ratio".into());
        }
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok(format!("27 reports, one-click / closed-form ratio in [{lo:.4}, {hi:.4}] (INFO)"))
}

fn trajectories_output(workers: &str) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cavconc"))
        .args(["trajectories", "--a", "0.7071067811865476", "--b", "0.7071067811865476"])
        .args(["--n", "100000", "--seed", "42", "--workers", workers])
        .env_remove("CAVCONC_WORKERS")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let a = trajectories_output("8")?;
    let b = trajectories_output("8")?;
    let c = trajectories_output("1")?;
    if a == b && a == c && !a.is_empty() {
        Ok(format!("{} bytes identical across runs and workers 1/8", a.len()))
    } else {
        Err("outputs differ".into())
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("lossless limit", lossless_limit),
        ("closed form vs integrator", closed_form_vs_integrator),
        ("click-at-t2 density matrix and fidelity", closed_form_rho),
        ("high-fidelity regime", high_fidelity),
        ("detector symmetry", detector_symmetry),
        ("probability completeness", completeness),
        ("stochastic vs deterministic", stochastic_agreement),
        ("success-probability audit", p_success_audit),
        ("trajectory determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
