use cavity_concentration::dynamics::{DynamicsParams, TransferSolution};
use cavity_concentration::protocol::{
    analytic_result, event_distribution, ConcentrationResult, InputPair, ProtocolConfig, Provenance,
};
use cavity_concentration::trajectories::{estimate, Estimate};
use cavity_concentration::Error as CoreError;
use num_complex::Complex64;

use crate::args::{ConfigArgs, Format, RunArgs, SweepArgs, TrajectoryArgs, Vary, VerifyArgs};
use crate::error::{CliError, CliResult};
use crate::report::*;

/// Input pairs may be off unit norm by this much; they are then rescaled.
pub const NORM_TOL: f64 = 1e-9;
pub const ANALYTIC_TOL: f64 = 1e-9;
pub const MC_SIGMAS: f64 = 3.0;
/// Lower bound on the Monte Carlo acceptance band. Needed where the sampled
/// quantity has no spread (e.g. the conditional fidelity, which does not
/// depend on the click time).
pub const MC_FLOOR: f64 = 1e-9;
pub const WORKERS_ENV: &str = "CAVCONC_WORKERS";

/// Parse `re` or `re,im`.
pub fn parse_amplitude(name: &str, s: &str) -> CliResult<Complex64> {
    let bad = || CliError::Validation(format!("--{name}: expected `re` or `re,im`, got {s:?}"));
    let mut parts = s.split(',').map(|p| p.trim().parse::<f64>());
    let re = parts.next().ok_or_else(bad)?.map_err(|_| bad())?;
    let im = match parts.next() {
        Some(p) => p.map_err(|_| bad())?,
        None => 0.0,
    };
    if parts.next().is_some() || !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn pair(names: (&str, &str), x: Complex64, y: Complex64) -> CliResult<InputPair> {
    let n2 = x.norm_sqr() + y.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(CliError::Validation(format!(
            "pair ({}, {}) is not normalized: |{}|^2 + |{}|^2 = {n2}",
            names.0, names.1, names.0, names.1
        )));
    }
    Ok(InputPair::with_tolerance(x, y, NORM_TOL)?)
}

pub fn build_config(args: &ConfigArgs) -> CliResult<ProtocolConfig> {
    let a = parse_amplitude("a", &args.a)?;
    let b = parse_amplitude("b", &args.b)?;
    let p12 = pair(("a", "b"), a, b)?;
    let p34 = match (&args.c, &args.d) {
        (None, None) => p12,
        (Some(c), Some(d)) => pair(("c", "d"), parse_amplitude("c", c)?, parse_amplitude("d", d)?)?,
        _ => return Err(CliError::Validation("--c and --d must be given together".into())),
    };
    let dynamics = DynamicsParams::new(args.delta, args.k)?;
    Ok(ProtocolConfig::new(p12, p34, dynamics, args.t2)?.with_n_max(args.nmax)?)
}

/// Closed form when the pairs match, `None` otherwise.
fn analytic_if_matched(cfg: &ProtocolConfig) -> CliResult<Option<ConcentrationResult>> {
    match analytic_result(cfg) {
        Ok(r) => Ok(Some(r)),
        Err(CoreError::UnmatchedPairs) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run_report(cfg: &ProtocolConfig, quad_points: usize) -> CliResult<RunReport> {
    let transfer = TransferSolution::solve(&cfg.dynamics())?;
    let analytic = analytic_if_matched(cfg)?;
    let det = event_distribution(cfg, quad_points)?;
    let mut discrepancies = Vec::new();
    if let Some(an) = &analytic {
        let (a, d) = (Provenance::Analytic, Provenance::Deterministic);
        discrepancies.push(Discrepancy::new("p_step1", a, d, an.p_step1, det.p_step1));
        if let (Some(x), Some(y)) = (an.fidelity, det.fidelity) {
            discrepancies.push(Discrepancy::new("fidelity", a, d, x, y));
        }
        if let (Some(x), Some(y)) = (&an.rho24, &det.rho24) {
            let abs = x.max_abs_diff(y);
            let scale = x.entries().iter().map(|z| z.norm()).fold(0.0, f64::max);
            discrepancies.push(Discrepancy {
                quantity: "rho24".into(),
                left: a,
                right: d,
                absolute: abs,
                relative: if scale > 0.0 { abs / scale } else { abs },
            });
        }
    }
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        command: "run",
        config: cfg.into(),
        transfer,
        results: Results {
            analytic: analytic.as_ref().map(ResultJson::from),
            deterministic: (&det).into(),
        },
        discrepancies,
    })
}

fn csv_row(vary_value: Option<f64>, report: &RunReport) -> Vec<String> {
    let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let det = &report.results.deterministic;
    let an = report.results.analytic.as_ref();
    vec![
        f(vary_value),
        f(Some(report.transfer.omega_k)),
        f(Some(report.transfer.t1)),
        f(Some(report.transfer.alpha)),
        f(Some(det.p_step1)),
        f(det.p_no_click),
        f(det.p_click_plus),
        f(det.p_click_minus),
        f(det.p_two_clicks),
        f(det.fidelity),
        f(an.and_then(|r| r.fidelity)),
        f(an.and_then(|r| r.p_success_paper)),
    ]
}

fn write_csv(rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numerical(e.to_string()))
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_run(args: &RunArgs) -> CliResult<String> {
    let cfg = build_config(&args.config)?;
    let report = run_report(&cfg, args.config.quad_points)?;
    match args.format {
        Format::Json => to_json(&report),
        Format::Csv => write_csv(&[csv_row(None, &report)]),
    }
}

/// Evenly spaced grid including both ends; a single step yields `from`.
pub fn sweep_grid(from: f64, to: f64, steps: usize) -> CliResult<Vec<f64>> {
    if !(from.is_finite() && to.is_finite()) {
        return Err(CliError::Validation("sweep bounds must be finite".into()));
    }
    if steps == 0 {
        return Err(CliError::Validation("empty sweep range: --steps must be at least 1".into()));
    }
    if from > to {
        return Err(CliError::Validation(format!("inverted sweep range: --from {from} > --to {to}")));
    }
    if steps > 1 && from == to {
        return Err(CliError::Validation("empty sweep range: --from equals --to".into()));
    }
    if steps == 1 {
        return Ok(vec![from]);
    }
    let span = to - from;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { to } else { from + span * i as f64 / (steps - 1) as f64 })
        .collect())
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<String> {
    let grid = sweep_grid(args.from, args.to, args.steps)?;
    let mut rows = Vec::with_capacity(grid.len());
    for v in grid {
        let mut point = args.config.clone();
        match args.vary {
            Vary::K => point.k = v,
            Vary::T2 => point.t2 = v,
            Vary::A => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(CliError::Validation(format!("--vary a needs values in [0, 1], got {v}")));
                }
                // both pairs follow a, with b = √(1 − a²)
                point.a = v.to_string();
                point.b = (1.0 - v * v).sqrt().to_string();
                point.c = None;
                point.d = None;
            }
        }
        let cfg = build_config(&point)?;
        let report = run_report(&cfg, point.quad_points)?;
        rows.push(csv_row(Some(v), &report));
    }
    write_csv(&rows)
}

/// `--workers`, then `$CAVCONC_WORKERS`, then the number of CPUs.
pub fn resolve_workers(flag: Option<u64>) -> CliResult<usize> {
    if let Some(w) = flag {
        return Ok(w as usize);
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(CliError::Validation(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn trajectory_report(cfg: &ProtocolConfig, n: u64, seed: u64, workers: usize) -> CliResult<TrajectoryReport> {
    let transfer = TransferSolution::solve(&cfg.dynamics())?;
    Ok(TrajectoryReport {
        schema_version: SCHEMA_VERSION,
        command: "trajectories",
        config: cfg.into(),
        transfer,
        estimate: estimate(cfg, n, seed, workers)?,
    })
}

pub fn cmd_trajectories(args: &TrajectoryArgs) -> CliResult<String> {
    let cfg = build_config(&args.config)?;
    let workers = resolve_workers(args.mc.workers)?;
    to_json(&trajectory_report(&cfg, args.mc.n, args.mc.seed, workers)?)
}

fn analytic_row(quantity: String, analytic: Option<f64>, deterministic: Option<f64>) -> VerifyRow {
    let (max_discrepancy, verdict) = match (analytic, deterministic) {
        (Some(a), Some(d)) => {
            let diff = (a - d).abs();
            (Some(diff), if diff <= ANALYTIC_TOL { Verdict::Pass } else { Verdict::Fail })
        }
        _ => (None, Verdict::NotApplicable),
    };
    VerifyRow {
        quantity,
        analytic,
        deterministic,
        monte_carlo: None,
        monte_carlo_std_err: None,
        max_discrepancy,
        tolerance: Some(ANALYTIC_TOL),
        verdict,
    }
}

fn mc_row(quantity: &str, analytic: Option<f64>, deterministic: Option<f64>, mc: Option<(f64, f64)>) -> VerifyRow {
    let mut diffs = Vec::new();
    let mut verdict = Verdict::NotApplicable;
    let mut tolerance = None;
    if let (Some(a), Some(d)) = (analytic, deterministic) {
        let diff = (a - d).abs();
        diffs.push(diff);
        verdict = if diff <= ANALYTIC_TOL { Verdict::Pass } else { Verdict::Fail };
        tolerance = Some(ANALYTIC_TOL);
    }
    if let (Some(d), Some((m, se))) = (deterministic, mc) {
        let band = (MC_SIGMAS * se).max(MC_FLOOR);
        let diff = (m - d).abs();
        diffs.push(diff);
        if verdict != Verdict::Fail {
            verdict = if diff <= band { Verdict::Pass } else { Verdict::Fail };
        }
        tolerance = Some(band);
    }
    VerifyRow {
        quantity: quantity.into(),
        analytic,
        deterministic,
        monte_carlo: mc.map(|(m, _)| m),
        monte_carlo_std_err: mc.map(|(_, se)| se),
        max_discrepancy: diffs.into_iter().reduce(f64::max),
        tolerance,
        verdict,
    }
}

fn info_row(quantity: &str, analytic: Option<f64>, deterministic: Option<f64>) -> VerifyRow {
    VerifyRow {
        quantity: quantity.into(),
        analytic,
        deterministic,
        monte_carlo: None,
        monte_carlo_std_err: None,
        max_discrepancy: analytic.zip(deterministic).map(|(a, d)| (a - d).abs()),
        tolerance: None,
        verdict: Verdict::Info,
    }
}

/// Cross-check of closed form, quadrature and Monte Carlo for one configuration.
pub fn verify_report(
    cfg: &ProtocolConfig,
    quad_points: usize,
    n: u64,
    seed: u64,
    workers: usize,
) -> CliResult<VerifyReport> {
    let transfer = TransferSolution::solve(&cfg.dynamics())?;
    let an = analytic_if_matched(cfg)?;
    let det = event_distribution(cfg, quad_points)?;
    let ev = det.events.expect("quadrature reports events");
    let mc = estimate(cfg, n, seed, workers)?;
    let est = |e: Estimate| Some((e.p, e.std_err));

    let mut rows = vec![analytic_row("p_step1".into(), an.as_ref().map(|r| r.p_step1), Some(det.p_step1))];
    let mc_fid = mc
        .conditional_fidelity
        .map(|m| (m.mean, m.std_err.unwrap_or(0.0)));
    rows.push(mc_row("fidelity", an.as_ref().and_then(|r| r.fidelity), det.fidelity, mc_fid));
    let an_rho = an.as_ref().and_then(|r| r.rho24.as_ref());
    if let Some(rho) = &det.rho24 {
        for r in 0..4 {
            for c in 0..4 {
                let d = rho.entries()[(r, c)];
                let a = an_rho.map(|x| x.entries()[(r, c)]);
                let mut row = analytic_row(format!("rho24[{r}][{c}].re"), a.map(|z| z.re), Some(d.re));
                if let Some(a) = a {
                    // complex modulus of the difference
                    let diff = (a - d).norm();
                    row.max_discrepancy = Some(diff);
                    row.verdict = if diff <= ANALYTIC_TOL { Verdict::Pass } else { Verdict::Fail };
                }
                rows.push(row);
            }
        }
    }
    rows.push(mc_row("p_no_click", None, Some(ev.no_click), est(mc.no_click)));
    rows.push(mc_row("p_click_plus", None, Some(ev.click_plus), est(mc.click_plus)));
    rows.push(mc_row("p_click_minus", None, Some(ev.click_minus), est(mc.click_minus)));
    rows.push(mc_row("p_two_clicks", None, Some(ev.two_clicks), est(mc.two_clicks)));
    rows.push(analytic_row("event_total".into(), Some(1.0), Some(ev.total())));
    rows.push(info_row("p_one_click_residual_photon", None, Some(ev.one_click_residual_photon)));

    let closed = an.as_ref().and_then(|r| r.p_success_closed_form);
    let one_click = ev.one_click();
    let ratio = |x: f64| closed.filter(|p| *p > 0.0).map(|p| x / p);
    rows.push(info_row("p_success_paper", closed, Some(one_click)));
    rows.push(info_row("p_success_ratio", None, ratio(one_click)));
    rows.push(info_row("p_success_ratio_with_step1", None, ratio(det.p_step1 * one_click)));

    let failures = rows.iter().filter(|r| r.verdict == Verdict::Fail).count();
    Ok(VerifyReport {
        schema_version: SCHEMA_VERSION,
        command: "verify",
        config: cfg.into(),
        transfer,
        n_trajectories: n,
        seed,
        tolerance_policy: TolerancePolicy {
            analytic_vs_deterministic: ANALYTIC_TOL,
            monte_carlo_sigmas: MC_SIGMAS,
            monte_carlo_floor: MC_FLOOR,
        },
        rows,
        failures,
    })
}

/// JSON report plus the terminal summary.
pub fn cmd_verify(args: &VerifyArgs) -> CliResult<(String, VerifyReport)> {
    let cfg = build_config(&args.config)?;
    let workers = resolve_workers(args.workers)?;
    let report = verify_report(&cfg, args.config.quad_points, args.n, args.seed, workers)?;
    Ok((to_json(&report)?, report))
}
