//! Serialized report shapes. Field order is part of the output format.

use cavity_concentration::dynamics::TransferSolution;
use cavity_concentration::protocol::{ConcentrationResult, Provenance, ProtocolConfig};
use cavity_concentration::qcore::DensityMatrix;
use cavity_concentration::trajectories::EstimateReport;
use serde::Serialize;

pub const SCHEMA_VERSION: &str = "1";

/// Fixed CSV column order for `run --format csv` and `sweep`.
pub const CSV_COLUMNS: [&str; 12] = [
    "vary_value",
    "omega_k",
    "t1",
    "alpha",
    "p_step1",
    "p_no_click",
    "p_click_plus",
    "p_click_minus",
    "p_two_clicks",
    "fidelity_sim",
    "fidelity_paper",
    "p_success_paper",
];

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub d: [f64; 2],
    pub delta: f64,
    pub k: f64,
    pub t2: f64,
    pub n_max: usize,
    pub matched: bool,
}

impl From<&ProtocolConfig> for ConfigEcho {
    fn from(cfg: &ProtocolConfig) -> Self {
        let z = |c: num_complex::Complex64| [c.re, c.im];
        Self {
            a: z(cfg.pair12().amp_eg()),
            b: z(cfg.pair12().amp_ge()),
            c: z(cfg.pair34().amp_eg()),
            d: z(cfg.pair34().amp_ge()),
            delta: cfg.dynamics().delta(),
            k: cfg.dynamics().k(),
            t2: cfg.t2(),
            n_max: cfg.n_max(),
            matched: cfg.is_matched(),
        }
    }
}

/// Density matrix as rows of `[re, im]` pairs.
pub fn matrix_json(rho: &DensityMatrix) -> Vec<Vec<[f64; 2]>> {
    let m = rho.entries();
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultJson {
    pub provenance: Provenance,
    pub p_step1: f64,
    pub p_no_click: Option<f64>,
    pub p_click_plus: Option<f64>,
    pub p_click_minus: Option<f64>,
    pub p_two_clicks: Option<f64>,
    pub p_one_click_residual_photon: Option<f64>,
    pub fidelity: Option<f64>,
    pub p_success_paper: Option<f64>,
    pub rho24: Option<Vec<Vec<[f64; 2]>>>,
}

impl From<&ConcentrationResult> for ResultJson {
    fn from(r: &ConcentrationResult) -> Self {
        let ev = r.events;
        Self {
            provenance: r.provenance,
            p_step1: r.p_step1,
            p_no_click: ev.map(|e| e.no_click),
            p_click_plus: ev.map(|e| e.click_plus),
            p_click_minus: ev.map(|e| e.click_minus),
            p_two_clicks: ev.map(|e| e.two_clicks),
            p_one_click_residual_photon: ev.map(|e| e.one_click_residual_photon),
            fidelity: r.fidelity,
            p_success_paper: r.p_success_closed_form,
            rho24: r.rho24.as_ref().map(matrix_json),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    pub quantity: String,
    pub left: Provenance,
    pub right: Provenance,
    pub absolute: f64,
    pub relative: f64,
}

impl Discrepancy {
    pub fn new(quantity: impl Into<String>, left: Provenance, right: Provenance, lhs: f64, rhs: f64) -> Self {
        let absolute = (lhs - rhs).abs();
        let relative = if lhs != 0.0 { absolute / lhs.abs() } else { absolute };
        Self {
            quantity: quantity.into(),
            left,
            right,
            absolute,
            relative,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Results {
    pub analytic: Option<ResultJson>,
    pub deterministic: ResultJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: ConfigEcho,
    pub transfer: TransferSolution,
    pub results: Results,
    pub discrepancies: Vec<Discrepancy>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: ConfigEcho,
    pub transfer: TransferSolution,
    pub estimate: EstimateReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "INFO")]
    Info,
    #[serde(rename = "N/A")]
    NotApplicable,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Info => "INFO",
            Verdict::NotApplicable => "N/A",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub quantity: String,
    pub analytic: Option<f64>,
    pub deterministic: Option<f64>,
    pub monte_carlo: Option<f64>,
    /// Standard error of the Monte Carlo value, when there is one.
    pub monte_carlo_std_err: Option<f64>,
    pub max_discrepancy: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct TolerancePolicy {
    pub analytic_vs_deterministic: f64,
    pub monte_carlo_sigmas: f64,
    pub monte_carlo_floor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub config: ConfigEcho,
    pub transfer: TransferSolution,
    pub n_trajectories: u64,
    pub seed: u64,
    pub tolerance_policy: TolerancePolicy,
    pub rows: Vec<VerifyRow>,
    pub failures: usize,
}

impl VerifyReport {
    pub fn row(&self, quantity: &str) -> Option<&VerifyRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    /// Fixed-width table for terminals.
    pub fn summary(&self) -> String {
        let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.10}"));
        let mut out = format!(
            "{:<28} {:>14} {:>14} {:>14} {:>12} {:>7}\n",
            "quantity", "analytic", "deterministic", "monte_carlo", "max_discr", "verdict"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<28} {:>14} {:>14} {:>14} {:>12} {:>7}\n",
                r.quantity,
                cell(r.analytic),
                cell(r.deterministic),
                cell(r.monte_carlo),
                r.max_discrepancy.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}")),
                r.verdict.label()
            ));
        }
        out.push_str(&format!("{} failure(s)\n", self.failures));
        out
    }
}
