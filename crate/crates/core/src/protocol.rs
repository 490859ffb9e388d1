//! The concentration pipeline on atoms 1–4 and cavities A, B.
//!
//! 1. Pairs `a|e₁g₂⟩ + b|g₁e₂⟩` and `c|e₃g₄⟩ + d|g₃e₄⟩` start with both cavities
//!    in vacuum.
//! 2. Atoms 1 and 3 are driven for `t₁`, mapping their excitation onto a cavity
//!    photon with amplitude `α`; the run is kept when no photon leaked.
//! 3. The cavity outputs meet on a 50/50 beam splitter. Detectors D± see the
//!    modes `(a_A ± a_B)/√2`. Between clicks every photon amplitude decays as
//!    `e^{−kt}`.
//! 4. After exactly one click the state of atoms 2 and 4 is kept; a D− click is
//!    undone by a π phase on `|g⟩₄`.
//!
//! [`event_distribution`] integrates the click-time density over the window
//! `[0, t₂]`, giving exact event probabilities and the click-averaged
//! conditional state. [`analytic_result`] evaluates the closed forms that hold
//! for matched pairs (`a = c`, `b = d`).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{no_jump_propagator, DynamicsParams, TransferSolution};
use crate::error::{Error, Result};
use crate::qcore::{fidelity_pure, DensityMatrix, StateVector, SubsystemLayout, C64, E, G};
use crate::quadrature::gauss_legendre;

pub const ATOM1: &str = "atom1";
pub const ATOM2: &str = "atom2";
pub const ATOM3: &str = "atom3";
pub const ATOM4: &str = "atom4";
pub const CAV_A: &str = "cavA";
pub const CAV_B: &str = "cavB";

/// Default Fock truncation per cavity.
pub const DEFAULT_N_MAX: usize = 2;
/// Largest tolerated population above one photon per cavity.
pub const LEAKAGE_TOL: f64 = 1e-12;
/// Largest tolerated change between successive quadrature refinements.
pub const QUADRATURE_TOL: f64 = 1e-8;

const PAIR_TOL: f64 = 1e-12;

/// Coefficients of `amp_eg |e⟩|g⟩ + amp_ge |g⟩|e⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InputPair {
    amp_eg: C64,
    amp_ge: C64,
}

impl InputPair {
    /// Requires `|amp_eg|² + |amp_ge|² = 1` within 1e-12.
    pub fn new(amp_eg: C64, amp_ge: C64) -> Result<Self> {
        Self::with_tolerance(amp_eg, amp_ge, PAIR_TOL)
    }

    pub fn real(amp_eg: f64, amp_ge: f64) -> Result<Self> {
        Self::new(C64::new(amp_eg, 0.0), C64::new(amp_ge, 0.0))
    }

    /// Accepts a squared norm within `tol` of one and rescales to unit norm.
    pub fn with_tolerance(amp_eg: C64, amp_ge: C64, tol: f64) -> Result<Self> {
        let n2 = amp_eg.norm_sqr() + amp_ge.norm_sqr();
        if !n2.is_finite() || (n2 - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "pair is not normalized: |eg|^2 + |ge|^2 = {n2}"
            )));
        }
        let s = 1.0 / n2.sqrt();
        Ok(Self {
            amp_eg: amp_eg * s,
            amp_ge: amp_ge * s,
        })
    }

    pub fn amp_eg(&self) -> C64 {
        self.amp_eg
    }

    pub fn amp_ge(&self) -> C64 {
        self.amp_ge
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.amp_eg - other.amp_eg).norm() <= PAIR_TOL && (self.amp_ge - other.amp_ge).norm() <= PAIR_TOL
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pair12: InputPair,
    pair34: InputPair,
    dynamics: DynamicsParams,
    t2: f64,
    n_max: usize,
    matched: bool,
}

impl ProtocolConfig {
    /// `matched` is set when the two pairs agree within 1e-12.
    pub fn new(pair12: InputPair, pair34: InputPair, dynamics: DynamicsParams, t2: f64) -> Result<Self> {
        if !(t2.is_finite() && t2 > 0.0) {
            return Err(Error::InvalidInput(format!("t2 must be positive, got {t2}")));
        }
        Ok(Self {
            pair12,
            pair34,
            dynamics,
            t2,
            n_max: DEFAULT_N_MAX,
            matched: pair12.approx_eq(&pair34),
        })
    }

    /// Both pairs equal to `pair`.
    pub fn matched(pair: InputPair, dynamics: DynamicsParams, t2: f64) -> Result<Self> {
        Self::new(pair, pair, dynamics, t2)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidInput("n_max must be at least 1".into()));
        }
        self.n_max = n_max;
        Ok(self)
    }

    pub fn pair12(&self) -> InputPair {
        self.pair12
    }

    pub fn pair34(&self) -> InputPair {
        self.pair34
    }

    pub fn dynamics(&self) -> DynamicsParams {
        self.dynamics
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn is_matched(&self) -> bool {
        self.matched
    }

    /// Atoms 1–4 then cavities A, B.
    pub fn layout(&self) -> SubsystemLayout {
        let cav = self.n_max + 1;
        SubsystemLayout::new([
            (ATOM1, 2),
            (ATOM2, 2),
            (ATOM3, 2),
            (ATOM4, 2),
            (CAV_A, cav),
            (CAV_B, cav),
        ])
        .expect("protocol layout is valid for n_max <= 15")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Deterministic,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Detector {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Detector {
    pub const BOTH: [Detector; 2] = [Detector::Plus, Detector::Minus];

    fn sign(self) -> f64 {
        match self {
            Detector::Plus => 1.0,
            Detector::Minus => -1.0,
        }
    }
}

/// Probabilities of the detection-window outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventProbabilities {
    pub no_click: f64,
    pub click_plus: f64,
    pub click_minus: f64,
    pub two_clicks: f64,
    /// Part of `click_plus + click_minus` in which a second photon is still
    /// stored in a cavity at `t₂`.
    pub one_click_residual_photon: f64,
}

impl EventProbabilities {
    pub fn one_click(&self) -> f64 {
        self.click_plus + self.click_minus
    }

    pub fn total(&self) -> f64 {
        self.no_click + self.click_plus + self.click_minus + self.two_clicks
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationResult {
    pub provenance: Provenance,
    pub p_step1: f64,
    pub events: Option<EventProbabilities>,
    /// Click-conditioned, phase-corrected state of atoms 2 and 4.
    pub rho24: Option<DensityMatrix>,
    /// Overlap of `rho24` with `(|ge⟩ + |eg⟩)/√2`.
    pub fidelity: Option<f64>,
    /// Closed-form total success probability (matched pairs only).
    pub p_success_closed_form: Option<f64>,
}

/// Pair state on `[first, second]` with `amp_eg` on `|e g⟩`.
fn pair_state(pair: &InputPair, first: &str, second: &str) -> StateVector {
    let layout = SubsystemLayout::new([(first, 2), (second, 2)]).expect("two qubits");
    let mut amps = DVector::zeros(4);
    amps[E * 2 + G] = pair.amp_eg;
    amps[G * 2 + E] = pair.amp_ge;
    StateVector::new(layout, amps).expect("length 4")
}

/// Product of both pairs with the cavities in vacuum.
pub fn prepare_initial(config: &ProtocolConfig) -> StateVector {
    let layout = config.layout();
    let p12 = pair_state(&config.pair12, ATOM1, ATOM2);
    let p34 = pair_state(&config.pair34, ATOM3, ATOM4);
    let mut amps = DVector::zeros(layout.dim());
    for (i, x) in p12.amps().iter().enumerate() {
        for (j, y) in p34.amps().iter().enumerate() {
            let digits = [i >> 1, i & 1, j >> 1, j & 1, 0, 0];
            amps[layout.index_of(&digits).expect("in range")] = x * y;
        }
    }
    StateVector::new(layout, amps).expect("matching length")
}

/// Drive atoms 1 and 3 for `t₁`, keep the outcome with atoms 1 and 3 in `|g⟩`.
///
/// Returns the normalized state and the step-one success probability.
pub fn run_step1(config: &ProtocolConfig) -> Result<(StateVector, f64)> {
    let sol = TransferSolution::solve(&config.dynamics)?;
    let psi = prepare_initial(config);
    let ua = no_jump_propagator(&config.dynamics, sol.t1, config.n_max, ATOM1, CAV_A)?;
    let ub = no_jump_propagator(&config.dynamics, sol.t1, config.n_max, ATOM3, CAV_B)?;
    let mut psi = psi.apply_on(&ua, &[ATOM1, CAV_A])?.apply_on(&ub, &[ATOM3, CAV_B])?;

    let layout = psi.layout().clone();
    let pos = |l: &str| layout.position(l).expect("protocol label");
    let (p1, p3, pa, pb) = (pos(ATOM1), pos(ATOM3), pos(CAV_A), pos(CAV_B));
    let total = psi.norm_sqr();
    let mut leaked = 0.0;
    for (i, z) in psi.amps_mut().iter_mut().enumerate() {
        if layout.digit(i, pa) > 1 || layout.digit(i, pb) > 1 {
            leaked += z.norm_sqr();
        }
        if layout.digit(i, p1) != G || layout.digit(i, p3) != G {
            *z = C64::new(0.0, 0.0);
        }
    }
    if total > 0.0 && leaked / total >= LEAKAGE_TOL {
        return Err(Error::FockLeakage {
            population: leaked / total,
        });
    }
    let p_step1 = psi.norm_sqr();
    Ok((psi.normalized()?, p_step1))
}

/// Precomputed index maps for the detection stage on the protocol layout.
#[derive(Clone, Debug)]
pub(crate) struct DetectionOps {
    photons: Vec<u32>,
    lower_a: Vec<Option<(usize, f64)>>,
    lower_b: Vec<Option<(usize, f64)>>,
    atom4_ground: Vec<bool>,
}

impl DetectionOps {
    pub fn new(layout: &SubsystemLayout) -> Result<Self> {
        let pa = layout.position(CAV_A)?;
        let pb = layout.position(CAV_B)?;
        let p4 = layout.position(ATOM4)?;
        let (sa, sb) = (layout.strides()[pa], layout.strides()[pb]);
        let dim = layout.dim();
        let mut photons = Vec::with_capacity(dim);
        let mut lower_a = Vec::with_capacity(dim);
        let mut lower_b = Vec::with_capacity(dim);
        let mut atom4_ground = Vec::with_capacity(dim);
        for i in 0..dim {
            let (na, nb) = (layout.digit(i, pa), layout.digit(i, pb));
            photons.push((na + nb) as u32);
            lower_a.push((na > 0).then(|| (i - sa, (na as f64).sqrt())));
            lower_b.push((nb > 0).then(|| (i - sb, (nb as f64).sqrt())));
            atom4_ground.push(layout.digit(i, p4) == G);
        }
        Ok(Self {
            photons,
            lower_a,
            lower_b,
            atom4_ground,
        })
    }

    /// Every amplitude times `e^{−k t n}`, `n` the total photon number.
    pub fn decay(&self, amps: &DVector<C64>, k: f64, t: f64) -> DVector<C64> {
        let factors: Vec<f64> = (0..=self.max_photons()).map(|n| (-k * t * n as f64).exp()).collect();
        DVector::from_iterator(
            amps.len(),
            amps.iter().zip(&self.photons).map(|(z, &n)| z * factors[n as usize]),
        )
    }

    /// `(a_A ± a_B)/√2` applied to `amps`.
    pub fn jump(&self, amps: &DVector<C64>, detector: Detector) -> DVector<C64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sign = detector.sign();
        let mut out = DVector::zeros(amps.len());
        for (i, z) in amps.iter().enumerate() {
            if let Some((dst, f)) = self.lower_a[i] {
                out[dst] += z * (h * f);
            }
            if let Some((dst, f)) = self.lower_b[i] {
                out[dst] += z * (sign * h * f);
            }
        }
        out
    }

    pub fn phase_correct(&self, amps: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(
            amps.len(),
            amps.iter()
                .zip(&self.atom4_ground)
                .map(|(z, &g)| if g { -z } else { *z }),
        )
    }

    /// Squared norm split by total photon number.
    pub fn photon_populations(&self, amps: &DVector<C64>) -> Vec<f64> {
        let mut pops = vec![0.0; self.max_photons() + 1];
        for (z, &n) in amps.iter().zip(&self.photons) {
            pops[n as usize] += z.norm_sqr();
        }
        pops
    }

    fn max_photons(&self) -> usize {
        self.photons.iter().copied().max().unwrap_or(0) as usize
    }
}

fn ops_for(state: &StateVector) -> Result<DetectionOps> {
    DetectionOps::new(state.layout())
}

/// No-click evolution for `t_j ∈ [0, t₂]`. Returns the normalized state and
/// the survival probability (squared norm before normalizing).
pub fn detection_no_click(state: &StateVector, config: &ProtocolConfig, t_j: f64) -> Result<(StateVector, f64)> {
    if !(0.0..=config.t2).contains(&t_j) {
        return Err(Error::ClickTimeOutOfRange { t_j, t2: config.t2 });
    }
    let ops = ops_for(state)?;
    let decayed = StateVector::new(state.layout().clone(), ops.decay(state.amps(), config.dynamics.k(), t_j))?;
    let survival = decayed.norm_sqr();
    Ok((decayed.normalized()?, survival))
}

/// Jump operator `(a_A ± a_B)/√2` of detector D±; output is unnormalized and
/// may be the zero vector.
pub fn click_jump(state: &StateVector, detector: Detector) -> Result<StateVector> {
    let ops = ops_for(state)?;
    StateVector::new(state.layout().clone(), ops.jump(state.amps(), detector))
}

/// π phase on `|g⟩₄` relative to `|e⟩₄`.
pub fn phase_correct(state: &StateVector) -> Result<StateVector> {
    let ops = ops_for(state)?;
    StateVector::new(state.layout().clone(), ops.phase_correct(state.amps()))
}

/// Normalized reduced state of atoms 2 and 4.
pub fn reduce_rho24(state: &StateVector) -> Result<DensityMatrix> {
    state.normalized()?.reduced_density(&[ATOM2, ATOM4])
}

/// `(|g⟩₂|e⟩₄ + |e⟩₂|g⟩₄)/√2` on the `[atom2, atom4]` layout.
pub fn target_phi24() -> StateVector {
    let layout = SubsystemLayout::new([(ATOM2, 2), (ATOM4, 2)]).expect("two qubits");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = DVector::zeros(4);
    amps[G * 2 + E] = C64::new(h, 0.0);
    amps[E * 2 + G] = C64::new(h, 0.0);
    StateVector::new(layout, amps).expect("length 4")
}

/// State at `t₂` given exactly one click at `t_j` on `detector` and no
/// further click, phase-corrected for D−, normalized.
pub fn one_click_state(config: &ProtocolConfig, t_j: f64, detector: Detector) -> Result<StateVector> {
    let (psi, _) = run_step1(config)?;
    let (psi, _) = detection_no_click(&psi, config, t_j)?;
    let clicked = click_jump(&psi, detector)?.normalized()?;
    let (mut after, _) = detection_no_click(&clicked, config, config.t2 - t_j)?;
    if detector == Detector::Minus {
        after = phase_correct(&after)?;
    }
    Ok(after)
}

/// Closed-form weights of the target Bell state and of `|gg⟩` for matched pairs.
fn matched_weights(pair: &InputPair, alpha: f64, k: f64, t2: f64) -> (f64, f64) {
    let a2 = pair.amp_eg.norm_sqr();
    let b2 = pair.amp_ge.norm_sqr();
    let x = alpha * alpha * (-2.0 * k * t2).exp();
    (a2 * b2, a2 * a2 * x)
}

/// Closed-form `ρ₂₄` after a D+ click at `t₂` for matched pairs: a mixture of
/// the target Bell state (weight `|ab|²`) and `|gg⟩` (weight `|a|⁴α²e^{−2kt₂}`).
pub fn closed_form_rho24(config: &ProtocolConfig) -> Result<DensityMatrix> {
    if !config.matched {
        return Err(Error::UnmatchedPairs);
    }
    let alpha = TransferSolution::solve(&config.dynamics)?.alpha;
    let (w_phi, w_gg) = matched_weights(&config.pair12, alpha, config.dynamics.k(), config.t2);
    let norm = w_phi + w_gg;
    if norm <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    let phi = target_phi24();
    let mut entries: DMatrix<C64> = phi.to_density().entries() * C64::new(w_phi / norm, 0.0);
    entries[(0, 0)] += C64::new(w_gg / norm, 0.0);
    DensityMatrix::new(phi.layout().clone(), entries)
}

/// Closed-form step-one probability, fidelity, success probability and `ρ₂₄`.
pub fn analytic_result(config: &ProtocolConfig) -> Result<ConcentrationResult> {
    if !config.matched {
        return Err(Error::UnmatchedPairs);
    }
    let sol = TransferSolution::solve(&config.dynamics)?;
    let alpha2 = sol.alpha * sol.alpha;
    let (k, t2) = (config.dynamics.k(), config.t2);
    let decay = (-2.0 * k * t2).exp();
    let pa = config.pair12.amp_eg.norm_sqr() * alpha2 + config.pair12.amp_ge.norm_sqr();
    let pb = config.pair34.amp_eg.norm_sqr() * alpha2 + config.pair34.amp_ge.norm_sqr();
    let a2 = config.pair12.amp_eg.norm_sqr();
    let b2 = config.pair12.amp_ge.norm_sqr();
    let x = alpha2 * decay;
    let fidelity = b2 / (b2 + a2 * x);
    let p_success = (a2 * b2 + a2 * a2 * x) * x * (1.0 - decay);
    Ok(ConcentrationResult {
        provenance: Provenance::Analytic,
        p_step1: pa * pb,
        events: None,
        rho24: closed_form_rho24(config).ok(),
        fidelity: fidelity.is_finite().then_some(fidelity),
        p_success_closed_form: Some(p_success),
    })
}

struct Accumulated {
    click: [f64; 2],
    residual: f64,
    two: f64,
    rho: DMatrix<C64>,
}

/// Integrate the detection stage with an `n`-point Gauss–Legendre rule.
fn integrate_detection(config: &ProtocolConfig, psi0: &StateVector, ops: &DetectionOps, n: usize) -> Result<Accumulated> {
    let (k, t2) = (config.dynamics.k(), config.t2);
    let rate = 2.0 * k;
    let (nodes, weights) = gauss_legendre(n, 0.0, t2);
    let (ref_nodes, ref_weights) = gauss_legendre(n, 0.0, 1.0);
    let mut acc = Accumulated {
        click: [0.0; 2],
        residual: 0.0,
        two: 0.0,
        rho: DMatrix::zeros(4, 4),
    };
    if k == 0.0 {
        return Ok(acc);
    }
    let layout = psi0.layout().clone();
    for (&t, &w) in nodes.iter().zip(&weights) {
        let psi_t = ops.decay(psi0.amps(), k, t);
        for (slot, det) in Detector::BOTH.into_iter().enumerate() {
            let phi = ops.jump(&psi_t, det);
            if phi.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            let mut chi = ops.decay(&phi, k, t2 - t);
            let pops = ops.photon_populations(&chi);
            acc.click[slot] += w * rate * pops.iter().sum::<f64>();
            acc.residual += w * rate * pops[1..].iter().sum::<f64>();
            if det == Detector::Minus {
                chi = ops.phase_correct(&chi);
            }
            let reduced = StateVector::new(layout.clone(), chi)?.reduced_density(&[ATOM2, ATOM4])?;
            acc.rho += reduced.entries() * C64::new(w * rate, 0.0);

            // second click anywhere in (t, t₂]; summed over both detectors the
            // click density is 2k⟨n_A + n_B⟩ of the decayed state
            let pops = ops.photon_populations(&phi);
            let span = t2 - t;
            let mut inner = 0.0;
            for (&x, &v) in ref_nodes.iter().zip(&ref_weights) {
                let s = span * x;
                let flux: f64 = pops
                    .iter()
                    .enumerate()
                    .map(|(n, p)| n as f64 * p * (-rate * n as f64 * s).exp())
                    .sum();
                inner += span * v * rate * flux;
            }
            acc.two += w * rate * inner;
        }
    }
    Ok(acc)
}

/// Exact detection statistics from quadrature over the click time.
///
/// Runs the rule at `quad_points` and `2 * quad_points` nodes and fails if the
/// two disagree by more than [`QUADRATURE_TOL`] on any reported quantity.
pub fn event_distribution(config: &ProtocolConfig, quad_points: usize) -> Result<ConcentrationResult> {
    if quad_points < 64 {
        return Err(Error::InvalidInput(format!("quad_points must be >= 64, got {quad_points}")));
    }
    let (psi0, p_step1) = run_step1(config)?;
    let ops = DetectionOps::new(psi0.layout())?;
    let coarse = integrate_detection(config, &psi0, &ops, quad_points)?;
    let fine = integrate_detection(config, &psi0, &ops, 2 * quad_points)?;

    let checks = [
        ("click_plus", coarse.click[0], fine.click[0]),
        ("click_minus", coarse.click[1], fine.click[1]),
        ("two_clicks", coarse.two, fine.two),
        ("one_click_residual_photon", coarse.residual, fine.residual),
        ("rho24", 0.0, coarse.rho.iter().zip(fine.rho.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)),
    ];
    for (quantity, x, y) in checks {
        let change = (x - y).abs();
        if !change.is_finite() || change > QUADRATURE_TOL {
            return Err(Error::QuadratureNonConvergence { quantity, change });
        }
    }

    let no_click = ops.decay(psi0.amps(), config.dynamics.k(), config.t2).norm_squared();
    let events = EventProbabilities {
        no_click,
        click_plus: fine.click[0],
        click_minus: fine.click[1],
        two_clicks: fine.two,
        one_click_residual_photon: fine.residual,
    };
    let one = events.one_click();
    let (rho24, fidelity) = if one > 0.0 {
        let layout = SubsystemLayout::new([(ATOM2, 2), (ATOM4, 2)])?;
        let rho = DensityMatrix::new(layout, fine.rho / C64::new(one, 0.0))?;
        let f = fidelity_pure(&rho, &target_phi24())?;
        (Some(rho), Some(f))
    } else {
        (None, None)
    };
    let p_success_closed_form = if config.matched {
        analytic_result(config)?.p_success_closed_form
    } else {
        None
    };
    Ok(ConcentrationResult {
        provenance: Provenance::Deterministic,
        p_step1,
        events: Some(events),
        rho24,
        fidelity,
        p_success_closed_form,
    })
}
