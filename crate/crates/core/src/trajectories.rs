//! Quantum-jump unraveling of the detection stage.
//!
//! Detector D± fires through `L± = √k (a_A ± a_B)`, so that
//! `L₊†L₊ + L₋†L₋ = 2k (n_A + n_B)` reproduces the `e^{−kt}` amplitude decay of
//! every cavity photon. Between clicks the no-jump norm is a sum of
//! exponentials in the total photon number, so waiting times are drawn by
//! solving `‖ψ(τ)‖² = r` for a uniform threshold `r` with bisection instead of
//! stepping in time.
//!
//! Trajectory `i` draws from a ChaCha8 stream selected by `(seed, i)`, which
//! makes [`estimate`] independent of how trajectories are scheduled.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::{run_step1, target_phi24, DetectionOps, Detector, ProtocolConfig, ATOM2, ATOM4};
use crate::qcore::{fidelity_pure, StateVector, C64};

/// Waiting times are resolved to this many time units.
pub const WAITING_TIME_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventClass {
    NoClick,
    OneClickPlus,
    OneClickMinus,
    TwoClicks,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Click {
    pub time: f64,
    pub detector: Detector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub clicks: Vec<Click>,
    pub classification: EventClass,
    /// Overlap of the final (phase-corrected) atoms-2,4 state with the target
    /// Bell state; only for one-click records.
    pub conditional_fidelity: Option<f64>,
}

/// Frequency estimate with its binomial standard error `√(p(1−p)/n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub count: u64,
    pub p: f64,
    pub std_err: f64,
}

/// Sample mean with standard error `s/√m`; `std_err` is `None` below two samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub samples: u64,
    pub mean: f64,
    pub std_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub n_trajectories: u64,
    pub seed: u64,
    pub no_click: Estimate,
    pub click_plus: Estimate,
    pub click_minus: Estimate,
    pub two_clicks: Estimate,
    pub conditional_fidelity: Option<MeanEstimate>,
}

/// Trajectory generator with the post-transfer state precomputed.
#[derive(Clone, Debug)]
pub struct TrajectorySampler {
    initial: StateVector,
    ops: DetectionOps,
    k: f64,
    t2: f64,
}

impl TrajectorySampler {
    pub fn new(config: &ProtocolConfig) -> Result<Self> {
        let (initial, _) = run_step1(config)?;
        let ops = DetectionOps::new(initial.layout())?;
        Ok(Self {
            initial,
            ops,
            k: config.dynamics().k(),
            t2: config.t2(),
        })
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial
    }

    /// Squared norms of `(a_A ± a_B)/√2 ψ`, in `[+, −]` order.
    pub fn detector_weights(&self, state: &StateVector) -> [f64; 2] {
        Detector::BOTH.map(|d| self.ops.jump(state.amps(), d).norm_squared())
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> TrajectoryRecord {
        self.run_with_state(rng).0
    }

    /// Sample one record together with the normalized conditional state at `t₂`.
    pub fn run_with_state<R: Rng + ?Sized>(&self, rng: &mut R) -> (TrajectoryRecord, StateVector) {
        let mut amps = self.initial.amps().clone();
        let mut now = 0.0;
        let mut clicks = Vec::new();
        loop {
            let threshold: f64 = rng.random();
            let Some(tau) = self.waiting_time(&amps, threshold, self.t2 - now) else {
                break;
            };
            amps = self.ops.decay(&amps, self.k, tau);
            now += tau;
            let [w_plus, w_minus] = Detector::BOTH.map(|d| self.ops.jump(&amps, d).norm_squared());
            let u: f64 = rng.random();
            let detector = if u * (w_plus + w_minus) < w_plus {
                Detector::Plus
            } else {
                Detector::Minus
            };
            amps = normalize(self.ops.jump(&amps, detector));
            clicks.push(Click { time: now, detector });
        }
        amps = normalize(self.ops.decay(&amps, self.k, self.t2 - now));

        let classification = match clicks.as_slice() {
            [] => EventClass::NoClick,
            [c] if c.detector == Detector::Plus => EventClass::OneClickPlus,
            [_] => EventClass::OneClickMinus,
            _ => EventClass::TwoClicks,
        };
        if classification == EventClass::OneClickMinus {
            amps = self.ops.phase_correct(&amps);
        }
        let state = StateVector::new(self.initial.layout().clone(), amps).expect("same layout");
        let conditional_fidelity = matches!(classification, EventClass::OneClickPlus | EventClass::OneClickMinus)
            .then(|| {
                let rho = state.reduced_density(&[ATOM2, ATOM4]).expect("protocol labels");
                fidelity_pure(&rho, &target_phi24()).expect("normalized state")
            });
        (
            TrajectoryRecord {
                clicks,
                classification,
                conditional_fidelity,
            },
            state,
        )
    }

    /// Time until the no-jump norm of the normalized `amps` drops to
    /// `threshold`, or `None` if it stays above it for `remaining`.
    fn waiting_time(&self, amps: &DVector<C64>, threshold: f64, remaining: f64) -> Option<f64> {
        if self.k == 0.0 || remaining <= 0.0 {
            return None;
        }
        let pops = self.ops.photon_populations(amps);
        let rate = 2.0 * self.k;
        let survival = |tau: f64| -> f64 {
            pops.iter()
                .enumerate()
                .map(|(n, p)| p * (-rate * n as f64 * tau).exp())
                .sum()
        };
        if survival(remaining) > threshold {
            return None;
        }
        let (mut lo, mut hi) = (0.0, remaining);
        while hi - lo > WAITING_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            if survival(mid) > threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

fn normalize(amps: DVector<C64>) -> DVector<C64> {
    let n = amps.norm();
    amps / C64::new(n, 0.0)
}

/// Random stream of trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One trajectory of the detection stage for `config`.
pub fn run_trajectory<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Result<TrajectoryRecord> {
    Ok(TrajectorySampler::new(config)?.run(rng))
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn frequency(count: u64, n: u64) -> Estimate {
    let p = count as f64 / n as f64;
    Estimate {
        count,
        p,
        std_err: (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// Run `n` trajectories on `workers` threads and aggregate.
///
/// The report is a function of `(config, n, seed)` only.
pub fn estimate(config: &ProtocolConfig, n: u64, seed: u64, workers: usize) -> Result<EstimateReport> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if workers == 0 {
        return Err(Error::InvalidInput("workers must be at least 1".into()));
    }
    let sampler = TrajectorySampler::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let outcomes: Vec<(EventClass, Option<f64>)> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let record = sampler.run(&mut trajectory_rng(seed, i));
                (record.classification, record.conditional_fidelity)
            })
            .collect()
    });

    let mut counts = [0u64; 4];
    let mut sum = CompensatedSum::default();
    let mut sum_sq = CompensatedSum::default();
    let mut samples = 0u64;
    // ascending trajectory index
    for (class, fid) in &outcomes {
        counts[*class as usize] += 1;
        if let Some(f) = fid {
            sum.add(*f);
            sum_sq.add(f * f);
            samples += 1;
        }
    }
    let conditional_fidelity = (samples > 0).then(|| {
        let m = samples as f64;
        let mean = sum.value() / m;
        let std_err = (samples > 1).then(|| {
            let var = ((sum_sq.value() - m * mean * mean) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        });
        MeanEstimate {
            samples,
            mean,
            std_err,
        }
    });
    Ok(EstimateReport {
        n_trajectories: n,
        seed,
        no_click: frequency(counts[EventClass::NoClick as usize], n),
        click_plus: frequency(counts[EventClass::OneClickPlus as usize], n),
        click_minus: frequency(counts[EventClass::OneClickMinus as usize], n),
        two_clicks: frequency(counts[EventClass::TwoClicks as usize], n),
        conditional_fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsParams;
    use crate::protocol::{detection_no_click, InputPair};

    fn config(a: f64, c: f64, k: f64, t2: f64) -> ProtocolConfig {
        let p12 = InputPair::real(a, (1.0 - a * a).sqrt()).unwrap();
        let p34 = InputPair::real(c, (1.0 - c * c).sqrt()).unwrap();
        ProtocolConfig::new(p12, p34, DynamicsParams::new(1.0, k).unwrap(), t2).unwrap()
    }

    #[test]
    fn no_excitation_never_clicks() {
        let sampler = TrajectorySampler::new(&config(0.0, 0.0, 0.2, 3.0)).unwrap();
        for i in 0..200 {
            let rec = sampler.run(&mut trajectory_rng(1, i));
            assert!(rec.clicks.is_empty());
            assert_eq!(rec.classification, EventClass::NoClick);
        }
    }

    #[test]
    fn records_are_consistent() {
        let sampler = TrajectorySampler::new(&config(0.7, 0.5, 0.3, 4.0)).unwrap();
        for i in 0..2000 {
            let rec = sampler.run(&mut trajectory_rng(9, i));
            assert!(rec.clicks.windows(2).all(|w| w[0].time < w[1].time));
            assert!(rec.clicks.iter().all(|c| (0.0..=4.0).contains(&c.time)));
            let expected = match rec.clicks.len() {
                0 => EventClass::NoClick,
                1 if rec.clicks[0].detector == Detector::Plus => EventClass::OneClickPlus,
                1 => EventClass::OneClickMinus,
                _ => EventClass::TwoClicks,
            };
            assert_eq!(rec.classification, expected);
            assert_eq!(rec.conditional_fidelity.is_some(), rec.clicks.len() == 1);
        }
    }

    /// One photon in cavity A alone, long window: every trajectory clicks and
    /// the detectors split according to |⟨±|1_A⟩|² = 1/2.
    #[test]
    fn single_photon_long_window() {
        let cfg = config(1.0, 0.0, 0.5, 60.0);
        let sampler = TrajectorySampler::new(&cfg).unwrap();
        let [wp, wm] = sampler.detector_weights(sampler.initial_state());
        assert!((wp - 0.5).abs() < 1e-15 && (wm - 0.5).abs() < 1e-15);
        let r = estimate(&cfg, 20_000, 5, 4).unwrap();
        assert_eq!(r.no_click.count, 0);
        assert_eq!(r.two_clicks.count, 0);
        let se = r.click_plus.std_err;
        assert!((r.click_plus.p - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn jump_weights_match_photon_flux() {
        for (a, c) in [(0.3, 0.9), (0.6, 0.6), (1.0, 1.0)] {
            let cfg = config(a, c, 0.2, 2.0);
            let sampler = TrajectorySampler::new(&cfg).unwrap();
            let psi = sampler.initial_state();
            let k = 0.2;
            let [wp, wm] = sampler.detector_weights(psi);
            let flux: f64 = sampler
                .ops
                .photon_populations(psi.amps())
                .iter()
                .enumerate()
                .map(|(n, p)| n as f64 * p)
                .sum();
            // ‖L₊ψ‖² + ‖L₋ψ‖² with L± = √k(a_A ± a_B), weights are for (a_A ± a_B)/√2
            assert!((2.0 * k * (wp + wm) - 2.0 * k * flux).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_click_state_matches_no_click_evolution() {
        let cfg = config(0.6, 0.4, 0.1, 2.0);
        let sampler = TrajectorySampler::new(&cfg).unwrap();
        let (want, _) = detection_no_click(sampler.initial_state(), &cfg, 2.0).unwrap();
        let mut found = 0;
        for i in 0..200 {
            let (rec, state) = sampler.run_with_state(&mut trajectory_rng(3, i));
            if rec.classification == EventClass::NoClick {
                assert!(state.max_abs_diff(&want) < 1e-10);
                found += 1;
            }
        }
        assert!(found > 0);
    }

    #[test]
    fn estimate_is_scheduling_independent() {
        let cfg = config(0.6, 0.6, 0.2, 2.0);
        let one = estimate(&cfg, 3000, 42, 1).unwrap();
        let eight = estimate(&cfg, 3000, 42, 8).unwrap();
        assert_eq!(one, eight);
        let total = one.no_click.count + one.click_plus.count + one.click_minus.count + one.two_clicks.count;
        assert_eq!(total, 3000);
        assert_ne!(one, estimate(&cfg, 3000, 43, 8).unwrap());
    }

    #[test]
    fn degenerate_estimates() {
        let cfg = config(0.6, 0.6, 0.2, 2.0);
        let r = estimate(&cfg, 1, 7, 1).unwrap();
        for e in [r.no_click, r.click_plus, r.click_minus, r.two_clicks] {
            assert_eq!(e.std_err, 0.0);
        }
        if let Some(f) = r.conditional_fidelity {
            assert_eq!(f.std_err, None);
        }
        assert!(estimate(&cfg, 0, 7, 1).is_err());
        assert!(estimate(&cfg, 1, 7, 0).is_err());
    }
}
