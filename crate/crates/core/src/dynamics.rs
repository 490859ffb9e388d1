//! Conditional (no-jump) dynamics of one driven atom coupled to a leaky cavity.
//!
//! After eliminating the far-detuned upper level, the atom's two ground states
//! `|g⟩`, `|e⟩` exchange an excitation with the cavity mode at the effective
//! rate `δ`, while the cavity leaks at rate `k`:
//!
//! ```text
//! H = iδ (a |e⟩⟨g| − a† |g⟩⟨e|) − i k a†a
//! ```
//!
//! Restricted to `span{|e,0⟩, |g,1⟩}` the amplitudes obey
//! `ċ_e = δ c_g1`, `ċ_g1 = −δ c_e − k c_g1`, which oscillate at
//! `Ω_k = √(4δ² − k²)` under the envelope `e^{−kt/2}`. The transfer time `t₁`
//! is the first zero of `c_e`, and the photon amplitude left at that time is
//! the transfer amplitude `α`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{annihilation, embed, OperatorMatrix, StateVector, SubsystemLayout, C64, E, G};

/// Effective coupling `delta` and cavity decay rate `k`, both in 1/time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DynamicsParams {
    delta: f64,
    k: f64,
}

impl DynamicsParams {
    pub fn new(delta: f64, k: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidInput(format!("k must be nonnegative, got {k}")));
        }
        Ok(Self { delta, k })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Oscillation rate, transfer time and transfer amplitude for one parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransferSolution {
    pub omega_k: f64,
    pub t1: f64,
    pub alpha: f64,
}

impl TransferSolution {
    pub fn solve(params: &DynamicsParams) -> Result<Self> {
        let omega_k = omega_k(params)?;
        let t1 = t1_star(params)?;
        let alpha = alpha_at(params, omega_k, t1);
        Ok(Self { omega_k, t1, alpha })
    }
}

/// `Ω_k = √(4δ² − k²)`; the overdamped regime `2δ ≤ k` is rejected.
pub fn omega_k(params: &DynamicsParams) -> Result<f64> {
    let (delta, k) = (params.delta, params.k);
    if 2.0 * delta <= k {
        return Err(Error::Overdamped {
            two_delta: 2.0 * delta,
            k,
        });
    }
    Ok((4.0 * delta * delta - k * k).sqrt())
}

/// Smallest positive `t₁` with `tan(Ω_k t₁ / 2) = −Ω_k / k`.
///
/// Starts from `Ω_k t₁/2 = π − atan(Ω_k/k)` and polishes the root of
/// `cos x + (k/Ω_k) sin x` inside `(π/2, π)` with safeguarded Newton steps.
pub fn t1_star(params: &DynamicsParams) -> Result<f64> {
    let omega = omega_k(params)?;
    let k = params.k;
    if k == 0.0 {
        return Ok(PI / omega);
    }
    let ratio = k / omega;
    let f = |x: f64| x.cos() + ratio * x.sin();
    let df = |x: f64| -x.sin() + ratio * x.cos();
    let (mut lo, mut hi) = (FRAC_PI_2, PI);
    let mut x = PI - (omega / k).atan();
    for _ in 0..60 {
        let fx = f(x);
        if fx.abs() <= 1e-15 {
            break;
        }
        // f decreases through the root on (π/2, π)
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = x - fx / df(x);
        x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    Ok(2.0 * x / omega)
}

fn alpha_at(params: &DynamicsParams, omega: f64, t1: f64) -> f64 {
    -(2.0 * params.delta / omega) * (-0.5 * params.k * t1).exp() * (0.5 * omega * t1).sin()
}

/// Transfer amplitude `α = c_g1(t₁)`.
pub fn alpha(params: &DynamicsParams) -> Result<f64> {
    Ok(TransferSolution::solve(params)?.alpha)
}

/// Closed-form `(c_e(t), c_g1(t))` starting from `|e,0⟩`.
pub fn no_jump_amplitudes(params: &DynamicsParams, t: f64) -> Result<(C64, C64)> {
    let omega = omega_k(params)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let (delta, k) = (params.delta, params.k);
    let env = (-0.5 * k * t).exp();
    let (s, c) = (0.5 * omega * t).sin_cos();
    let ce = env * (c + (k / omega) * s);
    let cg1 = -(2.0 * delta / omega) * env * s;
    Ok((C64::new(ce, 0.0), C64::new(cg1, 0.0)))
}

/// Effective Hamiltonian for the (atom, cavity) pair embedded in `layout`.
pub fn build_h_eff(
    params: &DynamicsParams,
    layout: &SubsystemLayout,
    atom_label: &str,
    cavity_label: &str,
) -> Result<OperatorMatrix> {
    let atom_dim = layout.dim_of(atom_label)?;
    if atom_dim != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: atom_dim,
        });
    }
    let cav_dim = layout.dim_of(cavity_label)?;
    let a = embed(&annihilation(cav_dim - 1)?, cavity_label, layout)?;
    let a_dag = a.adjoint();
    let raise = embed(&OperatorMatrix::transition(atom_label, 2, E, G)?, atom_label, layout)?;
    let lower = raise.adjoint();
    let exchange = a.mul(&raise)?.sub(&a_dag.mul(&lower)?)?;
    let number = a_dag.mul(&a)?;
    exchange
        .scale(C64::new(0.0, params.delta))
        .sub(&number.scale(C64::new(0.0, params.k)))
}

/// `exp(−iHt)` on the two-factor layout `[atom (2), cavity (n_max + 1)]`.
pub fn no_jump_propagator(
    params: &DynamicsParams,
    t: f64,
    n_max: usize,
    atom_label: &str,
    cavity_label: &str,
) -> Result<OperatorMatrix> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let local = SubsystemLayout::new([(atom_label, 2), (cavity_label, n_max + 1)])?;
    let h = build_h_eff(params, &local, atom_label, cavity_label)?;
    Ok(h.exp_scaled(C64::new(0.0, -t)))
}

/// Conditional evolution of `state` under the atom–cavity Hamiltonian for
/// time `t`. The output is not renormalized: its squared norm is the
/// probability that no photon leaked.
pub fn evolve_no_jump(
    state: &StateVector,
    params: &DynamicsParams,
    t: f64,
    atom_label: &str,
    cavity_label: &str,
) -> Result<StateVector> {
    let n_max = state.layout().dim_of(cavity_label)? - 1;
    let atom_dim = state.layout().dim_of(atom_label)?;
    if atom_dim != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: atom_dim,
        });
    }
    let u = no_jump_propagator(params, t, n_max, atom_label, cavity_label)?;
    state.apply_on(&u, &[atom_label, cavity_label])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(delta: f64, k: f64) -> DynamicsParams {
        DynamicsParams::new(delta, k).unwrap()
    }

    /// Classical RK4 on `ċ_e = δ c_g1`, `ċ_g1 = −δ c_e − k c_g1`.
    fn rk4(delta: f64, k: f64, t: f64, steps: usize) -> (f64, f64) {
        let f = |ce: f64, cg: f64| (delta * cg, -delta * ce - k * cg);
        let h = t / steps as f64;
        let (mut ce, mut cg) = (1.0, 0.0);
        for _ in 0..steps {
            let k1 = f(ce, cg);
            let k2 = f(ce + 0.5 * h * k1.0, cg + 0.5 * h * k1.1);
            let k3 = f(ce + 0.5 * h * k2.0, cg + 0.5 * h * k2.1);
            let k4 = f(ce + h * k3.0, cg + h * k3.1);
            ce += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            cg += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (ce, cg)
    }

    /// First sign change of c_e along an RK4 path, refined by bisection.
    fn first_zero_of_ce(delta: f64, k: f64) -> f64 {
        let dt = 1e-3;
        let mut t = dt;
        while rk4(delta, k, t, (t / 1e-4) as usize + 1).0 > 0.0 {
            t += dt;
        }
        let (mut lo, mut hi) = (t - dt, t);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if rk4(delta, k, mid, 20_000).0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_k(&params(1.0, 0.0)).unwrap(), 2.0);
        assert_abs_diff_eq!(omega_k(&params(1.0, 0.2)).unwrap(), 1.989_974_874_213_24, epsilon = 1e-12);
        assert!(matches!(omega_k(&params(0.5, 1.0)), Err(Error::Overdamped { .. })));
        assert!(omega_k(&params(0.4, 1.0)).unwrap_err().is_regime());
    }

    #[test]
    fn omega_matches_generator_eigenvalue_splitting() {
        // eigenvalues of [[0, δ], [−δ, −k]] are −k/2 ± iΩ_k/2
        let (delta, k) = (1.0, 0.2);
        let m = nalgebra::Matrix2::new(0.0, delta, -delta, -k);
        let ev = m.complex_eigenvalues();
        let split = f64::abs(ev[0].im - ev[1].im);
        assert_abs_diff_eq!(split, omega_k(&params(delta, k)).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn t1_examples() {
        assert_abs_diff_eq!(t1_star(&params(1.0, 0.0)).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(t1_star(&params(1.0, 1e-12)).unwrap(), FRAC_PI_2, epsilon = 1e-10);
        let p = params(1.0, 0.2);
        let t1 = t1_star(&p).unwrap();
        assert_abs_diff_eq!(t1, 1.679_381_754_623_501_7, epsilon = 1e-13);
        assert_abs_diff_eq!(t1, first_zero_of_ce(1.0, 0.2), epsilon = 1e-9);
        let (ce, _) = no_jump_amplitudes(&p, t1).unwrap();
        assert!(ce.norm() < 1e-10);
    }

    #[test]
    fn amplitude_examples() {
        let p = params(1.0, 0.2);
        assert_eq!(no_jump_amplitudes(&p, 0.0).unwrap(), (C64::new(1.0, 0.0), C64::new(0.0, 0.0)));
        let (ce, cg) = no_jump_amplitudes(&params(1.0, 0.0), FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(ce.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cg.re, -1.0, epsilon = 1e-15);

        let t1 = t1_star(&p).unwrap();
        let (ce_rk, cg_rk) = rk4(1.0, 0.2, t1, 200_000);
        let (ce, cg) = no_jump_amplitudes(&p, t1).unwrap();
        assert_abs_diff_eq!(ce.re, ce_rk, epsilon = 1e-10);
        assert_abs_diff_eq!(cg.re, cg_rk, epsilon = 1e-10);
        assert_abs_diff_eq!(cg.re, -0.845_406_099_910_258_7, epsilon = 1e-13);
        assert_eq!(alpha(&p).unwrap(), cg.re);
        assert!(matches!(no_jump_amplitudes(&p, -1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn hamiltonian_action() {
        let p = params(0.7, 0.3);
        let l = SubsystemLayout::new([("atom", 2), ("cav", 3)]).unwrap();
        let h = build_h_eff(&p, &l, "atom", "cav").unwrap();
        let apply = |d: [usize; 2]| h.apply(&StateVector::basis(&l, &d).unwrap()).unwrap();
        assert!(apply([G, 0]).norm() < 1e-15);
        let he0 = apply([E, 0]);
        let want = StateVector::basis(&l, &[G, 1]).unwrap().scale(C64::new(0.0, -0.7));
        assert!(he0.max_abs_diff(&want) < 1e-15);
        let hg1 = apply([G, 1]);
        let want = StateVector::basis(&l, &[E, 0])
            .unwrap()
            .scale(C64::new(0.0, 0.7))
            .add(&StateVector::basis(&l, &[G, 1]).unwrap().scale(C64::new(0.0, -0.3)))
            .unwrap();
        assert!(hg1.max_abs_diff(&want) < 1e-15);

        // Hermitian exchange part, anti-Hermitian decay part
        let exchange = build_h_eff(&params(0.7, 0.0), &l, "atom", "cav").unwrap();
        assert!(exchange.max_abs_diff(&exchange.adjoint()) < 1e-15);
        let decay = h.sub(&exchange).unwrap();
        assert!(decay.max_abs_diff(&decay.adjoint().scale(C64::new(-1.0, 0.0))) < 1e-15);
        assert!(build_h_eff(&p, &l, "atom", "nope").is_err());
    }

    #[test]
    fn evolution_examples() {
        let p = params(1.0, 0.2);
        let sol = TransferSolution::solve(&p).unwrap();
        let l = SubsystemLayout::new([("atom", 2), ("cav", 3)]).unwrap();
        let g0 = StateVector::basis(&l, &[G, 0]).unwrap();
        assert!(evolve_no_jump(&g0, &p, 3.7, "atom", "cav").unwrap().max_abs_diff(&g0) < 1e-14);

        let e0 = StateVector::basis(&l, &[E, 0]).unwrap();
        let out = evolve_no_jump(&e0, &p, sol.t1, "atom", "cav").unwrap();
        let want = StateVector::basis(&l, &[G, 1]).unwrap().scale(C64::new(sol.alpha, 0.0));
        assert!(out.max_abs_diff(&want) < 1e-12);
        assert_abs_diff_eq!(out.norm_sqr(), sol.alpha * sol.alpha, epsilon = 1e-12);

        // δ → 0: pure photon decay with norm e^{−kt}
        let weak = params(1e-9, 0.3);
        let g1 = StateVector::basis(&l, &[G, 1]).unwrap();
        let out = evolve_no_jump(&g1, &weak, 2.0, "atom", "cav").unwrap();
        assert_abs_diff_eq!(out.norm(), (-0.6f64).exp(), epsilon = 1e-12);
        assert!(matches!(evolve_no_jump(&g1, &p, -0.1, "atom", "cav"), Err(Error::NegativeTime(_))));
    }
}
