//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[lo, hi]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root; mirror for the smallest
        nodes[n - 1 - i] = mid + half * x;
        nodes[i] = mid - half * x;
        weights[n - 1 - i] = half * w;
        weights[i] = half * w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n, -1.0, 2.0);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..(2 * n) as i32 {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
                let want = (2f64.powi(deg + 1) - (-1f64).powi(deg + 1)) / (deg + 1) as f64;
                assert!((got - want).abs() < 1e-11 * want.abs().max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn exponential() {
        let (x, w) = gauss_legendre(64, 0.0, 3.0);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * (-0.4 * x).exp()).sum();
        assert!((got - (1.0 - (-1.2f64).exp()) / 0.4).abs() < 1e-14);
    }
}
