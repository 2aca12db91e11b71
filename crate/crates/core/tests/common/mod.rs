//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use mortensen::scenario::lq;
use mortensen::Func;

/// Kalman–Bucy mean and variance for `dx = a x dt + dw`, `dy = c x dt + dv`
/// with prior `N(m0, p0)`, fed the observation rate `ydot`. Classical RK4
/// with `sub` substeps per interval.
pub fn kalman_mean(ydot: &Func, times: &[f64], sub: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, c) = (lq::A, lq::C);
    let rhs = |t: f64, m: f64, p: f64| (a * m + p * c * (ydot.eval(t) - c * m), 2.0 * a * p + 1.0 - c * c * p * p);
    let (mut m, mut p) = (lq::M0, lq::P0);
    let mut ms = vec![m];
    let mut ps = vec![p];
    for w in times.windows(2) {
        let h = (w[1] - w[0]) / sub as f64;
        for k in 0..sub {
            let t = w[0] + k as f64 * h;
            let k1 = rhs(t, m, p);
            let k2 = rhs(t + h / 2.0, m + h / 2.0 * k1.0, p + h / 2.0 * k1.1);
            let k3 = rhs(t + h / 2.0, m + h / 2.0 * k2.0, p + h / 2.0 * k2.1);
            let k4 = rhs(t + h, m + h * k3.0, p + h * k3.1);
            m += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            p += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        ms.push(m);
        ps.push(p);
    }
    (ms, ps)
}

/// `E|ξ + σ Z|` for standard normal `Z`, by composite Simpson on `[-10, 10]`.
/// This is the mean of Brownian motion reflected at 0 started from `ξ`.
pub fn folded_normal_mean(xi: f64, sigma: f64) -> f64 {
    let n = 4000;
    let (a, b) = (-10.0, 10.0);
    let h = (b - a) / n as f64;
    let g = |z: f64| (xi + sigma * z).abs() * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = g(a) + g(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Hopf–Lax value for `ψ = (x - 1)²/2` with free dynamics and no
/// observation cost.
pub fn quadratic_cost_to_come(x: f64, t: f64) -> f64 {
    (x - 1.0).powi(2) / (2.0 * (1.0 + t))
}
