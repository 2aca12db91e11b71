//! Reflected dynamics on the half-line and their penalized approximation.
//!
//! The constrained state solves `ẋ = f(x) + ω` with a pushing process `Δ`
//! that keeps `x ≥ 0`. When `f ≡ 0` the pair is given explicitly by the
//! Skorokhod map. For general `f` a projected Euler step realizes the
//! constraint. The penalized ODE replaces the push by the restoring drift
//! `f^κ`.

use crate::error::{Error, Result};
use crate::scenario::{Func, GridSpec, PenaltySpec, ProblemSpec};

/// Piecewise-constant disturbance: `omega[n]` acts on `[times[n], times[n+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    pub times: Vec<f64>,
    pub omega: Vec<f64>,
}

impl ControlSignal {
    pub fn new(times: Vec<f64>, omega: Vec<f64>) -> Result<ControlSignal> {
        if times.len() != omega.len() + 1 || omega.is_empty() {
            return Err(Error::Input(format!(
                "control needs one value per step: {} nodes, {} values",
                times.len(),
                omega.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("control times must increase".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::Input("control values must be finite".into()));
        }
        Ok(ControlSignal { times, omega })
    }

    /// Samples `g` at step midpoints of `grid`.
    pub fn from_func(g: &Func, grid: &GridSpec) -> ControlSignal {
        let times = grid.times();
        let omega = times.windows(2).map(|w| g.eval(0.5 * (w[0] + w[1]))).collect();
        ControlSignal { times, omega }
    }

    pub fn constant(c: f64, grid: &GridSpec) -> ControlSignal {
        ControlSignal { times: grid.times(), omega: vec![c; grid.nt] }
    }

    pub fn steps(&self) -> usize {
        self.omega.len()
    }

    #[inline]
    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    pub fn l2_norm(&self) -> f64 {
        (0..self.steps()).map(|n| self.omega[n] * self.omega[n] * self.dt(n)).sum::<f64>().sqrt()
    }

    /// Running integral `Ω(t_n)` (midpoint rule of the underlying signal).
    pub fn integral(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.times.len());
        out.push(0.0);
        for n in 0..self.steps() {
            acc += self.omega[n] * self.dt(n);
            out.push(acc);
        }
        out
    }
}

/// Reflected path, pushing process and free path `x0 + Ω` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SkorokhodSolution {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub delta: Vec<f64>,
    /// `x0 + ∫ (f(x) + ω)`, the unconstrained increment path.
    pub free: Vec<f64>,
}

impl SkorokhodSolution {
    /// Nonnegativity, monotone pushing process, and pushing only at zero.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if let Some(n) = self.x.iter().position(|&x| x < 0.0) {
            return Err(Error::Invariant(format!("x < 0 at step {n}")));
        }
        if self.delta[0] != 0.0 {
            return Err(Error::Invariant("delta(0) != 0".into()));
        }
        for n in 0..self.x.len() - 1 {
            let dd = self.delta[n + 1] - self.delta[n];
            if dd > 0.0 {
                return Err(Error::Invariant(format!("delta increases at step {n}")));
            }
            if self.x[n + 1] > tol && dd.abs() > tol {
                return Err(Error::Invariant(format!(
                    "delta varies at step {n} while x = {}",
                    self.x[n + 1]
                )));
            }
        }
        Ok(())
    }

    /// Max of `|x + delta - free|`.
    pub fn decomposition_error(&self) -> f64 {
        (0..self.x.len())
            .map(|n| (self.x[n] + self.delta[n] - self.free[n]).abs())
            .fold(0.0, f64::max)
    }

    /// Complementarity sum `Σ x_{n+1} |Δdelta_n|` and total variation of delta.
    pub fn complementarity(&self) -> (f64, f64) {
        let mut s = 0.0;
        let mut tv = 0.0;
        for n in 0..self.x.len() - 1 {
            let dd = (self.delta[n + 1] - self.delta[n]).abs();
            s += self.x[n + 1] * dd;
            tv += dd;
        }
        (s, tv)
    }

    /// Maximal runs of nodes with `x <= tol`, as `(first time, last time)`.
    pub fn contact_windows(&self, tol: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        for n in 0..self.x.len() {
            let on = self.x[n] <= tol;
            match (on, start) {
                (true, None) => start = Some(n),
                (false, Some(s)) => {
                    out.push((self.times[s], self.times[n - 1]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((self.times[s], *self.times.last().unwrap()));
        }
        out
    }

    /// Value of delta right after each contact window.
    pub fn plateaus(&self, tol: f64) -> Vec<f64> {
        self.contact_windows(tol)
            .iter()
            .map(|&(_, b)| {
                let n = self.times.iter().position(|&t| t == b).unwrap();
                self.delta[n]
            })
            .collect()
    }
}

/// Explicit Skorokhod map for `f ≡ 0`:
/// `Δ(t) = min_{s≤t} min(0, x0 + Ω(s))`, `x = x0 + Ω - Δ`.
pub fn solve_explicit(x0: f64, omega: &ControlSignal) -> Result<SkorokhodSolution> {
    if !(x0 >= 0.0) {
        return Err(Error::Domain(format!("initial state must be nonnegative, got {x0}")));
    }
    let big = omega.integral();
    let mut x = Vec::with_capacity(big.len());
    let mut delta = Vec::with_capacity(big.len());
    let mut free = Vec::with_capacity(big.len());
    let mut d: f64 = 0.0;
    for &o in &big {
        let z = x0 + o;
        d = d.min(z.min(0.0));
        // when the push is active x is exactly zero, not z - d rounded
        x.push(if z <= d { 0.0 } else { z - d });
        delta.push(d);
        free.push(z);
    }
    Ok(SkorokhodSolution { times: omega.times.clone(), x, delta, free })
}

/// Projected explicit Euler for the variational inequality with drift `f`.
pub fn solve_vi(x0: f64, omega: &ControlSignal, spec: &ProblemSpec) -> Result<SkorokhodSolution> {
    if !(x0 >= 0.0) {
        return Err(Error::Domain(format!("initial state must be nonnegative, got {x0}")));
    }
    let m = omega.times.len();
    let mut x = Vec::with_capacity(m);
    let mut delta = Vec::with_capacity(m);
    let mut free = Vec::with_capacity(m);
    x.push(x0);
    delta.push(0.0);
    free.push(x0);
    let (mut xn, mut dn, mut fr) = (x0, 0.0, x0);
    for n in 0..omega.steps() {
        let inc = omega.dt(n) * (spec.f.eval(xn) + omega.omega[n]);
        let z = xn + inc;
        fr += inc;
        if z < 0.0 {
            dn += z;
            xn = 0.0;
        } else {
            xn = z;
        }
        x.push(xn);
        delta.push(dn);
        free.push(fr);
    }
    Ok(SkorokhodSolution { times: omega.times.clone(), x, delta, free })
}

fn penalized_substeps(dt: f64, kappa: f64, lip: f64) -> usize {
    ((dt * (2.0 * kappa + lip)) / 0.5).ceil().max(1.0) as usize
}

/// Explicit Euler for `ẋ = f^κ(x) + ω` from `ζ`, sub-stepped so that
/// `dt (2κ + Lip f) ≤ 1/2`. Returns the state at the control's time nodes.
pub fn solve_penalized(zeta: f64, omega: &ControlSignal, spec: &ProblemSpec, pen: &PenaltySpec) -> Vec<f64> {
    let lip = spec.f_lipschitz();
    let mut out = Vec::with_capacity(omega.times.len());
    let mut x = zeta;
    out.push(x);
    for n in 0..omega.steps() {
        let dt = omega.dt(n);
        let m = penalized_substeps(dt, pen.kappa, lip);
        let h = dt / m as f64;
        for _ in 0..m {
            x += h * (spec.penalized_drift(pen, x) + omega.omega[n]);
        }
        out.push(x);
    }
    out
}

/// Integrates `-ẋ_rev = f^κ(x_rev) + ω` backward from the terminal value
/// `x`. Entry `n` of the result is the state at `times[n]`; the last entry
/// is `x`.
pub fn solve_penalized_reverse(
    x: f64,
    omega: &ControlSignal,
    spec: &ProblemSpec,
    pen: &PenaltySpec,
) -> Vec<f64> {
    let lip = spec.f_lipschitz();
    let steps = omega.steps();
    let mut out = vec![0.0; steps + 1];
    let mut z = x;
    out[steps] = z;
    for n in (0..steps).rev() {
        let dt = omega.dt(n);
        let m = penalized_substeps(dt, pen.kappa, lip);
        let h = dt / m as f64;
        for _ in 0..m {
            z -= h * (spec.penalized_drift(pen, z) + omega.omega[n]);
        }
        out[n] = z;
    }
    out
}

/// Sup-norm gap between penalized and constrained paths for each κ.
///
/// The reference is the constrained solution (explicit map when `f ≡ 0`,
/// projected Euler otherwise) on a 4× finer grid driven by `spec.omega`,
/// compared at the nodes of `grid`.
pub fn penalization_gap(kappas: &[f64], spec: &ProblemSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    if kappas.is_empty() {
        return Err(Error::Input("empty kappa ladder".into()));
    }
    let fine_grid = GridSpec { nt: grid.nt * 4, ..*grid };
    let fine = ControlSignal::from_func(&spec.omega, &fine_grid);
    let reference = if spec.f.is_zero() {
        solve_explicit(spec.x0, &fine)?
    } else {
        solve_vi(spec.x0, &fine, spec)?
    };
    let coarse = ControlSignal::from_func(&spec.omega, grid);
    kappas
        .iter()
        .map(|&k| {
            let pen = PenaltySpec::new(k)?;
            let path = solve_penalized(spec.x0, &coarse, spec, &pen);
            Ok((0..path.len())
                .map(|n| (path[n] - reference.x[4 * n]).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_scenario;
    use proptest::prelude::*;

    fn grid(t: f64, nt: usize) -> GridSpec {
        GridSpec::new(4.0, 8, t, nt).unwrap()
    }

    #[test]
    fn explicit_at_rest() {
        let g = grid(1.0, 100);
        let s = solve_explicit(1.0, &ControlSignal::constant(0.0, &g)).unwrap();
        assert!(s.x.iter().all(|&x| x == 1.0));
        assert!(s.delta.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn explicit_immediate_reflection() {
        let g = grid(2.0, 200);
        let s = solve_explicit(0.0, &ControlSignal::constant(-1.0, &g)).unwrap();
        assert!(s.x.iter().all(|&x| x == 0.0));
        for (t, d) in s.times.iter().zip(&s.delta) {
            assert!((d + t).abs() < 1e-12);
        }
        s.check_invariants(1e-12).unwrap();
    }

    #[test]
    fn explicit_rejects_negative_start() {
        let g = grid(1.0, 10);
        assert!(matches!(
            solve_explicit(-0.1, &ControlSignal::constant(0.0, &g)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn vi_decay_without_reflection() {
        let mut spec = builtin_scenario("zero").unwrap();
        spec.f = Func::poly(&[0.0, -1.0]).truncated(-20.0, 20.0, 5.0);
        let errs: Vec<f64> = [400, 800]
            .iter()
            .map(|&nt| {
                let g = grid(2.0, nt);
                let s = solve_vi(1.0, &ControlSignal::constant(0.0, &g), &spec).unwrap();
                assert!(s.delta.iter().all(|&d| d == 0.0));
                s.times.iter().zip(&s.x).map(|(t, x)| (x - (-t).exp()).abs()).fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 2e-3);
        let ratio = errs[0] / errs[1];
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn vi_rest_point() {
        let mut spec = builtin_scenario("zero").unwrap();
        spec.f = Func::Tanh { amp: 0.7, rate: 1.0, center: 0.0 };
        let g = grid(3.0, 300);
        let s = solve_vi(0.0, &ControlSignal::constant(0.0, &g), &spec).unwrap();
        assert!(s.x.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn vi_matches_explicit_when_drift_vanishes() {
        let spec = builtin_scenario("figure1").unwrap();
        let g = spec.grid;
        let w = ControlSignal::from_func(&spec.omega, &g);
        let a = solve_explicit(spec.x0, &w).unwrap();
        let b = solve_vi(spec.x0, &w, &spec).unwrap();
        let gap = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "gap {gap}");
    }

    #[test]
    fn penalized_trivial_cases() {
        let spec = builtin_scenario("zero").unwrap();
        let g = grid(1.0, 50);
        let pen = PenaltySpec::new(10.0).unwrap();
        let p = solve_penalized(1.0, &ControlSignal::constant(0.0, &g), &spec, &pen);
        assert!(p.iter().all(|&x| x == 1.0));
        let q = solve_penalized(-1.0, &ControlSignal::constant(0.0, &g), &spec, &pen);
        assert!(q.windows(2).all(|w| w[1] >= w[0]));
        assert!(*q.last().unwrap() <= 0.0 && *q.last().unwrap() > -0.1);
    }

    #[test]
    fn penalized_approaches_reflection() {
        let spec = builtin_scenario("zero").unwrap();
        let g = grid(2.0, 2000);
        let w = ControlSignal::constant(-1.0, &g);
        let reference = solve_explicit(1.0, &w).unwrap();
        let err = |k: f64| {
            let p = solve_penalized(1.0, &w, &spec, &PenaltySpec::new(k).unwrap());
            p.iter().zip(&reference.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e4) = (err(100.0), err(400.0));
        assert!(e1 < 0.02 && e4 < e1, "{e1} {e4}");
    }

    #[test]
    fn reverse_constant_and_linear() {
        let spec = builtin_scenario("zero").unwrap();
        let g = grid(1.0, 40);
        let pen = PenaltySpec::new(10.0).unwrap();
        let r = solve_penalized_reverse(1.0, &ControlSignal::constant(0.0, &g), &spec, &pen);
        assert!(r.iter().all(|&x| x == 1.0));
        let r = solve_penalized_reverse(3.0, &ControlSignal::constant(0.5, &g), &spec, &pen);
        for (n, t) in g.times().iter().enumerate() {
            assert!((r[n] - (3.0 - 0.5 * (1.0 - t))).abs() < 1e-12);
        }
    }

    #[test]
    fn reverse_then_forward_round_trip() {
        let mut spec = builtin_scenario("zero").unwrap();
        spec.f = Func::Tanh { amp: -0.8, rate: 1.0, center: 0.0 };
        let pen = PenaltySpec::new(10.0).unwrap();
        let gap = |nt: usize| {
            let g = grid(1.0, nt);
            let w = ControlSignal::from_func(&Func::Sin { amp: 1.0, freq: 3.0, phase: 0.0 }, &g);
            let back = solve_penalized_reverse(0.3, &w, &spec, &pen);
            let fwd = solve_penalized(back[0], &w, &spec, &pen);
            (fwd.last().unwrap() - 0.3).abs()
        };
        let (a, b) = (gap(100), gap(200));
        assert!(a < 0.05 && b < a * 0.7, "{a} {b}");
    }

    #[test]
    fn gap_ladder_edge_cases() {
        let spec = builtin_scenario("zero").unwrap();
        assert!(penalization_gap(&[], &spec, &spec.grid).is_err());
        let mut s = spec.clone();
        s.x0 = 1.0;
        let gaps = penalization_gap(&[10.0, 40.0], &s, &s.grid).unwrap();
        assert!(gaps.iter().all(|&g| g < 1e-12));
        assert_eq!(penalization_gap(&[10.0], &s, &s.grid).unwrap().len(), 1);
    }

    proptest! {
        #[test]
        fn explicit_invariants(x0 in 0.0f64..3.0, a in -3.0f64..3.0, fr in 0.1f64..5.0) {
            let g = grid(4.0, 400);
            let w = ControlSignal::from_func(&Func::Sin { amp: a, freq: fr, phase: 0.4 }, &g);
            let s = solve_explicit(x0, &w).unwrap();
            s.check_invariants(1e-12).unwrap();
            prop_assert!(s.decomposition_error() < 1e-12);
            let (c, tv) = s.complementarity();
            prop_assert!(c <= 1e-12 * tv.max(1.0));
        }

        #[test]
        fn vi_invariants(x0 in 0.0f64..3.0, a in -3.0f64..3.0, b in -1.0f64..1.0) {
            let mut spec = builtin_scenario("zero").unwrap();
            spec.f = Func::Tanh { amp: b, rate: 1.0, center: 0.0 };
            let g = grid(4.0, 400);
            let w = ControlSignal::from_func(&Func::Cos { amp: a, freq: 2.0, phase: 0.0 }, &g);
            let s = solve_vi(x0, &w, &spec).unwrap();
            s.check_invariants(0.0).unwrap();
            prop_assert!(s.decomposition_error() < 1e-11);
        }
    }
}
