//! Runtime checks of the uniform bounds for the viscous w equation.

use serde::Serialize;

use super::{drift_potential, HamiltonianKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::scenario::ProblemSpec;

/// Measured quantities and the two right-hand sides of the sup bound.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub eps: f64,
    pub radius: f64,
    pub eps_gate: f64,
    pub sup: f64,
    /// Right-hand side with `8 (1 + ‖g‖)`.
    pub rhs_drift: f64,
    /// Right-hand side with `8 (1 + ‖f‖²)`.
    pub rhs_drift_sq: f64,
    /// The larger right-hand side, which is the binding one.
    pub rhs: f64,
    pub lipschitz: f64,
    pub holder: f64,
    pub violations: Vec<String>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `min(1/(32R⁴), 1/(2R²))`.
pub fn eps_gate(radius: f64) -> f64 {
    (1.0 / (32.0 * radius.powi(4))).min(1.0 / (2.0 * radius * radius))
}

const SAMPLES: usize = 4000;

/// Checks a viscous w field on `Q_R = [0, R] × [0, T]`.
///
/// Sup norms of coefficients are sampled over the computational window
/// `[-xmax, xmax]` of the even extension.
pub fn check_bounds(field: &ScalarField, spec: &ProblemSpec, eps: f64, radius: f64) -> Result<BoundReport> {
    let xmax = *field.xs.last().unwrap();
    if !(radius > 0.0) || radius > xmax * (1.0 + 1e-12) {
        return Err(Error::Input(format!("radius {radius} must lie in (0, {xmax}]")));
    }
    let gate = eps_gate(radius);
    if eps > gate {
        return Err(Error::Input(format!("eps = {eps} exceeds the gate {gate:.6e} for R = {radius}")));
    }
    let idx = field.window_indices(0.0, radius);
    let sup = (0..field.n_t())
        .flat_map(|n| idx.iter().map(move |&i| field.at(n, i).abs()))
        .fold(0.0, f64::max);

    let w0 = spec.psi.sup_abs(-xmax, xmax, SAMPLES);
    let g = spec.f.sup_abs(-xmax, xmax, SAMPLES);
    let kind = HamiltonianKind::WEpsSymmetrized { eps };
    let mut potential: f64 = 0.0;
    for &t in &field.times {
        for k in 0..=SAMPLES / 4 {
            let x = -xmax + 2.0 * xmax * k as f64 / (SAMPLES / 4) as f64;
            potential = potential.max(drift_potential(&kind, spec, x, t).1.abs());
        }
    }
    let t_end = *field.times.last().unwrap();
    let rhs_drift = w0 + (8.0 * (1.0 + g) + potential + 1.0) * t_end + 1.0;
    let rhs_drift_sq = w0 + (8.0 * (1.0 + g * g) + potential + 1.0) * t_end + 1.0;
    let rhs = rhs_drift.max(rhs_drift_sq);

    let dx = field.dx();
    let mut lipschitz: f64 = 0.0;
    for n in 0..field.n_t() {
        for w in idx.windows(2) {
            lipschitz = lipschitz.max((field.at(n, w[1]) - field.at(n, w[0])).abs() / dx);
        }
    }
    let mut holder: f64 = 0.0;
    for &i in &idx {
        for n in 0..field.n_t() {
            for m in n + 1..field.n_t() {
                let d = field.times[m] - field.times[n];
                let q = (field.at(m, i) - field.at(n, i)).abs() / (d.sqrt() + d);
                holder = holder.max(q);
            }
        }
    }
    let mut violations = Vec::new();
    if sup > rhs {
        violations.push(format!("sup |w| = {sup:.6e} exceeds {rhs:.6e}"));
    }
    if !lipschitz.is_finite() || !holder.is_finite() {
        violations.push("non-finite regularity quotient".into());
    }
    Ok(BoundReport { eps, radius, eps_gate: gate, sup, rhs_drift, rhs_drift_sq, rhs, lipschitz, holder, violations })
}

/// Relative spread `(max - min) / max` of a quotient across a ladder, with
/// an all-zero series counted as perfectly stable.
pub fn bound_stability(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::{solve_viscous, SolverOptions};
    use crate::scenario::builtin_scenario;

    #[test]
    fn gate_takes_the_minimum() {
        assert_eq!(eps_gate(1.0), 1.0 / 32.0);
        assert!((eps_gate(0.1) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn zero_problem() {
        let s = builtin_scenario("zero").unwrap();
        let w = solve_viscous(&HamiltonianKind::WEps { eps: 0.01 }, &s, &s.grid, &SolverOptions::default()).unwrap();
        let r = check_bounds(&w, &s, 0.01, 1.0).unwrap();
        assert_eq!(r.sup, 0.0);
        assert!(r.passed());
        assert_eq!(r.lipschitz, 0.0);
    }

    #[test]
    fn constant_observation_rhs() {
        let s = builtin_scenario("constant-obs").unwrap();
        let w = solve_viscous(&HamiltonianKind::WEps { eps: 0.01 }, &s, &s.grid, &SolverOptions::default()).unwrap();
        let r = check_bounds(&w, &s, 0.01, 1.0).unwrap();
        assert!((r.rhs - 10.5).abs() < 1e-12, "{}", r.rhs);
        assert!((r.sup - 0.5).abs() < 1e-10);
        assert!(r.passed());
    }

    #[test]
    fn gate_and_radius_are_enforced() {
        let s = builtin_scenario("zero").unwrap();
        let w = solve_viscous(&HamiltonianKind::WEps { eps: 0.01 }, &s, &s.grid, &SolverOptions::default()).unwrap();
        assert!(check_bounds(&w, &s, 0.1, 1.0).is_err());
        assert!(check_bounds(&w, &s, 0.01, 10.0).is_err());
    }

    #[test]
    fn stability_metric() {
        assert_eq!(bound_stability(&[0.0, 0.0]), 0.0);
        assert!((bound_stability(&[1.0, 0.9, 0.95]) - 0.1).abs() < 1e-12);
    }
}
