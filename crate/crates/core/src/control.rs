//! Backward-control value function `W` and its identification with the
//! inviscid limit `w`.
//!
//! `W(x, t) = min_ω ψ(z(0)) + ∫₀ᵗ ℓ̃(z(s), ω(s), s) ds` over reflected
//! backward trajectories `z` ending at `z(t) = x`, with
//! `ℓ̃ = ½ω² + ½h² - ẏh`. `W` lives in the same gauge as `w`; adding
//! `∫₀ᵗ ½ẏ²` moves it to the gauge of the cost-to-come `V`.

use rayon::prelude::*;
use serde::Serialize;

use crate::costcome::{constrained_cost_field, cost_to_come_hjb, shoot_constrained, ControlGrid};
use crate::error::{Error, Result};
use crate::field::{interp_uniform, ScalarField};
use crate::hjb::SolverOptions;
use crate::scenario::{GridSpec, PenaltySpec, ProblemSpec};
use crate::skorokhod::ControlSignal;

/// `W` on `[0, xmax]`.
#[derive(Debug, Clone)]
pub struct ValueField {
    pub field: ScalarField,
}

/// `½ω² + ½h(x)² - ẏ(t) h(x)`.
#[inline]
pub fn backward_running_cost(spec: &ProblemSpec, omega: f64, x: f64, t: f64) -> f64 {
    let h = spec.h.eval(x);
    0.5 * omega * omega + 0.5 * h * h - spec.ydot.eval(t) * h
}

/// One backward step of the reflected backward dynamics, clamped at 0.
#[inline]
fn backward_foot(spec: &ProblemSpec, x: f64, omega: f64, dt: f64) -> f64 {
    (x - dt * (spec.f.eval(x) + omega)).max(0.0)
}

fn backup(spec: &ProblemSpec, controls: &ControlGrid, prev: &[f64], dx: f64, dt: f64, x: f64, t1: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    for &w in &controls.values {
        let z = backward_foot(spec, x, w, dt);
        let v = interp_uniform(0.0, dx, prev, z) + dt * backward_running_cost(spec, w, x, t1);
        if v < best.0 {
            best = (v, w);
        }
    }
    best
}

/// Time-marching dynamic program
/// `W(x, t+Δt) = min_ω W(max(0, x - Δt (f(x) + ω)), t) + Δt ℓ̃(ω, x, t+Δt)`
/// with linear interpolation in space.
pub fn backward_value_dp(spec: &ProblemSpec, grid: &GridSpec, controls: &ControlGrid) -> Result<ValueField> {
    if controls.values.is_empty() {
        return Err(Error::Input("control grid is empty".into()));
    }
    grid.validate()?;
    let xs = grid.xs();
    let times = grid.times();
    let (dx, dt) = (grid.dx(), grid.dt());
    let mut v: Vec<f64> = xs.iter().map(|&x| spec.psi.eval(x)).collect();
    let mut values = Vec::with_capacity(xs.len() * times.len());
    values.extend_from_slice(&v);
    for n in 0..grid.nt {
        let t1 = times[n + 1];
        let prev = &v;
        let next: Vec<f64> = xs.par_iter().map(|&x| backup(spec, controls, prev, dx, dt, x, t1).0).collect();
        v = next;
        values.extend_from_slice(&v);
    }
    Ok(ValueField { field: ScalarField::new(times, xs, values)? })
}

/// Optimal backward path reconstructed from a value field.
#[derive(Debug, Clone)]
pub struct BackwardTrajectory {
    pub x: f64,
    pub t: f64,
    /// Decreasing from `t` to 0.
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    /// Control in forward time order on the increasing grid.
    pub control: ControlSignal,
    /// Steps where the clamp at 0 fired, in forward order.
    pub clamped: Vec<bool>,
    /// Drift `f(z)` at the arrival point of each step, forward order.
    pub drift: Vec<f64>,
}

impl BackwardTrajectory {
    /// Checks `z(t) = x`, `z ≥ 0`, `ż = f + ω` on unclamped steps and
    /// `ω + f - ż ≥ 0` on clamped ones.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if self.z[0] != self.x {
            return Err(Error::Invariant(format!("terminal point {} != {}", self.z[0], self.x)));
        }
        if let Some(z) = self.z.iter().find(|&&z| z < 0.0) {
            return Err(Error::Invariant(format!("backward path went negative: {z}")));
        }
        let steps = self.control.steps();
        for k in 0..steps {
            // forward step k goes from z at index steps-k to index steps-k-1
            let z0 = self.z[steps - k];
            let z1 = self.z[steps - k - 1];
            let dt = self.control.dt(k);
            let zdot = (z1 - z0) / dt;
            let rate = self.control.omega[k] + self.drift[k];
            if self.clamped[k] {
                if rate - zdot < -tol {
                    return Err(Error::Invariant(format!("step {k}: ω + f - ż = {} < 0 on a clamped step", rate - zdot)));
                }
            } else if (rate - zdot).abs() > tol * (1.0 + rate.abs()) {
                return Err(Error::Invariant(format!("step {k}: ż = {zdot} but ω + f = {rate}")));
            }
        }
        Ok(())
    }

    /// The path reached the boundary.
    pub fn touches_boundary(&self) -> bool {
        self.clamped.iter().any(|&c| c) || self.z.iter().any(|&z| z <= 0.0)
    }
}

/// Follows the DP argmin backward from `(x, t)`. `t` must be a time node.
pub fn reconstruct_backward_trajectory(spec: &ProblemSpec, grid: &GridSpec, controls: &ControlGrid, value: &ValueField, x: f64, t: f64) -> Result<BackwardTrajectory> {
    if x < 0.0 {
        return Err(Error::Domain(format!("terminal point must be nonnegative, got {x}")));
    }
    let f = &value.field;
    let n_end = (t / grid.dt()).round() as usize;
    if ((t / grid.dt()) - n_end as f64).abs() > 1e-9 || n_end >= f.n_t() {
        return Err(Error::Input(format!("t = {t} is not a node of the time grid")));
    }
    let (dx, dt) = (grid.dx(), grid.dt());
    let mut z = vec![x];
    let mut omega = vec![0.0; n_end];
    let mut clamped = vec![false; n_end];
    let mut drift = vec![0.0; n_end];
    let mut cur = x;
    for n in (0..n_end).rev() {
        let (_, w) = backup(spec, controls, f.slice(n), dx, dt, cur, f.times[n + 1]);
        let raw = cur - dt * (spec.f.eval(cur) + w);
        omega[n] = w;
        drift[n] = spec.f.eval(cur);
        clamped[n] = raw < 0.0;
        cur = raw.max(0.0);
        z.push(cur);
    }
    let times: Vec<f64> = (0..=n_end).rev().map(|n| f.times[n]).collect();
    let control = ControlSignal::new(f.times[..=n_end].to_vec(), omega)?;
    Ok(BackwardTrajectory { x, t, times, z, control, clamped, drift })
}

/// `‖W - w‖∞` over `window` on matched grids.
pub fn identify_with_limit(value: &ValueField, w: &ScalarField, window: (f64, f64)) -> Result<f64> {
    value.field.sup_diff_window(w, window.0, window.1)
}

/// `∫₀ᵗ ½ẏ²` at each time node (trapezoid with 8 sub-intervals per step).
pub fn observation_energy(spec: &ProblemSpec, times: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; times.len()];
    for n in 1..times.len() {
        let (a, b) = (times[n - 1], times[n]);
        let m = 8;
        let h = (b - a) / m as f64;
        let g = |s: f64| 0.5 * spec.ydot.eval(s).powi(2);
        let mut acc = 0.5 * (g(a) + g(b));
        for k in 1..m {
            acc += g(a + k as f64 * h);
        }
        out[n] = out[n - 1] + acc * h;
    }
    out
}

/// One row of the boundary discrepancy table. `w` is reported in the gauge
/// of `V` (shifted by `∫½ẏ²`).
#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub x: f64,
    pub t: f64,
    pub v_constrained: f64,
    pub w: f64,
    pub v_penalized: f64,
    pub gap: f64,
    /// Neither the forward shooting path nor the backward path touches 0.
    pub reflection_free: bool,
}

/// Computes `V` (forward shooting), `W` and the large-κ `V^κ` at each
/// requested `(x, t)`; `t` values must be time nodes.
pub fn boundary_discrepancy_table(
    spec: &ProblemSpec,
    pen: &PenaltySpec,
    grid: &GridSpec,
    controls: &ControlGrid,
    points: &[(f64, f64)],
) -> Result<Vec<TableRow>> {
    let dp = constrained_cost_field(spec, grid, controls)?;
    let value = backward_value_dp(spec, grid, controls)?;
    let pen_field = cost_to_come_hjb(spec, pen, grid, &SolverOptions::default())?;
    let energy = observation_energy(spec, &grid.times());
    points
        .par_iter()
        .map(|&(x, t)| {
            let n = (t / grid.dt()).round() as usize;
            let shot = shoot_constrained(spec, grid, controls, &dp, x, t)?;
            let traj = reconstruct_backward_trajectory(spec, grid, controls, &value, x, t)?;
            let w = value.field.interp(n, x) + energy[n];
            let v_penalized = pen_field.field.interp(n, x);
            Ok(TableRow {
                x,
                t,
                v_constrained: shot.cost,
                w,
                v_penalized,
                gap: (shot.cost - w).abs(),
                reflection_free: !shot.touched_boundary && !traj.touches_boundary(),
            })
        })
        .collect()
}

/// Default probe points: the first few nodes next to 0 and a spread of
/// interior nodes, at the final time.
pub fn default_table_points(grid: &GridSpec) -> Vec<(f64, f64)> {
    let dx = grid.dx();
    let mut pts: Vec<f64> = (0..4).map(|k| k as f64 * dx).collect();
    for k in 1..=4 {
        let x = (k as f64 * grid.xmax / 5.0 / dx).round() * dx;
        if !pts.iter().any(|&p| (p - x).abs() < 0.5 * dx) {
            pts.push(x);
        }
    }
    pts.into_iter().map(|x| (x, grid.t_end)).collect()
}
