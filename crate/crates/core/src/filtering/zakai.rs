//! Zakai equation, its robust form and the Hopf–Cole transform.
//!
//! Densities are stored slice by slice scaled to a unit maximum, with the
//! logarithm of the scale kept alongside, so that `exp(-V/ε)` stays
//! representable for small ε.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::hjb::{solve_cost_to_come_full, HamiltonianKind, SolverOptions};
use crate::scenario::{GridSpec, PenaltySpec, ProblemSpec};

/// Positivity safety factor on the explicit step bounds.
const THETA: f64 = 0.9;
const FLOOR: f64 = 1e-300;

/// State space of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterDomain {
    /// `[0, xmax]`, zero flux at both ends.
    Reflected,
    /// `[-xmax, xmax]` with the penalized drift `f^κ`.
    Penalized { pen: PenaltySpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gauge {
    /// Unnormalized conditional density.
    Q,
    /// Robust density `exp(-y h / ε) q`.
    P,
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gauge::Q => "q",
            Gauge::P => "p",
        })
    }
}

/// Nonnegative density with per-slice scaling: the density at `(n, i)` is
/// `field.at(n, i) · exp(log_scale[n])`.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub field: ScalarField,
    pub gauge: Gauge,
    pub log_scale: Vec<f64>,
}

fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let dx = xs[1] - xs[0];
    let mut w = vec![dx; xs.len()];
    w[0] = 0.5 * dx;
    *w.last_mut().unwrap() = 0.5 * dx;
    w
}

impl DensityField {
    fn expect(&self, g: Gauge) -> Result<()> {
        if self.gauge != g {
            return Err(Error::Gauge { expected: g.to_string(), found: self.gauge.to_string() });
        }
        Ok(())
    }

    /// Trapezoid mass of the stored (scaled) slice.
    pub fn scaled_mass(&self, n: usize) -> f64 {
        let w = trapezoid_weights(&self.field.xs);
        self.field.slice(n).iter().zip(&w).map(|(q, w)| q * w).sum()
    }

    /// Logarithm of the true mass.
    pub fn log_mass(&self, n: usize) -> f64 {
        self.scaled_mass(n).ln() + self.log_scale[n]
    }

    /// Mean and variance of the normalized slice.
    pub fn moments(&self, n: usize) -> (f64, f64) {
        let w = trapezoid_weights(&self.field.xs);
        let s = self.field.slice(n);
        let m0: f64 = s.iter().zip(&w).map(|(q, w)| q * w).sum();
        let m1: f64 = s.iter().zip(&w).zip(&self.field.xs).map(|((q, w), x)| q * w * x).sum::<f64>() / m0;
        let m2: f64 = s.iter().zip(&w).zip(&self.field.xs).map(|((q, w), x)| q * w * (x - m1).powi(2)).sum::<f64>() / m0;
        (m1, m2)
    }

    pub fn min_value(&self) -> f64 {
        self.field.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// `exp(-(ψ - min ψ)/ε)` on `xs` and its log scale `-min ψ / ε`.
pub fn initial_density(spec: &ProblemSpec, xs: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let psi: Vec<f64> = xs.iter().map(|&x| spec.psi.eval(x)).collect();
    let m = psi.iter().cloned().fold(f64::INFINITY, f64::min);
    (psi.iter().map(|&v| (-(v - m) / eps).exp()).collect(), -m / eps)
}

/// Bernoulli function `z / (e^z - 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Finite-volume Zakai operator on a uniform node grid with half cells at
/// both ends: Neumann drift-diffusion step with Scharfetter–Gummel fluxes,
/// then the exponential observation update.
///
/// The exponentially fitted flux stays positive for any cell Péclet number
/// without the artificial diffusion of plain upwinding, which would swamp
/// `ε/2` as ε shrinks.
#[derive(Debug, Clone)]
pub struct ZakaiOperator {
    pub xs: Vec<f64>,
    wts: Vec<f64>,
    /// Flux coefficients `(a, b)` at each face: flux `a q_i - b q_{i+1}`.
    faces: Vec<(f64, f64)>,
    h: Vec<f64>,
    eps: f64,
    /// Largest step keeping the heat step positive.
    pub dt_max: f64,
}

impl ZakaiOperator {
    pub fn new(spec: &ProblemSpec, xs: Vec<f64>, eps: f64, domain: FilterDomain) -> Result<ZakaiOperator> {
        if !(eps > 0.0) {
            return Err(Error::Input(format!("eps must be positive, got {eps}")));
        }
        if xs.len() < 3 {
            return Err(Error::Grid("Zakai grid needs at least three nodes".into()));
        }
        let dx = xs[1] - xs[0];
        let drift = |x: f64| match domain {
            FilterDomain::Reflected => spec.f.eval(x),
            FilterDomain::Penalized { pen } => spec.penalized_drift(&pen, x),
        };
        let d = 0.5 * eps / dx;
        let faces: Vec<(f64, f64)> = xs
            .windows(2)
            .map(|w| {
                let pe = drift(0.5 * (w[0] + w[1])) * dx / (0.5 * eps);
                (d * bernoulli(-pe), d * bernoulli(pe))
            })
            .collect();
        let wts = trapezoid_weights(&xs);
        let n = xs.len();
        let mut dt_max = f64::INFINITY;
        for i in 0..n {
            let mut out = 0.0;
            if i + 1 < n {
                out += faces[i].0;
            }
            if i > 0 {
                out += faces[i - 1].1;
            }
            dt_max = dt_max.min(wts[i] / out);
        }
        let h = xs.iter().map(|&x| spec.h.eval(x)).collect();
        Ok(ZakaiOperator { xs, wts, faces, h, eps, dt_max })
    }

    /// One splitting step. Fails with a CFL error when `dt` exceeds the
    /// positivity bound.
    pub fn step(&self, q: &[f64], dy: f64, dt: f64) -> Result<Vec<f64>> {
        if dt > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, required: self.dt_max });
        }
        if q.len() != self.xs.len() {
            return Err(Error::GridMismatch(format!("slice has {} values, grid has {}", q.len(), self.xs.len())));
        }
        let n = q.len();
        let mut out = q.to_vec();
        for i in 0..n - 1 {
            let (a, b) = self.faces[i];
            let flux = a * q[i] - b * q[i + 1];
            out[i] -= dt * flux / self.wts[i];
            out[i + 1] += dt * flux / self.wts[i + 1];
        }
        let inv = 1.0 / self.eps;
        for (o, &h) in out.iter_mut().zip(&self.h) {
            *o = (*o * (inv * (h * dy - 0.5 * h * h * dt)).exp()).max(0.0);
        }
        Ok(out)
    }
}

/// One Zakai step on the reflected domain with nodes `xs`.
pub fn zakai_step(q: &[f64], xs: &[f64], spec: &ProblemSpec, eps: f64, dy: f64, dt: f64) -> Result<Vec<f64>> {
    ZakaiOperator::new(spec, xs.to_vec(), eps, FilterDomain::Reflected)?.step(q, dy, dt)
}

fn rescale(v: &mut [f64], step: usize) -> Result<f64> {
    let m = v.iter().cloned().fold(0.0, f64::max);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::NonFinite { step });
    }
    for x in v.iter_mut() {
        *x /= m;
    }
    Ok(m.ln())
}

/// Zakai density on `grid` driven by the scenario observation path,
/// with the step sub-divided to respect the positivity bound.
pub fn solve_zakai(spec: &ProblemSpec, eps: f64, grid: &GridSpec, domain: FilterDomain) -> Result<DensityField> {
    grid.validate()?;
    let xs = match domain {
        FilterDomain::Reflected => grid.xs(),
        FilterDomain::Penalized { .. } => grid.xs_symmetric(),
    };
    let op = ZakaiOperator::new(spec, xs.clone(), eps, domain)?;
    let times = grid.times();
    let (mut q, mut ls) = initial_density(spec, &xs, eps);
    let mut values = Vec::with_capacity(xs.len() * times.len());
    let mut log_scale = Vec::with_capacity(times.len());
    values.extend_from_slice(&q);
    log_scale.push(ls);
    for n in 0..grid.nt {
        let (t0, t1) = (times[n], times[n + 1]);
        let m = ((t1 - t0) / (THETA * op.dt_max)).ceil().max(1.0) as usize;
        let h = (t1 - t0) / m as f64;
        for k in 0..m {
            let a = t0 + k as f64 * h;
            let b = if k + 1 == m { t1 } else { a + h };
            let dy = spec.y.eval(b) - spec.y.eval(a);
            q = op.step(&q, dy, b - a)?;
            ls += rescale(&mut q, n + 1)?;
        }
        values.extend_from_slice(&q);
        log_scale.push(ls);
    }
    Ok(DensityField { field: ScalarField::new(times, xs, values)?, gauge: Gauge::Q, log_scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    QToP,
    PToQ,
}

/// Pointwise gauge change `p = exp(-y(t) h(x)/ε) q` or its inverse. The log
/// scale is left untouched, so a round trip only rounds.
pub fn robust_transform(d: &DensityField, spec: &ProblemSpec, eps: f64, dir: Direction) -> Result<DensityField> {
    let (from, to, sign) = match dir {
        Direction::QToP => (Gauge::Q, Gauge::P, -1.0),
        Direction::PToQ => (Gauge::P, Gauge::Q, 1.0),
    };
    d.expect(from)?;
    let h: Vec<f64> = d.field.xs.iter().map(|&x| spec.h.eval(x)).collect();
    let nx = d.field.n_x();
    let mut values = d.field.values.clone();
    for (n, &t) in d.field.times.iter().enumerate() {
        let y = spec.y.eval(t);
        for i in 0..nx {
            values[n * nx + i] *= (sign * y * h[i] / eps).exp();
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(DensityField { field: ScalarField::new(d.field.times.clone(), d.field.xs.clone(), values)?, gauge: to, log_scale: d.log_scale.clone() })
}

/// Explicit scheme for the robust equation with `f = 0`:
/// `p_t = (ε/2) p_xx + y h' p_x - (1/ε)[½h² - (ε/2) y h'' - ½y²h'²] p`,
/// with the Robin condition `ε p_x + y h' p = 0` at both ends.
pub fn solve_robust_zakai(spec: &ProblemSpec, eps: f64, grid: &GridSpec) -> Result<DensityField> {
    grid.validate()?;
    if !spec.f.is_zero() {
        return Err(Error::Input("the robust filter is implemented for f = 0 only".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let xs = grid.xs();
    let times = grid.times();
    let dx = grid.dx();
    let nx = xs.len();
    let jets: Vec<_> = xs.iter().map(|&x| spec.h.jet(x)).collect();
    let (q0, ls0) = initial_density(spec, &xs, eps);
    let y0 = spec.y.eval(0.0);
    let mut p: Vec<f64> = q0.iter().zip(&jets).map(|(q, j)| q * (-y0 * j.v / eps).exp()).collect();
    let mut ls = ls0 + rescale(&mut p, 0)?;
    let mut values = Vec::with_capacity(nx * times.len());
    let mut log_scale = Vec::with_capacity(times.len());
    values.extend_from_slice(&p);
    log_scale.push(ls);
    let mut next = vec![0.0; nx];
    for n in 0..grid.nt {
        let (t0, t1) = (times[n], times[n + 1]);
        let ymax = (0..=4).map(|k| spec.y.eval(t0 + (t1 - t0) * k as f64 / 4.0).abs()).fold(0.0, f64::max) * 1.1;
        let mut rate: f64 = 0.0;
        for j in &jets {
            let b = ymax * j.d1.abs();
            let c_neg = (0.5 * j.v * j.v + 0.5 * eps * ymax * j.d2.abs()) / eps;
            rate = rate.max(eps / (dx * dx) + 2.0 * b / dx + c_neg);
        }
        let m = ((t1 - t0) * rate / THETA).ceil().max(1.0) as usize;
        let h = (t1 - t0) / m as f64;
        for k in 0..m {
            let y = spec.y.eval(t0 + k as f64 * h);
            let left = p[1] + 2.0 * dx * (y * jets[0].d1 / eps) * p[0];
            let right = p[nx - 2] - 2.0 * dx * (y * jets[nx - 1].d1 / eps) * p[nx - 1];
            for i in 0..nx {
                let pm = if i == 0 { left } else { p[i - 1] };
                let pp = if i + 1 == nx { right } else { p[i + 1] };
                let j = &jets[i];
                let b = y * j.d1;
                let adv = if b > 0.0 { b * (pp - p[i]) / dx } else { b * (p[i] - pm) / dx };
                let c = (0.5 * eps * y * j.d2 + 0.5 * y * y * j.d1 * j.d1 - 0.5 * j.v * j.v) / eps;
                next[i] = (p[i] + h * (0.5 * eps * (pp + pm - 2.0 * p[i]) / (dx * dx) + adv + c * p[i])).max(0.0);
            }
            std::mem::swap(&mut p, &mut next);
            ls += rescale(&mut p, n + 1)?;
        }
        values.extend_from_slice(&p);
        log_scale.push(ls);
    }
    Ok(DensityField { field: ScalarField::new(times, xs, values)?, gauge: Gauge::P, log_scale })
}

/// `-ε log` of a density, with the nodes that hit the floor.
#[derive(Debug, Clone)]
pub struct HopfCole {
    pub field: ScalarField,
    /// `(time index, space index)` of values at or below `1e-300`.
    pub flagged: Vec<(usize, usize)>,
}

/// `S = -ε log p` from the p gauge, or `w = -ε log q` from the q gauge.
pub fn hopf_cole(d: &DensityField, eps: f64) -> Result<HopfCole> {
    if !(eps > 0.0) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let nx = d.field.n_x();
    let mut flagged = Vec::new();
    let mut values = Vec::with_capacity(d.field.values.len());
    for n in 0..d.field.n_t() {
        for (i, &v) in d.field.slice(n).iter().enumerate() {
            if !(v > FLOOR) {
                flagged.push((n, i));
            }
            values.push(-eps * (v.max(FLOOR).ln() + d.log_scale[n]));
        }
    }
    debug_assert_eq!(values.len(), nx * d.field.n_t());
    Ok(HopfCole { field: ScalarField::new(d.field.times.clone(), d.field.xs.clone(), values)?, flagged })
}

/// `exp(-S/ε)` stored with unit slice maxima.
pub fn inverse_hopf_cole(s: &ScalarField, eps: f64, gauge: Gauge) -> Result<DensityField> {
    if !(eps > 0.0) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let mut values = Vec::with_capacity(s.values.len());
    let mut log_scale = Vec::with_capacity(s.n_t());
    for n in 0..s.n_t() {
        let sl = s.slice(n);
        let m = sl.iter().cloned().fold(f64::INFINITY, f64::min);
        values.extend(sl.iter().map(|&v| (-(v - m) / eps).exp()));
        log_scale.push(-m / eps);
    }
    Ok(DensityField { field: ScalarField::new(s.times.clone(), s.xs.clone(), values)?, gauge, log_scale })
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallNoiseReport {
    pub eps: Vec<f64>,
    pub gaps: Vec<f64>,
    pub decreasing: bool,
    pub window: (f64, f64),
}

/// For each ε, `d_ε = sup |(-ε log q^{κ,ε})` minus its window minimum, minus
/// `V^κ` minus its window minimum`|` over the window and all times. Both
/// fields live on the whole line with the penalized drift.
pub fn small_noise_check(spec: &ProblemSpec, pen: &PenaltySpec, ladder: &[f64], grid: &GridSpec, window: (f64, f64)) -> Result<SmallNoiseReport> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Input("ladder must be nonempty and strictly decreasing".into()));
    }
    let v = solve_cost_to_come_full(&HamiltonianKind::PenalizedCostToCome { pen: *pen }, spec, grid, &SolverOptions::default())?;
    let idx = v.window_indices(window.0, window.1);
    if idx.is_empty() {
        return Err(Error::Input(format!("window {window:?} holds no nodes")));
    }
    let gaps = ladder
        .par_iter()
        .map(|&eps| {
            let q = solve_zakai(spec, eps, grid, FilterDomain::Penalized { pen: *pen })?;
            let w = hopf_cole(&q, eps)?.field;
            let mut gap: f64 = 0.0;
            for n in 0..v.n_t() {
                let a0 = idx.iter().map(|&i| w.at(n, i)).fold(f64::INFINITY, f64::min);
                let b0 = idx.iter().map(|&i| v.at(n, i)).fold(f64::INFINITY, f64::min);
                for &i in &idx {
                    gap = gap.max(((w.at(n, i) - a0) - (v.at(n, i) - b0)).abs());
                }
            }
            Ok(gap)
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = gaps.windows(2).all(|g| g[1] < g[0]);
    Ok(SmallNoiseReport { eps: ladder.to_vec(), gaps, decreasing, window })
}
