//! Vanishing-viscosity studies.

use rayon::prelude::*;

use super::{solve_inviscid, solve_viscous, HamiltonianKind, SolverOptions};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::scenario::{GridSpec, ProblemSpec};

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub fields: Vec<ScalarField>,
    /// `‖w^{ε_{k+1}} - w^{ε_k}‖∞` on the window.
    pub gaps: Vec<f64>,
    /// Gaps strictly decrease along the ladder.
    pub monotone: bool,
    pub inviscid: ScalarField,
    /// `‖w^{ε_min} - w_inviscid‖∞` on the window.
    pub inviscid_gap: f64,
    /// First-order error estimate of the inviscid solve from grid halving.
    pub two_grid_estimate: f64,
    pub window: (f64, f64),
}

impl SweepReport {
    /// The final viscous field is within `factor` times the inviscid
    /// discretization estimate of the inviscid solution.
    pub fn limit_within(&self, factor: f64) -> bool {
        self.inviscid_gap <= factor * self.two_grid_estimate
    }
}

/// Error estimate for the inviscid solve on `grid`: with first-order
/// convergence the coarse error is about twice the coarse–fine difference.
pub fn two_grid_estimate(kind: &HamiltonianKind, spec: &ProblemSpec, grid: &GridSpec, window: (f64, f64), opts: &SolverOptions) -> Result<f64> {
    let coarse = solve_inviscid(&kind.limit(), spec, grid, opts)?;
    let fine = solve_inviscid(&kind.limit(), spec, &GridSpec { nx: 2 * grid.nx, ..*grid }, opts)?;
    Ok(2.0 * coarse.sup_diff_interp(&fine, window.0, window.1)?)
}

/// Solves the viscous problem for each ε of a strictly decreasing ladder
/// and compares consecutive members and the last one with the inviscid
/// solution.
pub fn vanishing_viscosity_sweep(
    kind: &HamiltonianKind,
    spec: &ProblemSpec,
    ladder: &[f64],
    grid: &GridSpec,
    window: (f64, f64),
    opts: &SolverOptions,
) -> Result<SweepReport> {
    if ladder.is_empty() {
        return Err(Error::Input("empty viscosity ladder".into()));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) || ladder.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Input("viscosity ladder must be positive and strictly decreasing".into()));
    }
    let fields = ladder
        .par_iter()
        .map(|&e| solve_viscous(&kind.with_eps(e), spec, grid, opts))
        .collect::<Result<Vec<_>>>()?;
    let gaps = fields
        .windows(2)
        .map(|w| w[1].sup_diff_window(&w[0], window.0, window.1))
        .collect::<Result<Vec<_>>>()?;
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let inviscid = solve_inviscid(&kind.limit(), spec, grid, opts)?;
    let inviscid_gap = fields.last().unwrap().sup_diff_window(&inviscid, window.0, window.1)?;
    let two_grid_estimate = two_grid_estimate(kind, spec, grid, window, opts)?;
    Ok(SweepReport { eps: ladder.to_vec(), fields, gaps, monotone, inviscid, inviscid_gap, two_grid_estimate, window })
}
