//! Euler–Maruyama with projection for the reflected signal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{GridSpec, ProblemSpec};
use crate::skorokhod::SkorokhodSolution;

/// One simulated signal/observation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// Observation integral `Y`.
    pub y: Vec<f64>,
    /// Pushing process, nonincreasing from 0.
    pub k: Vec<f64>,
    /// `ξ + ∫f(X) + √ε B¹`, the unconstrained increment path.
    pub free: Vec<f64>,
    pub seed: u64,
}

impl FilterPath {
    /// Same discrete conditions as a deterministic Skorokhod path.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let sk = SkorokhodSolution {
            times: self.times.clone(),
            x: self.x.clone(),
            delta: self.k.clone(),
            free: self.free.clone(),
        };
        sk.check_invariants(tol)?;
        let e = sk.decomposition_error();
        if e > tol {
            return Err(Error::Invariant(format!("X + K differs from the free path by {e:.3e}")));
        }
        Ok(())
    }
}

/// Simulates `X_{n+1} = max(0, X_n + f(X_n) Δt + √ε ΔB¹)` with `Y` from the
/// trapezoid rule on `h(X)` plus `√ε ΔB²`. Draws come from a ChaCha8 stream
/// seeded with `seed`.
pub fn simulate_reflected_sde(spec: &ProblemSpec, eps: f64, xi: f64, grid: &GridSpec, seed: u64) -> Result<FilterPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with(spec, eps, xi, grid, &mut rng).map(|mut p| {
        p.seed = seed;
        p
    })
}

fn simulate_with(spec: &ProblemSpec, eps: f64, xi: f64, grid: &GridSpec, rng: &mut ChaCha8Rng) -> Result<FilterPath> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("initial state must be nonnegative, got {xi}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::Input(format!("eps must be nonnegative, got {eps}")));
    }
    let times = grid.times();
    let dt = grid.dt();
    let sd = (eps * dt).sqrt();
    let m = times.len();
    let (mut x, mut y, mut k, mut free) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    x.push(xi);
    y.push(0.0);
    k.push(0.0);
    free.push(xi);
    let (mut xn, mut yn, mut kn, mut fr) = (xi, 0.0, 0.0, xi);
    for _ in 0..grid.nt {
        let b1: f64 = StandardNormal.sample(rng);
        let b2: f64 = StandardNormal.sample(rng);
        let inc = spec.f.eval(xn) * dt + sd * b1;
        let z = xn + inc;
        fr += inc;
        let next = if z < 0.0 {
            kn += z;
            0.0
        } else {
            z
        };
        yn += 0.5 * (spec.h.eval(xn) + spec.h.eval(next)) * dt + sd * b2;
        xn = next;
        x.push(xn);
        y.push(yn);
        k.push(kn);
        free.push(fr);
    }
    Ok(FilterPath { times, x, y, k, free, seed: 0 })
}

/// Per-time ensemble moments.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub n: usize,
}

impl EnsembleStats {
    /// Standard error of the mean at time index `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        (self.var[i] / self.n as f64).sqrt()
    }
}

/// `n` independent paths; path `i` uses stream `i` of the master seed.
pub fn reflected_ensemble(spec: &ProblemSpec, eps: f64, xi: f64, grid: &GridSpec, seed: u64, n: usize) -> Result<EnsembleStats> {
    if n < 2 {
        return Err(Error::Input("ensemble needs at least two paths".into()));
    }
    let paths = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            simulate_with(spec, eps, xi, grid, &mut rng).map(|p| p.x)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = grid.nt + 1;
    let mut mean = vec![0.0; m];
    let mut var = vec![0.0; m];
    for j in 0..m {
        let mu = paths.iter().map(|p| p[j]).sum::<f64>() / n as f64;
        mean[j] = mu;
        var[j] = paths.iter().map(|p| (p[j] - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
    }
    Ok(EnsembleStats { times: grid.times(), mean, var, n })
}
