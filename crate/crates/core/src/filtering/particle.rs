//! Bootstrap particle filter on `[0, xmax]`.
//!
//! Particle `i` draws its noise from stream `i` of a ChaCha8 generator
//! keyed by the master seed; systematic resampling draws from the last
//! stream. Results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{GridSpec, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleOptions {
    pub n: usize,
    pub seed: u64,
    /// Resample when ESS falls below this fraction of `n`.
    pub resample_below: f64,
    /// Hard failure threshold on ESS.
    pub collapse_ess: f64,
}

impl ParticleOptions {
    pub fn new(n: usize, seed: u64) -> ParticleOptions {
        ParticleOptions { n, seed, resample_below: 0.5, collapse_ess: 5.0 }
    }
}

/// Weighted posterior summaries per time node.
#[derive(Debug, Clone, Serialize)]
pub struct ParticleEnsemble {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub ess: Vec<f64>,
    pub resampled: Vec<bool>,
}

impl ParticleEnsemble {
    /// Monte-Carlo standard error `√(var/ESS)` of the mean at index `i`.
    pub fn std_error(&self, i: usize) -> f64 {
        (self.var[i] / self.ess[i]).sqrt()
    }
}

const INIT_CELLS: usize = 4096;
const RESAMPLE_STREAM: u64 = u64::MAX;

fn fold(mut x: f64, xmax: f64) -> f64 {
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > xmax {
            x = 2.0 * xmax - x;
        } else {
            return x;
        }
    }
}

/// Inverse-CDF sampler for a piecewise-linear density on a uniform grid.
struct LinearSampler {
    a: f64,
    dx: f64,
    dens: Vec<f64>,
    cdf: Vec<f64>,
}

impl LinearSampler {
    fn new(a: f64, b: f64, g: impl Fn(f64) -> f64) -> LinearSampler {
        let dx = (b - a) / INIT_CELLS as f64;
        let dens: Vec<f64> = (0..=INIT_CELLS).map(|k| g(a + k as f64 * dx)).collect();
        let mut cdf = vec![0.0; INIT_CELLS + 1];
        for k in 0..INIT_CELLS {
            cdf[k + 1] = cdf[k] + 0.5 * (dens[k] + dens[k + 1]) * dx;
        }
        let total = cdf[INIT_CELLS];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        LinearSampler { a, dx, dens, cdf }
    }

    fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, INIT_CELLS) - 1;
        let (da, db) = (self.dens[k], self.dens[k + 1]);
        let mass = (self.cdf[k + 1] - self.cdf[k]).max(f64::MIN_POSITIVE);
        let r = ((u - self.cdf[k]) / mass).clamp(0.0, 1.0);
        // solve da s + (db - da) s² / 2 = r (da + db) / 2
        let slope = db - da;
        let s = if slope.abs() < 1e-12 * (da + db) {
            r
        } else {
            (-da + (da * da + slope * r * (da + db)).max(0.0).sqrt()) / slope
        };
        self.a + (k as f64 + s.clamp(0.0, 1.0)) * self.dx
    }
}

fn moments(x: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let mean: f64 = x.iter().zip(w).map(|(x, w)| x * w).sum();
    let var: f64 = x.iter().zip(w).map(|(x, w)| w * (x - mean).powi(2)).sum();
    let ess = 1.0 / w.iter().map(|w| w * w).sum::<f64>();
    (mean, var, ess)
}

/// Runs the filter against the scenario observation path `y(t)`, starting
/// from particles distributed as `exp(-ψ/ε)` on `[0, xmax]`.
pub fn particle_filter_oracle(spec: &ProblemSpec, eps: f64, grid: &GridSpec, opts: &ParticleOptions) -> Result<ParticleEnsemble> {
    grid.validate()?;
    if opts.n < 100 {
        return Err(Error::Input(format!("particle filter needs n >= 100, got {}", opts.n)));
    }
    if !(eps > 0.0) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let n = opts.n;
    let xmax = grid.xmax;
    let psi_min = (0..=INIT_CELLS).map(|k| spec.psi.eval(xmax * k as f64 / INIT_CELLS as f64)).fold(f64::INFINITY, f64::min);
    let sampler = LinearSampler::new(0.0, xmax, |x| (-(spec.psi.eval(x) - psi_min) / eps).exp());
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
            r.set_stream(i as u64);
            r
        })
        .collect();
    let mut resampler = ChaCha8Rng::seed_from_u64(opts.seed);
    resampler.set_stream(RESAMPLE_STREAM);

    let mut x: Vec<f64> = rngs.iter_mut().map(|r| sampler.sample(r.random::<f64>())).collect();
    let mut logw = vec![0.0; n];
    let mut w = vec![1.0 / n as f64; n];
    let times = grid.times();
    let dt = grid.dt();
    let sd = (eps * dt).sqrt();
    let (m0, v0, e0) = moments(&x, &w);
    let mut out = ParticleEnsemble { times: times.clone(), mean: vec![m0], var: vec![v0], ess: vec![e0], resampled: vec![false] };

    for step in 0..grid.nt {
        let dy = spec.y.eval(times[step + 1]) - spec.y.eval(times[step]);
        x.par_iter_mut().zip(rngs.par_iter_mut()).zip(logw.par_iter_mut()).for_each(|((xi, rng), lw)| {
            let z: f64 = StandardNormal.sample(rng);
            *xi = fold(*xi + spec.f.eval(*xi) * dt + sd * z, xmax);
            let h = spec.h.eval(*xi);
            *lw += (h * dy - 0.5 * h * h * dt) / eps;
        });
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::NonFinite { step: step + 1 });
        }
        let mut total = 0.0;
        for (wi, &lw) in w.iter_mut().zip(&logw) {
            *wi = (lw - top).exp();
            total += *wi;
        }
        for wi in w.iter_mut() {
            *wi /= total;
        }
        let (mean, var, ess) = moments(&x, &w);
        if ess < opts.collapse_ess {
            return Err(Error::WeightCollapse { step: step + 1, ess });
        }
        out.mean.push(mean);
        out.var.push(var);
        out.ess.push(ess);
        let resample = ess < opts.resample_below * n as f64;
        if resample {
            let u0: f64 = resampler.random::<f64>() / n as f64;
            let mut next = Vec::with_capacity(n);
            let mut c = w[0];
            let mut j = 0;
            for k in 0..n {
                let u = u0 + k as f64 / n as f64;
                while u > c && j + 1 < n {
                    j += 1;
                    c += w[j];
                }
                next.push(x[j]);
            }
            x = next;
            logw.iter_mut().for_each(|l| *l = 0.0);
            w.iter_mut().for_each(|wi| *wi = 1.0 / n as f64);
        }
        out.resampled.push(resample);
    }
    Ok(out)
}
