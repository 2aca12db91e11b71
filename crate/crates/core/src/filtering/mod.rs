//! Stochastic filtering for the reflected signal.
//!
//! The signal is `dX = f(X) dt + √ε dB¹` reflected at 0 and the observation
//! is `dY = h(X) dt + √ε dB²`. The PDE filters consume a fixed observation
//! realization `y(t)` taken from the scenario.

mod particle;
mod sde;
mod zakai;

pub use particle::{particle_filter_oracle, ParticleEnsemble, ParticleOptions};
pub use sde::{reflected_ensemble, simulate_reflected_sde, EnsembleStats, FilterPath};
pub use zakai::{
    hopf_cole, initial_density, inverse_hopf_cole, robust_transform, small_noise_check, solve_robust_zakai, solve_zakai,
    zakai_step, DensityField, Direction, FilterDomain, Gauge, HopfCole, SmallNoiseReport, ZakaiOperator,
};
