mod common;

use mortensen::filtering::{particle_filter_oracle, reflected_ensemble, simulate_reflected_sde, solve_zakai, FilterDomain, ParticleOptions};
use mortensen::{builtin_scenario, Func, GridSpec};
use proptest::prelude::*;

#[test]
fn reflected_brownian_mean_matches_the_folded_normal() {
    let s = builtin_scenario("zero").unwrap();
    let g = GridSpec::new(4.0, 10, 1.0, 1000).unwrap();
    let eps = 0.25;
    let e = reflected_ensemble(&s, eps, 1.0, &g, 3, 20_000).unwrap();
    let want = common::folded_normal_mean(1.0, eps.sqrt());
    let got = *e.mean.last().unwrap();
    // projected Euler reflects with an O(√Δt) bias; allow 4 SE plus that
    let tol = 4.0 * e.std_error(g.nt) + 2.0 * (eps * g.dt()).sqrt();
    assert!((got - want).abs() < tol, "{got} vs {want} (tol {tol})");
}

#[test]
fn zakai_without_observation_matches_the_folded_normal() {
    // with h = 0 and a narrow prior the normalized moments follow reflected BM
    let mut s = builtin_scenario("zero").unwrap();
    s.psi = Func::poly(&[2.0, -2.0, 0.5]);
    let eps = 0.05;
    let g = GridSpec::new(4.0, 400, 1.0, 200).unwrap();
    let q = solve_zakai(&s, eps, &g, FilterDomain::Reflected).unwrap();
    // prior exp(-ψ/ε) is N(2, ε); at t the state is |2 + √(2ε t) Z|
    let want = common::folded_normal_mean(2.0, (2.0 * eps).sqrt());
    let (got, var) = q.moments(g.nt);
    assert!((got - want).abs() < 5e-3, "{got} vs {want}");
    assert!((var - 2.0 * eps).abs() < 2e-3, "{var}");
}

#[test]
fn doubling_particles_shrinks_the_spread_by_root_two() {
    let mut s = builtin_scenario("boundary-probe").unwrap();
    s.y = Func::Sin { amp: 0.5, freq: 1.0, phase: 0.0 };
    let spread = |n: usize| {
        let m: Vec<f64> = (0..20u64)
            .map(|r| *particle_filter_oracle(&s, 0.2, &s.grid, &ParticleOptions::new(n, 1000 + r)).unwrap().mean.last().unwrap())
            .collect();
        let mu = m.iter().sum::<f64>() / m.len() as f64;
        (m.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (m.len() - 1) as f64).sqrt()
    };
    let ratio = spread(200) / spread(400);
    assert!((1.2..=1.8).contains(&ratio), "{ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn simulated_paths_satisfy_the_skorokhod_conditions(seed in any::<u64>(), eps in 0.01f64..1.0, xi in 0.0f64..2.0) {
        let s = builtin_scenario("boundary-probe").unwrap();
        let p = simulate_reflected_sde(&s, eps, xi, &s.grid, seed).unwrap();
        prop_assert!(p.check_invariants(1e-10).is_ok());
        prop_assert!(p.x.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn zakai_density_stays_nonnegative(eps in 0.05f64..1.0, amp in -1.0f64..1.0) {
        let mut s = builtin_scenario("boundary-probe").unwrap();
        s.y = Func::Sin { amp, freq: 2.0, phase: 0.0 };
        let q = solve_zakai(&s, eps, &s.grid, FilterDomain::Reflected).unwrap();
        prop_assert!(q.min_value() >= 0.0);
        prop_assert!(q.log_scale.iter().all(|l| l.is_finite()));
    }
}
