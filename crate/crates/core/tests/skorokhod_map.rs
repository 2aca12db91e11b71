use mortensen::builtin_scenario;
use mortensen::skorokhod::{solve_explicit, solve_penalized, solve_vi, ControlSignal};
use mortensen::{GridSpec, PenaltySpec};
use proptest::prelude::*;

fn signal(values: &[f64]) -> ControlSignal {
    let n = values.len();
    let times = (0..=n).map(|k| k as f64 / n as f64).collect();
    ControlSignal::new(times, values.to_vec()).unwrap()
}

// x = z - min(0, min_{s<=t} z(s)) with z = x0 + Ω, written out directly
fn reflected_by_hand(x0: f64, c: &ControlSignal) -> Vec<f64> {
    let mut run_min = f64::INFINITY;
    c.integral()
        .iter()
        .map(|om| {
            let z = x0 + om;
            run_min = run_min.min(z);
            z - run_min.min(0.0)
        })
        .collect()
}

proptest! {
    #[test]
    fn explicit_map_matches_running_minimum(x0 in 0.0f64..2.0, w in prop::collection::vec(-4.0f64..4.0, 5..200)) {
        let c = signal(&w);
        let s = solve_explicit(x0, &c).unwrap();
        for (a, b) in s.x.iter().zip(reflected_by_hand(x0, &c)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn skorokhod_map_is_two_lipschitz(
        x0 in 0.0f64..2.0,
        w in prop::collection::vec(-4.0f64..4.0, 50),
        d in prop::collection::vec(-1.0f64..1.0, 50),
    ) {
        let (c1, c2) = (signal(&w), signal(&w.iter().zip(&d).map(|(a, b)| a + b).collect::<Vec<_>>()));
        let (s1, s2) = (solve_explicit(x0, &c1).unwrap(), solve_explicit(x0, &c2).unwrap());
        let free = s1.free.iter().zip(&s2.free).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let out = s1.x.iter().zip(&s2.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(out <= 2.0 * free + 1e-12);
    }

    #[test]
    fn vi_without_drift_is_the_explicit_map(x0 in 0.0f64..2.0, w in prop::collection::vec(-4.0f64..4.0, 5..100)) {
        let spec = builtin_scenario("zero").unwrap();
        let c = signal(&w);
        let (a, b) = (solve_vi(x0, &c, &spec).unwrap(), solve_explicit(x0, &c).unwrap());
        for (p, q) in a.x.iter().zip(&b.x) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn penalized_state_approaches_the_constrained_one() {
    let spec = builtin_scenario("figure1").unwrap();
    let g = GridSpec::new(16.0, 10, 4.0, 4000).unwrap();
    let c = ControlSignal::from_func(&spec.omega, &g);
    let exact = solve_vi(spec.x0, &c, &spec).unwrap();
    let err = |k: f64| {
        let p = solve_penalized(spec.x0, &c, &spec, &PenaltySpec::new(k).unwrap());
        p.iter().zip(&exact.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(20.0), err(80.0));
    assert!(e2 < e1 / 2.0, "{e1} {e2}");
}
