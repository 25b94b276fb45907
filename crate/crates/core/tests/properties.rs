//! Structural invariants of the model and the propagator, checked on random
//! parameters.

use lindramp::model::{
    build_supermatrix, eigensystem, initial_ground_state, project_onto_eigenbasis, steady_state,
};
use lindramp::ode::Controls;
use lindramp::propagator::{defect_at, evolve, uniform_times};
use lindramp::quadrature::{momentum_integral, QuadratureSpec};
use lindramp::series::leading_defect_gapped;
use lindramp::{CoherenceVector, Error, Kind, ModeParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::FullLindblad), Just(Kind::NoJump)]
}

fn norm(v: &[Complex64; 4]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigenpairs_and_biorthogonality(
        p in -5.0f64..5.0, d in 0.0f64..3.0, g in 0.0f64..6.0, kind in kind_strategy()
    ) {
        let m = ModeParams::new(p, d, 1.0, 1.0).unwrap();
        prop_assume!(m.energy_sq() > 1e-6);
        let eig = match eigensystem(&m, g, kind) {
            Err(Error::EpDegenerate { .. }) => return Ok(()),
            r => r.unwrap(),
        };
        let l = build_supermatrix(&m, g, kind);
        let scale = l.entries.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
        for a in 0..4 {
            let lam = eig.lambdas[a];
            let r = l.apply_complex(&eig.right[a]);
            let res: [Complex64; 4] = std::array::from_fn(|k| r[k] - lam * eig.right[a][k]);
            prop_assert!(norm(&res) <= 1e-12 * scale * norm(&eig.right[a]));
            let lt = l.apply_left(&eig.left[a]);
            let res: [Complex64; 4] = std::array::from_fn(|k| lt[k] - lam * eig.left[a][k]);
            prop_assert!(norm(&res) <= 1e-12 * scale * norm(&eig.left[a]));
        }
        for a in 0..4 {
            for b in 0..4 {
                if a == b || (eig.lambdas[a] - eig.lambdas[b]).norm() < 1e-9 * scale {
                    continue;
                }
                let overlap: Complex64 = (0..4).map(|k| eig.left[b][k] * eig.right[a][k]).sum();
                let size = norm(&eig.left[b]) * norm(&eig.right[a]);
                prop_assert!(overlap.norm() < 1e-10 * size, "({a},{b}) {overlap}");
            }
        }
        prop_assert_eq!(eig.lambdas[0], Complex64::new(0.0, 0.0));
        let sum: Complex64 = eig.lambdas.iter().sum();
        prop_assert!((sum.re - l.trace()).abs() <= 1e-12 * scale && sum.im.abs() <= 1e-12 * scale);
    }

    #[test]
    fn steady_state_is_in_the_kernel(p in -5.0f64..5.0, d in 0.0f64..3.0, g in 0.0f64..6.0) {
        let m = ModeParams::new(p, d, 1.0, 1.0).unwrap();
        prop_assume!(m.energy_sq() + g * g > 1e-6);
        let ss = steady_state(&m, g).unwrap();
        let out = build_supermatrix(&m, g, Kind::FullLindblad).apply(&ss.to_array());
        let scale = 1.0 + p.abs() + d + g;
        prop_assert!(out.iter().all(|v| v.abs() < 1e-12 * scale));
        prop_assert!(ss.bloch_length() <= 1.0);
    }

    #[test]
    fn ground_state_is_pure(p in -5.0f64..5.0, d in 0.0f64..3.0) {
        let m = ModeParams::new(p, d, 1.0, 1.0).unwrap();
        prop_assume!(m.energy_sq() > 1e-9);
        let g = initial_ground_state(&m).unwrap();
        prop_assert!((g.bloch_length() - 1.0).abs() < 1e-14 && g.v0 == 0.5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn full_ramps_preserve_trace_contract_and_keep_r0(
        p in -3.0f64..3.0, d in 0.0f64..2.0, g0 in 0.2f64..3.0, tau in 1.0f64..60.0,
        theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU,
    ) {
        let m = ModeParams::new(p, d, g0, tau).unwrap();
        let start = CoherenceVector::from_bloch([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        let times = uniform_times(tau, 400);
        let traj = evolve(&m, &m.protocol(), Kind::FullLindblad, start, &Controls::default(), &times).unwrap();
        let len0 = start.bloch_length();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            prop_assert!((s.v0 - 0.5).abs() < 1e-10);
            prop_assert!(s.bloch_length() <= len0 + 1e-8);
            let g = m.protocol().gamma(*t);
            if let Ok(eig) = eigensystem(&m, g, Kind::FullLindblad) {
                let r = project_onto_eigenbasis(s, &eig);
                prop_assert!((r[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
            }
        }
    }
}

#[test]
fn defect_forgets_the_initial_state() {
    // Distinct pure starts differ in τ·n_z by far less than the O(1/τ)
    // correction to the leading order.
    let tau = 1e3;
    for p in [0.0, 0.7, 2.0] {
        let m = ModeParams::gapped(p, 1.0, 1.0, tau).unwrap();
        let starts = [
            initial_ground_state(&m).unwrap(),
            CoherenceVector::from_bloch([0.0, 0.0, 1.0]),
            CoherenceVector::from_bloch([0.6, 0.0, -0.8]),
        ];
        let vals: Vec<f64> = starts
            .iter()
            .map(|s| tau * defect_at(&m, Kind::FullLindblad, *s, 1.0, &Controls::default()).unwrap().n_z)
            .collect();
        let correction = (vals[0] - tau * leading_defect_gapped(p, 1.0, tau)).abs();
        for v in &vals[1..] {
            assert!((v - vals[0]).abs() < 0.1 * correction, "p={p} {vals:?} correction {correction:e}");
        }
    }
}

#[test]
fn halving_the_step_converges_at_fourth_order() {
    let m = ModeParams::gapped(0.5, 1.0, 1.0, 50.0).unwrap();
    let start = initial_ground_state(&m).unwrap();
    let vals: Vec<f64> = [500, 1000, 2000, 4000]
        .iter()
        .map(|&n| m.tau * defect_at(&m, Kind::FullLindblad, start, 1.0, &Controls::fixed(n)).unwrap().n_z)
        .collect();
    let changes: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for c in changes.windows(2) {
        assert!(c[1] < 0.25 * c[0], "{vals:?}");
    }
}

#[test]
fn quadrature_is_thread_count_independent() {
    let f = |p: f64| Ok(leading_defect_gapped(p, 1.0, 1.0));
    let spec = QuadratureSpec::new(64, 1.0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| momentum_integral(f, &spec).unwrap().value)
    };
    let one = run(1);
    for t in [2, 3, 7] {
        assert_eq!(run(t).to_bits(), one.to_bits());
    }
}
