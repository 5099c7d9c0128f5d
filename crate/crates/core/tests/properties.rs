use kgscatter::dynamics::{
    eval_nonlinearity, eval_potential_density, evolve, EvolutionConfig, NonlinearitySpec,
    PairState,
};
use kgscatter::observables::{energy, mass, momentum, strichartz_s6};
use kgscatter::spectral::{
    apply_multiplier, bracket, lp_project, resolved_dyadic_scales, FrequencySign, GridSpec,
    SpectralField, Transform, C64,
};
use kgscatter::symmetry::{
    boost, compose_boost_params, free_kg_propagate, free_schrodinger_propagate, freq_map,
    translate,
};
use kgscatter::to_first_order;
use proptest::prelude::*;

fn field_from(grid: GridSpec, re: &[f64], im: &[f64]) -> SpectralField {
    SpectralField::new(grid, re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect()).unwrap()
}

/// Packet with random centre, width, carrier and phase, band-limited to |ξ| ≲ 3.
fn packet(grid: GridSpec, c: f64, w: f64, k: f64, phase: f64) -> SpectralField {
    SpectralField::from_fn(grid, |x| C64::from_polar((-((x - c) / w).powi(2)).exp(), k * x + phase))
}

fn sizes() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![8usize, 16, 64, 256, 1000, 1024])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip(n in sizes(), seed in any::<u64>()) {
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
        let orig: Vec<C64> = (0..n).map(|_| C64::new(next(), next())).collect();
        let tr = Transform::new(n);
        let mut buf = orig.clone();
        tr.forward(&mut buf);
        tr.inverse(&mut buf);
        let err = buf.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-13, "round trip error {err}");
    }

    #[test]
    fn multiplier_is_linear(re in prop::collection::vec(-1.0f64..1.0, 64), im in prop::collection::vec(-1.0f64..1.0, 64),
                            a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let grid = GridSpec::new(5.0, 64).unwrap();
        let f = field_from(grid, &re, &im);
        let g = field_from(grid, &im, &re);
        let m = |xi: f64| C64::new(bracket(xi), xi.sin());
        let lhs = apply_multiplier(&f.combine(C64::new(a, 0.0), &g, C64::new(b, 0.0)), &m).unwrap();
        let rhs = apply_multiplier(&f, &m).unwrap().combine(C64::new(a, 0.0), &apply_multiplier(&g, &m).unwrap(), C64::new(b, 0.0));
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-13);
    }

    #[test]
    fn dyadic_pieces_sum_to_identity(re in prop::collection::vec(-1.0f64..1.0, 128), im in prop::collection::vec(-1.0f64..1.0, 128)) {
        let grid = GridSpec::new(3.0, 128).unwrap();
        let f = field_from(grid, &re, &im);
        let mut sum = SpectralField::zeros(grid);
        for n in resolved_dyadic_scales(&grid) {
            sum = sum.combine(C64::new(1.0, 0.0), &lp_project(&f, n, FrequencySign::Both).unwrap(), C64::new(1.0, 0.0));
        }
        prop_assert!(sum.max_abs_diff(&f) <= 1e-12);
    }

    #[test]
    fn bracket_relation(nu in -100.0f64..100.0) {
        let g = bracket(nu);
        prop_assert!((g * g - nu * nu - 1.0).abs() <= 1e-15 * g * g);
    }

    #[test]
    fn frequency_map_identities(nu in -5.0f64..5.0, xi in -20.0f64..20.0) {
        let l = freq_map(xi, nu);
        let scale = bracket(nu) * bracket(xi);
        prop_assert!((bracket(l) - (bracket(nu) * bracket(xi) - nu * xi)).abs() <= 1e-12 * scale);
        prop_assert!((freq_map(l, -nu) - xi).abs() <= 1e-12 * scale * scale);
    }

    #[test]
    fn propagators_are_isometries(c in -5.0f64..5.0, w in 1.0f64..3.0, k in -1.5f64..1.5, t in -20.0f64..20.0) {
        let grid = GridSpec::new(30.0, 256).unwrap();
        let f = packet(grid, c, w, k, 0.3);
        let m = mass(&f);
        prop_assert!((mass(&free_kg_propagate(&f, t)) - m).abs() <= 1e-13 * m);
        prop_assert!((mass(&free_schrodinger_propagate(&f, t)) - m).abs() <= 1e-13 * m);
        prop_assert!((mass(&translate(&f, t)) - m).abs() <= 1e-13 * m);
    }

    #[test]
    fn boost_composition_law(a in -0.4f64..0.4, b in -0.4f64..0.4, k in -0.5f64..0.5) {
        let grid = GridSpec::new(40.0, 512).unwrap();
        let f = packet(grid, 0.0, 2.0, k, 0.0);
        let lhs = boost(&boost(&f, b).unwrap(), a).unwrap();
        let rhs = boost(&f, compose_boost_params(a, b)).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-7);
    }

    #[test]
    fn defocusing_density_is_nonnegative(u in -20.0f64..20.0) {
        for spec in [NonlinearitySpec::DefocusingExp, NonlinearitySpec::QuinticDefocusing] {
            prop_assert!(eval_potential_density(u, spec).unwrap() >= 0.0);
            prop_assert!(eval_nonlinearity(u, spec).unwrap() * u >= 0.0);
        }
    }

    #[test]
    fn nonlinearity_is_odd(u in -20.0f64..20.0) {
        for spec in NonlinearitySpec::ALL {
            let (a, b) = (eval_nonlinearity(u, spec).unwrap(), eval_nonlinearity(-u, spec).unwrap());
            prop_assert!((a + b).abs() <= 1e-15 * a.abs().max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn linear_evolution_matches_free_flow(c in -3.0f64..3.0, k in -1.0f64..1.0, t in 0.5f64..3.0) {
        let grid = GridSpec::new(30.0, 256).unwrap();
        let v = packet(grid, c, 1.5, k, 0.0);
        let state = kgscatter::from_first_order(&v, 0.0);
        let cfg = EvolutionConfig { dt: 0.01, t_final: t, snapshot_stride: 1000, ..Default::default() };
        let traj = evolve(&state, &cfg, NonlinearitySpec::Linear).unwrap();
        let got = to_first_order(traj.last());
        let want = free_kg_propagate(&v, traj.last().t);
        prop_assert!(got.max_abs_diff(&want) <= 1e-12 * t.max(1.0));
    }

    #[test]
    fn s6_cumulative_is_monotone(a in 0.1f64..1.0) {
        let grid = GridSpec::new(30.0, 256).unwrap();
        let state = PairState::from_fns(grid, |x| a * (-x * x).exp(), |_| 0.0);
        let cfg = EvolutionConfig { dt: 0.01, t_final: 3.0, snapshot_stride: 5, ..Default::default() };
        let traj = evolve(&state, &cfg, NonlinearitySpec::DefocusingExp).unwrap();
        let cum = strichartz_s6(&traj, 0.6).cumulative();
        prop_assert!(cum.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn conserved_along_defocusing_runs(a in 0.2f64..1.5, c in -2.0f64..2.0) {
        let grid = GridSpec::new(40.0, 512).unwrap();
        let state = PairState::from_fns(grid, |x| a * (-(x - c).powi(2)).exp(), |x| 0.3 * a * (-(x + c).powi(2)).exp());
        let cfg = EvolutionConfig { dt: 2e-3, t_final: 2.0, snapshot_stride: 50, ..Default::default() };
        for spec in [NonlinearitySpec::DefocusingExp, NonlinearitySpec::QuinticDefocusing] {
            let traj = evolve(&state, &cfg, spec).unwrap();
            let (e0, p0) = (energy(&state, spec), momentum(&state));
            for s in &traj.snapshots {
                prop_assert!((energy(s, spec) - e0).abs() <= 1e-5 * e0);
                prop_assert!((momentum(s) - p0).abs() <= 1e-8);
            }
        }
    }
}
