use kgscatter::dynamics::{Dealias, EvolutionConfig, NonlinearitySpec};
use kgscatter::experiments::*;
use kgscatter::observables::{mass, nls_thresholds};
use kgscatter::spectral::{bracket, low_pass, sobolev_norm, GridSpec};
use kgscatter::symmetry::boost;
use kgscatter::to_first_order;

fn profile_grid() -> GridSpec {
    GridSpec::new(20.0, 512).unwrap()
}

#[test]
fn bubble_at_unit_scale_is_the_projected_profile() {
    let phi = unit_mass_gaussian(profile_grid());
    let p = NlsLimitParams::new(1.0, phi.clone(), 0.6);
    let v = build_bubble_field(&p, profile_grid()).unwrap();
    let want = low_pass(&phi, 1.0);
    assert!(v.max_abs_diff(&want) <= 1e-15);
    let state = build_bubble(&p, profile_grid()).unwrap();
    assert!(to_first_order(&state).max_abs_diff(&want) <= 1e-14);
}

#[test]
fn bubble_preserves_mass() {
    let phi = unit_mass_gaussian(profile_grid());
    for lambda in [4.0, 8.0, 16.0] {
        let mut p = NlsLimitParams::new(lambda, phi.clone(), 0.6);
        p.t_shift = 3.0;
        p.x_shift = -7.5;
        let grid = p.kg_grid().unwrap();
        let v = build_bubble_field(&p, grid).unwrap();
        let m0 = mass(&p.projected_profile());
        assert!((mass(&v) - m0).abs() <= 1e-8, "lambda {lambda}");
    }
}

#[test]
fn bubble_rejects_mismatched_grid_and_theta() {
    let phi = unit_mass_gaussian(profile_grid());
    let p = NlsLimitParams::new(4.0, phi.clone(), 0.6);
    assert!(build_bubble(&p, profile_grid()).is_err());
    let mut q = NlsLimitParams::new(4.0, phi, 0.6);
    q.theta = 0.1;
    assert!(build_bubble(&q, q.kg_grid().unwrap()).is_err());
}

#[test]
fn boosted_h1_norm_matches_quadrature() {
    // f = exp(−x²/2), f̂(ξ) = exp(−ξ²/2); ‖Ł_ν f‖²_{H¹} = ∫ ⟨l_ν ξ⟩² f̂(l_ν ξ)² dξ
    let grid = GridSpec::new(40.0, 1024).unwrap();
    let f = kgscatter::SpectralField::from_real_fn(grid, |x| (-(x * x) / 2.0).exp());
    for nu in [0.25, 0.5, 1.0] {
        let integrand = |xi: f64| {
            let l = kgscatter::symmetry::freq_map(xi, nu);
            bracket(l).powi(2) * (-(l * l)).exp()
        };
        let h = 1e-3;
        let quad: f64 = (-40_000..=40_000).map(|i| integrand(i as f64 * h)).sum::<f64>() * h;
        let got = sobolev_norm(&boost(&f, nu).unwrap(), 1.0);
        assert!((got - quad.sqrt()).abs() <= 1e-8 * got, "nu {nu}: {got} vs {}", quad.sqrt());
        assert!(got <= 2.0 * bracket(nu) * sobolev_norm(&f, 1.0));
    }
}

#[test]
fn nls_discrepancy_starts_at_truncation_error() {
    let sw = NlsLimitSweep {
        lambdas: vec![4.0],
        profile_grid: profile_grid(),
        spec: NonlinearitySpec::DefocusingExp,
        dt: 0.05,
        window: 0.05,
        s: 0.6,
        sample_stride: 1,
        blowup_linf_threshold: 10.0,
        dealias: Dealias::ExpFilter,
    };
    let d = nls_discrepancy(&sw, 4.0, 0.05).unwrap();
    // the only gap at t = 0 is the weight ⟨∂⟩^{s−½} acting on a frequency-λ^{-1} profile
    assert!(d.initial_gap <= 1e-3, "{}", d.initial_gap);
    assert!(d.discrepancy.is_finite());
}

fn scattering_params(spec: NonlinearitySpec, amplitudes: Vec<f64>) -> ScatteringParams {
    ScatteringParams {
        grid: GridSpec::new(60.0, 512).unwrap(),
        profile: Profile::gaussian(1.0),
        amplitudes,
        spec,
        evolution: EvolutionConfig {
            dt: 0.02,
            t_final: 12.0,
            snapshot_stride: 5,
            ..Default::default()
        },
        probes: vec![4.0, 6.0, 8.0, 10.0],
        s: 0.6,
        tail_start: 10.0,
        tail_tolerance: 1.0,
        energy_identity_tolerance: 2e-2,
        virial_radius: 10.0,
    }
}

#[test]
fn zero_amplitude_scattering_is_trivial() {
    let r = run_scattering(&scattering_params(NonlinearitySpec::DefocusingExp, vec![0.0])).unwrap();
    assert!(r.all_passed(), "{:?}", r.flags);
    assert_eq!(r.number("a0.forward.s6_total"), Some(0.0));
}

#[test]
fn linear_scattering_state_is_the_data() {
    let r = run_scattering(&scattering_params(NonlinearitySpec::Linear, vec![0.5])).unwrap();
    let f = r.get_flag("a0.5.forward.linear_v_plus").unwrap();
    assert!(f.passed, "{f:?}");
}

#[test]
fn scattering_is_deterministic() {
    let p = scattering_params(NonlinearitySpec::DefocusingExp, vec![0.5, 1.0]);
    let a = run_scattering(&p).unwrap();
    let b = run_scattering(&p).unwrap();
    assert_eq!(a.results, b.results);
    assert_eq!(a.series[0].1, b.series[0].1);
}

#[test]
fn threshold_ratios_are_exact_and_stable() {
    let p = ThresholdParams {
        grid: GridSpec::new(20.0, 512).unwrap(),
        scatter_grid: GridSpec::new(20.0, 512).unwrap(),
        amplitudes: vec![0.5, 3.0],
        dt: 2e-3,
        static_time: 1.0,
        scatter_time: 2.0,
        blowup_time: 5.0,
        probes: vec![0.5, 1.0, 1.5, 2.0],
        static_tolerance: 1e-4,
        snapshot_stride: 25,
        dealias: Dealias::ExpFilter,
        blowup_linf_threshold: 10.0,
    };
    let a = run_threshold(&p).unwrap();
    let b = run_threshold(&p).unwrap();
    let m = a.number("a0.5.mass_ratio").unwrap();
    assert!((m - 0.25).abs() <= 1e-9);
    assert_eq!(m.to_bits(), b.number("a0.5.mass_ratio").unwrap().to_bits());
    assert_eq!(
        a.number("a0.5.energy_ratio").unwrap().to_bits(),
        b.number("a0.5.energy_ratio").unwrap().to_bits()
    );
    assert!(a.get_flag("a3.blowup_time").unwrap().passed);
    assert!(nls_thresholds().static_energy > 0.0);
}

#[test]
fn twin_runs() {
    let mk = |spec| TwinParams {
        grid: GridSpec::new(40.0, 256).unwrap(),
        base: Profile::gaussian(1.0),
        spec,
        evolution: EvolutionConfig {
            dt: 0.02,
            t_final: 4.0,
            snapshot_stride: 5,
            ..Default::default()
        },
        deltas: vec![0.0, 1e-3, 1e-2],
        s: 0.6,
    };
    for spec in [NonlinearitySpec::DefocusingExp, NonlinearitySpec::Linear] {
        let r = run_twin_stability(&mk(spec)).unwrap();
        assert!(r.all_passed(), "{spec}: {:?}", r.flags);
    }
    let mut big = mk(NonlinearitySpec::DefocusingExp);
    big.deltas = vec![1.0];
    assert!(run_twin_stability(&big).is_err());
}

fn death_params(profile: Profile) -> SolitonDeathParams {
    SolitonDeathParams {
        grid: GridSpec::new(30.0, 256).unwrap(),
        profile,
        even_profile: Profile::gaussian(1.0),
        spec: NonlinearitySpec::DefocusingExp,
        evolution: EvolutionConfig {
            dt: 2e-3,
            t_final: 1.0,
            snapshot_stride: 1,
            ..Default::default()
        },
        radii: vec![3.0, 10.0],
        s: 0.6,
        virial_tolerance: 1e-4,
        drift_allowance: 1e-6,
    }
}

#[test]
fn zero_data_monitors_vanish() {
    let r = run_soliton_death_monitors(&death_params(Profile::gaussian(0.0))).unwrap();
    for key in ["max_exterior_energy", "max_virial_remainder", "virial_derivative_peak"] {
        assert_eq!(r.number(&format!("R3.{key}")), Some(0.0), "{key}");
    }
    for key in ["v_r", "x_r", "dv_r"] {
        match r.results.get(&format!("R3.{key}")).unwrap() {
            Value::List(v) => assert!(v.iter().all(|&x| x == 0.0)),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn death_monitors_on_a_short_run() {
    let r = run_soliton_death_monitors(&death_params(Profile::Gaussian {
        amplitude: 1.0,
        width: 1.0,
        center: 1.0,
        velocity: 0.0,
    }))
    .unwrap();
    assert!(r.all_passed(), "{:?}", r.flags.iter().filter(|f| !f.passed).collect::<Vec<_>>());
}

#[test]
fn simulate_verdicts_survive_refinement() {
    let mk = |dt: f64, n: usize| SimulateParams {
        grid: GridSpec::new(30.0, n).unwrap(),
        profile: Profile::gaussian(1.0),
        spec: NonlinearitySpec::DefocusingExp,
        evolution: EvolutionConfig {
            dt,
            t_final: 2.0,
            snapshot_stride: 10,
            ..Default::default()
        },
        s: 0.6,
        virial_radius: 10.0,
        energy_tolerance: 1e-6,
        momentum_tolerance: 1e-8,
        refine: true,
    };
    let coarse = run_simulate(&mk(2e-3, 512)).unwrap();
    assert!(coarse.all_passed(), "{:?}", coarse.flags);
    let fine = run_simulate(&mk(1e-3, 1024)).unwrap();
    assert!(fine.all_passed(), "{:?}", fine.flags);
}

#[test]
fn identities_are_seeded() {
    let a = run_identities(3);
    assert!(a.all_passed(), "{:?}", a.flags);
    assert_eq!(a.results, run_identities(3).results);
    assert_eq!(
        a.flags.iter().map(|f| f.measured.to_bits()).collect::<Vec<_>>(),
        run_identities(3).flags.iter().map(|f| f.measured.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn symmetry_check_passes() {
    let r = run_symmetry_check(GridSpec::new(40.0, 512).unwrap()).unwrap();
    assert!(r.all_passed(), "{:?}", r.flags.iter().filter(|f| !f.passed).collect::<Vec<_>>());
}

#[test]
fn sweep_preserves_order() {
    let items: Vec<u32> = (0..50).collect();
    assert_eq!(sweep(&items, |&i| i * 2).unwrap(), items.iter().map(|i| i * 2).collect::<Vec<_>>());
}
