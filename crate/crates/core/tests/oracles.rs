//! Reference values from adaptive quadrature, computed test-side and
//! independent of the library's grid machinery.

use kgscatter::dynamics::{NonlinearitySpec, PairState};
use kgscatter::observables::{
    energy, ground_state, ground_state_derivative, ground_state_profile, mass_real, nls_thresholds,
};
use kgscatter::spectral::{smooth_cutoff, GridSpec};

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (l, r) = (simpson(f, a, m), simpson(f, m, b));
    if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
        return l + r + (l + r - whole) / 15.0;
    }
    adaptive(f, a, m, l, 0.5 * tol, depth - 1) + adaptive(f, m, b, r, 0.5 * tol, depth - 1)
}

/// `∫_{−a}^{a} f` by adaptive Simpson on unit panels.
fn quad(f: impl Fn(f64) -> f64, a: f64) -> f64 {
    let f = &f;
    let panels = (2.0 * a).ceil() as usize;
    let h = 2.0 * a / panels as f64;
    (0..panels)
        .map(|i| {
            let (lo, hi) = (-a + i as f64 * h, -a + (i + 1) as f64 * h);
            adaptive(f, lo, hi, simpson(f, lo, hi), 1e-15, 40)
        })
        .sum()
}

fn q4() -> f64 {
    2f64.powf(0.25)
}

#[test]
fn ground_state_mass_matches_closed_form() {
    let closed = 3f64.sqrt() * std::f64::consts::PI / 2.0;
    let quadrature = quad(|x| ground_state_profile(x).powi(2), 30.0);
    assert!((quadrature - closed).abs() <= 1e-10, "{quadrature} vs {closed}");
    let th = nls_thresholds();
    assert!((th.mass_q - quadrature).abs() <= 1e-8);
    let grid = GridSpec::new(40.0, 4096).unwrap();
    let samples: Vec<f64> = grid.xs().iter().map(|&x| ground_state_profile(x)).collect();
    assert!((mass_real(&grid, &samples) - quadrature).abs() <= 1e-8);
}

#[test]
fn static_energy_is_half_the_mass() {
    let c = q4();
    let e_quad = quad(
        |x| {
            let (q, dq) = (c * ground_state_profile(x), c * ground_state_derivative(x));
            0.5 * dq * dq + 0.5 * q * q - q.powi(6) / 12.0
        },
        30.0,
    );
    let m_quad = quad(|x| (c * ground_state_profile(x)).powi(2), 30.0);
    assert!((e_quad - 0.5 * m_quad).abs() <= 1e-10);
    assert!((e_quad - 3f64.sqrt() * std::f64::consts::PI * 2f64.sqrt() / 4.0).abs() <= 1e-10);

    let grid = GridSpec::new(40.0, 4096).unwrap();
    let state = PairState::from_fns(grid, |x| c * ground_state_profile(x), |_| 0.0);
    let e_grid = energy(&state, NonlinearitySpec::QuinticFocusing);
    let m_grid = mass_real(&grid, &state.u);
    assert!((e_grid - 0.5 * m_grid).abs() <= 1e-8);
    assert!((e_grid - e_quad).abs() <= 1e-8);
    assert!((nls_thresholds().static_energy - e_quad).abs() <= 1e-8);
}

#[test]
fn nls_ground_state_mass() {
    // w_Q = 2(2/5)^{1/4} Q(√2 x) has mass (4/√5) M(Q)
    let amp = 2.0 * 0.4f64.powf(0.25);
    let quadrature = quad(|x| (amp * ground_state_profile(2f64.sqrt() * x)).powi(2), 30.0);
    let th = nls_thresholds();
    assert!((th.mass_wq - quadrature).abs() <= 1e-8);
    assert!((th.mass_wq_direct - quadrature).abs() <= 1e-8);
}

#[test]
fn ground_state_residual_is_spectrally_small() {
    let g = ground_state(&GridSpec::new(40.0, 2048).unwrap());
    assert!(g.residual <= 1e-10, "residual {}", g.residual);
}

#[test]
fn cutoff_reference_value() {
    // frozen from a high-precision evaluation of the bump-ratio cutoff
    assert!((smooth_cutoff(1.25) - 0.935030830871336).abs() <= 1e-14);
    assert_eq!(smooth_cutoff(0.9), 1.0);
    assert_eq!(smooth_cutoff(2.0), 0.0);
}
