//! Translations, Lorentz boosts, L²-scaling and the free propagators.
//!
//! The boost `Ł_ν` is realized on the Fourier side,
//! `F[Ł_ν f](ξ) = ⟨l_ν(ξ)⟩/⟨ξ⟩ · f̂(l_ν(ξ))` with `l_ν(ξ) = ⟨ν⟩ξ − ν⟨ξ⟩`.
//! Because `l_ν` does not map the lattice to itself, `f̂` is evaluated off the
//! lattice by the semidiscrete Fourier sum over the physical samples.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{bracket, interpolate, spectral_radius, GridSpec, SpectralField, C64};

/// Relative spectral tail below which a mode counts as outside the support.
pub const SPECTRAL_TAIL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymmetryError {
    #[error(
        "boost by nu = {nu} moves spectral support to |xi| = {required:.4} beyond the resolved \
         band {available:.4}; enlarge n_points or shrink |nu|"
    )]
    BandOverflow {
        nu: f64,
        required: f64,
        available: f64,
    },
    #[error("time {t} lies outside the stored span [{start}, {end}]")]
    OutsideSpan { t: f64, start: f64, end: f64 },
    #[error("spacetime interpolation needs at least 4 snapshots (got {0})")]
    TooFewSnapshots(usize),
}

/// A spacetime point `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: f64,
}

/// `L_ν(t, x) = (⟨ν⟩t − νx, ⟨ν⟩x − νt)`.
pub fn spacetime_boost(p: SpacetimePoint, nu: f64) -> SpacetimePoint {
    let g = bracket(nu);
    SpacetimePoint {
        t: g * p.t - nu * p.x,
        x: g * p.x - nu * p.t,
    }
}

/// `l_ν(ξ) = ⟨ν⟩ξ − ν⟨ξ⟩`.
pub fn freq_map(xi: f64, nu: f64) -> f64 {
    bracket(nu) * xi - nu * bracket(xi)
}

/// Parameter of the boost composed from `Ł_a` and `Ł_b`: `a⟨b⟩ + ⟨a⟩b`.
pub fn compose_boost_params(a: f64, b: f64) -> f64 {
    a * bracket(b) + bracket(a) * b
}

/// `[T_y f](x) = f(x − y)`, as the exact phase `e^{−iyξ}`.
pub fn translate(f: &SpectralField, y: f64) -> SpectralField {
    let grid = *f.grid();
    let mut c = f.coefficients();
    for (k, ck) in c.iter_mut().enumerate() {
        *ck *= C64::from_polar(1.0, -y * grid.xi(k));
    }
    SpectralField::from_coefficients(grid, c).expect("length preserved")
}

/// `e^{−it⟨∂x⟩} v`.
pub fn free_kg_propagate(v: &SpectralField, t: f64) -> SpectralField {
    phase_multiplier(v, |xi| -t * bracket(xi))
}

/// `e^{it∂x²/2} w`, i.e. `ŵ(ξ)·e^{−itξ²/2}`.
pub fn free_schrodinger_propagate(w: &SpectralField, t: f64) -> SpectralField {
    phase_multiplier(w, |xi| -0.5 * t * xi * xi)
}

fn phase_multiplier(f: &SpectralField, phase: impl Fn(f64) -> f64) -> SpectralField {
    let grid = *f.grid();
    let mut c = f.coefficients();
    for (k, ck) in c.iter_mut().enumerate() {
        *ck *= C64::from_polar(1.0, phase(grid.xi(k)));
    }
    SpectralField::from_coefficients(grid, c).expect("length preserved")
}

/// Largest `|ν|` such that boosting `f` keeps its spectral support resolved.
pub fn nu_max(f: &SpectralField) -> f64 {
    let radius = spectral_radius(f, SPECTRAL_TAIL);
    let top = f.grid().xi_max();
    if radius >= top {
        return 0.0;
    }
    // support [-K, K] is carried to l_{-ν}([-K, K]); the outer edge is
    // ⟨ν⟩K + |ν|⟨K⟩, which equals top when sinh(a + b) = top with sinh b = K
    (top.asinh() - radius.asinh()).sinh()
}

/// `Ł_ν f` by band-limited resampling of `f̂` at `l_ν(ξ_k)`.
pub fn boost(f: &SpectralField, nu: f64) -> Result<SpectralField, SymmetryError> {
    let grid = *f.grid();
    if nu == 0.0 {
        return Ok(f.clone());
    }
    let radius = spectral_radius(f, SPECTRAL_TAIL);
    let required = freq_map(radius, -nu).abs().max(freq_map(-radius, -nu).abs());
    let available = grid.xi_max();
    if required > available {
        return Err(SymmetryError::BandOverflow {
            nu,
            required,
            available,
        });
    }
    let spectrum: Vec<C64> = (0..grid.n_points())
        .map(|k| {
            if k == grid.nyquist_slot() {
                return C64::new(0.0, 0.0);
            }
            let xi = grid.xi(k);
            let eta = freq_map(xi, nu);
            if eta.abs() > radius + 2.0 * grid.dxi() + 1e-9 * available {
                return C64::new(0.0, 0.0);
            }
            f.spectrum_at(eta) * (bracket(eta) / bracket(xi))
        })
        .collect();
    Ok(SpectralField::from_continuous_spectrum(grid, &spectrum).expect("length preserved"))
}

/// `Ł_ν^{-1} = Ł_{−ν}`.
pub fn boost_inverse(f: &SpectralField, nu: f64) -> Result<SpectralField, SymmetryError> {
    boost(f, -nu)
}

/// Lattice maximum of `m_s(ξ) = (⟨l_ν(ξ)⟩/⟨ξ⟩)^{2s−1}` and of its reciprocal.
pub fn boost_weight_extremes(grid: &GridSpec, nu: f64, s: f64) -> (f64, f64) {
    let e = 2.0 * s - 1.0;
    grid.frequencies()
        .into_iter()
        .map(|xi| (bracket(freq_map(xi, nu)) / bracket(xi)).powf(e))
        .fold((0.0f64, 0.0f64), |(a, b), m| (a.max(m), b.max(1.0 / m)))
}

/// Support warning emitted by [`scale`].
#[derive(Debug, Clone, PartialEq)]
pub struct SupportWarning {
    pub boundary_value: f64,
}

/// `[D_λ f](x) = λ^{−1/2} f(x/λ)`, by trigonometric interpolation at `x_j/λ`.
/// Points with `x_j/λ` outside the box are set to zero.
pub fn scale(f: &SpectralField, lambda: f64) -> (SpectralField, Option<SupportWarning>) {
    assert!(lambda > 0.0, "scaling parameter must be positive");
    let grid = *f.grid();
    if lambda == 1.0 {
        return (f.clone(), None);
    }
    let c = f.coefficients();
    let l = grid.half_length();
    let amp = lambda.powf(-0.5);
    let values: Vec<C64> = grid
        .xs()
        .into_iter()
        .map(|x| {
            let y = x / lambda;
            if y < -l || y >= l {
                C64::new(0.0, 0.0)
            } else {
                interpolate(&grid, &c, y).0 * amp
            }
        })
        .collect();
    let out = SpectralField::new(grid, values).expect("length preserved");
    // when stretching, f(±L/λ) becomes the new boundary value; when shrinking,
    // the old boundary value f(±L) ends up inside the box
    let probe = if lambda > 1.0 { l / lambda } else { l };
    let edge = interpolate(&grid, &c, probe - 1e-12 * l).0.norm()
        .max(interpolate(&grid, &c, -probe).0.norm());
    let peak = f.max_abs();
    let warning = if peak > 0.0 && edge * amp > SPECTRAL_TAIL * peak.max(1.0) {
        warn!("scaled support does not fit the box: boundary value {edge:.3e}");
        Some(SupportWarning {
            boundary_value: edge * amp,
        })
    } else {
        None
    };
    (out, warning)
}

/// `λ²(⟨ξ/λ⟩ − 1) − ξ²/2`, returned in the cancellation-free closed form
/// `−λ^{−2}ξ⁴ / (2(⟨ξ/λ⟩ + 1)²)`.
pub fn kg_s_symbol_gap(xi: f64, lambda: f64) -> f64 {
    assert!(lambda > 0.0);
    let a = bracket(xi / lambda);
    let closed = -xi.powi(4) / (2.0 * lambda * lambda * (a + 1.0).powi(2));
    debug_assert!(
        (kg_s_symbol_gap_direct(xi, lambda) - closed).abs()
            <= 8.0 * f64::EPSILON * (lambda * lambda + xi * xi) + 1e-300,
        "symbol identity defect at xi={xi} lambda={lambda}"
    );
    closed
}

/// The same quantity evaluated literally as `λ²(⟨ξ/λ⟩ − 1) − ξ²/2`.
pub fn kg_s_symbol_gap_direct(xi: f64, lambda: f64) -> f64 {
    lambda * lambda * (bracket(xi / lambda) - 1.0) - 0.5 * xi * xi
}

/// Field values on a set of time slices with trigonometric interpolation in
/// `x` and 4-point Lagrange (cubic) interpolation in `t`.
#[derive(Debug, Clone)]
pub struct SpacetimeInterpolator {
    grid: GridSpec,
    times: Vec<f64>,
    coeffs: Vec<Vec<C64>>,
}

impl SpacetimeInterpolator {
    pub fn new(times: Vec<f64>, slices: Vec<SpectralField>) -> Result<Self, SymmetryError> {
        if slices.len() < 4 || times.len() != slices.len() {
            return Err(SymmetryError::TooFewSnapshots(slices.len().min(times.len())));
        }
        let grid = *slices[0].grid();
        let coeffs = slices.iter().map(SpectralField::coefficients).collect();
        Ok(Self { grid, times, coeffs })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    fn stencil(&self, t: f64) -> Result<([usize; 4], [f64; 4]), SymmetryError> {
        let (start, end) = self.span();
        let slack = 1e-12 * (1.0 + start.abs().max(end.abs()));
        if t < start - slack || t > end + slack {
            return Err(SymmetryError::OutsideSpan { t, start, end });
        }
        let m = self.times.len();
        let upper = self.times.partition_point(|&s| s <= t).clamp(1, m - 1);
        let first = upper.saturating_sub(2).min(m - 4);
        let idx = [first, first + 1, first + 2, first + 3];
        let mut w = [1.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    w[a] *= (t - self.times[idx[b]]) / (self.times[idx[a]] - self.times[idx[b]]);
                }
            }
        }
        Ok((idx, w))
    }

    /// Value and `∂x` at `(t, x)`. Positions outside the box evaluate to zero.
    pub fn eval(&self, t: f64, x: f64) -> Result<(C64, C64), SymmetryError> {
        let l = self.grid.half_length();
        if x < -l || x >= l {
            return Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0)));
        }
        let (idx, w) = self.stencil(t)?;
        let mut v = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for (i, wi) in idx.iter().zip(w) {
            if wi == 0.0 {
                continue;
            }
            let (a, b) = interpolate(&self.grid, &self.coeffs[*i], x);
            v += a * wi;
            d += b * wi;
        }
        Ok((v, d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::mass;
    use crate::spectral::{lebesgue_norm, sobolev_norm};

    fn grid() -> GridSpec {
        GridSpec::new(40.0, 512).unwrap()
    }

    fn packet(grid: GridSpec) -> SpectralField {
        SpectralField::from_fn(grid, |x| {
            C64::from_polar((-(x / 2.0).powi(2)).exp(), 0.4 * x)
        })
    }

    #[test]
    fn translation_group() {
        let f = packet(grid());
        assert!(translate(&f, 0.0).max_abs_diff(&f) < 1e-14);
        let g = translate(&translate(&f, 3.7), -3.7);
        assert!(g.max_abs_diff(&f) < 1e-13);
        assert!((mass(&translate(&f, 1.3)) - mass(&f)).abs() < 1e-12);
    }

    #[test]
    fn translated_single_mode() {
        // e^{ix} shifted by y is e^{i(x-y)}
        let g = GridSpec::new(std::f64::consts::PI * 8.0, 128).unwrap();
        let f = SpectralField::from_fn(g, |x| C64::from_polar(1.0, x));
        let y = 0.917;
        let shifted = translate(&f, y);
        let expect = SpectralField::from_fn(g, |x| C64::from_polar(1.0, x - y));
        assert!(shifted.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn frequency_map_basics() {
        assert!((freq_map(0.0, 1.0) + 1.0).abs() < 1e-15);
        for &(nu, xi) in &[(0.3, 1.2), (-2.0, 0.7), (5.0, -3.0)] {
            let t = freq_map(xi, nu);
            assert!((bracket(t) - (bracket(nu) * bracket(xi) - nu * xi)).abs() < 1e-13);
            assert!((freq_map(t, -nu) - xi).abs() < 1e-12);
        }
    }

    #[test]
    fn spacetime_boost_group() {
        let p = SpacetimePoint { t: 1.5, x: -2.25 };
        assert_eq!(spacetime_boost(p, 0.0), p);
        let q = spacetime_boost(spacetime_boost(p, 0.8), -0.8);
        assert!((q.t - p.t).abs() < 1e-14 && (q.x - p.x).abs() < 1e-14);
    }

    #[test]
    fn boost_identity_and_inverse() {
        let f = packet(grid());
        assert!(boost(&f, 0.0).unwrap().max_abs_diff(&f) < 1e-12);
        for nu in [0.5, -0.35, 0.1] {
            let back = boost(&boost(&f, nu).unwrap(), -nu).unwrap();
            assert!(back.max_abs_diff(&f) < 1e-8, "nu={nu}: {}", back.max_abs_diff(&f));
        }
    }

    #[test]
    fn boost_composition_law() {
        let f = packet(grid());
        let (a, b) = (0.3, -0.2);
        let two = boost(&boost(&f, b).unwrap(), a).unwrap();
        let one = boost(&f, compose_boost_params(a, b)).unwrap();
        assert!(two.max_abs_diff(&one) < 1e-7);
    }

    #[test]
    fn boost_preserves_half_sobolev_norm() {
        let f = packet(grid());
        let g = boost(&f, 0.4).unwrap();
        let (a, b) = (sobolev_norm(&f, 0.5), sobolev_norm(&g, 0.5));
        assert!((a - b).abs() < 1e-8 * a);
    }

    #[test]
    fn boost_rejects_band_overflow() {
        let g = GridSpec::new(10.0, 64).unwrap();
        let f = SpectralField::from_fn(g, |x| C64::from_polar((-(x * x)).exp(), 6.0 * x));
        match boost(&f, 2.0) {
            Err(SymmetryError::BandOverflow { .. }) => {}
            other => panic!("expected band overflow, got {other:?}"),
        }
        assert!(nu_max(&f) < 2.0);
    }

    #[test]
    fn scaling_is_an_isometry_with_inverse() {
        let g = grid();
        let f = SpectralField::from_real_fn(g, |x| (-(x * x) / 2.0).exp());
        assert_eq!(scale(&f, 1.0).0, f);
        let (s, warn) = scale(&f, 2.5);
        assert!(warn.is_none());
        assert!((mass(&s) - mass(&f)).abs() < 1e-10);
        let back = scale(&s, 0.4).0;
        assert!(back.max_abs_diff(&f) < 1e-9);
        let (_, warn) = scale(&f, 30.0);
        assert!(warn.is_some());
    }

    #[test]
    fn free_propagators() {
        let f = packet(grid());
        assert!(free_kg_propagate(&f, 0.0).max_abs_diff(&f) < 1e-14);
        let a = free_kg_propagate(&free_kg_propagate(&f, 1.25), 2.5);
        let b = free_kg_propagate(&f, 3.75);
        assert!(a.max_abs_diff(&b) < 1e-13);
        let n0 = lebesgue_norm(&f, 2.0);
        assert!((lebesgue_norm(&b, 2.0) - n0).abs() < 1e-13 * n0);
        let w = free_schrodinger_propagate(&f, 2.0);
        assert!((mass(&w) - mass(&f)).abs() < 1e-13 * mass(&f));
        assert!(free_schrodinger_propagate(&f, 0.0).max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn schrodinger_gaussian_closed_form() {
        // e^{-x²/2} evolves to (1+it)^{-1/2} exp(-x²/(2(1+it)))
        let g = GridSpec::new(40.0, 1024).unwrap();
        let f = SpectralField::from_real_fn(g, |x| (-x * x / 2.0).exp());
        let t = 1.7;
        let w = free_schrodinger_propagate(&f, t);
        let z = C64::new(1.0, t);
        let expect = SpectralField::from_fn(g, |x| (-(x * x) / (2.0 * z)).exp() / z.sqrt());
        assert!(w.max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn symbol_gap_identity() {
        assert_eq!(kg_s_symbol_gap(0.0, 3.0), 0.0);
        let (d, c) = (kg_s_symbol_gap_direct(1.0, 10.0), kg_s_symbol_gap(1.0, 10.0));
        assert!((d - c).abs() < 1e-13);
        for &(xi, lam) in &[(0.5, 1.0), (3.0, 2.0), (-7.0, 4.0), (20.0, 1.5)] {
            assert!(kg_s_symbol_gap(xi, lam).abs() <= xi.powi(4) / (8.0 * lam * lam));
        }
    }

    #[test]
    fn weight_bound() {
        let g = grid();
        for nu in [0.2, 1.0, 3.0] {
            for s in [0.5, 0.75, 1.0, 0.0] {
                let (m, inv) = boost_weight_extremes(&g, nu, s);
                let bound = bracket(nu).powf((2.0 * s - 1.0).abs());
                assert!(m <= 2.0 * bound && inv <= 2.0 * bound, "nu={nu} s={s}");
            }
        }
    }

    #[test]
    fn interpolator_in_time() {
        let g = GridSpec::new(20.0, 128).unwrap();
        let f = SpectralField::from_real_fn(g, |x| (-(x * x) / 2.0).exp());
        let times: Vec<f64> = (0..41).map(|i| -1.0 + 0.05 * i as f64).collect();
        let slices = times.iter().map(|&t| free_kg_propagate(&f, t)).collect();
        let interp = SpacetimeInterpolator::new(times, slices).unwrap();
        let exact = free_kg_propagate(&f, 0.333);
        let c = exact.coefficients();
        for &x in &[0.0, 0.7, -1.9] {
            let (v, _) = interp.eval(0.333, x).unwrap();
            assert!((v - interpolate(&g, &c, x).0).norm() < 1e-5);
        }
        assert!(interp.eval(1.5, 0.0).is_err());
    }
}
