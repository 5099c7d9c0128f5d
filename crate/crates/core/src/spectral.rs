//! Periodic grids, the discrete Fourier transform contract, Fourier multipliers
//! and Littlewood–Paley projections.
//!
//! The line is truncated to the periodic box `[-L, L)` sampled at `n` points.
//! Coefficients follow the convention
//!
//! ```text
//! f_j = Σ_k c_k exp(i ξ_k (x_j + L)),   ξ_k = π k / L,   k = -n/2 .. n/2-1
//! ```
//!
//! and are stored in natural FFT order (`k = 0, 1, .., n/2-1, -n/2, .., -1`).
//! Symbols are always evaluated on the value of `ξ_k`, never on the index.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("n_points must be even and at least 8 (got {0})")]
    BadPointCount(usize),
    #[error("half_length must be positive and finite (got {0})")]
    BadHalfLength(f64),
    #[error("field has {got} samples but the grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("multiplier symbol is not finite at xi = {xi}")]
    NonFiniteSymbol { xi: f64 },
    #[error("dyadic index must be a power of two (got {0})")]
    NotDyadic(u64),
    #[error("signed projection P_N^± requires N >= 2 (got {0})")]
    SignedProjectionAtOne(u64),
}

/// Uniform periodic grid on `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_length: f64,
    n_points: usize,
}

impl GridSpec {
    pub fn new(half_length: f64, n_points: usize) -> Result<Self, SpectralError> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(SpectralError::BadHalfLength(half_length));
        }
        if n_points < 8 || n_points % 2 != 0 {
            return Err(SpectralError::BadPointCount(n_points));
        }
        Ok(Self {
            half_length,
            n_points,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    /// Spacing of the frequency lattice, `π / L`.
    pub fn dxi(&self) -> f64 {
        PI / self.half_length
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Signed wavenumber index of storage slot `slot`.
    pub fn wavenumber(&self, slot: usize) -> i64 {
        let n = self.n_points as i64;
        let s = slot as i64;
        if s < n / 2 {
            s
        } else {
            s - n
        }
    }

    pub fn xi(&self, slot: usize) -> f64 {
        self.wavenumber(slot) as f64 * self.dxi()
    }

    /// Frequency lattice in natural FFT order.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|s| self.xi(s)).collect()
    }

    /// Largest resolved frequency `π (n/2 - 1) / L`.
    pub fn xi_max(&self) -> f64 {
        (self.n_points / 2 - 1) as f64 * self.dxi()
    }

    /// Storage slot of the unpaired Nyquist mode `k = -n/2`.
    pub fn nyquist_slot(&self) -> usize {
        self.n_points / 2
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward/inverse FFT pair for one grid size. Plans come from a per-thread
/// planner cache, so building one of these repeatedly is cheap.
#[derive(Clone)]
pub struct Transform {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Transform {
    pub fn new(n: usize) -> Self {
        PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            Self {
                forward: p.plan_fft_forward(n),
                inverse: p.plan_fft_inverse(n),
                n,
            }
        })
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::new(grid.n_points())
    }

    /// Samples to coefficients `c_k` (normalized by `1/n`).
    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    /// Coefficients back to samples.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
    }

    /// Unnormalized plans, for callers that fold the `1/n` into other work.
    pub(crate) fn plans(&self) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
        (self.forward.clone(), self.inverse.clone())
    }
}

/// Complex samples of a field on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    values: Vec<C64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, values: Vec<C64>) -> Result<Self, SpectralError> {
        if values.len() != grid.n_points() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_real(grid: GridSpec, values: &[f64]) -> Result<Self, SpectralError> {
        Self::new(grid, values.iter().map(|&r| C64::new(r, 0.0)).collect())
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> C64) -> Self {
        Self {
            grid,
            values: grid.xs().into_iter().map(f).collect(),
        }
    }

    pub fn from_real_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }

    pub fn coefficients(&self) -> Vec<C64> {
        let mut buf = self.values.clone();
        Transform::for_grid(&self.grid).forward(&mut buf);
        buf
    }

    pub fn from_coefficients(grid: GridSpec, coeffs: Vec<C64>) -> Result<Self, SpectralError> {
        let mut field = Self::new(grid, coeffs)?;
        Transform::for_grid(&grid).inverse(&mut field.values);
        Ok(field)
    }

    /// Samples of the continuous Fourier transform
    /// `f̂(ξ) = (2π)^{-1/2} ∫ e^{-ixξ} f(x) dx` on the lattice (rectangle rule).
    pub fn continuous_spectrum(&self) -> Vec<C64> {
        let scale = 2.0 * self.grid.half_length() / (2.0 * PI).sqrt();
        self.coefficients()
            .into_iter()
            .enumerate()
            .map(|(s, c)| c * scale * parity(self.grid.wavenumber(s)))
            .collect()
    }

    /// Inverse of [`continuous_spectrum`](Self::continuous_spectrum).
    pub fn from_continuous_spectrum(grid: GridSpec, spectrum: &[C64]) -> Result<Self, SpectralError> {
        if spectrum.len() != grid.n_points() {
            return Err(SpectralError::LengthMismatch {
                expected: grid.n_points(),
                got: spectrum.len(),
            });
        }
        let scale = (2.0 * PI).sqrt() / (2.0 * grid.half_length());
        let coeffs = spectrum
            .iter()
            .enumerate()
            .map(|(s, &g)| g * scale * parity(grid.wavenumber(s)))
            .collect();
        Self::from_coefficients(grid, coeffs)
    }

    /// Evaluate the continuous Fourier transform at an arbitrary frequency by
    /// the semidiscrete sum over physical samples. Frequencies beyond the
    /// Nyquist band would alias and return zero.
    pub fn spectrum_at(&self, eta: f64) -> C64 {
        let g = &self.grid;
        if eta.abs() > g.n_points() as f64 / 2.0 * g.dxi() {
            return C64::new(0.0, 0.0);
        }
        let sum = phase_sum(&self.values, -eta * g.x(0), -eta * g.dx());
        sum * (g.dx() / (2.0 * PI).sqrt())
    }

    /// Sample-wise linear combination `a·self + b·other`.
    pub fn combine(&self, a: C64, other: &SpectralField, b: C64) -> SpectralField {
        debug_assert_eq!(self.grid, other.grid);
        SpectralField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&p, &q)| a * p + b * q)
                .collect(),
        }
    }

    pub fn scaled(&self, a: C64) -> SpectralField {
        SpectralField {
            grid: self.grid,
            values: self.values.iter().map(|&z| a * z).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn parity(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `Σ_j a_j exp(i(θ0 + j·dθ))`, with the phase advanced by complex
/// multiplication and re-seeded from `cis` every 64 terms.
pub(crate) fn phase_sum(a: &[C64], theta0: f64, dtheta: f64) -> C64 {
    const RESEED: usize = 64;
    let step = C64::from_polar(1.0, dtheta);
    let mut acc = C64::new(0.0, 0.0);
    let mut z = C64::new(0.0, 0.0);
    for (j, &aj) in a.iter().enumerate() {
        if j % RESEED == 0 {
            z = C64::from_polar(1.0, theta0 + j as f64 * dtheta);
        } else {
            z *= step;
        }
        acc += aj * z;
    }
    acc
}

/// Trigonometric interpolant of a coefficient vector at arbitrary `x`, and its
/// first derivative. The Nyquist mode enters as a cosine so real data stay real.
pub fn interpolate(grid: &GridSpec, coeffs: &[C64], x: f64) -> (C64, C64) {
    const RESEED: usize = 64;
    let n = grid.n_points();
    let theta = grid.dxi() * (x + grid.half_length());
    let step = C64::from_polar(1.0, theta);
    let mut value = coeffs[0];
    let mut deriv = C64::new(0.0, 0.0);
    let mut z = C64::new(1.0, 0.0);
    for k in 1..n / 2 {
        if k % RESEED == 0 {
            z = C64::from_polar(1.0, k as f64 * theta);
        } else {
            z *= step;
        }
        let xi = k as f64 * grid.dxi();
        let zc = z.conj();
        let (cp, cm) = (coeffs[k], coeffs[n - k]);
        value += cp * z + cm * zc;
        deriv += C64::new(0.0, xi) * (cp * z - cm * zc);
    }
    let xi_n = (n / 2) as f64 * grid.dxi();
    let cn = coeffs[n / 2];
    let phase = xi_n * (x + grid.half_length());
    value += cn * phase.cos();
    deriv -= cn * xi_n * phase.sin();
    (value, deriv)
}

/// `⟨ξ⟩ = (1 + ξ²)^{1/2}`.
pub fn bracket(xi: f64) -> f64 {
    xi.hypot(1.0)
}

/// Scalar Fourier symbol evaluated on the frequency lattice.
pub trait MultiplierSymbol {
    fn eval(&self, xi: f64) -> C64;
}

impl<F: Fn(f64) -> C64> MultiplierSymbol for F {
    fn eval(&self, xi: f64) -> C64 {
        self(xi)
    }
}

/// `⟨ξ⟩^s`.
#[derive(Debug, Clone, Copy)]
pub struct BesselPotential(pub f64);

impl MultiplierSymbol for BesselPotential {
    fn eval(&self, xi: f64) -> C64 {
        C64::new(bracket(xi).powf(self.0), 0.0)
    }
}

/// Multiply `f̂(ξ_k)` by `m(ξ_k)` and transform back.
pub fn apply_multiplier(
    f: &SpectralField,
    m: &impl MultiplierSymbol,
) -> Result<SpectralField, SpectralError> {
    let grid = *f.grid();
    let mut coeffs = f.coefficients();
    for (s, c) in coeffs.iter_mut().enumerate() {
        let xi = grid.xi(s);
        let v = m.eval(xi);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(SpectralError::NonFiniteSymbol { xi });
        }
        *c *= v;
    }
    SpectralField::from_coefficients(grid, coeffs)
}

/// Real-even symbol applied to real samples.
pub(crate) fn apply_real_symbol(grid: &GridSpec, values: &[f64], m: impl Fn(f64) -> f64) -> Vec<f64> {
    let tr = Transform::for_grid(grid);
    let mut buf: Vec<C64> = values.iter().map(|&r| C64::new(r, 0.0)).collect();
    tr.forward(&mut buf);
    for (s, c) in buf.iter_mut().enumerate() {
        *c *= m(grid.xi(s));
    }
    tr.inverse(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Spectral derivative of real samples; the Nyquist mode is dropped.
pub fn derivative(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    let tr = Transform::for_grid(grid);
    let mut buf: Vec<C64> = values.iter().map(|&r| C64::new(r, 0.0)).collect();
    tr.forward(&mut buf);
    for (s, c) in buf.iter_mut().enumerate() {
        *c *= C64::new(0.0, grid.xi(s));
    }
    buf[grid.nyquist_slot()] = C64::new(0.0, 0.0);
    tr.inverse(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Spectral second derivative of real samples.
pub fn second_derivative(grid: &GridSpec, values: &[f64]) -> Vec<f64> {
    apply_real_symbol(grid, values, |xi| -xi * xi)
}

fn h(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

// h and its first two derivatives, with h^{(k)}(t) = 0 for t <= 0. Below
// t = 1e-3 the factor exp(-1/t) has already underflowed.
fn h_jet(t: f64) -> (f64, f64, f64) {
    if t < 1e-3 {
        return (0.0, 0.0, 0.0);
    }
    let v = (-1.0 / t).exp();
    let t2 = t * t;
    (v, v / t2, v * (1.0 / (t2 * t2) - 2.0 / (t2 * t)))
}

/// C^∞ cutoff: 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 2`, monotone in between.
pub fn smooth_cutoff(xi: f64) -> f64 {
    let y = xi.abs();
    if y <= 1.0 {
        1.0
    } else if y >= 2.0 {
        0.0
    } else {
        let a = h(2.0 - y);
        a / (a + h(y - 1.0))
    }
}

/// Value, first and second derivative of [`smooth_cutoff`].
pub fn smooth_cutoff_jet(x: f64) -> (f64, f64, f64) {
    let y = x.abs();
    if y <= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if y >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let (a, a1, a2) = {
        let (v, d1, d2) = h_jet(2.0 - y);
        (v, -d1, d2)
    };
    let (b, b1, b2) = h_jet(y - 1.0);
    let s = a + b;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    let d1 = num / (s * s);
    let d2 = (num1 * s - 2.0 * num * (a1 + b1)) / (s * s * s);
    (a / s, d1 * x.signum(), d2)
}

/// Which half-line of frequencies a projection keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencySign {
    Positive,
    Negative,
    Both,
}

/// Symbol of the Littlewood–Paley piece `P_N` (or `P_N^±`).
pub fn lp_symbol(xi: f64, n: u64, sign: FrequencySign) -> f64 {
    let nf = n as f64;
    let band = if n == 1 {
        smooth_cutoff(xi)
    } else {
        smooth_cutoff(xi / nf) - smooth_cutoff(2.0 * xi / nf)
    };
    match sign {
        FrequencySign::Both => band,
        FrequencySign::Positive if xi > 0.0 => band,
        FrequencySign::Negative if xi < 0.0 => band,
        _ => 0.0,
    }
}

pub fn lp_project(
    f: &SpectralField,
    n: u64,
    sign: FrequencySign,
) -> Result<SpectralField, SpectralError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(SpectralError::NotDyadic(n));
    }
    if n == 1 && sign != FrequencySign::Both {
        return Err(SpectralError::SignedProjectionAtOne(n));
    }
    apply_multiplier(f, &|xi: f64| C64::new(lp_symbol(xi, n, sign), 0.0))
}

/// Smooth low-pass `P_{≤N}` with symbol `σ(ξ/N)`, for any real `N > 0`.
pub fn low_pass(f: &SpectralField, cutoff: f64) -> SpectralField {
    apply_multiplier(f, &|xi: f64| C64::new(smooth_cutoff(xi / cutoff), 0.0))
        .expect("cutoff symbol is finite")
}

/// Dyadic scales `1, 2, 4, ..` whose pieces meet the resolved band.
pub fn resolved_dyadic_scales(grid: &GridSpec) -> Vec<u64> {
    let top = grid.n_points() as f64 / 2.0 * grid.dxi();
    let mut out = vec![1u64];
    let mut n = 2u64;
    // P_N is supported on N/2 <= |ξ| <= 2N
    while (n as f64) / 2.0 <= top {
        out.push(n);
        n *= 2;
    }
    out
}

/// Rectangle-rule `L^p` norm; `p = f64::INFINITY` returns the max modulus.
///
/// Panics if `p < 1`.
pub fn lebesgue_norm(f: &SpectralField, p: f64) -> f64 {
    lebesgue_norm_of(f.grid(), f.values().iter().map(|z| z.norm()), p)
}

pub fn lebesgue_norm_real(grid: &GridSpec, values: &[f64], p: f64) -> f64 {
    lebesgue_norm_of(grid, values.iter().map(|v| v.abs()), p)
}

fn lebesgue_norm_of(grid: &GridSpec, moduli: impl Iterator<Item = f64>, p: f64) -> f64 {
    assert!(p >= 1.0, "Lebesgue exponent must be >= 1 (got {p})");
    if p.is_infinite() {
        return moduli.fold(0.0, f64::max);
    }
    let sum: f64 = if p == 2.0 {
        moduli.map(|m| m * m).sum()
    } else {
        moduli.map(|m| m.powf(p)).sum()
    };
    (grid.dx() * sum).powf(1.0 / p)
}

/// `‖f‖_{H^s}` from the discrete Parseval identity.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let grid = f.grid();
    let sum: f64 = f
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, c)| bracket(grid.xi(k)).powf(2.0 * s) * c.norm_sqr())
        .sum();
    (2.0 * grid.half_length() * sum).sqrt()
}

/// Radius beyond which `|c_k| < rel_tol · max |c|`.
pub fn spectral_radius(f: &SpectralField, rel_tol: f64) -> f64 {
    let grid = f.grid();
    let coeffs = f.coefficients();
    let peak = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > rel_tol * peak)
        .map(|(k, _)| grid.xi(k).abs())
        .fold(0.0, f64::max)
}
