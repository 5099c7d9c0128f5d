//! Functionals and monitors evaluated on states and trajectories.
//!
//! Spatial integrals use the rectangle rule on the periodic grid, which is
//! spectrally accurate for smooth decaying integrands. Time integrals use the
//! composite trapezoid over snapshot times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    eval_nonlinearity, eval_potential_density, to_first_order, NlsSign, NonlinearitySpec,
    PairState, Trajectory, NLS_COUPLING,
};
use crate::spectral::{
    apply_real_symbol, bracket, derivative, lebesgue_norm, lebesgue_norm_real, smooth_cutoff,
    smooth_cutoff_jet, sobolev_norm, GridSpec, SpectralField, C64,
};
use crate::symmetry::{free_kg_propagate, SpacetimeInterpolator, SymmetryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("(q, r) = ({q}, {r}) is not admissible: need 2/q + 1/r = 1/2, q > 4, 2 <= r < inf")]
    NotAdmissible { q: f64, r: f64 },
    #[error("Sobolev exponent s = {0} outside [1/2, 11/12)")]
    ExponentOutOfRange(f64),
    #[error("decay fit is degenerate: every sampled norm is below 1e-14")]
    DegenerateFit,
    #[error("invalid fit request: {0}")]
    InvalidFit(String),
    #[error("probe time {t} lies outside the trajectory span [{start}, {end}]")]
    ProbeOutsideSpan { t: f64, start: f64, end: f64 },
    #[error("boosted slice leaves the stored slab: {0}")]
    SlabEscape(#[from] SymmetryError),
    #[error("virial radius must be positive (got {0})")]
    BadRadius(f64),
}

/// `∫|f|²`.
pub fn mass(f: &SpectralField) -> f64 {
    f.grid().dx() * f.values().iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `∫u²` for real samples.
pub fn mass_real(grid: &GridSpec, u: &[f64]) -> f64 {
    grid.dx() * u.iter().map(|v| v * v).sum::<f64>()
}

fn potential(u: f64, spec: NonlinearitySpec) -> f64 {
    eval_potential_density(u, spec).unwrap_or(if spec.is_defocusing() {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    })
}

/// Pointwise `e_u = ½u² + ½u_x² + ½u_t² + ½Ñ(u)`.
pub fn energy_density(state: &PairState, spec: NonlinearitySpec) -> Vec<f64> {
    let ux = derivative(&state.grid, &state.u);
    state
        .u
        .iter()
        .zip(&ux)
        .zip(&state.ut)
        .map(|((&u, &ux), &ut)| 0.5 * (u * u + ux * ux + ut * ut + potential(u, spec)))
        .collect()
}

/// `E(u, u_t) = ∫ e_u`; infinite if the potential overflows.
pub fn energy(state: &PairState, spec: NonlinearitySpec) -> f64 {
    state.grid.dx() * energy_density(state, spec).iter().sum::<f64>()
}

/// `½∫(u² + u_x² + u_t²)`.
pub fn quadratic_energy(state: &PairState) -> f64 {
    energy(state, NonlinearitySpec::Linear)
}

/// `P = −∫u_t u_x`.
pub fn momentum(state: &PairState) -> f64 {
    let ux = derivative(&state.grid, &state.u);
    -state.grid.dx() * state.ut.iter().zip(&ux).map(|(a, b)| a * b).sum::<f64>()
}

/// `‖v‖_{H¹}` of the first-order field, i.e. `(∫u² + u_x² + u_t²)^{1/2}`.
pub fn h1(state: &PairState) -> f64 {
    (2.0 * quadratic_energy(state)).sqrt()
}

/// `∫(¼|w_x|² + μ(5/192)|w|⁶)` for the NLS.
pub fn nls_energy(w: &SpectralField, sign: NlsSign) -> f64 {
    let grid = *w.grid();
    let wx = crate::spectral::apply_multiplier(w, &|xi: f64| C64::new(0.0, xi))
        .expect("finite symbol");
    let coupling = sign.mu() * NLS_COUPLING / 6.0;
    grid.dx()
        * w.values()
            .iter()
            .zip(wx.values())
            .map(|(z, d)| 0.25 * d.norm_sqr() + coupling * z.norm_sqr().powi(3))
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub s: f64,
    pub admissible_pairs: Vec<(f64, f64)>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            s: 0.6,
            admissible_pairs: vec![(6.0, 6.0), (5.0, 10.0), (8.0, 4.0)],
        }
    }
}

pub fn check_exponent(s: f64) -> Result<(), ObservableError> {
    if (0.5..11.0 / 12.0).contains(&s) {
        Ok(())
    } else {
        Err(ObservableError::ExponentOutOfRange(s))
    }
}

pub fn check_admissible(q: f64, r: f64) -> Result<(), ObservableError> {
    let ok = q > 4.0 && (2.0..f64::INFINITY).contains(&r) && (2.0 / q + 1.0 / r - 0.5).abs() < 1e-12;
    if ok {
        Ok(())
    } else {
        Err(ObservableError::NotAdmissible { q, r })
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<(), ObservableError> {
        check_exponent(self.s)?;
        for &(q, r) in &self.admissible_pairs {
            check_admissible(q, r)?;
        }
        Ok(())
    }
}

/// `∫|⟨∂x⟩^{s−½}u|⁶`.
pub fn weighted_sixth_power(grid: &GridSpec, u: &[f64], s: f64) -> f64 {
    let exponent = s - 0.5;
    let sum: f64 = if exponent == 0.0 {
        u.iter().map(|v| v.powi(6)).sum()
    } else {
        apply_real_symbol(grid, u, |xi| bracket(xi).powf(exponent))
            .iter()
            .map(|v| v.powi(6))
            .sum()
    };
    grid.dx() * sum
}

/// Streaming composite trapezoid rule.
#[derive(Debug, Clone, Default)]
pub struct TrapezoidAccumulator {
    last: Option<(f64, f64)>,
    integral: f64,
}

impl TrapezoidAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add the sample `(t, value)` and return the running integral.
    pub fn push(&mut self, t: f64, value: f64) -> f64 {
        if let Some((t0, v0)) = self.last {
            self.integral += 0.5 * (t - t0) * (v0 + value);
        }
        self.last = Some((t, value));
        self.integral
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }
}

/// `S⁶` integrals over `[t_0, t_i]` at every snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrichartzProfile {
    pub times: Vec<f64>,
    /// `∫_{t_0}^{t_i} ‖⟨∂x⟩^{s−½}u‖⁶_{L⁶} dt`.
    pub sixth_power: Vec<f64>,
}

impl StrichartzProfile {
    /// `S` over the whole span.
    pub fn total(&self) -> f64 {
        self.sixth_power.last().map_or(0.0, |v| v.powf(1.0 / 6.0))
    }

    /// Cumulative `S` (sixth roots) at every snapshot.
    pub fn cumulative(&self) -> Vec<f64> {
        self.sixth_power.iter().map(|v| v.powf(1.0 / 6.0)).collect()
    }

    /// Cumulative `S` up to the last snapshot at or before `t`.
    pub fn until(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            0.0
        } else {
            self.sixth_power[i - 1].powf(1.0 / 6.0)
        }
    }
}

/// `S_I(⟨∂x⟩^{s−½}u)` over the trajectory, with its cumulative profile.
pub fn strichartz_s6(traj: &Trajectory, s: f64) -> StrichartzProfile {
    let mut acc = TrapezoidAccumulator::new();
    let mut times = Vec::with_capacity(traj.snapshots.len());
    let mut sixth_power = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let v = weighted_sixth_power(&snap.grid, &snap.u, s);
        times.push(snap.t);
        sixth_power.push(acc.push(snap.t, v));
    }
    StrichartzProfile { times, sixth_power }
}

/// `‖u‖_{L^q_t L^r_x}` over the trajectory for an admissible pair.
pub fn mixed_norm(traj: &Trajectory, q: f64, r: f64) -> Result<f64, ObservableError> {
    check_admissible(q, r)?;
    let mut acc = TrapezoidAccumulator::new();
    for snap in &traj.snapshots {
        acc.push(snap.t, lebesgue_norm_real(&snap.grid, &snap.u, r).powf(q));
    }
    Ok(acc.integral().powf(1.0 / q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringReport {
    /// Snapshot times actually used for each requested probe.
    pub probe_times: Vec<f64>,
    /// `‖e^{it_i⟨∂⟩}v(t_i) − e^{it_{i+1}⟨∂⟩}v(t_{i+1})‖_{H¹}`.
    pub increments: Vec<f64>,
    pub monotone: bool,
}

/// Back-propagated profile `e^{it⟨∂x⟩}v(t)`.
pub fn back_propagate(state: &PairState) -> SpectralField {
    free_kg_propagate(&to_first_order(state), -state.t)
}

/// Scattering-state candidate from the last snapshot and Cauchy increments
/// between consecutive probes (each probe uses the nearest snapshot).
pub fn scattering_state(
    traj: &Trajectory,
    probes: &[f64],
) -> Result<(SpectralField, ScatteringReport), ObservableError> {
    let (start, end) = (traj.first().t, traj.last().t);
    let mut profiles = Vec::with_capacity(probes.len());
    let mut probe_times = Vec::with_capacity(probes.len());
    for &t in probes {
        if t < start - 1e-9 || t > end + 1e-9 {
            return Err(ObservableError::ProbeOutsideSpan { t, start, end });
        }
        let snap = traj.nearest(t);
        probe_times.push(snap.t);
        profiles.push(back_propagate(snap));
    }
    let increments: Vec<f64> = profiles
        .windows(2)
        .map(|w| sobolev_norm(&w[0].combine(C64::new(1.0, 0.0), &w[1], C64::new(-1.0, 0.0)), 1.0))
        .collect();
    let monotone = increments.windows(2).all(|w| w[1] <= w[0]);
    Ok((
        back_propagate(traj.last()),
        ScatteringReport {
            probe_times,
            increments,
            monotone,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Least-squares slope of `log‖e^{−it⟨∂x⟩}f‖_{L^p}` against `log t` at
/// `samples` log-spaced times in `t_range`.
pub fn dispersive_decay_fit(
    f: &SpectralField,
    p: f64,
    t_range: (f64, f64),
    samples: usize,
) -> Result<DecayFit, ObservableError> {
    let (t0, t1) = t_range;
    if !(p > 2.0) {
        return Err(ObservableError::InvalidFit(format!("need p > 2 (got {p})")));
    }
    if !(t0 > 0.0 && t1 > t0) || samples < 2 {
        return Err(ObservableError::InvalidFit(format!(
            "need 0 < t0 < t1 and at least two samples (got [{t0}, {t1}], {samples})"
        )));
    }
    let ratio = (t1 / t0).ln() / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|i| t0 * (ratio * i as f64).exp()).collect();
    let norms: Vec<f64> = times
        .iter()
        .map(|&t| lebesgue_norm(&free_kg_propagate(f, t), p))
        .collect();
    if norms.iter().all(|&n| n < 1e-14) {
        return Err(ObservableError::DegenerateFit);
    }
    let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let m = samples as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let exponent = sxy / sxx;
    Ok(DecayFit {
        exponent,
        intercept: my - exponent * mx,
        times,
        norms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EinsteinReport {
    pub nu: f64,
    pub energy: f64,
    pub momentum: f64,
    pub energy_boosted: f64,
    pub momentum_boosted: f64,
    /// `L_{−ν}(E, P) = (⟨ν⟩E + νP, ⟨ν⟩P + νE)`.
    pub energy_expected: f64,
    pub momentum_expected: f64,
    /// `max(|ΔE|, |ΔP|) / E`.
    pub defect: f64,
    /// `E² − P²` of the boosted slice.
    pub invariant_boosted: f64,
    pub invariant: f64,
}

/// Time span `|ν|L/⟨ν⟩` a trajectory centred at `t = 0` must cover for
/// [`einstein_check`] on this grid.
pub fn einstein_span(grid: &GridSpec, nu: f64) -> f64 {
    nu.abs() * grid.half_length() / bracket(nu)
}

/// Energy and momentum of `u∘L_ν` on the slice `t = 0`, reconstructed from
/// the trajectory by spacetime interpolation, against `L_{−ν}(E, P)`.
pub fn einstein_check(traj: &Trajectory, nu: f64) -> Result<EinsteinReport, ObservableError> {
    let spec = traj.nonlinearity;
    let base = traj.nearest(0.0);
    let e = energy(base, spec);
    let p = momentum(base);
    let g = bracket(nu);
    let grid = *traj.grid();

    let (ub, uxb, utb) = if nu == 0.0 {
        (base.u.clone(), derivative(&grid, &base.u), base.ut.clone())
    } else {
        let times = traj.times();
        let us = traj
            .snapshots
            .iter()
            .map(|s| SpectralField::from_real(grid, &s.u).expect("lengths match"))
            .collect();
        let uts = traj
            .snapshots
            .iter()
            .map(|s| SpectralField::from_real(grid, &s.ut).expect("lengths match"))
            .collect();
        let iu = SpacetimeInterpolator::new(times.clone(), us)?;
        let iut = SpacetimeInterpolator::new(times, uts)?;
        let n = grid.n_points();
        let (mut ub, mut uxb, mut utb) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for j in 0..n {
            let x = grid.x(j);
            let (tt, xx) = (-nu * x, g * x);
            if xx < -grid.half_length() || xx >= grid.half_length() {
                continue;
            }
            let (u, ux) = iu.eval(tt, xx)?;
            let (ut, _) = iut.eval(tt, xx)?;
            ub[j] = u.re;
            // chain rule through (t, x) = (−νx', ⟨ν⟩x') and (⟨ν⟩t', …)
            uxb[j] = g * ux.re - nu * ut.re;
            utb[j] = g * ut.re - nu * ux.re;
        }
        (ub, uxb, utb)
    };
    let dx = grid.dx();
    let mut eb = 0.0;
    let mut pb = 0.0;
    for j in 0..grid.n_points() {
        eb += 0.5 * (ub[j] * ub[j] + uxb[j] * uxb[j] + utb[j] * utb[j] + potential(ub[j], spec));
        pb -= utb[j] * uxb[j];
    }
    eb *= dx;
    pb *= dx;
    let ee = g * e + nu * p;
    let pe = g * p + nu * e;
    let scale = e.abs().max(f64::MIN_POSITIVE);
    Ok(EinsteinReport {
        nu,
        energy: e,
        momentum: p,
        energy_boosted: eb,
        momentum_boosted: pb,
        energy_expected: ee,
        momentum_expected: pe,
        defect: (eb - ee).abs().max((pb - pe).abs()) / scale,
        invariant_boosted: eb * eb - pb * pb,
        invariant: e * e - p * p,
    })
}

/// Localization `φ(x/R)` with `φ = 1` on `|y| ≤ 1` and `φ = 0` on `|y| ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirialConfig {
    pub radius: f64,
}

impl VirialConfig {
    pub fn new(radius: f64) -> Result<Self, ObservableError> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Self { radius })
        } else {
            Err(ObservableError::BadRadius(radius))
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        smooth_cutoff(x / self.radius)
    }

    /// `(φ(y), φ'(y), φ''(y))` at `y = x/R`.
    pub fn phi_jet(&self, x: f64) -> (f64, f64, f64) {
        smooth_cutoff_jet(x / self.radius)
    }
}

struct Fields {
    u: Vec<f64>,
    ux: Vec<f64>,
    ut: Vec<f64>,
}

impl Fields {
    fn new(state: &PairState) -> Self {
        Self {
            u: state.u.clone(),
            ux: derivative(&state.grid, &state.u),
            ut: state.ut.clone(),
        }
    }
}

/// `V_R = ∫φ(x/R)u_t(u + 2xu_x)`.
pub fn virial(state: &PairState, cfg: &VirialConfig) -> f64 {
    let f = Fields::new(state);
    let g = &state.grid;
    g.dx()
        * (0..g.n_points())
            .map(|j| {
                let x = g.x(j);
                cfg.phi(x) * f.ut[j] * (f.u[j] + 2.0 * x * f.ux[j])
            })
            .sum::<f64>()
}

/// The terms of the analytic `V'_R`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VirialDerivative {
    /// `−2‖u_x‖²`.
    pub kinetic: f64,
    /// `−∫N(u)u`.
    pub nonlinear: f64,
    /// `∫Ñ(u)`.
    pub potential: f64,
    /// The five localization terms, in order: `2∫(1−φ)u_x²`, `∫(1−φ)N(u)u`,
    /// `−∫(1−φ)Ñ(u)`, `(1/2R²)∫φ''u²`, `−∫(x/R)φ'(u_x² − u² − Ñ + u_t²)`.
    pub remainder: [f64; 5],
}

impl VirialDerivative {
    pub fn total(&self) -> f64 {
        self.kinetic + self.nonlinear + self.potential + self.remainder.iter().sum::<f64>()
    }

    /// `Σ|remainder|`, the localization error.
    pub fn remainder_abs(&self) -> f64 {
        self.remainder.iter().map(|r| r.abs()).sum()
    }

    /// `−2‖u_x‖² − (2/3)∫N(u)u`.
    pub fn defocusing_bound(&self) -> f64 {
        self.kinetic + 2.0 / 3.0 * self.nonlinear
    }
}

/// Analytic `V'_R(t)` on the current state.
pub fn virial_derivative(
    state: &PairState,
    cfg: &VirialConfig,
    spec: NonlinearitySpec,
) -> VirialDerivative {
    let f = Fields::new(state);
    let g = &state.grid;
    let r = cfg.radius;
    let mut d = VirialDerivative::default();
    for j in 0..g.n_points() {
        let x = g.x(j);
        let (phi, dphi, ddphi) = cfg.phi_jet(x);
        let (u, ux, ut) = (f.u[j], f.ux[j], f.ut[j]);
        let nu = eval_nonlinearity(u, spec).unwrap_or(f64::NAN) * u;
        let pot = potential(u, spec);
        let out = 1.0 - phi;
        d.kinetic -= 2.0 * ux * ux;
        d.nonlinear -= nu;
        d.potential += pot;
        d.remainder[0] += 2.0 * out * ux * ux;
        d.remainder[1] += out * nu;
        d.remainder[2] -= out * pot;
        d.remainder[3] += ddphi * u * u / (2.0 * r * r);
        d.remainder[4] -= x / r * dphi * (ux * ux - u * u - pot + ut * ut);
    }
    let dx = g.dx();
    d.kinetic *= dx;
    d.nonlinear *= dx;
    d.potential *= dx;
    for v in &mut d.remainder {
        *v *= dx;
    }
    d
}

/// `X_R = ∫xφ(x/R)e_u`.
pub fn center(state: &PairState, cfg: &VirialConfig, spec: NonlinearitySpec) -> f64 {
    let g = &state.grid;
    let e = energy_density(state, spec);
    g.dx() * (0..g.n_points()).map(|j| g.x(j) * cfg.phi(g.x(j)) * e[j]).sum::<f64>()
}

/// Analytic `dX_R/dt = −∫(φ(x/R) + (x/R)φ'(x/R)) u_x u_t`.
pub fn center_rate(state: &PairState, cfg: &VirialConfig) -> f64 {
    let f = Fields::new(state);
    let g = &state.grid;
    -g.dx()
        * (0..g.n_points())
            .map(|j| {
                let x = g.x(j);
                let (phi, dphi, _) = cfg.phi_jet(x);
                (phi + x / cfg.radius * dphi) * f.ux[j] * f.ut[j]
            })
            .sum::<f64>()
}

/// `∫xe_u / ∫e_u`.
pub fn energy_centroid(state: &PairState, spec: NonlinearitySpec) -> f64 {
    let g = &state.grid;
    let e = energy_density(state, spec);
    let total: f64 = e.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    (0..g.n_points()).map(|j| g.x(j) * e[j]).sum::<f64>() / total
}

/// `∫_{|x − c| ≥ ρ} e_u`.
pub fn exterior_energy(state: &PairState, spec: NonlinearitySpec, c: f64, rho: f64) -> f64 {
    let g = &state.grid;
    let e = energy_density(state, spec);
    g.dx()
        * (0..g.n_points())
            .filter(|&j| (g.x(j) - c).abs() >= rho)
            .map(|j| e[j])
            .sum::<f64>()
}

/// Constant `c` in `|dX_R/dt − P| ≤ c∫_{|x|≥R} e_u`: the maximum of
/// `(1 − φ(y)) + |y||φ'(y)|` over `|y| ≥ 1`, taken over a fine sample of
/// `[1, 2]` together with the grid points, so the discrete bound is exact.
pub fn center_bound_constant(grid: &GridSpec, cfg: &VirialConfig) -> f64 {
    let weight = |y: f64| {
        let (phi, dphi, _) = smooth_cutoff_jet(y);
        (1.0 - phi) + y.abs() * dphi.abs()
    };
    let fine = (0..=20_000).map(|i| weight(1.0 + i as f64 / 20_000.0));
    let on_grid = (0..grid.n_points())
        .map(|j| grid.x(j) / cfg.radius)
        .filter(|y| y.abs() >= 1.0)
        .map(weight);
    fine.chain(on_grid).fold(1.0, f64::max)
}

/// Centre-functional monitors at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterSample {
    pub t: f64,
    pub x_r: f64,
    pub rate: f64,
    pub momentum: f64,
    pub centroid: f64,
    /// Energy outside `|x − x_c| ≥ R − |x_c|`, which contains `|x| ≥ R`.
    pub eta: f64,
    /// `|P| + cη`.
    pub bound: f64,
}

pub fn center_sample(
    state: &PairState,
    cfg: &VirialConfig,
    spec: NonlinearitySpec,
    c: f64,
) -> CenterSample {
    let centroid = energy_centroid(state, spec);
    let rho = (cfg.radius - centroid.abs()).max(0.0);
    let eta = exterior_energy(state, spec, centroid, rho);
    let p = momentum(state);
    CenterSample {
        t: state.t,
        x_r: center(state, cfg, spec),
        rate: center_rate(state, cfg),
        momentum: p,
        centroid,
        eta,
        bound: p.abs() + c * eta,
    }
}

/// `X_R` monitors over a trajectory.
pub fn center_series(traj: &Trajectory, cfg: &VirialConfig) -> Vec<CenterSample> {
    let c = center_bound_constant(traj.grid(), cfg);
    traj.snapshots
        .iter()
        .map(|s| center_sample(s, cfg, traj.nonlinearity, c))
        .collect()
}

/// `(t, V_R, V'_R)` over a trajectory.
pub fn virial_series(traj: &Trajectory, cfg: &VirialConfig) -> Vec<(f64, f64, VirialDerivative)> {
    traj.snapshots
        .iter()
        .map(|s| (s.t, virial(s, cfg), virial_derivative(s, cfg, traj.nonlinearity)))
        .collect()
}

/// Time series written by the CLI.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub linf: Vec<f64>,
    pub h1: Vec<f64>,
    pub s6_cumulative: Vec<f64>,
    pub v_r: Vec<f64>,
    pub x_r: Vec<f64>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn from_trajectory(traj: &Trajectory, s: f64, virial_cfg: &VirialConfig) -> Self {
        let mut b = SeriesBuilder::new(traj.nonlinearity, s, *virial_cfg);
        for snap in &traj.snapshots {
            b.push(snap);
        }
        b.finish()
    }
}

/// Incremental [`ObservableSeries`] for streaming evolutions.
#[derive(Debug, Clone)]
pub struct SeriesBuilder {
    spec: NonlinearitySpec,
    s: f64,
    virial: VirialConfig,
    s6: TrapezoidAccumulator,
    series: ObservableSeries,
}

impl SeriesBuilder {
    pub fn new(spec: NonlinearitySpec, s: f64, virial: VirialConfig) -> Self {
        Self {
            spec,
            s,
            virial,
            s6: TrapezoidAccumulator::new(),
            series: ObservableSeries::default(),
        }
    }

    pub fn push(&mut self, state: &PairState) {
        let r = &mut self.series;
        r.times.push(state.t);
        r.energy.push(energy(state, self.spec));
        r.mass.push(mass_real(&state.grid, &state.u));
        r.momentum.push(momentum(state));
        r.linf.push(state.linf());
        r.h1.push(h1(state));
        let sixth = self.s6.push(state.t, weighted_sixth_power(&state.grid, &state.u, self.s));
        r.s6_cumulative.push(sixth.powf(1.0 / 6.0));
        r.v_r.push(virial(state, &self.virial));
        r.x_r.push(center(state, &self.virial, self.spec));
    }

    pub fn finish(self) -> ObservableSeries {
        self.series
    }
}

/// `Q(x) = 3^{1/4}/√cosh(2x)`.
pub fn ground_state_profile(x: f64) -> f64 {
    3f64.powf(0.25) / (2.0 * x).cosh().sqrt()
}

/// `Q'(x)`.
pub fn ground_state_derivative(x: f64) -> f64 {
    -3f64.powf(0.25) * (2.0 * x).sinh() / (2.0 * x).cosh().powf(1.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub values: Vec<f64>,
    /// `max|Q'' + Q⁵ − Q|` with `Q''` computed spectrally.
    pub residual: f64,
}

/// Samples of `Q` on the grid and the spectral residual of `Q'' + Q⁵ = Q`.
/// Needs `L ≳ 20` for the periodic wrap to stay small.
pub fn ground_state(grid: &GridSpec) -> GroundState {
    let values: Vec<f64> = grid.xs().iter().map(|&x| ground_state_profile(x)).collect();
    let q2 = crate::spectral::second_derivative(grid, &values);
    let residual = values
        .iter()
        .zip(&q2)
        .map(|(q, d)| (d + q.powi(5) - q).abs())
        .fold(0.0, f64::max);
    GroundState { values, residual }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cos5Report {
    /// Over 10⁴ sampled θ of `cos⁵θ − (10cosθ + 5cos3θ + cos5θ)/16`.
    pub real_defect: f64,
    /// Relative defect of `(Re z)⁵ = (10|z|⁴Re z + 5|z|²Re z³ + Re z⁵)/16`.
    pub complex_defect: f64,
}

pub fn cos5_complex_sides(z: C64) -> (f64, f64) {
    let m = z.norm_sqr();
    let lhs = z.re.powi(5);
    let rhs = (10.0 * m * m * z.re + 5.0 * m * z.powi(3).re + z.powi(5).re) / 16.0;
    (lhs, rhs)
}

pub fn cos5_identity_check() -> Cos5Report {
    let samples = 10_000;
    let mut real_defect = 0.0f64;
    let mut complex_defect = 0.0f64;
    for i in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
        let lhs = theta.cos().powi(5);
        let rhs = (10.0 * theta.cos() + 5.0 * (3.0 * theta).cos() + (5.0 * theta).cos()) / 16.0;
        real_defect = real_defect.max((lhs - rhs).abs());
        let r = 0.5 + 1.5 * (i % 97) as f64 / 96.0;
        let (a, b) = cos5_complex_sides(C64::from_polar(r, theta));
        complex_defect = complex_defect.max((a - b).abs() / r.powi(5));
    }
    Cos5Report {
        real_defect,
        complex_defect,
    }
}

/// Trapezoid rule on `[−a, a]` with step `h`; for analytic integrands decaying
/// like `sech` this converges geometrically.
fn line_integral(f: impl Fn(f64) -> f64, a: f64, h: f64) -> f64 {
    let n = (2.0 * a / h).round() as i64;
    let h = 2.0 * a / n as f64;
    h * (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(-a + i as f64 * h)
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsThresholds {
    /// `M(Q)`.
    pub mass_q: f64,
    /// `√2 M(Q)` = `M(∜2 Q)`.
    pub sqrt2_mass_q: f64,
    /// `(4/√5) M(Q)`.
    pub mass_wq: f64,
    /// `M(w_Q)` from direct quadrature of `2(2/5)^{1/4} Q(√2x)`.
    pub mass_wq_direct: f64,
    /// `E(∜2 Q, 0)` for the focusing quintic.
    pub static_energy: f64,
}

pub fn nls_thresholds() -> NlsThresholds {
    let (a, h) = (40.0, 1e-3);
    let mass_q = line_integral(|x| ground_state_profile(x).powi(2), a, h);
    let amp = 2.0 * 0.4f64.powf(0.25);
    let mass_wq_direct = line_integral(
        |x| (amp * ground_state_profile(std::f64::consts::SQRT_2 * x)).powi(2),
        a,
        h,
    );
    let c = 2f64.powf(0.25);
    let static_energy = line_integral(
        |x| {
            let (q, dq) = (c * ground_state_profile(x), c * ground_state_derivative(x));
            0.5 * dq * dq + 0.5 * q * q - q.powi(6) / 12.0
        },
        a,
        h,
    );
    NlsThresholds {
        mass_q,
        sqrt2_mass_q: std::f64::consts::SQRT_2 * mass_q,
        mass_wq: 4.0 / 5f64.sqrt() * mass_q,
        mass_wq_direct,
        static_energy,
    }
}
