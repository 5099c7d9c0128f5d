//! Pseudospectral laboratory for the 1D nonlinear Klein–Gordon equation
//! `u_tt − u_xx + u + N(u) = 0` with exponential and quintic nonlinearities.
//!
//! Modules, bottom-up:
//! - [`spectral`]: periodic grid, FFT, Fourier multipliers, Littlewood–Paley
//!   projections, norms.
//! - [`symmetry`]: translations, Lorentz boosts, scaling, free propagators.
//! - [`dynamics`]: Strang-split Klein–Gordon and NLS steppers.
//! - [`observables`]: energy, momentum, spacetime norms, scattering and
//!   virial monitors, ground-state utilities.
//! - [`experiments`]: scripted scenario runners producing reports.

/// Crate version, echoed in report summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod dynamics;
pub mod experiments;
pub mod observables;
pub mod spectral;
pub mod symmetry;

pub use dynamics::{
    evolve, evolve_observed, evolve_symmetric, from_first_order, kg_step, nls_step,
    to_first_order, BlowupEvent, Dealias, EvolutionConfig, NlsSign, NonlinearitySpec,
    PairState, Trajectory,
};
pub use experiments::ExperimentReport;
pub use observables::{energy, mass, momentum, ObservableSeries, VirialConfig};
pub use spectral::{GridSpec, SpectralField, C64};
