//! Monte Carlo laboratory for Wigner real symmetric random matrices with
//! heavy-tailed entries.
//!
//! The crate samples matrices whose entry magnitudes have a regularly
//! varying tail `h(x)/x^alpha`, `0 < alpha < 2`, and verifies at desk scale
//! the limit behavior of the top of the spectrum: the Frechet law for the
//! largest normalized eigenvalue, Poisson statistics for the extreme
//! eigenvalues, and the matching between the top eigenvalues and the entry
//! order statistics. An exploratory solver for the Cizeau-Bouchaud bulk
//! density equations is included.
//!
//! Core math is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); concrete `f64` aliases live at the crate root.

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod limit_laws;
pub mod scalar;
pub mod spectral;
pub mod stable_cb;
pub mod tail_laws;
pub mod tridiag;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete `f64` aliases; the default precision used by the CLI and the
/// experiment harness.
pub type TailLaw64 = tail_laws::TailLaw<f64>;
pub type WignerSample64 = ensemble::WignerSample<f64>;
pub type OrderStats64 = ensemble::OrderStats<f64>;
pub type SpectralSummary64 = spectral::SpectralSummary<f64>;
pub type Interval64 = limit_laws::Interval<f64>;
pub type FrechetLaw64 = limit_laws::FrechetLaw<f64>;
pub type StableParams64 = stable_cb::StableParams<f64>;
pub type CbSolution64 = stable_cb::CbSolution<f64>;

/// Single-precision aliases for quick exploratory runs.
pub type TailLaw32 = tail_laws::TailLaw<f32>;
pub type WignerSample32 = ensemble::WignerSample<f32>;
