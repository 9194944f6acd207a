//! Numerical laboratory for the oscillatory hypersingular operator
//!
//! ℛf(x) = ∫ f(x − (t, φ(|t|))) e^{−2πi|t|^{−β}} Ω(t/|t|) |t|^{−α−n} dt
//!
//! along the radial hypersurface t ↦ (t, φ(|t|)): its Fourier multiplier,
//! split into dyadic pieces, the phase estimates behind its boundedness, and
//! its action on grid functions.

pub mod bumps;
pub mod error;
pub mod kernel;
pub mod multiplier;
pub mod operator;
pub mod params;
pub mod phase;
pub mod profiles;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use kernel::KernelOmega;
pub use params::OperatorParams;
pub use phase::Frequency;
pub use profiles::RadialProfile;
