//! Numerical laboratory for KPZ fluctuations on a torus of size L.
//!
//! * [`bridges`]: exact grid sampling of scalar, correlated and planar
//!   Brownian bridges, and exponential path integrals.
//! * [`sigma`]: Monte Carlo estimates of the diffusion constant σ_L² and
//!   power-law exponent fits.
//! * [`wedge`]: modified Bessel functions, the heat kernel of planar
//!   Brownian motion killed on a 2π/3 wedge, and conditioned path sampling.
//! * [`harmonic`]: the hitting law of the wedge boundary via z ↦ z^{3/2}.
//! * [`she`]: the stochastic heat equation on the torus and the variance
//!   identities around it.

pub mod bridges;
pub mod error;
pub mod harmonic;
pub mod quadrature;
pub mod rng;
pub mod she;
pub mod sigma;
pub mod stats;
pub mod wedge;

pub use error::{Error, Result};
