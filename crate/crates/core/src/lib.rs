//! Probability that a MIMO-OFDM receiver misses a transmitted preamble.
//!
//! After matched filtering and an inverse transform the receiver sees the
//! channel taps plus noise in the first `L_h` positions and noise alone in
//! the remaining `L_p - L_h`. The preamble is erased when the strongest
//! noise-only tap is at least as strong as the strongest channel tap. The
//! crate evaluates that probability in closed form, by quadrature and by
//! simulating the baseband link.

pub mod analytic;
pub mod baseband;
pub mod error;
pub mod experiments;
pub mod model;
pub mod monte_carlo;
pub mod precision;
pub mod transform;

pub use analytic::{ErasureEstimate, Method, QuadratureSpec, TailPair};
pub use error::{Error, Result};
pub use model::{derive_variances, SystemConfig, VarianceSet};
