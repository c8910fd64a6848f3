//! Monte Carlo and quadrature machinery for second- and fourth-moment
//! questions about random vectors uniformly distributed on hyperplane
//! projections of `ℓ_p^n` balls and on Steiner symmetrizations of those balls.

pub mod error;
pub mod linalg;
pub mod oracle_quad;
pub mod orlicz;
pub mod permavg;
pub mod projest;
pub mod quad;
pub mod sampling;
pub mod specfun;
pub mod stats;
pub mod steiner;
pub mod weights;
pub mod windows;

pub use error::{Error, Result};
pub use specfun::PExponent;
