//! Stored-energy statistics of a wireless-powered node that transmits at a
//! fixed power whenever its buffer holds more than one draw.
//!
//! The crate provides the limiting distribution of the buffer content
//! (infinite buffer, exact and approximate finite buffer), the resulting
//! link metrics, and a seeded Monte Carlo simulator of the same chain that
//! serves as a cross-check.
//!
//! Closed forms are generic over [`Scalar`]; `f64` and the quad-precision
//! [`Wide`] are provided. Large finite buffers need [`Wide`]: their sums
//! alternate in sign and cancel well past what `f64` can hold.

pub mod dist;
pub mod error;
pub mod perf;
pub mod quad;
pub mod scalar;
pub mod sim;
pub mod special;
pub mod storage;
pub mod validate;

pub use dist::{
    approx_error, asymptotic_infinite_limit_check, finite_approx, finite_exact, infinite_pdf, integral_residual,
    FiniteApproxDist, FiniteExactDist, InfiniteBufferDist, LimitingDistribution,
};
pub use error::{Error, Result};
pub use perf::{aer, channel_outage, metrics, optimal_delta, total_outage, LinkParams, Metrics, Optimum, OutageModel};
pub use scalar::{Scalar, Wide};
pub use sim::{distribution_distance, simulate, Distance, ErrorCounting, Estimate, Histogram, SimConfig, SimResult};
pub use special::{gaussian_q, lambert_w, r_series, upper_incomplete_gamma_int, BranchIndex};
pub use storage::{step, BufferSize, BufferSpec, EffectiveParams, EhProfile, Imperfections, Policy};

/// Everyday scalar.
pub type Real = f64;

pub type InfiniteDist = InfiniteBufferDist<Real>;
pub type ExactDist = FiniteExactDist<Real>;
pub type ApproxDist = FiniteApproxDist<Real>;
pub type WideExactDist = FiniteExactDist<Wide>;
pub type WideApproxDist = FiniteApproxDist<Wide>;
