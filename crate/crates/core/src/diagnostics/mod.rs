//! Sample-based and closed-form diagnostics.
//!
//! - [`moments`]: squared error of the mean and relative scatter error.
//! - [`transport`]: Sinkhorn and exact discrete optimal transport.
//! - [`gaussian`]: closed-form divergences between Gaussians.
//! - [`inequalities`]: quadrature checks of functional inequalities on 1-D
//!   grids.

pub mod gaussian;
pub mod inequalities;
pub mod moments;
pub mod transport;

pub use gaussian::{gaussian_divergences, GaussianDivergences, GaussianParams};
pub use moments::{mean_error, scatter_error, ScatterFamily};
pub use transport::{exact_w2_discrete, sinkhorn_distance, SinkhornSettings};
