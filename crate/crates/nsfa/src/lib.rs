//! Nonparametric sparse factor analysis.
//!
//! Observed data `Y` (`D` dimensions by `N` samples) is modeled as
//!
//! ```text
//! Y = G X + E
//! ```
//!
//! where `G` is a `D x K` sparse loading matrix, `X` a `K x N` factor
//! activation matrix with standard normal entries, and `E` Gaussian noise
//! with diagonal covariance. Sparsity in `G` comes from a spike-and-slab
//! prior: a binary support matrix `Z` with an Indian buffet process prior
//! decides which loadings are exactly zero, and slab entries are Gaussian
//! with per-factor (or shared, or per-element) ARD precisions.
//!
//! Because the IBP places mass on binary matrices with unbounded column
//! count, the number of active factors `K` is inferred rather than fixed.
//! Inference is a collapsed Gibbs sweep over `Z` and `G` with a
//! Metropolis-Hastings move that creates and retires factors, plus
//! conjugate updates for `X`, the precisions, and the IBP concentration.
//!
//! Finite-`K` baselines (dense FA, ARD FA, finite sparse FA, per-element
//! sparsity) share the same sweep machinery and are selected by name
//! through [`variants`].
//!
//! Modules:
//! - [`model`]: observation container, residual cache, hyperparameters
//! - [`ibp`]: the IBP prior itself (densities, draws, concentration update)
//! - [`sampler`]: the Gibbs/MH kernel and chain driver
//! - [`variants`]: the strategy registry mapping variant names to behavior
//! - [`eval`]: synthetic data, recovery metrics, held-out likelihood
//! - [`io`]: CSV matrix/trace formats shared by the CLI and tests

pub mod error;
pub mod eval;
pub mod ibp;
pub mod io;
pub mod math;
pub mod model;
pub mod sampler;
pub mod variants;

pub use error::{Error, Result};
