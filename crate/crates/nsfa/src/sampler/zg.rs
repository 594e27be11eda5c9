//! Collapsed per-element update of the support and loading matrices.
//!
//! For one entry `(d, k)` the loading `g_dk` is integrated out of the
//! Bernoulli decision. With `E0` the residual of row `d` computed at
//! `g_dk = 0`:
//!
//! ```text
//! lambda_post = psi_d^-1 (X_k . X_k) + lambda_prior
//! mu          = psi_d^-1 (X_k . E0_d) / lambda_post
//! log LR      = 1/2 log(lambda_prior / lambda_post) + 1/2 lambda_post mu^2
//! ```
//!
//! where `log LR` is the marginal likelihood ratio of `z_dk = 1` against
//! `z_dk = 0`. The posterior odds add the variant's prior odds; on
//! activation the loading is redrawn as `g_dk ~ N(mu, 1/lambda_post)`.
//! One element costs `O(N)`: two dot products against row `k` of `X`,
//! one of which is a cached sum of squares.

/// Collapsed posterior quantities for a single loading.
#[derive(Debug, Clone, Copy)]
pub struct ElementPosterior {
    /// Marginal log likelihood ratio of active against inactive.
    pub log_lik_ratio: f64,
    /// Posterior mean of the loading under activation.
    pub mu: f64,
    /// Posterior precision of the loading under activation.
    pub lambda_post: f64,
}

/// Evaluate the collapsed element posterior from sufficient statistics:
/// `x_ss = X_k . X_k` and `x_dot_resid0 = X_k . E0_d` with the residual
/// taken at `g_dk = 0`.
pub fn collapsed_element(
    psi_inv_d: f64,
    lambda_prior: f64,
    x_ss: f64,
    x_dot_resid0: f64,
) -> ElementPosterior {
    let lambda_post = psi_inv_d * x_ss + lambda_prior;
    let mu = psi_inv_d * x_dot_resid0 / lambda_post;
    let log_lik_ratio =
        0.5 * (lambda_prior.ln() - lambda_post.ln()) + 0.5 * lambda_post * mu * mu;
    ElementPosterior {
        log_lik_ratio,
        mu,
        lambda_post,
    }
}
