//! Factor birth/death move.
//!
//! Per-element support updates cannot activate a column whose only active
//! entry would be the row being updated: the IBP conditional prior odds
//! vanish there. Factors private to one row ("singletons" of row `d`) are
//! therefore resampled as a block by a Metropolis-Hastings move, with the
//! new factors' activation rows integrated out.
//!
//! Given `kappa` proposed singleton loadings `g` for row `d` and the
//! singleton-free row residual `E0_d`, the collapsed likelihood ratio
//! against having no singletons is
//!
//! ```text
//! M = psi_d^-1 g g' + I
//! log a_l = -N/2 log|M| + 1/2 sum_n m_n' M m_n,
//! m_n = M^-1 psi_d^-1 g e0_dn
//! ```
//!
//! which reduces (Sherman-Morrison) to a function of `|g|^2` and
//! `sum_n e0_dn^2` only; the matrix form is kept because its Cholesky
//! factor also instantiates the accepted activation rows
//! `x_n ~ N(m_n, M^-1)`.
//!
//! The number of singletons has conditional prior `Poisson(alpha / D)`
//! (send `K -> inf` in the finite beta-Bernoulli model: a fresh column
//! activates at row `d` with probability `(alpha/K) / (alpha/K + D)`, and
//! `K` of them give the Poisson limit). The proposal draws `kappa` from a
//! spiked Poisson mixture, and the move is an independence sampler over
//! the whole singleton block: the current `j` singletons are the reverse
//! proposal's target, so rejection keeps them. With the pure prior
//! proposal (`pi_spike = 0`, `lambda_mult = 1`) every proposal-correction
//! factor cancels and the acceptance ratio is exactly the likelihood
//! ratio.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{log_poisson_pmf, log_sum_exp};

/// Tunables of the singleton-count proposal
/// `J(kappa) = (1 - pi_spike) Poisson(kappa; lambda_mult * gamma_rate)
///  + pi_spike * 1(kappa = 1)`.
#[derive(Debug, Clone, Copy)]
pub struct BirthProposalParams {
    /// Mass spiked onto `kappa = 1`.
    pub pi_spike: f64,
    /// Rate multiplier of the Poisson component.
    pub lambda_mult: f64,
    /// Conditional prior rate `alpha / D`; also the Poisson component's
    /// base rate, so the proposal equals the prior when `pi_spike = 0`
    /// and `lambda_mult = 1`.
    pub gamma_rate: f64,
}

impl BirthProposalParams {
    pub fn new(pi_spike: f64, lambda_mult: f64, gamma_rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&pi_spike) {
            return Err(Error::domain(format!(
                "pi_spike must lie in [0, 1), got {pi_spike}"
            )));
        }
        if !(lambda_mult > 0.0) || !(gamma_rate > 0.0) {
            return Err(Error::domain(
                "lambda_mult and gamma_rate must be positive",
            ));
        }
        Ok(Self {
            pi_spike,
            lambda_mult,
            gamma_rate,
        })
    }

    /// Log mass `log J(kappa)` of the mixture proposal.
    pub fn log_proposal_mass(&self, kappa: usize) -> f64 {
        let pois = log_poisson_pmf(kappa, self.lambda_mult * self.gamma_rate);
        if self.pi_spike == 0.0 {
            return pois;
        }
        let base = (1.0 - self.pi_spike).ln() + pois;
        if kappa == 1 {
            log_sum_exp(base, self.pi_spike.ln())
        } else {
            base
        }
    }

    /// Draw a singleton count and return it with its log proposal mass.
    pub fn propose_kappa<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let u: f64 = rng.random();
        let kappa = if u < self.pi_spike {
            1
        } else {
            let pois = rand_distr::Poisson::new(self.lambda_mult * self.gamma_rate)
                .expect("positive rate");
            rng.sample(pois) as usize
        };
        (kappa, self.log_proposal_mass(kappa))
    }
}

/// Matrix workspace of the collapsed singleton likelihood: the posterior
/// precision `M = psi_d^-1 g g' + I` of the integrated activation rows,
/// its Cholesky factor, and derived quantities.
#[derive(Debug, Clone)]
pub struct MhWorkspace {
    /// Proposed (or current) singleton loadings for the row.
    pub g: DVector<f64>,
    /// `M = psi_d^-1 g g' + I`, positive definite by construction.
    pub m: DMatrix<f64>,
    /// Lower Cholesky factor of `M`.
    l: DMatrix<f64>,
    pub log_det_m: f64,
    /// `M^-1 g`.
    w: DVector<f64>,
    psi_inv: f64,
}

impl MhWorkspace {
    pub fn new(g: DVector<f64>, psi_inv: f64) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::domain("workspace needs at least one loading"));
        }
        if !(psi_inv > 0.0) || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("workspace inputs must be finite, psi_inv positive"));
        }
        let kappa = g.len();
        let mut m = DMatrix::identity(kappa, kappa);
        for i in 0..kappa {
            for j in 0..kappa {
                m[(i, j)] += psi_inv * g[i] * g[j];
            }
        }
        let chol: nalgebra::Cholesky<f64, nalgebra::Dyn> = nalgebra::Cholesky::new(m.clone())
            .ok_or_else(|| Error::state("singleton precision matrix not positive definite"))?;
        let l = chol.unpack();
        let log_det_m = 2.0 * (0..kappa).map(|i| l[(i, i)].ln()).sum::<f64>();
        let y = l
            .solve_lower_triangular(&g)
            .ok_or_else(|| Error::state("singular Cholesky factor"))?;
        let w = l
            .tr_solve_lower_triangular(&y)
            .ok_or_else(|| Error::state("singular Cholesky factor"))?;
        Ok(Self {
            g,
            m,
            l,
            log_det_m,
            w,
            psi_inv,
        })
    }

    /// Collapsed log likelihood ratio of these singletons against none,
    /// from the singleton-free residual row's sum of squares.
    pub fn log_lik_ratio(&self, resid0_sum_sq: f64, n: usize) -> f64 {
        // sum_n m_n' M m_n = psi^-2 (g' M^-1 g) sum_n e0_dn^2
        let quad = self.psi_inv * self.psi_inv * self.g.dot(&self.w);
        -0.5 * n as f64 * self.log_det_m + 0.5 * quad * resid0_sum_sq
    }

    /// Draw activation rows for the singleton block: column `n` is
    /// `N(m_n, M^-1)` with `m_n = M^-1 psi_d^-1 g e0_dn`. Returns a
    /// `kappa x N` matrix.
    pub fn instantiate_x<R: Rng + ?Sized>(
        &self,
        resid0_row: &[f64],
        rng: &mut R,
    ) -> DMatrix<f64> {
        let kappa = self.g.len();
        let n = resid0_row.len();
        let mut out = DMatrix::zeros(kappa, n);
        for nn in 0..n {
            let z = DVector::from_fn(kappa, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = self
                .l
                .tr_solve_lower_triangular(&z)
                .expect("Cholesky factor is nonsingular");
            let scale = self.psi_inv * resid0_row[nn];
            for i in 0..kappa {
                out[(i, nn)] = self.w[i] * scale + noise[i];
            }
        }
        out
    }
}

/// Log acceptance ratio of replacing `kappa_old` current singletons
/// (loadings summarized by `log_lik_old`) with `kappa_new` proposed ones.
///
/// `gamma_rate` is the conditional prior rate `alpha / D`; `log_j_*` are
/// the proposal masses of the two counts. Loading and precision prior
/// terms cancel against the proposal, activation rows are integrated out.
#[allow(clippy::too_many_arguments)]
pub fn birth_acceptance_log_ratio(
    kappa_new: usize,
    log_lik_new: f64,
    log_j_new: f64,
    kappa_old: usize,
    log_lik_old: f64,
    log_j_old: f64,
    gamma_rate: f64,
) -> f64 {
    let target_new = log_poisson_pmf(kappa_new, gamma_rate) + log_lik_new;
    let target_old = log_poisson_pmf(kappa_old, gamma_rate) + log_lik_old;
    (target_new - log_j_new) - (target_old - log_j_old)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn proposal_mass_sums_to_one() {
        let params = BirthProposalParams::new(0.1, 2.0, 0.4).unwrap();
        let total: f64 = (0..60).map(|k| params.log_proposal_mass(k).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prior_proposal_cancels_exactly() {
        // pi_spike = 0, lambda_mult = 1: J == prior, acceptance is the
        // pure likelihood ratio for every kappa.
        let gamma = 0.07;
        let params = BirthProposalParams::new(0.0, 1.0, gamma).unwrap();
        for kappa in 0..6 {
            let log_j = params.log_proposal_mass(kappa);
            let a = birth_acceptance_log_ratio(kappa, -1.25, log_j, 0, 0.0, params.log_proposal_mass(0), gamma);
            assert!((a - (-1.25)).abs() < 1e-12, "kappa {kappa}");
        }
    }

    #[test]
    fn spiked_proposal_mass_matches_empirical_frequency() {
        // pi = 0.1, lambda * gamma = 0.05: P(kappa = 1) ~ 0.1 + 0.9 * Poisson(1; 0.05).
        let params = BirthProposalParams::new(0.1, 1.0, 0.05).unwrap();
        let expect = 0.1 + 0.9 * (0.05f64 * (-0.05f64).exp());
        assert!((params.log_proposal_mass(1).exp() - expect).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let reps = 1_000_000;
        let mut count = 0usize;
        for _ in 0..reps {
            if params.propose_kappa(&mut rng).0 == 1 {
                count += 1;
            }
        }
        let freq = count as f64 / reps as f64;
        let se = (expect * (1.0 - expect) / reps as f64).sqrt();
        assert!(
            (freq - expect).abs() < 3.0 * se,
            "freq {freq}, expect {expect}, se {se}"
        );
    }

    #[test]
    fn workspace_matches_rank_one_identities() {
        // |M| = 1 + psi_inv |g|^2 and M^-1 g = g / (1 + psi_inv |g|^2)
        // regardless of kappa.
        let g = DVector::from_vec(vec![0.6, -1.2, 0.3]);
        let psi_inv = 2.5;
        let ws = MhWorkspace::new(g.clone(), psi_inv).unwrap();
        let gg = g.dot(&g);
        assert!((ws.log_det_m - (1.0 + psi_inv * gg).ln()).abs() < 1e-12);
        let shrink = 1.0 / (1.0 + psi_inv * gg);
        for i in 0..3 {
            assert!((ws.w[i] - g[i] * shrink).abs() < 1e-12);
        }
    }

    #[test]
    fn instantiated_rows_have_posterior_mean() {
        // Mean of many instantiations approaches m_n = M^-1 psi g e0_n.
        let g = DVector::from_vec(vec![1.0, 0.5]);
        let psi_inv = 4.0;
        let ws = MhWorkspace::new(g.clone(), psi_inv).unwrap();
        let resid0 = [2.0, -1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reps = 40_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..reps {
            acc += ws.instantiate_x(&resid0, &mut rng);
        }
        acc /= reps as f64;
        let shrink = 1.0 / (1.0 + psi_inv * g.dot(&g));
        for n in 0..2 {
            for i in 0..2 {
                let expect = g[i] * shrink * psi_inv * resid0[n];
                assert!(
                    (acc[(i, n)] - expect).abs() < 0.02,
                    "entry ({i}, {n}): {} vs {expect}",
                    acc[(i, n)]
                );
            }
        }
    }
}
