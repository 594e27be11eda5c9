//! Conjugate block updates: activation columns, loading precisions,
//! noise precisions, and the optional hyperprior rate refreshes.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::{Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{FeatureState, HyperParams, LoadingPrecisions, ObservationMatrix, ResidualCache};

/// Shared posterior of every activation column: all columns have the same
/// precision `Lambda = G' Psi^-1 G + I`, factored once per sweep.
pub struct XPosterior {
    chol: Cholesky<f64, nalgebra::Dyn>,
    /// `G' Psi^-1`, applied to each data column to form the mean.
    gt_psi_inv: DMatrix<f64>,
}

impl XPosterior {
    pub fn new(g: &DMatrix<f64>, psi_inv: &DVector<f64>) -> Result<Self> {
        let (dim, k) = g.shape();
        if psi_inv.len() != dim {
            return Err(Error::shape("noise precision length != data dimension"));
        }
        let mut gt_psi_inv = g.transpose();
        for d in 0..dim {
            let col = psi_inv[d];
            gt_psi_inv.column_mut(d).scale_mut(col);
        }
        let mut lambda = &gt_psi_inv * g;
        for i in 0..k {
            lambda[(i, i)] += 1.0;
        }
        let chol = Cholesky::new(lambda)
            .ok_or_else(|| Error::state("activation posterior precision not positive definite"))?;
        Ok(Self { chol, gt_psi_inv })
    }

    /// Posterior mean of the activation column for data column `y_n`.
    pub fn mean(&self, y_n: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(&(&self.gt_psi_inv * y_n))
    }

    /// Posterior covariance, shared by every column.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Draw one activation column: `mean + L^-T z`.
    pub fn sample<R: Rng + ?Sized>(&self, y_n: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let k = self.gt_psi_inv.nrows();
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = self
            .chol
            .l()
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor is nonsingular");
        self.mean(y_n) + noise
    }
}

/// Resample every activation column jointly given `G` and the noise, and
/// refresh the residual cache columns in place.
pub fn sample_x_columns<R: Rng + ?Sized>(
    data: &ObservationMatrix,
    state: &mut FeatureState,
    psi_inv: &DVector<f64>,
    resid: &mut ResidualCache,
    rng: &mut R,
) -> Result<()> {
    if state.k_active() == 0 {
        return Ok(());
    }
    let post = XPosterior::new(&state.g, psi_inv)?;
    let n = state.samples();
    for nn in 0..n {
        let y_n = data.values().column(nn).into_owned();
        let x_n = post.sample(&y_n, rng);
        state.x.column_mut(nn).copy_from(&x_n);
    }
    resid.recompute(data, state)
}

/// Resample the loading precisions given `G` and the support. Active
/// loadings contribute `1/2` per entry to the shape and half their square
/// to the rate; structures without data (empty columns, inactive entries)
/// fall back to the prior.
pub fn sample_loading_precisions<R: Rng + ?Sized>(
    state: &mut FeatureState,
    c: f64,
    d: f64,
    rng: &mut R,
) -> Result<()> {
    let (dim, k) = state.g.shape();
    match &mut state.precisions {
        LoadingPrecisions::Shared(lambda) => {
            let mut count = 0usize;
            let mut sum_sq = 0.0;
            for kk in 0..k {
                for dd in 0..dim {
                    if state.z[(dd, kk)] == 1 {
                        count += 1;
                        sum_sq += state.g[(dd, kk)].powi(2);
                    }
                }
            }
            *lambda = draw_gamma(c + 0.5 * count as f64, d + 0.5 * sum_sq, rng)?;
        }
        LoadingPrecisions::PerFactor(lambdas) => {
            for kk in 0..k {
                let mut sum_sq = 0.0;
                for dd in 0..dim {
                    if state.z[(dd, kk)] == 1 {
                        sum_sq += state.g[(dd, kk)].powi(2);
                    }
                }
                lambdas[kk] = draw_gamma(c + 0.5 * state.m[kk] as f64, d + 0.5 * sum_sq, rng)?;
            }
        }
        LoadingPrecisions::PerElement(lambdas) => {
            for kk in 0..k {
                for dd in 0..dim {
                    let (shape, rate) = if state.z[(dd, kk)] == 1 {
                        (c + 0.5, d + 0.5 * state.g[(dd, kk)].powi(2))
                    } else {
                        (c, d)
                    };
                    lambdas[(dd, kk)] = draw_gamma(shape, rate, rng)?;
                }
            }
        }
    }
    Ok(())
}

/// Resample the loading precision rate `d | lambda ~ Gamma(c0 + c * count,
/// d0 + sum lambda)` where `count` is the number of precision variables.
pub fn sample_precision_rate<R: Rng + ?Sized>(
    precisions: &LoadingPrecisions,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<f64> {
    let (count, sum) = match precisions {
        LoadingPrecisions::Shared(l) => (1usize, *l),
        LoadingPrecisions::PerFactor(ls) => (ls.len(), ls.sum()),
        LoadingPrecisions::PerElement(ls) => (ls.len(), ls.sum()),
    };
    draw_gamma(hyper.c0 + hyper.c * count as f64, hyper.d0 + sum, rng)
}

/// Sum of squared residuals per row, observed entries only.
fn row_residual_sq(data: &ObservationMatrix, resid: &ResidualCache) -> (DVector<f64>, DVector<f64>) {
    let (dim, n) = data.values().shape();
    let mut sums = DVector::zeros(dim);
    let mut counts = DVector::zeros(dim);
    for d in 0..dim {
        let mut s = 0.0;
        let mut cnt = 0.0;
        for nn in 0..n {
            if data.is_observed(d, nn) {
                s += resid.entry(d, nn).powi(2);
                cnt += 1.0;
            }
        }
        sums[d] = s;
        counts[d] = cnt;
    }
    (sums, counts)
}

/// Resample the per-row noise precisions `psi_d^-1 ~ Gamma(a + n_d / 2,
/// b + 1/2 sum_n e_dn^2)` over observed entries.
pub fn sample_noise_independent<R: Rng + ?Sized>(
    data: &ObservationMatrix,
    resid: &ResidualCache,
    psi_inv: &mut DVector<f64>,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<()> {
    let (sums, counts) = row_residual_sq(data, resid);
    for d in 0..psi_inv.len() {
        psi_inv[d] = draw_gamma(a + 0.5 * counts[d], b + 0.5 * sums[d], rng)?;
    }
    Ok(())
}

/// Resample one shared noise precision from all observed residuals.
pub fn sample_noise_isotropic<R: Rng + ?Sized>(
    data: &ObservationMatrix,
    resid: &ResidualCache,
    psi_inv: &mut DVector<f64>,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<()> {
    let (sums, counts) = row_residual_sq(data, resid);
    let shared = draw_gamma(a + 0.5 * counts.sum(), b + 0.5 * sums.sum(), rng)?;
    psi_inv.fill(shared);
    Ok(())
}

/// Resample the noise rate `b | psi^-1 ~ Gamma(a0 + a * D, b0 + sum psi^-1)`,
/// the soft coupling between the per-row precisions.
pub fn sample_noise_rate<R: Rng + ?Sized>(
    psi_inv: &DVector<f64>,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<f64> {
    let dim = psi_inv.len() as f64;
    draw_gamma(hyper.a0 + hyper.a * dim, hyper.b0 + psi_inv.sum(), rng)
}

/// Gamma draw in shape/rate parameterization with domain checks.
pub fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::domain(format!(
            "gamma parameters must be positive, got shape {shape}, rate {rate}"
        )));
    }
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::domain(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(rng.sample(dist))
}
