//! Evaluation harness: synthetic data generation, loading-matrix
//! recovery error, support metrics, held-out predictive scores, and
//! posterior summaries.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{log_mean_exp, log_normal_pdf};
use crate::model::ObservationMatrix;

/// Ground truth and observations for one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub y: ObservationMatrix,
    pub z: DMatrix<u8>,
    pub g: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// Isotropic noise variance chosen to hit the requested ratio.
    pub noise_variance: f64,
}

/// Random sparse support pattern: each column activates a uniformly drawn
/// number of rows in `[min_active, max_active]`, at uniformly drawn
/// distinct positions.
pub fn random_sparse_supports<R: Rng + ?Sized>(
    dims: usize,
    factors: usize,
    min_active: usize,
    max_active: usize,
    rng: &mut R,
) -> Result<DMatrix<u8>> {
    if dims == 0 || factors == 0 {
        return Err(Error::shape("support pattern must be nonempty"));
    }
    if min_active == 0 || min_active > max_active || max_active > dims {
        return Err(Error::domain(format!(
            "active counts must satisfy 1 <= {min_active} <= {max_active} <= {dims}"
        )));
    }
    let mut z = DMatrix::zeros(dims, factors);
    let mut rows: Vec<usize> = (0..dims).collect();
    for k in 0..factors {
        let count = rng.random_range(min_active..=max_active);
        // Partial Fisher-Yates gives `count` distinct rows.
        for i in 0..count {
            let j = rng.random_range(i..dims);
            rows.swap(i, j);
            z[(rows[i], k)] = 1;
        }
    }
    Ok(z)
}

/// Generate `Y = G X + E` from a fixed support: active loadings and all
/// activations are standard normal, and the isotropic noise variance is
/// set from the empirical signal variance so that
/// `Var(G X) / noise_variance = snr`.
pub fn generate_synthetic<R: Rng + ?Sized>(
    supports: &DMatrix<u8>,
    samples: usize,
    snr: f64,
    rng: &mut R,
) -> Result<SyntheticData> {
    if samples == 0 {
        return Err(Error::shape("sample count must be at least 1"));
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::domain(format!("snr must be positive, got {snr}")));
    }
    let (dims, factors) = supports.shape();
    if dims == 0 || factors == 0 {
        return Err(Error::shape("support pattern must be nonempty"));
    }
    let mut g = DMatrix::zeros(dims, factors);
    for k in 0..factors {
        for d in 0..dims {
            if supports[(d, k)] != 0 {
                g[(d, k)] = rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    let mut x = DMatrix::zeros(factors, samples);
    for n in 0..samples {
        for k in 0..factors {
            x[(k, n)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let signal = &g * &x;
    let mean = signal.mean();
    let var = signal.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / signal.len() as f64;
    if !(var > 0.0) {
        return Err(Error::domain("signal variance is zero; cannot set noise"));
    }
    let noise_variance = var / snr;
    let sd = noise_variance.sqrt();
    let mut y = signal;
    for v in y.iter_mut() {
        *v += sd * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(SyntheticData {
        y: ObservationMatrix::fully_observed(y)?,
        z: supports.clone(),
        g,
        x,
        noise_variance,
    })
}

/// Column matching rule for recovery metrics. Factor models are invariant
/// to column sign flips, so comparisons across methods use the sign-aware
/// rule; the verbatim rule matches columns as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    Verbatim,
    SignAware,
}

fn column_distance(
    g_true: &DMatrix<f64>,
    k: usize,
    g_hat: &DMatrix<f64>,
    k_hat: usize,
    mode: MatchMode,
) -> f64 {
    let direct: f64 = (0..g_true.nrows())
        .map(|d| (g_true[(d, k)] - g_hat[(d, k_hat)]).powi(2))
        .sum();
    match mode {
        MatchMode::Verbatim => direct,
        MatchMode::SignAware => {
            let flipped: f64 = (0..g_true.nrows())
                .map(|d| (g_true[(d, k)] + g_hat[(d, k_hat)]).powi(2))
                .sum();
            direct.min(flipped)
        }
    }
}

/// Best-match column of `g_hat` for true column `k`, or `None` when the
/// estimate has no columns.
fn best_match(
    g_true: &DMatrix<f64>,
    k: usize,
    g_hat: &DMatrix<f64>,
    mode: MatchMode,
) -> Option<(usize, f64)> {
    (0..g_hat.ncols())
        .map(|k_hat| (k_hat, column_distance(g_true, k, g_hat, k_hat, mode)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Mean squared loading recovery error: every true column is matched with
/// its closest estimated column (columns may be reused), and the total
/// squared deviation is averaged over all `D x K` true entries. An
/// estimate with no columns scores against zeros.
pub fn reconstruction_error(
    g_true: &DMatrix<f64>,
    g_hat: &DMatrix<f64>,
    mode: MatchMode,
) -> Result<f64> {
    let (dims, factors) = g_true.shape();
    if dims == 0 || factors == 0 {
        return Err(Error::shape("true loading matrix must be nonempty"));
    }
    if g_hat.ncols() > 0 && g_hat.nrows() != dims {
        return Err(Error::shape("estimate row count does not match truth"));
    }
    let mut total = 0.0;
    for k in 0..factors {
        total += match best_match(g_true, k, g_hat, mode) {
            Some((_, dist)) => dist,
            None => (0..dims).map(|d| g_true[(d, k)].powi(2)).sum(),
        };
    }
    Ok(total / (dims * factors) as f64)
}

/// Entry-level support recovery against the truth, with columns aligned
/// by the same closest-match rule as [`reconstruction_error`].
#[derive(Debug, Clone, Copy)]
pub struct SupportMetrics {
    /// Fraction of predicted-active entries that are truly active; 1 when
    /// nothing is predicted active.
    pub precision: f64,
    /// Fraction of truly active entries recovered.
    pub recall: f64,
}

/// Compare true and estimated supports. An estimated entry is active when
/// its loading magnitude exceeds `threshold`; the estimated column paired
/// with each true column is the one minimizing loading distance.
pub fn support_metrics(
    g_true: &DMatrix<f64>,
    g_hat: &DMatrix<f64>,
    threshold: f64,
    mode: MatchMode,
) -> Result<SupportMetrics> {
    let (dims, factors) = g_true.shape();
    if dims == 0 || factors == 0 {
        return Err(Error::shape("true loading matrix must be nonempty"));
    }
    if !(threshold >= 0.0) {
        return Err(Error::domain("threshold must be nonnegative"));
    }
    if g_hat.ncols() > 0 && g_hat.nrows() != dims {
        return Err(Error::shape("estimate row count does not match truth"));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for k in 0..factors {
        let matched = best_match(g_true, k, g_hat, mode).map(|(k_hat, _)| k_hat);
        for d in 0..dims {
            let truth = g_true[(d, k)] != 0.0;
            let predicted = matched
                .map(|k_hat| g_hat[(d, k_hat)].abs() > threshold)
                .unwrap_or(false);
            match (truth, predicted) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    Ok(SupportMetrics { precision, recall })
}

/// Mask a uniformly random subset of entries for held-out evaluation.
/// Returns the masked observations and the held-out index list (each with
/// its true value retained only in `y_full`).
pub fn make_holdout<R: Rng + ?Sized>(
    y_full: &DMatrix<f64>,
    fraction: f64,
    rng: &mut R,
) -> Result<(ObservationMatrix, Vec<(usize, usize)>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::domain(format!(
            "holdout fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let (dims, samples) = y_full.shape();
    let total = dims * samples;
    let count = (fraction * total as f64).floor() as usize;
    let mut cells: Vec<usize> = (0..total).collect();
    // Partial Fisher-Yates: the first `count` cells are the holdout.
    for i in 0..count {
        let j = rng.random_range(i..total);
        cells.swap(i, j);
    }
    let mut mask = DMatrix::from_element(dims, samples, true);
    let mut held = Vec::with_capacity(count);
    for &cell in &cells[..count] {
        let d = cell % dims;
        let n = cell / dims;
        mask[(d, n)] = false;
        held.push((d, n));
    }
    held.sort_unstable();
    let data = ObservationMatrix::new(y_full.clone(), mask)?;
    Ok((data, held))
}

/// Log density of the held-out entries under one posterior sample's
/// predictive law `y_dn ~ N((G X)_dn, 1 / psi_inv_d)`.
pub fn heldout_log_density(
    y_true: &DMatrix<f64>,
    held: &[(usize, usize)],
    mean: &DMatrix<f64>,
    psi_inv: &DVector<f64>,
) -> Result<f64> {
    if mean.shape() != y_true.shape() {
        return Err(Error::shape("predictive mean shape does not match data"));
    }
    if psi_inv.len() != y_true.nrows() {
        return Err(Error::shape("noise precision length must equal D"));
    }
    let mut total = 0.0;
    for &(d, n) in held {
        total += log_normal_pdf(y_true[(d, n)], mean[(d, n)], psi_inv[d]);
    }
    Ok(total)
}

/// How per-sample held-out log densities are pooled across the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictiveMode {
    /// Log of the averaged predictive density (the posterior predictive).
    LogOfMean,
    /// Average of the log densities (a lower bound on the above).
    MeanOfLog,
}

/// Pool per-sample held-out log densities into one score.
pub fn pool_predictive(per_sample: &[f64], mode: PredictiveMode) -> Result<f64> {
    if per_sample.is_empty() {
        return Err(Error::domain("no posterior samples to pool"));
    }
    Ok(match mode {
        PredictiveMode::LogOfMean => log_mean_exp(per_sample),
        PredictiveMode::MeanOfLog => per_sample.iter().sum::<f64>() / per_sample.len() as f64,
    })
}

/// Occurrence counts of each factor count, ascending.
pub fn posterior_k_histogram(ks: &[usize]) -> Vec<(usize, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for &k in ks {
        *counts.entry(k).or_insert(0usize) += 1;
    }
    counts.into_iter().collect()
}
