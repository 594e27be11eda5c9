//! Core model state: observations, factor state, residual cache,
//! hyperparameters.
//!
//! The likelihood is `y_dn ~ N((G X)_dn, psi_d)` independently over
//! entries, with `psi_d` the per-dimension noise variance (the sampler
//! works with precisions `psi_d^-1`). Missing entries are tracked by a
//! boolean mask and Gibbs-imputed each sweep, so downstream conjugate
//! updates always see complete data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::math::log_normal_pdf;

/// `D x N` data matrix plus observation mask (`true` = observed).
///
/// Observed entries are immutable and must be finite; masked entries hold
/// the current imputation and are rewritten by the sampler.
#[derive(Debug, Clone)]
pub struct ObservationMatrix {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
    missing: Vec<(usize, usize)>,
}

impl ObservationMatrix {
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::shape("observation matrix must be nonempty"));
        }
        if values.shape() != mask.shape() {
            return Err(Error::shape(format!(
                "mask shape {:?} does not match data shape {:?}",
                mask.shape(),
                values.shape()
            )));
        }
        let mut missing = Vec::new();
        for n in 0..values.ncols() {
            for d in 0..values.nrows() {
                if mask[(d, n)] {
                    if !values[(d, n)].is_finite() {
                        return Err(Error::domain(format!(
                            "observed entry ({d}, {n}) is not finite"
                        )));
                    }
                } else {
                    missing.push((d, n));
                }
            }
        }
        if missing.len() == values.len() {
            return Err(Error::domain("every entry is masked as missing"));
        }
        let mut values = values;
        for &(d, n) in &missing {
            values[(d, n)] = 0.0;
        }
        Ok(Self { values, mask, missing })
    }

    /// All entries observed.
    pub fn fully_observed(values: DMatrix<f64>) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask)
    }

    /// Number of dimensions `D`.
    pub fn dims(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples `N`.
    pub fn samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn is_observed(&self, d: usize, n: usize) -> bool {
        self.mask[(d, n)]
    }

    /// Indices of masked entries, in column-major order.
    pub fn missing_indices(&self) -> &[(usize, usize)] {
        &self.missing
    }

    pub fn n_observed(&self) -> usize {
        self.values.len() - self.missing.len()
    }

    /// Overwrite the imputation at a masked entry.
    pub fn set_missing_value(&mut self, d: usize, n: usize, value: f64) -> Result<()> {
        if self.mask[(d, n)] {
            return Err(Error::state(format!(
                "entry ({d}, {n}) is observed and cannot be imputed"
            )));
        }
        self.values[(d, n)] = value;
        Ok(())
    }

    /// Replace every value (used when regenerating data from the model in
    /// prior-predictive checks). Mask is untouched.
    pub fn replace_values(&mut self, values: DMatrix<f64>) -> Result<()> {
        if values.shape() != self.values.shape() {
            return Err(Error::shape("replacement data has wrong shape"));
        }
        self.values = values;
        Ok(())
    }
}

/// Fixed prior hyperparameters. All Gamma distributions use the rate
/// parameterization `Gamma(shape, rate)`.
///
/// - `alpha ~ Gamma(e, f)`: IBP concentration
/// - `lambda ~ Gamma(c, d)`: loading precisions; `d ~ Gamma(c0, d0)` when
///   power is shared across factors
/// - `psi^-1 ~ Gamma(a, b)`: noise precisions; `b ~ Gamma(a0, b0)` under
///   soft coupling
#[derive(Debug, Clone, Copy)]
pub struct HyperParams {
    pub alpha: f64,
    pub e: f64,
    pub f: f64,
    pub c: f64,
    pub d: f64,
    pub c0: f64,
    pub d0: f64,
    pub a: f64,
    pub b: f64,
    pub a0: f64,
    pub b0: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            e: 1.0,
            f: 1.0,
            c: 1.0,
            d: 1.0,
            c0: 1.0,
            d0: 1.0,
            a: 1.0,
            b: 1.0,
            a0: 1.0,
            b0: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha", self.alpha),
            ("e", self.e),
            ("f", self.f),
            ("c", self.c),
            ("d", self.d),
            ("c0", self.c0),
            ("d0", self.d0),
            ("a", self.a),
            ("b", self.b),
            ("a0", self.a0),
            ("b0", self.b0),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!(
                    "hyperparameter {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Loading precision structure, one of three granularities.
#[derive(Debug, Clone)]
pub enum LoadingPrecisions {
    /// One precision for every loading.
    Shared(f64),
    /// One ARD precision per factor (length `K`).
    PerFactor(DVector<f64>),
    /// One precision per matrix element (`D x K`).
    PerElement(DMatrix<f64>),
}

impl LoadingPrecisions {
    /// Precision governing `g_dk`.
    pub fn at(&self, d: usize, k: usize) -> f64 {
        match self {
            LoadingPrecisions::Shared(v) => *v,
            LoadingPrecisions::PerFactor(v) => v[k],
            LoadingPrecisions::PerElement(m) => m[(d, k)],
        }
    }

    pub fn is_per_factor(&self) -> bool {
        matches!(self, LoadingPrecisions::PerFactor(_))
    }
}

/// Latent factor state: support `Z`, loadings `G`, activations `X`, cached
/// column sums, and the loading precisions.
///
/// Structural invariants, checked by [`FeatureState::audit`]:
/// - `z_dk = 0` implies `g_dk = 0` exactly (spike-and-slab coupling)
/// - cached `m_k` equals the column sum of `Z`
/// - `G` is `D x K`, `X` is `K x N`, `Z` is `D x K`
#[derive(Debug, Clone)]
pub struct FeatureState {
    pub z: DMatrix<u8>,
    pub g: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub m: Vec<usize>,
    pub precisions: LoadingPrecisions,
}

impl FeatureState {
    pub fn new(
        z: DMatrix<u8>,
        g: DMatrix<f64>,
        x: DMatrix<f64>,
        precisions: LoadingPrecisions,
    ) -> Result<Self> {
        let m = crate::ibp::column_counts(&z);
        let state = Self { z, g, x, m, precisions };
        state.audit()?;
        Ok(state)
    }

    /// Number of materialized factor columns.
    pub fn k_active(&self) -> usize {
        self.g.ncols()
    }

    pub fn dims(&self) -> usize {
        self.g.nrows()
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }

    /// Active-entry count of column `k` excluding row `d`.
    pub fn m_minus(&self, d: usize, k: usize) -> usize {
        self.m[k] - usize::from(self.z[(d, k)] != 0)
    }

    /// True when column `k` is active in row `d` and nowhere else.
    pub fn is_singleton_of(&self, d: usize, k: usize) -> bool {
        self.m[k] == 1 && self.z[(d, k)] != 0
    }

    /// Verify structural invariants.
    pub fn audit(&self) -> Result<()> {
        let (dims, k) = self.g.shape();
        if self.z.shape() != (dims, k) {
            return Err(Error::shape("Z and G shapes differ"));
        }
        if self.x.nrows() != k {
            return Err(Error::shape("X row count does not match column count of G"));
        }
        if self.m.len() != k {
            return Err(Error::state("cached column sums have wrong length"));
        }
        for (col, &cached) in self.m.iter().enumerate() {
            let actual = self.z.column(col).iter().filter(|&&v| v != 0).count();
            if cached != actual {
                return Err(Error::state(format!(
                    "cached m[{col}] = {cached}, actual {actual}"
                )));
            }
        }
        for kk in 0..k {
            for d in 0..dims {
                let z = self.z[(d, kk)];
                let g = self.g[(d, kk)];
                if z > 1 {
                    return Err(Error::state("support entries must be 0 or 1"));
                }
                if z == 0 && g != 0.0 {
                    return Err(Error::state(format!(
                        "loading ({d}, {kk}) nonzero under inactive support"
                    )));
                }
                if !g.is_finite() {
                    return Err(Error::state(format!("loading ({d}, {kk}) not finite")));
                }
            }
        }
        match &self.precisions {
            LoadingPrecisions::Shared(v) => {
                if !(*v > 0.0) {
                    return Err(Error::state("shared loading precision must be positive"));
                }
            }
            LoadingPrecisions::PerFactor(v) => {
                if v.len() != k {
                    return Err(Error::state("per-factor precision length mismatch"));
                }
                if v.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::state("loading precisions must be positive"));
                }
            }
            LoadingPrecisions::PerElement(mtx) => {
                if mtx.shape() != (dims, k) {
                    return Err(Error::state("per-element precision shape mismatch"));
                }
                if mtx.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::state("loading precisions must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Drop column `k` from every per-column structure.
    pub fn remove_column(&mut self, k: usize) {
        self.z = std::mem::take(&mut self.z).remove_column(k);
        self.g = std::mem::take(&mut self.g).remove_column(k);
        self.x = std::mem::take(&mut self.x).remove_row(k);
        self.m.remove(k);
        match &mut self.precisions {
            LoadingPrecisions::Shared(_) => {}
            LoadingPrecisions::PerFactor(v) => {
                *v = std::mem::replace(v, DVector::zeros(0)).remove_row(k);
            }
            LoadingPrecisions::PerElement(mtx) => {
                *mtx = std::mem::take(mtx).remove_column(k);
            }
        }
    }

    /// Append a factor active only in row `d`, with loading `g_d`, factor
    /// precision `lambda` (ignored for shared/per-element structures, where
    /// per-element entries start at `lambda`), and activation row `x_row`.
    pub fn append_singleton(&mut self, d: usize, g_d: f64, lambda: f64, x_row: &[f64]) {
        let dims = self.dims();
        let n = self.samples();
        let k = self.k_active();
        self.z = std::mem::take(&mut self.z).insert_column(k, 0);
        self.z[(d, k)] = 1;
        self.g = std::mem::take(&mut self.g).insert_column(k, 0.0);
        self.g[(d, k)] = g_d;
        self.x = std::mem::take(&mut self.x).insert_row(k, 0.0);
        for nn in 0..n {
            self.x[(k, nn)] = x_row[nn];
        }
        self.m.push(1);
        match &mut self.precisions {
            LoadingPrecisions::Shared(_) => {}
            LoadingPrecisions::PerFactor(v) => {
                let mut grown = std::mem::replace(v, DVector::zeros(0)).insert_row(k, lambda);
                std::mem::swap(v, &mut grown);
            }
            LoadingPrecisions::PerElement(mtx) => {
                *mtx = std::mem::take(mtx).insert_column(k, lambda);
            }
        }
        debug_assert_eq!(self.z.shape(), (dims, k + 1));
    }
}

/// Cached residual `E_hat = Y - G X`, maintained by rank-one updates
/// between full recomputations.
#[derive(Debug, Clone)]
pub struct ResidualCache {
    e: DMatrix<f64>,
}

impl ResidualCache {
    pub fn new(y: &ObservationMatrix, state: &FeatureState) -> Result<Self> {
        let mut cache = Self {
            e: DMatrix::zeros(y.dims(), y.samples()),
        };
        cache.recompute(y, state)?;
        Ok(cache)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn entry(&self, d: usize, n: usize) -> f64 {
        self.e[(d, n)]
    }

    /// Full recomputation from scratch.
    pub fn recompute(&mut self, y: &ObservationMatrix, state: &FeatureState) -> Result<()> {
        if state.dims() != y.dims() || state.samples() != y.samples() {
            return Err(Error::shape("state does not match data shape"));
        }
        self.e = y.values() - &state.g * &state.x;
        Ok(())
    }

    /// Largest absolute deviation between the cache and `Y - G X`.
    pub fn max_drift(&self, y: &ObservationMatrix, state: &FeatureState) -> f64 {
        let fresh = y.values() - &state.g * &state.x;
        (&self.e - fresh).amax()
    }

    /// Add `coeff * x_row` to residual row `d` (used when a loading leaves
    /// or enters the model: `E_hat_d += g_dk X_k`).
    pub fn rank1_row_update(&mut self, d: usize, coeff: f64, x_row: &[f64]) {
        if coeff == 0.0 {
            return;
        }
        for (n, &xv) in x_row.iter().enumerate() {
            self.e[(d, n)] += coeff * xv;
        }
    }

    /// Rewrite residual column `n` as `y_n - G x_n`.
    pub fn refresh_column(&mut self, n: usize, y: &ObservationMatrix, state: &FeatureState) {
        let gx = &state.g * state.x.column(n);
        for d in 0..self.e.nrows() {
            self.e[(d, n)] = y.values()[(d, n)] - gx[d];
        }
    }

    /// Set one entry directly (imputation path).
    pub fn set_entry(&mut self, d: usize, n: usize, value: f64) {
        self.e[(d, n)] = value;
    }

    /// Sum of squared residuals in row `d`.
    pub fn row_sum_sq(&self, d: usize) -> f64 {
        self.e.row(d).iter().map(|&v| v * v).sum()
    }
}

/// Observed-data log likelihood `sum log N(y_dn; (G X)_dn, 1/psi_inv_d)`
/// over unmasked entries.
pub fn log_likelihood(
    y: &ObservationMatrix,
    state: &FeatureState,
    psi_inv: &DVector<f64>,
) -> Result<f64> {
    if psi_inv.len() != y.dims() {
        return Err(Error::shape("noise precision length must equal D"));
    }
    if state.dims() != y.dims() || state.samples() != y.samples() {
        return Err(Error::shape("state does not match data shape"));
    }
    if psi_inv.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::state("noise precisions must be positive and finite"));
    }
    if state.g.iter().any(|v| !v.is_finite()) || state.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::state("latent state contains non-finite values"));
    }
    let mean = &state.g * &state.x;
    let mut total = 0.0;
    for n in 0..y.samples() {
        for d in 0..y.dims() {
            if y.is_observed(d, n) {
                total += log_normal_pdf(y.values()[(d, n)], mean[(d, n)], psi_inv[d]);
            }
        }
    }
    Ok(total)
}

/// Gibbs update of every masked entry: `y_dn ~ N((G X)_dn, psi_d)`.
///
/// Both the observation matrix and the residual cache are updated; the
/// fresh residual at an imputed entry is exactly the noise draw.
pub fn impute_missing<R: Rng + ?Sized>(
    y: &mut ObservationMatrix,
    resid: &mut ResidualCache,
    psi_inv: &DVector<f64>,
    rng: &mut R,
) -> Result<()> {
    if psi_inv.len() != y.dims() {
        return Err(Error::shape("noise precision length must equal D"));
    }
    let indices: Vec<(usize, usize)> = y.missing_indices().to_vec();
    for (d, n) in indices {
        let mean = y.values()[(d, n)] - resid.entry(d, n);
        let sd = psi_inv[d].recip().sqrt();
        let noise = sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
        y.set_missing_value(d, n, mean + noise)?;
        resid.set_entry(d, n, noise);
    }
    Ok(())
}
