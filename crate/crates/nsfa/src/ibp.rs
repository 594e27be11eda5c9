//! Indian buffet process prior over binary support matrices.
//!
//! `Z` is `D x K` binary with rows indexed by observed dimensions
//! ("customers") and columns by latent factors ("dishes"). The finite
//! beta-Bernoulli model places `pi_k ~ Beta(alpha/K, 1)` on each column and
//! integrates `pi_k` out:
//!
//! ```text
//! P(Z) = prod_k  (alpha/K) G(m_k + alpha/K) G(D - m_k + 1) / G(D + 1 + alpha/K)
//! ```
//!
//! with `m_k` the column sum and `G` the gamma function. Taking `K -> inf`
//! and identifying matrices up to column order gives the IBP mass on
//! left-ordered equivalence classes:
//!
//! ```text
//! P([Z]) = alpha^K+ / (prod_h K_h!) * exp(-alpha H_D)
//!          * prod_k (D - m_k)! (m_k - 1)! / D!
//! ```
//!
//! where `K+` counts nonzero columns, `K_h` counts columns sharing the
//! binary history `h`, and `H_D` is the `D`-th harmonic number. Both
//! densities and the generative draw are exercised against each other in
//! the tests: finite-`K` class probabilities converge to the infinite form,
//! and empirical class frequencies of the buffet draw match `P([Z])`.

use nalgebra::DMatrix;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::math::harmonic;

/// Column sums `m_k` of a binary matrix.
pub fn column_counts(z: &DMatrix<u8>) -> Vec<usize> {
    (0..z.ncols())
        .map(|k| z.column(k).iter().filter(|&&v| v != 0).count())
        .collect()
}

fn validate_binary(z: &DMatrix<u8>) -> Result<()> {
    if z.iter().any(|&v| v > 1) {
        return Err(Error::domain("support matrix entries must be 0 or 1"));
    }
    Ok(())
}

/// Log probability of `Z` under the finite `K`-column beta-Bernoulli prior.
///
/// Zero columns are legal states of the finite model.
pub fn log_prob_finite(z: &DMatrix<u8>, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if z.nrows() == 0 || z.ncols() == 0 {
        return Err(Error::shape("support matrix must be nonempty"));
    }
    validate_binary(z)?;
    let d = z.nrows() as f64;
    let k = z.ncols() as f64;
    let ak = alpha / k;
    let mut total = 0.0;
    for m in column_counts(z) {
        let m = m as f64;
        total += ak.ln() + ln_gamma(m + ak) + ln_gamma(d - m + 1.0) - ln_gamma(d + 1.0 + ak);
    }
    Ok(total)
}

/// Log probability of the left-ordered equivalence class of `Z` under the IBP.
///
/// Every member of the class (any column order) evaluates to the same
/// value since both the column sums and the history multiplicities are
/// order-invariant. Zero columns are a contract violation: the infinite
/// form's mass lives entirely on the active columns.
pub fn log_prob_infinite(z: &DMatrix<u8>, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    if z.nrows() == 0 {
        return Err(Error::shape("support matrix must have at least one row"));
    }
    validate_binary(z)?;
    let d = z.nrows();
    let k_plus = z.ncols();
    let counts = column_counts(z);
    if counts.iter().any(|&m| m == 0) {
        return Err(Error::state("zero column passed to the infinite-model density"));
    }
    let df = d as f64;
    let mut total = k_plus as f64 * alpha.ln() - alpha * harmonic(d);
    for &m in &counts {
        let m = m as f64;
        total += ln_gamma(df - m + 1.0) + ln_gamma(m) - ln_gamma(df + 1.0);
    }
    for multiplicity in history_counts(z) {
        total -= ln_gamma(multiplicity as f64 + 1.0);
    }
    Ok(total)
}

/// Multiplicities `K_h` of identical column histories.
pub fn history_counts(z: &DMatrix<u8>) -> Vec<usize> {
    let mut sorted = column_keys(z);
    sorted.sort();
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

fn column_keys(z: &DMatrix<u8>) -> Vec<Vec<u8>> {
    (0..z.ncols())
        .map(|k| z.column(k).iter().cloned().collect())
        .collect()
}

/// Left-ordered form: columns sorted by binary history, most significant
/// bit in row 0, descending. Canonical representative of the IBP
/// equivalence class.
pub fn left_ordered(z: &DMatrix<u8>) -> DMatrix<u8> {
    let mut keys = column_keys(z);
    keys.sort_by(|a, b| b.cmp(a));
    DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| keys[c][r])
}

/// Log prior odds that one support entry is active given the rest of its
/// column, under the exchangeable IBP conditional: `P(z = 1 | rest) = m/D`.
///
/// `m_minus` counts active entries in the column excluding the row being
/// updated, so it must lie in `[0, dims - 1]`. At `m_minus = 0` the odds
/// are `-inf`: a lone entry can only activate through the factor birth
/// move, never through the per-element update.
pub fn conditional_inclusion_log_odds(m_minus: usize, dims: usize) -> Result<f64> {
    if dims == 0 || m_minus > dims - 1 {
        return Err(Error::domain(format!(
            "m_minus = {m_minus} out of range for {dims} dimensions"
        )));
    }
    if m_minus == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((m_minus as f64 / (dims - m_minus) as f64).ln())
}

/// One generative draw from the buffet construction.
///
/// Customer `i` (1-based) takes existing dish `k` with probability
/// `m_k / i`, then samples `Poisson(alpha / i)` new dishes. Columns appear
/// in order of first taste.
pub fn sample_ibp<R: Rng + ?Sized>(dims: usize, alpha: f64, rng: &mut R) -> Result<DMatrix<u8>> {
    if dims == 0 {
        return Err(Error::shape("dims must be at least 1"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
    }
    let mut columns: Vec<Vec<u8>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 1..=dims {
        for (k, col) in columns.iter_mut().enumerate() {
            let p = counts[k] as f64 / i as f64;
            let take = rng.random::<f64>() < p;
            col.push(take as u8);
            counts[k] += take as usize;
        }
        let fresh = Poisson::new(alpha / i as f64)
            .expect("positive rate")
            .sample(rng) as usize;
        for _ in 0..fresh {
            let mut col = vec![0u8; i - 1];
            col.push(1);
            columns.push(col);
            counts.push(1);
        }
    }
    let k = columns.len();
    Ok(DMatrix::from_fn(dims, k, |r, c| columns[c][r]))
}

/// Conjugate update of the IBP concentration.
///
/// With `alpha ~ Gamma(e, f)` and `K+` active columns over `D` dimensions,
/// the conditional is `Gamma(e + K+, f + H_D)` (rate parameterization).
pub fn sample_alpha<R: Rng + ?Sized>(
    k_plus: usize,
    dims: usize,
    e: f64,
    f: f64,
    rng: &mut R,
) -> Result<f64> {
    if dims == 0 {
        return Err(Error::shape("dims must be at least 1"));
    }
    if !(e > 0.0 && f > 0.0) {
        return Err(Error::domain("concentration hyperpriors must be positive"));
    }
    let shape = e + k_plus as f64;
    let rate = f + harmonic(dims);
    let gamma = Gamma::new(shape, 1.0 / rate).map_err(|err| Error::domain(err.to_string()))?;
    Ok(gamma.sample(rng))
}
