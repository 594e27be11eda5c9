//! Small log-density helpers used throughout the sampler.
//!
//! Everything is f64 and stays in the log domain; factorials are always
//! `ln_gamma`, never products.

use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Harmonic number `H_d = sum_{j=1..d} 1/j`.
pub fn harmonic(d: usize) -> f64 {
    (1..=d).map(|j| 1.0 / j as f64).sum()
}

/// Log density of `N(x; mean, 1/precision)`.
pub fn log_normal_pdf(x: f64, mean: f64, precision: f64) -> f64 {
    let r = x - mean;
    0.5 * (precision.ln() - LN_2PI) - 0.5 * precision * r * r
}

/// Log density of `Gamma(x; shape, rate)` (rate parameterization).
pub fn log_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log mass of `Poisson(k; rate)`.
pub fn log_poisson_pmf(k: usize, rate: f64) -> f64 {
    let kf = k as f64;
    kf * rate.ln() - rate - ln_gamma(kf + 1.0)
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Bernoulli success probability from log odds, saturating cleanly at the ends.
pub fn prob_from_log_odds(log_odds: f64) -> f64 {
    if log_odds == f64::NEG_INFINITY {
        0.0
    } else if log_odds == f64::INFINITY {
        1.0
    } else {
        1.0 / (1.0 + (-log_odds).exp())
    }
}

/// `ln(mean(exp(v)))` over a nonempty slice, stable for very negative terms.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + (s / v.len() as f64).ln()
}
