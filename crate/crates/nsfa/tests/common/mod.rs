//! Numerical oracle helpers shared by the integration tests: quadrature,
//! Gauss-Hermite rules, goodness-of-fit statistics, and grid posteriors.
//! Everything here is independent of the library's sampling code paths.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Adaptive Simpson integration to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for weight
/// `exp(-x^2)`: `integral f(x) exp(-x^2) dx ~ sum w_i f(x_i)`. Newton
/// iteration on the Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        // Initial guesses from largest root inward.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            // Orthonormal Hermite recurrence.
            let mut p1 = PI.powf(-0.25);
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Expectation of `f` under a standard normal via Gauss-Hermite:
/// `E[f(Z)] = (1/sqrt(pi)) sum w_i f(sqrt(2) x_i)`.
pub fn gh_expect_normal<F: Fn(f64) -> f64>(nodes: &[f64], weights: &[f64], f: F) -> f64 {
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        total += w * f(std::f64::consts::SQRT_2 * x);
    }
    total / PI.sqrt()
}

/// Two-dimensional standard-normal expectation on a tensor rule.
pub fn gh_expect_normal_2d<F: Fn(f64, f64) -> f64>(
    nodes: &[f64],
    weights: &[f64],
    f: F,
) -> f64 {
    let mut total = 0.0;
    for (xi, wi) in nodes.iter().zip(weights) {
        for (xj, wj) in nodes.iter().zip(weights) {
            total += wi
                * wj
                * f(
                    std::f64::consts::SQRT_2 * xi,
                    std::f64::consts::SQRT_2 * xj,
                );
        }
    }
    total / PI
}

/// Kolmogorov-Smirnov statistic of `samples` against a reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let fx = cdf(x);
        let lo = (fx - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - fx).abs();
        d = d.max(lo).max(hi);
    }
    d
}

/// Unnormalized log posterior evaluated on a grid, turned into a CDF by
/// trapezoid integration. Query by linear interpolation.
pub struct GridPosterior {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridPosterior {
    /// Tabulate `exp(log_density)` on `points` equally spaced values of
    /// `[lo, hi]` and normalize.
    pub fn new<F: Fn(f64) -> f64>(lo: f64, hi: f64, points: usize, log_density: F) -> Self {
        assert!(points >= 2 && hi > lo);
        let step = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
        let logs: Vec<f64> = grid.iter().map(|&x| log_density(x)).collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
        let mut cdf = vec![0.0; points];
        for i in 1..points {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i - 1] + dens[i]) * step;
        }
        let total = cdf[points - 1];
        for v in cdf.iter_mut() {
            *v /= total;
        }
        Self { grid, cdf }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= self.grid[n - 1] {
            return 1.0;
        }
        let step = self.grid[1] - self.grid[0];
        let idx = ((x - self.grid[0]) / step).floor() as usize;
        let idx = idx.min(n - 2);
        let frac = (x - self.grid[idx]) / step;
        self.cdf[idx] + frac * (self.cdf[idx + 1] - self.cdf[idx])
    }
}

/// Tie-corrected Mann-Whitney standardized statistic: under the null that
/// both samples share a distribution, approximately standard normal.
pub fn mann_whitney_z(xs: &[f64], ys: &[f64]) -> f64 {
    let n1 = xs.len();
    let n2 = ys.len();
    assert!(n1 > 0 && n2 > 0);
    let mut all: Vec<(f64, usize)> = xs
        .iter()
        .map(|&v| (v, 0usize))
        .chain(ys.iter().map(|&v| (v, 1usize)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut rank_sum_x = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let tied = (j - i) as f64;
        // Average rank of the tied block, 1-based.
        let rank = 0.5 * ((i + 1) + j) as f64;
        for item in &all[i..j] {
            if item.1 == 0 {
                rank_sum_x += rank;
            }
        }
        tie_term += tied * (tied * tied - 1.0);
        i = j;
    }
    let n1f = n1 as f64;
    let n2f = n2 as f64;
    let nf = n as f64;
    let u = rank_sum_x - n1f * (n1f + 1.0) / 2.0;
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    (u - mean) / var.sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|&x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}
