//! Model variant registry.
//!
//! Five variants share one sweep kernel and differ only in how the support
//! matrix and the loading precisions are treated:
//!
//! | name   | support `Z`                 | loading precision      | births |
//! |--------|-----------------------------|------------------------|--------|
//! | `fa`   | all ones, frozen            | shared `lambda`        | no     |
//! | `afa`  | all ones, frozen            | per-factor `lambda_k`  | no     |
//! | `sfa`  | finite beta-Bernoulli, `K` fixed | per-factor or shared | no  |
//! | `fok`  | all ones, frozen            | per-element `lambda_dk`| no     |
//! | `nsfa` | IBP, `K` inferred           | per-factor or shared   | yes    |
//!
//! Each variant is a [`ModelStrategy`] implementation registered by name;
//! the sampler holds the strategy as a trait object and consults it for
//! prior odds, birth availability, precision structure, and support
//! initialization. Strategies are immutable and shared freely across
//! chains.

use nalgebra::DMatrix;
use rand::{Rng, RngExt};
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::ibp;

/// Variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantKind {
    Fa,
    Afa,
    Sfa,
    Fok,
    Nsfa,
}

impl VariantKind {
    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Fa => "fa",
            VariantKind::Afa => "afa",
            VariantKind::Sfa => "sfa",
            VariantKind::Fok => "fok",
            VariantKind::Nsfa => "nsfa",
        }
    }
}

/// Noise covariance structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// One variance for every dimension.
    Isotropic,
    /// Independent per-dimension variances.
    Independent,
    /// Per-dimension variances with a shared sampled rate `b`.
    SoftCoupled,
}

impl NoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::Isotropic => "isotropic",
            NoiseMode::Independent => "independent",
            NoiseMode::SoftCoupled => "soft_coupled",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(NoiseMode::Isotropic),
            "independent" => Ok(NoiseMode::Independent),
            "soft_coupled" => Ok(NoiseMode::SoftCoupled),
            other => Err(Error::config(format!("unknown noise mode '{other}'"))),
        }
    }
}

/// Granularity of the loading precisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecisionStructure {
    Shared,
    PerFactor,
    PerElement,
}

/// Full variant configuration.
#[derive(Debug, Clone, Copy)]
pub struct ModelVariant {
    pub kind: VariantKind,
    /// Fixed factor count; required for every finite variant, forbidden for
    /// `nsfa`.
    pub k_fixed: Option<usize>,
    pub noise: NoiseMode,
    /// Sample the IBP concentration (nsfa only).
    pub sample_alpha: bool,
    /// Collapse per-factor precisions to one shared value (sfa/nsfa only;
    /// fa is always shared, afa never, fok per-element).
    pub shared_lambda: bool,
    /// Resample the precision prior's rate `d` (shares power across
    /// factors).
    pub couple_lambda_rate: bool,
}

impl ModelVariant {
    /// Variant with conventional defaults for its kind.
    pub fn new(kind: VariantKind, k_fixed: Option<usize>) -> Self {
        Self {
            kind,
            k_fixed,
            noise: NoiseMode::Independent,
            sample_alpha: false,
            shared_lambda: matches!(kind, VariantKind::Fa),
            couple_lambda_rate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            VariantKind::Nsfa => {
                if self.k_fixed.is_some() {
                    return Err(Error::config(
                        "nsfa infers the factor count; k must not be fixed",
                    ));
                }
            }
            _ => match self.k_fixed {
                Some(k) if k >= 1 => {}
                _ => {
                    return Err(Error::config(format!(
                        "variant '{}' requires a fixed factor count k >= 1",
                        self.kind.name()
                    )));
                }
            },
        }
        if self.sample_alpha && self.kind != VariantKind::Nsfa {
            return Err(Error::config(
                "concentration sampling is only defined for the nsfa variant",
            ));
        }
        match self.kind {
            VariantKind::Fa => {
                if !self.shared_lambda {
                    return Err(Error::config("fa uses a single shared loading precision"));
                }
            }
            VariantKind::Afa => {
                if self.shared_lambda {
                    return Err(Error::config(
                        "afa is the per-factor ARD variant; shared_lambda must be off",
                    ));
                }
            }
            VariantKind::Fok => {
                if self.shared_lambda {
                    return Err(Error::config(
                        "fok uses per-element precisions; shared_lambda must be off",
                    ));
                }
            }
            VariantKind::Sfa | VariantKind::Nsfa => {}
        }
        Ok(())
    }

    pub fn precision_structure(&self) -> PrecisionStructure {
        match self.kind {
            VariantKind::Fa => PrecisionStructure::Shared,
            VariantKind::Afa => PrecisionStructure::PerFactor,
            VariantKind::Fok => PrecisionStructure::PerElement,
            VariantKind::Sfa | VariantKind::Nsfa => {
                if self.shared_lambda {
                    PrecisionStructure::Shared
                } else {
                    PrecisionStructure::PerFactor
                }
            }
        }
    }
}

/// Behavior a variant contributes to the sweep.
pub trait ModelStrategy: Send + Sync {
    /// Registered name.
    fn name(&self) -> &'static str;

    /// Log prior odds that a support entry is active, given the number of
    /// active entries in the rest of its column. `Ok(None)` freezes the
    /// entry (dense variants never sample `Z`).
    fn support_log_odds(&self, m_minus: usize, dims: usize, alpha: f64) -> Result<Option<f64>>;

    /// Whether the factor birth/death move runs.
    fn births_enabled(&self) -> bool;

    fn precision_structure(&self) -> PrecisionStructure;

    /// Draw an initial support matrix from the variant's prior.
    fn init_support<'a>(
        &self,
        dims: usize,
        alpha: f64,
        rng: &mut (dyn rand::Rng + 'a),
    ) -> Result<DMatrix<u8>>;
}

/// Dense variants: `Z` is all ones and never sampled.
struct DenseSupport {
    name: &'static str,
    k: usize,
    precisions: PrecisionStructure,
}

impl ModelStrategy for DenseSupport {
    fn name(&self) -> &'static str {
        self.name
    }

    fn support_log_odds(&self, _: usize, _: usize, _: f64) -> Result<Option<f64>> {
        Ok(None)
    }

    fn births_enabled(&self) -> bool {
        false
    }

    fn precision_structure(&self) -> PrecisionStructure {
        self.precisions
    }

    fn init_support<'a>(
        &self,
        dims: usize,
        _alpha: f64,
        _rng: &mut (dyn rand::Rng + 'a),
    ) -> Result<DMatrix<u8>> {
        Ok(DMatrix::from_element(dims, self.k, 1))
    }
}

/// Finite sparse variant: beta-Bernoulli support over a fixed `K`.
struct FiniteSparseSupport {
    k: usize,
    precisions: PrecisionStructure,
}

impl ModelStrategy for FiniteSparseSupport {
    fn name(&self) -> &'static str {
        "sfa"
    }

    fn support_log_odds(&self, m_minus: usize, dims: usize, alpha: f64) -> Result<Option<f64>> {
        finite_z_log_odds(m_minus, dims, self.k, alpha).map(Some)
    }

    fn births_enabled(&self) -> bool {
        false
    }

    fn precision_structure(&self) -> PrecisionStructure {
        self.precisions
    }

    fn init_support<'a>(
        &self,
        dims: usize,
        alpha: f64,
        rng: &mut (dyn rand::Rng + 'a),
    ) -> Result<DMatrix<u8>> {
        // Ancestral draw: pi_k ~ Beta(alpha/K, 1), entries Bernoulli(pi_k).
        let beta = Beta::new(alpha / self.k as f64, 1.0)
            .map_err(|e| Error::domain(e.to_string()))?;
        let mut z = DMatrix::zeros(dims, self.k);
        for k in 0..self.k {
            let pi: f64 = beta.sample(rng);
            for d in 0..dims {
                z[(d, k)] = u8::from(rng.random::<f64>() < pi);
            }
        }
        Ok(z)
    }
}

/// Nonparametric variant: IBP support, births enabled.
struct IbpSupport {
    precisions: PrecisionStructure,
}

impl ModelStrategy for IbpSupport {
    fn name(&self) -> &'static str {
        "nsfa"
    }

    fn support_log_odds(&self, m_minus: usize, dims: usize, _alpha: f64) -> Result<Option<f64>> {
        ibp::conditional_inclusion_log_odds(m_minus, dims).map(Some)
    }

    fn births_enabled(&self) -> bool {
        true
    }

    fn precision_structure(&self) -> PrecisionStructure {
        self.precisions
    }

    fn init_support<'a>(
        &self,
        dims: usize,
        alpha: f64,
        rng: &mut (dyn rand::Rng + 'a),
    ) -> Result<DMatrix<u8>> {
        ibp::sample_ibp(dims, alpha, rng)
    }
}

/// Log prior odds of activation under the finite beta-Bernoulli column
/// prior: `(m_minus + alpha/K) / (D - m_minus)`.
///
/// Unlike the IBP conditional this stays finite at `m_minus = 0`, so
/// factors can resurrect through per-element moves and no birth move
/// exists.
pub fn finite_z_log_odds(m_minus: usize, dims: usize, k: usize, alpha: f64) -> Result<f64> {
    if dims == 0 || m_minus > dims - 1 {
        return Err(Error::domain(format!(
            "m_minus = {m_minus} out of range for {dims} dimensions"
        )));
    }
    if k == 0 || !(alpha > 0.0) {
        return Err(Error::domain("finite prior needs k >= 1 and alpha > 0"));
    }
    let ak = alpha / k as f64;
    Ok(((m_minus as f64 + ak) / (dims - m_minus) as f64).ln())
}

/// Per-element conjugate precision update for the per-element sparsity
/// variant: `lambda_dk ~ Gamma(c + 1/2, d + g_dk^2 / 2)`.
pub fn sample_fok_precisions<R: Rng + ?Sized>(
    g: &DMatrix<f64>,
    c: f64,
    d: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(c > 0.0 && d > 0.0) {
        return Err(Error::domain("precision hyperpriors must be positive"));
    }
    let shape = c + 0.5;
    let mut out = DMatrix::zeros(g.nrows(), g.ncols());
    for k in 0..g.ncols() {
        for dd in 0..g.nrows() {
            let rate = d + 0.5 * g[(dd, k)] * g[(dd, k)];
            let gamma = rand_distr::Gamma::new(shape, 1.0 / rate)
                .map_err(|e| Error::domain(e.to_string()))?;
            out[(dd, k)] = gamma.sample(rng);
        }
    }
    Ok(out)
}

type BuildFn = fn(&ModelVariant) -> Box<dyn ModelStrategy>;

/// Name-indexed variant registry. New variants plug in here.
static REGISTRY: &[(&str, BuildFn)] = &[
    ("fa", |v| {
        Box::new(DenseSupport {
            name: "fa",
            k: v.k_fixed.unwrap_or(1),
            precisions: PrecisionStructure::Shared,
        })
    }),
    ("afa", |v| {
        Box::new(DenseSupport {
            name: "afa",
            k: v.k_fixed.unwrap_or(1),
            precisions: PrecisionStructure::PerFactor,
        })
    }),
    ("sfa", |v| {
        Box::new(FiniteSparseSupport {
            k: v.k_fixed.unwrap_or(1),
            precisions: v.precision_structure(),
        })
    }),
    ("fok", |v| {
        Box::new(DenseSupport {
            name: "fok",
            k: v.k_fixed.unwrap_or(1),
            precisions: PrecisionStructure::PerElement,
        })
    }),
    ("nsfa", |v| {
        Box::new(IbpSupport {
            precisions: v.precision_structure(),
        })
    }),
];

/// Names of every registered variant, in registry order.
pub fn variant_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(name, _)| *name).collect()
}

pub fn kind_from_name(name: &str) -> Result<VariantKind> {
    match name {
        "fa" => Ok(VariantKind::Fa),
        "afa" => Ok(VariantKind::Afa),
        "sfa" => Ok(VariantKind::Sfa),
        "fok" => Ok(VariantKind::Fok),
        "nsfa" => Ok(VariantKind::Nsfa),
        other => Err(Error::config(format!(
            "unknown variant '{other}' (available: {})",
            variant_names().join(", ")
        ))),
    }
}

/// Resolve a validated variant configuration to its strategy object.
pub fn build_strategy(variant: &ModelVariant) -> Result<Box<dyn ModelStrategy>> {
    variant.validate()?;
    let name = variant.kind.name();
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, build)| build(variant))
        .ok_or_else(|| Error::config(format!("variant '{name}' not registered")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn registry_covers_all_kinds() {
        assert_eq!(variant_names(), vec!["fa", "afa", "sfa", "fok", "nsfa"]);
        for name in variant_names() {
            let kind = kind_from_name(name).unwrap();
            assert_eq!(kind.name(), name);
        }
        assert!(kind_from_name("pca").is_err());
    }

    #[test]
    fn validation_enforces_variant_invariants() {
        let mut v = ModelVariant::new(VariantKind::Nsfa, None);
        v.validate().unwrap();
        v.k_fixed = Some(4);
        assert!(v.validate().is_err());

        let v = ModelVariant::new(VariantKind::Sfa, None);
        assert!(v.validate().is_err());

        let mut v = ModelVariant::new(VariantKind::Fa, Some(3));
        v.sample_alpha = true;
        assert!(v.validate().is_err());

        let mut v = ModelVariant::new(VariantKind::Fa, Some(3));
        v.shared_lambda = false;
        assert!(v.validate().is_err());

        let mut v = ModelVariant::new(VariantKind::Afa, Some(3));
        v.shared_lambda = true;
        assert!(v.validate().is_err());
    }

    #[test]
    fn strategies_report_expected_behavior() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fa = build_strategy(&ModelVariant::new(VariantKind::Fa, Some(3))).unwrap();
        assert!(fa.support_log_odds(1, 4, 1.0).unwrap().is_none());
        assert!(!fa.births_enabled());
        let z = fa.init_support(4, 1.0, &mut rng).unwrap();
        assert_eq!(z, DMatrix::from_element(4, 3, 1));

        let nsfa = build_strategy(&ModelVariant::new(VariantKind::Nsfa, None)).unwrap();
        assert!(nsfa.births_enabled());
        let odds = nsfa.support_log_odds(2, 4, 1.0).unwrap().unwrap();
        assert!((odds - (2f64 / 2.0).ln()).abs() < 1e-12);

        let sfa = build_strategy(&ModelVariant::new(VariantKind::Sfa, Some(2))).unwrap();
        assert!(!sfa.births_enabled());
        let odds = sfa.support_log_odds(0, 2, 1.0).unwrap().unwrap();
        assert!((odds - 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn finite_odds_match_hand_value_and_limit() {
        // m = 0, alpha/K = 1, D = 2: odds (0 + 1) / 2.
        let lo = finite_z_log_odds(0, 2, 1, 1.0).unwrap();
        assert!((lo - 0.5f64.ln()).abs() < 1e-12);
        // Large K approaches the IBP conditional.
        let finite = finite_z_log_odds(3, 10, 100_000, 1.0).unwrap();
        let infinite = ibp::conditional_inclusion_log_odds(3, 10).unwrap();
        assert!((finite - infinite).abs() < 1e-4);
    }

    #[test]
    fn fok_precision_update_uses_conjugate_posterior() {
        // Fixed g, many draws: sample mean approaches (c + 1/2)/(d + g^2/2).
        let g = DMatrix::from_row_slice(1, 1, &[2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (c, d) = (1.0, 1.0);
        let mut total = 0.0;
        let reps = 200_000;
        for _ in 0..reps {
            total += sample_fok_precisions(&g, c, d, &mut rng).unwrap()[(0, 0)];
        }
        let mean = total / reps as f64;
        let expect = (c + 0.5) / (d + 2.0);
        assert!(
            (mean - expect).abs() < 0.01 * expect.max(0.1),
            "mean {mean}, expect {expect}"
        );
    }

    #[test]
    fn sfa_init_is_sparse_for_small_alpha() {
        let sfa = build_strategy(&ModelVariant::new(VariantKind::Sfa, Some(50))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = sfa.init_support(30, 0.5, &mut rng).unwrap();
        let ones: usize = z.iter().map(|&v| v as usize).sum();
        // E[ones] = D * K * (alpha/K) / (alpha/K + 1) ~ 15 at alpha = 0.5.
        assert!(ones < 300, "finite prior drew an implausibly dense support");
    }
}
