//! The Gibbs/Metropolis sampler over the full model state.
//!
//! One sweep visits, in this order:
//!
//! 1. masked data entries (Gibbs imputation),
//! 2. per row `d`: every support/loading element `(d, k)`, then the
//!    singleton block move when the variant births factors,
//! 3. the activation matrix `X`, jointly per sample column,
//! 4. the concentration `alpha` (when sampled),
//! 5. noise precisions, plus their rate under soft coupling,
//! 6. loading precisions, plus their rate under coupling,
//! 7. a residual-cache audit, refresh, and zero-column cleanup.
//!
//! Draw order within each step is fixed (column-major scans, documented
//! on each update), so a chain is a pure function of `(data, config,
//! seed, stream)`.

pub mod birth;
pub mod updates;
pub mod zg;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ibp;
use crate::math::prob_from_log_odds;
use crate::model::{
    impute_missing, log_likelihood, FeatureState, HyperParams, LoadingPrecisions,
    ObservationMatrix, ResidualCache,
};
use crate::variants::{
    build_strategy, ModelStrategy, ModelVariant, NoiseMode, PrecisionStructure,
};
use birth::{BirthProposalParams, MhWorkspace};
use zg::{collapsed_element, ElementPosterior};

/// Sweep schedule and switches. The `update_*` flags freeze individual
/// blocks for diagnostics; production runs leave them all on.
#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub iterations: usize,
    /// Sweeps discarded before samples are retained.
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    /// Mass the singleton-count proposal spikes on `kappa = 1`.
    pub pi_spike: f64,
    /// Rate multiplier of the proposal's Poisson component.
    pub lambda_mult: f64,
    /// Largest tolerated deviation between the residual cache and
    /// `Y - G X` at the end of a sweep.
    pub drift_tol: f64,
    pub update_zg: bool,
    pub enable_births: bool,
    pub update_x: bool,
    pub update_lambda: bool,
    pub update_noise: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            burn_in: 1500,
            thin: 10,
            pi_spike: 0.1,
            lambda_mult: 1.0,
            drift_tol: 1e-8,
            update_zg: true,
            enable_births: true,
            update_x: true,
            update_lambda: true,
            update_noise: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn_in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::config("thin must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.pi_spike) {
            return Err(Error::config(format!(
                "pi_spike must lie in [0, 1), got {}",
                self.pi_spike
            )));
        }
        if !(self.lambda_mult > 0.0) || !self.lambda_mult.is_finite() {
            return Err(Error::config("lambda_mult must be positive and finite"));
        }
        if !(self.drift_tol > 0.0) {
            return Err(Error::config("drift_tol must be positive"));
        }
        Ok(())
    }
}

/// Per-sweep summary written to the trace. Contains no wall-clock data,
/// so equal seeds give byte-identical traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Columns with at least one active support entry.
    pub k_active: usize,
    /// Observed-data log likelihood.
    pub log_likelihood: f64,
    pub alpha: f64,
    /// Mean over the current loading precision variables (0 when none).
    pub mean_lambda: f64,
    pub mean_psi_inv: f64,
    /// Singleton moves this sweep that proposed a change.
    pub births_proposed: u32,
    pub births_accepted: u32,
}

struct PriorDraw {
    lambda_rate: f64,
    noise_rate: f64,
    alpha: f64,
    state: FeatureState,
    psi_inv: DVector<f64>,
}

/// One MCMC chain: model state plus its own generator.
pub struct Chain {
    data: ObservationMatrix,
    state: FeatureState,
    resid: ResidualCache,
    psi_inv: DVector<f64>,
    alpha: f64,
    /// Current rate of the loading precision prior (`hyper.d` unless the
    /// variant couples it).
    lambda_rate: f64,
    /// Current rate of the noise precision prior (`hyper.b` unless soft
    /// coupled).
    noise_rate: f64,
    hyper: HyperParams,
    variant: ModelVariant,
    strategy: Box<dyn ModelStrategy>,
    cfg: SamplerConfig,
    rng: ChaCha8Rng,
    /// Cached `X_k . X_k` per factor row, valid between `X` changes.
    x_ss: Vec<f64>,
    iteration: usize,
}

impl Chain {
    /// Build a chain with state drawn from the model prior. `stream`
    /// separates parallel chains sharing one `seed`.
    pub fn new(
        data: ObservationMatrix,
        variant: ModelVariant,
        hyper: HyperParams,
        cfg: SamplerConfig,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        variant.validate()?;
        hyper.validate()?;
        cfg.validate()?;
        let strategy = build_strategy(&variant)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let draw = draw_from_prior(&data, &variant, strategy.as_ref(), &hyper, &mut rng)?;
        let resid = ResidualCache::new(&data, &draw.state)?;
        let x_ss = compute_x_ss(&draw.state);
        Ok(Self {
            data,
            state: draw.state,
            resid,
            psi_inv: draw.psi_inv,
            alpha: draw.alpha,
            lambda_rate: draw.lambda_rate,
            noise_rate: draw.noise_rate,
            hyper,
            variant,
            strategy,
            cfg,
            rng,
            x_ss,
            iteration: 0,
        })
    }

    pub fn state(&self) -> &FeatureState {
        &self.state
    }

    pub fn residual(&self) -> &ResidualCache {
        &self.resid
    }

    pub fn psi_inv(&self) -> &DVector<f64> {
        &self.psi_inv
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda_rate(&self) -> f64 {
        self.lambda_rate
    }

    pub fn noise_rate(&self) -> f64 {
        self.noise_rate
    }

    pub fn data(&self) -> &ObservationMatrix {
        &self.data
    }

    pub fn variant(&self) -> &ModelVariant {
        &self.variant
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Observed-data log likelihood of the current state.
    pub fn log_likelihood(&self) -> Result<f64> {
        log_likelihood(&self.data, &self.state, &self.psi_inv)
    }

    /// Collapsed posterior log odds that support entry `(d, k)` is active,
    /// exactly as the sweep computes them. Errors for variants whose
    /// support is frozen.
    pub fn collapsed_zg_log_odds(&self, d: usize, k: usize) -> Result<f64> {
        let m_minus = self.state.m_minus(d, k);
        let prior = self
            .strategy
            .support_log_odds(m_minus, self.state.dims(), self.alpha)?
            .ok_or_else(|| Error::state("support entries are frozen for this variant"))?;
        let ep = self.element_posterior(d, k);
        Ok(prior + ep.log_lik_ratio)
    }

    /// Redraw the whole latent state from the prior, keeping the data and
    /// the generator stream. Used by prior-consistency checks.
    pub fn reinit_from_prior(&mut self) -> Result<()> {
        let draw = draw_from_prior(
            &self.data,
            &self.variant,
            self.strategy.as_ref(),
            &self.hyper,
            &mut self.rng,
        )?;
        self.lambda_rate = draw.lambda_rate;
        self.noise_rate = draw.noise_rate;
        self.alpha = draw.alpha;
        self.state = draw.state;
        self.psi_inv = draw.psi_inv;
        self.resid = ResidualCache::new(&self.data, &self.state)?;
        self.x_ss = compute_x_ss(&self.state);
        self.iteration = 0;
        Ok(())
    }

    /// Replace the data with a draw `Y ~ N(G X, Psi)` from the current
    /// state (fully observed data only). Composing `sweep` with this call
    /// simulates the joint model; the two must agree with independent
    /// prior draws for the sampler to be correct.
    pub fn sample_data_from_model(&mut self) -> Result<()> {
        if !self.data.missing_indices().is_empty() {
            return Err(Error::state(
                "data regeneration requires fully observed data",
            ));
        }
        let mut values = &self.state.g * &self.state.x;
        for n in 0..values.ncols() {
            for d in 0..values.nrows() {
                let sd = self.psi_inv[d].recip().sqrt();
                values[(d, n)] += sd * self.rng.sample::<f64, _>(StandardNormal);
            }
        }
        self.data.replace_values(values)?;
        self.resid.recompute(&self.data, &self.state)
    }

    /// Run `iterations` sweeps, invoking the callback after each one.
    pub fn run<F>(&mut self, iterations: usize, mut on_iteration: F) -> Result<()>
    where
        F: FnMut(&Chain, &TraceRecord) -> Result<()>,
    {
        for _ in 0..iterations {
            let record = self.sweep()?;
            on_iteration(&*self, &record)?;
        }
        Ok(())
    }

    /// One full sweep over every unfrozen block.
    pub fn sweep(&mut self) -> Result<TraceRecord> {
        let mut births_proposed = 0u32;
        let mut births_accepted = 0u32;

        if !self.data.missing_indices().is_empty() {
            impute_missing(&mut self.data, &mut self.resid, &self.psi_inv, &mut self.rng)?;
        }

        if self.cfg.update_zg {
            let births_on = self.cfg.enable_births && self.strategy.births_enabled();
            for d in 0..self.state.dims() {
                self.update_row_supports(d, births_on)?;
                if births_on {
                    let (proposed, accepted) = self.singleton_move(d)?;
                    births_proposed += proposed;
                    births_accepted += accepted;
                }
            }
        }

        if self.cfg.update_x && self.state.k_active() > 0 {
            updates::sample_x_columns(
                &self.data,
                &mut self.state,
                &self.psi_inv,
                &mut self.resid,
                &mut self.rng,
            )?;
            self.x_ss = compute_x_ss(&self.state);
        }

        if self.variant.sample_alpha {
            self.alpha = ibp::sample_alpha(
                self.occupied_columns(),
                self.state.dims(),
                self.hyper.e,
                self.hyper.f,
                &mut self.rng,
            )?;
        }

        if self.cfg.update_noise {
            match self.variant.noise {
                NoiseMode::Independent => updates::sample_noise_independent(
                    &self.data,
                    &self.resid,
                    &mut self.psi_inv,
                    self.hyper.a,
                    self.noise_rate,
                    &mut self.rng,
                )?,
                NoiseMode::Isotropic => updates::sample_noise_isotropic(
                    &self.data,
                    &self.resid,
                    &mut self.psi_inv,
                    self.hyper.a,
                    self.noise_rate,
                    &mut self.rng,
                )?,
                NoiseMode::SoftCoupled => {
                    updates::sample_noise_independent(
                        &self.data,
                        &self.resid,
                        &mut self.psi_inv,
                        self.hyper.a,
                        self.noise_rate,
                        &mut self.rng,
                    )?;
                    self.noise_rate =
                        updates::sample_noise_rate(&self.psi_inv, &self.hyper, &mut self.rng)?;
                }
            }
        }

        if self.cfg.update_lambda {
            updates::sample_loading_precisions(
                &mut self.state,
                self.hyper.c,
                self.lambda_rate,
                &mut self.rng,
            )?;
            if self.variant.couple_lambda_rate {
                self.lambda_rate = updates::sample_precision_rate(
                    &self.state.precisions,
                    &self.hyper,
                    &mut self.rng,
                )?;
            }
        }

        self.audit_and_refresh()?;
        if self.strategy.births_enabled() {
            self.remove_dead_columns();
        }

        self.iteration += 1;
        self.trace_record(births_proposed, births_accepted)
    }

    /// Support/loading scan of row `d`. Entries whose column is active
    /// nowhere else belong to the singleton move and are skipped while
    /// births run; dense variants only redraw the loading.
    fn update_row_supports(&mut self, d: usize, births_on: bool) -> Result<()> {
        let dims = self.state.dims();
        for k in 0..self.state.k_active() {
            let m_minus = self.state.m_minus(d, k);
            let prior = self.strategy.support_log_odds(m_minus, dims, self.alpha)?;
            match prior {
                None => {
                    let ep = self.element_posterior(d, k);
                    let z: f64 = self.rng.sample(StandardNormal);
                    let new_g = ep.mu + z / ep.lambda_post.sqrt();
                    self.apply_loading(d, k, 1, new_g);
                }
                Some(prior_log_odds) => {
                    if births_on && m_minus == 0 {
                        continue;
                    }
                    let ep = self.element_posterior(d, k);
                    let p_active = prob_from_log_odds(prior_log_odds + ep.log_lik_ratio);
                    let u: f64 = self.rng.random();
                    if u < p_active {
                        let z: f64 = self.rng.sample(StandardNormal);
                        let new_g = ep.mu + z / ep.lambda_post.sqrt();
                        self.apply_loading(d, k, 1, new_g);
                    } else {
                        self.apply_loading(d, k, 0, 0.0);
                    }
                }
            }
        }
        Ok(())
    }

    /// Collapsed element posterior at `(d, k)` from the cached residual:
    /// the residual with `g_dk`'s own contribution restored is
    /// `E0_d . X_k = E_d . X_k + g_dk (X_k . X_k)`.
    fn element_posterior(&self, d: usize, k: usize) -> ElementPosterior {
        let n = self.state.samples();
        let mut dot = 0.0;
        for nn in 0..n {
            dot += self.resid.entry(d, nn) * self.state.x[(k, nn)];
        }
        dot += self.state.g[(d, k)] * self.x_ss[k];
        collapsed_element(
            self.psi_inv[d],
            self.state.precisions.at(d, k),
            self.x_ss[k],
            dot,
        )
    }

    /// Set `(z, g)` at `(d, k)` and track the residual row.
    fn apply_loading(&mut self, d: usize, k: usize, new_z: u8, new_g: f64) {
        let old_z = self.state.z[(d, k)];
        let old_g = self.state.g[(d, k)];
        if old_z != new_z {
            self.state.z[(d, k)] = new_z;
            if new_z == 1 {
                self.state.m[k] += 1;
            } else {
                self.state.m[k] -= 1;
            }
        }
        self.state.g[(d, k)] = new_g;
        let coeff = old_g - new_g;
        if coeff != 0.0 {
            for n in 0..self.state.samples() {
                let e = self.resid.entry(d, n) + coeff * self.state.x[(k, n)];
                self.resid.set_entry(d, n, e);
            }
        }
    }

    /// Metropolis-Hastings resample of row `d`'s singleton block: the `j`
    /// current private factors against `kappa` proposed fresh ones, with
    /// their activation rows integrated out and then redrawn. Returns
    /// (proposed, accepted) counts, where trivial `0 -> 0` moves count as
    /// neither.
    fn singleton_move(&mut self, d: usize) -> Result<(u32, u32)> {
        let dims = self.state.dims();
        let n = self.state.samples();
        let gamma_rate = self.alpha / dims as f64;
        let params =
            BirthProposalParams::new(self.cfg.pi_spike, self.cfg.lambda_mult, gamma_rate)?;

        let singles: Vec<usize> = (0..self.state.k_active())
            .filter(|&k| self.state.is_singleton_of(d, k))
            .collect();
        let j = singles.len();

        // Residual row with every singleton's contribution restored.
        let mut resid0: Vec<f64> = (0..n).map(|nn| self.resid.entry(d, nn)).collect();
        for &k in &singles {
            let g = self.state.g[(d, k)];
            for (nn, r) in resid0.iter_mut().enumerate() {
                *r += g * self.state.x[(k, nn)];
            }
        }
        let resid0_ss: f64 = resid0.iter().map(|v| v * v).sum();
        let psi_inv_d = self.psi_inv[d];

        let (kappa_star, log_j_new) = params.propose_kappa(&mut self.rng);
        let log_j_old = params.log_proposal_mass(j);

        // Fresh factors: precision then loading, per factor.
        let mut new_lambdas = Vec::with_capacity(kappa_star);
        let mut new_g = Vec::with_capacity(kappa_star);
        for _ in 0..kappa_star {
            let lam = match &self.state.precisions {
                LoadingPrecisions::Shared(l) => *l,
                LoadingPrecisions::PerFactor(_) => {
                    updates::draw_gamma(self.hyper.c, self.lambda_rate, &mut self.rng)?
                }
                LoadingPrecisions::PerElement(_) => {
                    return Err(Error::state(
                        "singleton moves are undefined for per-element precisions",
                    ))
                }
            };
            new_lambdas.push(lam);
            let z: f64 = self.rng.sample(StandardNormal);
            new_g.push(z / lam.sqrt());
        }

        let new_ws = if kappa_star > 0 {
            Some(MhWorkspace::new(
                DVector::from_vec(new_g.clone()),
                psi_inv_d,
            )?)
        } else {
            None
        };
        let old_ws = if j > 0 {
            let g_old =
                DVector::from_iterator(j, singles.iter().map(|&k| self.state.g[(d, k)]));
            Some(MhWorkspace::new(g_old, psi_inv_d)?)
        } else {
            None
        };
        let ll_new = new_ws
            .as_ref()
            .map_or(0.0, |ws| ws.log_lik_ratio(resid0_ss, n));
        let ll_old = old_ws
            .as_ref()
            .map_or(0.0, |ws| ws.log_lik_ratio(resid0_ss, n));

        let log_a = birth::birth_acceptance_log_ratio(
            kappa_star, ll_new, log_j_new, j, ll_old, log_j_old, gamma_rate,
        );
        let u: f64 = self.rng.random();
        let accept = u.ln() < log_a;
        let nontrivial = kappa_star > 0 || j > 0;

        if accept {
            for &k in singles.iter().rev() {
                self.state.remove_column(k);
                self.x_ss.remove(k);
            }
            if let Some(ws) = &new_ws {
                let xs = ws.instantiate_x(&resid0, &mut self.rng);
                let mut x_row = vec![0.0; n];
                for (i, (&g, &lam)) in new_g.iter().zip(&new_lambdas).enumerate() {
                    for nn in 0..n {
                        x_row[nn] = xs[(i, nn)];
                    }
                    self.state.append_singleton(d, g, lam, &x_row);
                    self.x_ss.push(x_row.iter().map(|v| v * v).sum());
                }
                for nn in 0..n {
                    let mut e = resid0[nn];
                    for (i, &g) in new_g.iter().enumerate() {
                        e -= g * xs[(i, nn)];
                    }
                    self.resid.set_entry(d, nn, e);
                }
            } else {
                for nn in 0..n {
                    self.resid.set_entry(d, nn, resid0[nn]);
                }
            }
        } else if let Some(ws) = &old_ws {
            // Kept singletons still get fresh activation rows: their full
            // conditional is exactly the instantiation law.
            let xs = ws.instantiate_x(&resid0, &mut self.rng);
            for (i, &k) in singles.iter().enumerate() {
                let mut ss = 0.0;
                for nn in 0..n {
                    let v = xs[(i, nn)];
                    self.state.x[(k, nn)] = v;
                    ss += v * v;
                }
                self.x_ss[k] = ss;
            }
            for nn in 0..n {
                let mut e = resid0[nn];
                for (i, &k) in singles.iter().enumerate() {
                    e -= self.state.g[(d, k)] * xs[(i, nn)];
                }
                self.resid.set_entry(d, nn, e);
            }
        }

        let proposed = u32::from(nontrivial);
        let accepted = u32::from(nontrivial && accept);
        Ok((proposed, accepted))
    }

    /// Verify the incremental caches, then rebuild them to wash rounding.
    fn audit_and_refresh(&mut self) -> Result<()> {
        let drift = self.resid.max_drift(&self.data, &self.state);
        if !(drift <= self.cfg.drift_tol) {
            return Err(Error::state(format!(
                "residual cache drift {drift:.3e} exceeds tolerance {:.3e} at iteration {}",
                self.cfg.drift_tol, self.iteration
            )));
        }
        let fresh = compute_x_ss(&self.state);
        for (k, (&cached, &exact)) in self.x_ss.iter().zip(&fresh).enumerate() {
            if !((cached - exact).abs() <= self.cfg.drift_tol * (1.0 + exact.abs())) {
                return Err(Error::state(format!(
                    "activation norm cache drifted at column {k}"
                )));
            }
        }
        self.x_ss = fresh;
        self.resid.recompute(&self.data, &self.state)?;
        self.state.audit()
    }

    /// Drop columns with empty support. Under birth moves these cannot
    /// arise from the sweep itself, but the infinite prior assigns them no
    /// mass, so they are never kept materialized.
    fn remove_dead_columns(&mut self) {
        let mut k = 0;
        while k < self.state.k_active() {
            if self.state.m[k] == 0 {
                self.state.remove_column(k);
                self.x_ss.remove(k);
            } else {
                k += 1;
            }
        }
    }

    fn occupied_columns(&self) -> usize {
        self.state.m.iter().filter(|&&m| m > 0).count()
    }

    fn trace_record(&self, births_proposed: u32, births_accepted: u32) -> Result<TraceRecord> {
        let mean_lambda = match &self.state.precisions {
            LoadingPrecisions::Shared(l) => *l,
            LoadingPrecisions::PerFactor(v) => {
                if v.is_empty() {
                    0.0
                } else {
                    v.mean()
                }
            }
            LoadingPrecisions::PerElement(m) => {
                if m.is_empty() {
                    0.0
                } else {
                    m.mean()
                }
            }
        };
        Ok(TraceRecord {
            iteration: self.iteration,
            k_active: self.occupied_columns(),
            log_likelihood: self.log_likelihood()?,
            alpha: self.alpha,
            mean_lambda,
            mean_psi_inv: self.psi_inv.mean(),
            births_proposed,
            births_accepted,
        })
    }
}

/// Ancestral draw of the latent state. Order: loading precision rate,
/// noise rate, concentration, support, loading precisions, loadings,
/// activations, noise precisions.
fn draw_from_prior(
    data: &ObservationMatrix,
    variant: &ModelVariant,
    strategy: &dyn ModelStrategy,
    hyper: &HyperParams,
    rng: &mut ChaCha8Rng,
) -> Result<PriorDraw> {
    let dims = data.dims();
    let n = data.samples();
    let lambda_rate = if variant.couple_lambda_rate {
        updates::draw_gamma(hyper.c0, hyper.d0, rng)?
    } else {
        hyper.d
    };
    let noise_rate = if variant.noise == NoiseMode::SoftCoupled {
        updates::draw_gamma(hyper.a0, hyper.b0, rng)?
    } else {
        hyper.b
    };
    let alpha = if variant.sample_alpha {
        updates::draw_gamma(hyper.e, hyper.f, rng)?
    } else {
        hyper.alpha
    };
    let z = strategy.init_support(dims, alpha, rng)?;
    let k = z.ncols();
    let precisions = match strategy.precision_structure() {
        PrecisionStructure::Shared => {
            LoadingPrecisions::Shared(updates::draw_gamma(hyper.c, lambda_rate, rng)?)
        }
        PrecisionStructure::PerFactor => {
            let mut v = DVector::zeros(k);
            for kk in 0..k {
                v[kk] = updates::draw_gamma(hyper.c, lambda_rate, rng)?;
            }
            LoadingPrecisions::PerFactor(v)
        }
        PrecisionStructure::PerElement => {
            let mut m = nalgebra::DMatrix::zeros(dims, k);
            for kk in 0..k {
                for d in 0..dims {
                    m[(d, kk)] = updates::draw_gamma(hyper.c, lambda_rate, rng)?;
                }
            }
            LoadingPrecisions::PerElement(m)
        }
    };
    let mut g = nalgebra::DMatrix::zeros(dims, k);
    for kk in 0..k {
        for d in 0..dims {
            if z[(d, kk)] == 1 {
                let zdraw: f64 = rng.sample(StandardNormal);
                g[(d, kk)] = zdraw / precisions.at(d, kk).sqrt();
            }
        }
    }
    let mut x = nalgebra::DMatrix::zeros(k, n);
    for nn in 0..n {
        for kk in 0..k {
            x[(kk, nn)] = rng.sample(StandardNormal);
        }
    }
    let mut psi_inv = DVector::zeros(dims);
    if variant.noise == NoiseMode::Isotropic {
        let shared = updates::draw_gamma(hyper.a, noise_rate, rng)?;
        psi_inv.fill(shared);
    } else {
        for d in 0..dims {
            psi_inv[d] = updates::draw_gamma(hyper.a, noise_rate, rng)?;
        }
    }
    let state = FeatureState::new(z, g, x, precisions)?;
    Ok(PriorDraw {
        lambda_rate,
        noise_rate,
        alpha,
        state,
        psi_inv,
    })
}

fn compute_x_ss(state: &FeatureState) -> Vec<f64> {
    (0..state.k_active())
        .map(|k| state.x.row(k).iter().map(|&v| v * v).sum())
        .collect()
}
