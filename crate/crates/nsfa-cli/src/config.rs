//! Flat key = value run configuration.
//!
//! Settings merge three layers, later wins: built-in defaults, an optional
//! config file, and repeated `--set key=value` flags. Every key is listed
//! in [`ALLOWED`]; anything else is rejected so typos fail loudly instead
//! of silently running defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use nsfa::model::HyperParams;
use nsfa::sampler::SamplerConfig;
use nsfa::variants::{kind_from_name, ModelVariant, NoiseMode};

/// Every recognized key with its default. `None` means "absent unless the
/// user sets it": `model.k` stays unset for nsfa, and `model.shared_lambda`
/// falls back to the variant's convention.
const ALLOWED: &[(&str, Option<&str>)] = &[
    ("model.variant", Some("nsfa")),
    ("model.k", None),
    ("model.noise", Some("independent")),
    ("model.sample_alpha", Some("false")),
    ("model.shared_lambda", None),
    ("model.couple_lambda_rate", Some("false")),
    ("hyper.alpha", Some("1.0")),
    ("hyper.e", Some("1.0")),
    ("hyper.f", Some("1.0")),
    ("hyper.c", Some("1.0")),
    ("hyper.d", Some("1.0")),
    ("hyper.c0", Some("1.0")),
    ("hyper.d0", Some("1.0")),
    ("hyper.a", Some("1.0")),
    ("hyper.b", Some("1.0")),
    ("hyper.a0", Some("1.0")),
    ("hyper.b0", Some("1.0")),
    ("sampler.iterations", Some("3000")),
    ("sampler.burn_in", Some("1500")),
    ("sampler.thin", Some("10")),
    ("sampler.drift_tol", Some("1e-8")),
    ("proposal.pi_spike", Some("0.1")),
    ("proposal.lambda_mult", Some("1.0")),
    ("run.seed", Some("0")),
    ("run.chains", Some("1")),
    ("run.holdout_fraction", Some("0.1")),
    ("run.save_samples", Some("true")),
];

/// Fully resolved settings plus the merged key/value map for the manifest.
#[derive(Debug, Clone)]
pub struct Settings {
    pub variant: ModelVariant,
    pub hyper: HyperParams,
    pub sampler: SamplerConfig,
    pub seed: u64,
    pub chains: usize,
    pub holdout_fraction: f64,
    pub save_samples: bool,
    echo: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(config_path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut map: BTreeMap<String, String> = ALLOWED
            .iter()
            .filter_map(|&(k, v)| v.map(|v| (k.to_string(), v.to_string())))
            .collect();
        if let Some(path) = config_path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = split_pair(line)
                    .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
                insert_known(&mut map, key, value)?;
            }
        }
        for pair in overrides {
            let (key, value) = split_pair(pair).context("parsing --set flag")?;
            insert_known(&mut map, key, value)?;
        }
        Self::resolve(map)
    }

    fn resolve(mut map: BTreeMap<String, String>) -> Result<Self> {
        let kind = kind_from_name(&get(&map, "model.variant")?)?;
        let k_fixed = match map.get("model.k") {
            Some(v) => Some(
                v.parse::<usize>()
                    .with_context(|| format!("model.k = {v}"))?,
            ),
            None => None,
        };
        let mut variant = ModelVariant::new(kind, k_fixed);
        variant.noise = NoiseMode::from_name(&get(&map, "model.noise")?)?;
        variant.sample_alpha = parse_bool(&map, "model.sample_alpha")?;
        if map.contains_key("model.shared_lambda") {
            variant.shared_lambda = parse_bool(&map, "model.shared_lambda")?;
        }
        variant.couple_lambda_rate = parse_bool(&map, "model.couple_lambda_rate")?;
        variant.validate()?;
        // Echo the resolved value so the manifest records what actually ran.
        map.insert(
            "model.shared_lambda".into(),
            variant.shared_lambda.to_string(),
        );

        let hyper = HyperParams {
            alpha: parse_f64(&map, "hyper.alpha")?,
            e: parse_f64(&map, "hyper.e")?,
            f: parse_f64(&map, "hyper.f")?,
            c: parse_f64(&map, "hyper.c")?,
            d: parse_f64(&map, "hyper.d")?,
            c0: parse_f64(&map, "hyper.c0")?,
            d0: parse_f64(&map, "hyper.d0")?,
            a: parse_f64(&map, "hyper.a")?,
            b: parse_f64(&map, "hyper.b")?,
            a0: parse_f64(&map, "hyper.a0")?,
            b0: parse_f64(&map, "hyper.b0")?,
        };
        hyper.validate()?;

        let sampler = SamplerConfig {
            iterations: parse_usize(&map, "sampler.iterations")?,
            burn_in: parse_usize(&map, "sampler.burn_in")?,
            thin: parse_usize(&map, "sampler.thin")?,
            drift_tol: parse_f64(&map, "sampler.drift_tol")?,
            pi_spike: parse_f64(&map, "proposal.pi_spike")?,
            lambda_mult: parse_f64(&map, "proposal.lambda_mult")?,
            ..SamplerConfig::default()
        };
        sampler.validate()?;

        let seed = get(&map, "run.seed")?
            .parse::<u64>()
            .context("run.seed")?;
        let chains = parse_usize(&map, "run.chains")?;
        if chains == 0 {
            bail!("run.chains must be at least 1");
        }
        let holdout_fraction = parse_f64(&map, "run.holdout_fraction")?;
        if !(0.0..1.0).contains(&holdout_fraction) {
            bail!("run.holdout_fraction must lie in [0, 1), got {holdout_fraction}");
        }
        let save_samples = parse_bool(&map, "run.save_samples")?;

        Ok(Self {
            variant,
            hyper,
            sampler,
            seed,
            chains,
            holdout_fraction,
            save_samples,
            echo: map,
        })
    }

    /// The merged, resolved key/value map, for the run manifest.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.echo
    }
}

fn split_pair(s: &str) -> Result<(&str, &str)> {
    match s.split_once('=') {
        Some((k, v)) => Ok((k.trim(), v.trim())),
        None => bail!("expected key = value, got '{s}'"),
    }
}

fn insert_known(map: &mut BTreeMap<String, String>, key: &str, value: &str) -> Result<()> {
    if !ALLOWED.iter().any(|&(k, _)| k == key) {
        bail!("unknown config key '{key}'");
    }
    map.insert(key.to_string(), value.to_string());
    Ok(())
}

fn get(map: &BTreeMap<String, String>, key: &str) -> Result<String> {
    Ok(map
        .get(key)
        .unwrap_or_else(|| panic!("default missing for {key}"))
        .clone())
}

fn parse_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = get(map, key)?;
    v.parse().with_context(|| format!("{key} = {v}"))
}

fn parse_usize(map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    let v = get(map, key)?;
    v.parse().with_context(|| format!("{key} = {v}"))
}

fn parse_bool(map: &BTreeMap<String, String>, key: &str) -> Result<bool> {
    let v = get(map, key)?;
    match v.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("{key} must be true or false, got '{v}'"),
    }
}

