//! The `timing` command: per-sweep wall-clock cost along one size axis,
//! everything else held at its base value. The fixed-K sparse variant is
//! used so the factor count cannot wander during measurement.

use std::time::Instant;

use anyhow::Result;
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nsfa::eval::{generate_synthetic, random_sparse_supports};
use nsfa::model::HyperParams;
use nsfa::sampler::{Chain, SamplerConfig};
use nsfa::variants::{ModelVariant, VariantKind};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Axis {
    Dims,
    Samples,
    Factors,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Dims => "dims",
            Axis::Samples => "samples",
            Axis::Factors => "factors",
        }
    }
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    /// Axis to sweep.
    #[arg(long, value_enum)]
    pub ladder: Axis,
    /// Comma-separated sizes for the swept axis.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub dims: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub factors: usize,
    /// Timed sweeps per point (after three warmup sweeps).
    #[arg(long, default_value_t = 30)]
    pub iterations: usize,
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(args: &TimingArgs) -> Result<()> {
    println!("axis,value,seconds_per_sweep");
    for &value in &args.values {
        let (dims, samples, factors) = match args.ladder {
            Axis::Dims => (value, args.samples, args.factors),
            Axis::Samples => (args.dims, value, args.factors),
            Axis::Factors => (args.dims, args.samples, value),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let min_active = (dims / 12).max(1);
        let max_active = (dims / 6).max(min_active);
        let supports = random_sparse_supports(dims, factors, min_active, max_active, &mut rng)?;
        let truth = generate_synthetic(&supports, samples, args.snr, &mut rng)?;
        let variant = ModelVariant::new(VariantKind::Sfa, Some(factors));
        let mut chain = Chain::new(
            truth.y,
            variant,
            HyperParams::default(),
            SamplerConfig::default(),
            args.seed,
            0,
        )?;
        for _ in 0..3 {
            chain.sweep()?;
        }
        let start = Instant::now();
        for _ in 0..args.iterations {
            chain.sweep()?;
        }
        let per_sweep = start.elapsed().as_secs_f64() / args.iterations as f64;
        println!("{},{value},{per_sweep:.6}", args.ladder.name());
    }
    Ok(())
}
