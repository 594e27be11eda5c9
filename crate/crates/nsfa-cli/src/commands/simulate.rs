//! The `simulate` command: synthetic data with a known sparse loading
//! structure, written alongside its generating truth so recovery can be
//! scored later with `metrics`.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use anyhow::bail;
use nsfa::eval::{generate_synthetic, random_sparse_supports};
use nsfa::io::{binary_matrix_to_csv, matrix_to_csv, read_matrix};

use crate::manifest::Manifest;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100, conflicts_with = "supports")]
    pub dims: usize,
    #[arg(long, default_value_t = 16, conflicts_with = "supports")]
    pub factors: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Signal-to-noise ratio: empirical signal variance over noise variance.
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    /// Fewest active rows per factor.
    #[arg(long, default_value_t = 6, conflicts_with = "supports")]
    pub min_active: usize,
    /// Most active rows per factor.
    #[arg(long, default_value_t = 16, conflicts_with = "supports")]
    pub max_active: usize,
    /// Binary CSV fixing the support pattern instead of drawing one.
    #[arg(long)]
    pub supports: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created; must be empty).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let supports = match &args.supports {
        Some(path) => {
            let (values, mask) = read_matrix(path)?;
            if mask.iter().any(|&m| !m) {
                bail!("support pattern must have no missing cells");
            }
            if values.iter().any(|&v| v != 0.0 && v != 1.0) {
                bail!("support pattern entries must be 0 or 1");
            }
            values.map(|v| v as u8)
        }
        None => random_sparse_supports(
            args.dims,
            args.factors,
            args.min_active,
            args.max_active,
            &mut rng,
        )?,
    };
    let (dims, factors) = (supports.nrows(), supports.ncols());
    let truth = generate_synthetic(&supports, args.samples, args.snr, &mut rng)?;

    super::ensure_fresh_dir(&args.out)?;
    fs::write(args.out.join("y.csv"), matrix_to_csv(truth.y.values(), None)?)?;
    fs::write(args.out.join("z_true.csv"), binary_matrix_to_csv(&truth.z))?;
    fs::write(args.out.join("g_true.csv"), matrix_to_csv(&truth.g, None)?)?;
    fs::write(args.out.join("x_true.csv"), matrix_to_csv(&truth.x, None)?)?;

    let mut manifest = Manifest::new("simulate", args.seed);
    for (key, value) in [
        ("dims", dims.to_string()),
        ("factors", factors.to_string()),
        ("samples", args.samples.to_string()),
        ("snr", args.snr.to_string()),
        ("noise_variance", truth.noise_variance.to_string()),
    ] {
        manifest.params.insert(key.to_string(), value);
    }
    match &args.supports {
        Some(path) => {
            manifest
                .params
                .insert("supports".to_string(), path.display().to_string());
        }
        None => {
            for (key, value) in [
                ("min_active", args.min_active.to_string()),
                ("max_active", args.max_active.to_string()),
            ] {
                manifest.params.insert(key.to_string(), value);
            }
        }
    }
    manifest.write(&args.out)?;
    println!(
        "simulated {} x {} observations from {} factors into {}",
        dims,
        args.samples,
        factors,
        args.out.display()
    );
    Ok(())
}
