//! The `ibp-draw` command: generative draws from the Indian buffet process
//! prior. Per-draw counts go to stdout as CSV; the matrices themselves are
//! written only when an output directory is given.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nsfa::ibp::sample_ibp;
use nsfa::io::binary_matrix_to_csv;

#[derive(Args, Debug)]
pub struct IbpDrawArgs {
    /// Rows of the support matrix (objects in the buffet).
    #[arg(long)]
    pub dims: usize,
    /// Concentration; the expected column count is alpha times the
    /// dims-th harmonic number.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the drawn matrices as z_NNNN.csv (created; must be
    /// empty). Omit to print counts only.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &IbpDrawArgs) -> Result<()> {
    if let Some(dir) = &args.out {
        super::ensure_fresh_dir(dir)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    println!("draw,k_plus,active_total");
    for i in 0..args.draws {
        let z = sample_ibp(args.dims, args.alpha, &mut rng)?;
        let ones = z.iter().filter(|&&v| v == 1).count();
        println!("{i},{},{ones}", z.ncols());
        if let Some(dir) = &args.out {
            fs::write(dir.join(format!("z_{i:04}.csv")), binary_matrix_to_csv(&z))?;
        }
    }
    Ok(())
}
