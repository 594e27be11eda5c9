//! The `run` command: fit one model to one data matrix, possibly with
//! several independent chains, and leave behind a self-describing output
//! directory.
//!
//! Layout, one subdirectory per chain:
//!
//! ```text
//! out/
//!   manifest.json            inventory with sha256 digests
//!   holdout.csv              held-out cells (when run.holdout_fraction > 0)
//!   chain_00/
//!     trace.csv              one row per iteration, no wall-clock columns
//!     timing.csv             wall-clock per iteration, excluded from digests
//!     metrics.csv            posterior summaries for this chain
//!     k_histogram.csv        factor-count occupancy after burn-in
//!     samples/               thinned post-burn-in draws (run.save_samples)
//! ```
//!
//! Chain `c` uses RNG stream `c` over the shared seed, so runs with equal
//! seed and config are byte-identical everywhere except `timing.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nsfa::eval::{
    heldout_log_density, make_holdout, pool_predictive, posterior_k_histogram, PredictiveMode,
};
use nsfa::io::{binary_matrix_to_csv, matrix_to_csv, read_matrix, TraceWriter};
use nsfa::model::{LoadingPrecisions, ObservationMatrix};
use nsfa::sampler::Chain;

use crate::config::Settings;
use crate::manifest::{sha256_file, DataInfo, Manifest};

/// Stream reserved for the holdout mask; chains use streams `0..chains`.
const HOLDOUT_STREAM: u64 = u64::MAX;

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Observation CSV: rows are dimensions, columns are samples, NA marks
    /// a missing cell.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory (created; must be empty).
    #[arg(long)]
    pub out: PathBuf,
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

pub fn run(args: &RunArgs) -> Result<()> {
    let settings = Settings::load(args.config.as_deref(), &args.set)?;
    let (values, mask) = read_matrix(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let fully_observed = mask.iter().all(|&m| m);

    let (train, held) = if settings.holdout_fraction > 0.0 {
        if !fully_observed {
            bail!(
                "run.holdout_fraction > 0 needs fully observed data; \
                 set run.holdout_fraction = 0 to keep the NA cells as the only gaps"
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(HOLDOUT_STREAM);
        make_holdout(&values, settings.holdout_fraction, &mut rng)?
    } else {
        (ObservationMatrix::new(values.clone(), mask)?, Vec::new())
    };

    super::ensure_fresh_dir(&args.out)?;
    if !held.is_empty() {
        let mut text = String::from("dim,sample\n");
        for &(d, n) in &held {
            text.push_str(&format!("{d},{n}\n"));
        }
        fs::write(args.out.join("holdout.csv"), text)?;
    }

    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for c in 0..settings.chains {
            let train = &train;
            let held = &held;
            let values = &values;
            let settings = &settings;
            let out = args.out.as_path();
            handles.push(scope.spawn(move || run_chain(c, train, held, values, settings, out)));
        }
        for handle in handles {
            handle.join().map_err(|_| anyhow!("chain thread panicked"))??;
        }
        Ok(())
    })?;

    let mut manifest = Manifest::new("run", settings.seed);
    manifest.chains = Some(settings.chains);
    manifest.data = Some(DataInfo {
        path: args.data.display().to_string(),
        sha256: sha256_file(&args.data)?,
        dims: values.nrows(),
        samples: values.ncols(),
    });
    manifest.params = settings.echo().clone();
    manifest.write(&args.out)?;
    println!(
        "ran {} chain(s) of {} iterations into {}",
        settings.chains,
        settings.sampler.iterations,
        args.out.display()
    );
    Ok(())
}

fn run_chain(
    index: usize,
    train: &ObservationMatrix,
    held: &[(usize, usize)],
    y_true: &DMatrix<f64>,
    settings: &Settings,
    out: &Path,
) -> Result<()> {
    let dir = out.join(format!("chain_{index:02}"));
    fs::create_dir_all(&dir)?;
    let samples_dir = dir.join("samples");
    if settings.save_samples {
        fs::create_dir_all(&samples_dir)?;
    }

    let mut chain = Chain::new(
        train.clone(),
        settings.variant,
        settings.hyper,
        settings.sampler,
        settings.seed,
        index as u64,
    )?;

    let mut trace = TraceWriter::new(BufWriter::new(File::create(dir.join("trace.csv"))?))?;
    let mut timing = BufWriter::new(File::create(dir.join("timing.csv"))?);
    writeln!(timing, "iteration,millis")?;
    let mut hyper_rows = if settings.save_samples {
        let mut w = BufWriter::new(File::create(samples_dir.join("hyper.csv"))?);
        writeln!(w, "iteration,alpha,lambda_rate,noise_rate")?;
        Some(w)
    } else {
        None
    };

    let burn = settings.sampler.burn_in;
    let thin = settings.sampler.thin;
    let mut ks: Vec<usize> = Vec::new();
    let mut logliks: Vec<f64> = Vec::new();
    let mut lpds: Vec<f64> = Vec::new();
    let mut last = Instant::now();

    chain.run(settings.sampler.iterations, |chain, rec| {
        let now = Instant::now();
        writeln!(
            timing,
            "{},{:.3}",
            rec.iteration,
            (now - last).as_secs_f64() * 1e3
        )?;
        last = now;
        trace.record(rec)?;
        if rec.iteration > burn && (rec.iteration - burn) % thin == 0 {
            ks.push(rec.k_active as usize);
            logliks.push(rec.log_likelihood);
            if !held.is_empty() {
                let mean = &chain.state().g * &chain.state().x;
                lpds.push(heldout_log_density(y_true, held, &mean, chain.psi_inv())?);
            }
            if settings.save_samples {
                save_sample(&samples_dir, rec.iteration, chain)?;
                if let Some(w) = hyper_rows.as_mut() {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        rec.iteration,
                        chain.alpha(),
                        chain.lambda_rate(),
                        chain.noise_rate()
                    )?;
                }
            }
        }
        Ok(())
    })?;

    trace.into_inner().flush()?;
    timing.flush()?;
    if let Some(mut w) = hyper_rows {
        w.flush()?;
    }

    let mut metrics = String::from("metric,value\n");
    metrics.push_str(&format!("saved_samples,{}\n", ks.len()));
    metrics.push_str(&format!("final_k,{}\n", chain.state().k_active()));
    if !ks.is_empty() {
        let mean_k = ks.iter().sum::<usize>() as f64 / ks.len() as f64;
        metrics.push_str(&format!("mean_k,{mean_k}\n"));
        metrics.push_str(&format!("mode_k,{}\n", mode(&ks)));
        let mean_ll = logliks.iter().sum::<f64>() / logliks.len() as f64;
        metrics.push_str(&format!("mean_log_likelihood,{mean_ll}\n"));
    }
    if !lpds.is_empty() {
        metrics.push_str(&format!("heldout_cells,{}\n", held.len()));
        let lpd = pool_predictive(&lpds, PredictiveMode::LogOfMean)?;
        let lower = pool_predictive(&lpds, PredictiveMode::MeanOfLog)?;
        metrics.push_str(&format!("heldout_lpd,{lpd}\n"));
        metrics.push_str(&format!("heldout_lpd_lower,{lower}\n"));
    }
    fs::write(dir.join("metrics.csv"), metrics)?;

    let mut hist = String::from("k,count\n");
    for (k, count) in posterior_k_histogram(&ks) {
        hist.push_str(&format!("{k},{count}\n"));
    }
    fs::write(dir.join("k_histogram.csv"), hist)?;
    Ok(())
}

/// Smallest factor count among the most visited.
fn mode(ks: &[usize]) -> usize {
    let mut best = (0usize, 0usize);
    for (k, count) in posterior_k_histogram(ks) {
        if count > best.1 {
            best = (k, count);
        }
    }
    best.0
}

fn save_sample(dir: &Path, iteration: usize, chain: &Chain) -> nsfa::Result<()> {
    let state = chain.state();
    fs::write(
        dir.join(format!("G_{iteration:06}.csv")),
        matrix_to_csv(&state.g, None)?,
    )?;
    fs::write(
        dir.join(format!("X_{iteration:06}.csv")),
        matrix_to_csv(&state.x, None)?,
    )?;
    fs::write(
        dir.join(format!("Z_{iteration:06}.csv")),
        binary_matrix_to_csv(&state.z),
    )?;
    let lambda = match &state.precisions {
        LoadingPrecisions::Shared(l) => matrix_to_csv(&DMatrix::from_element(1, 1, *l), None)?,
        LoadingPrecisions::PerFactor(ls) => {
            matrix_to_csv(&DMatrix::from_column_slice(ls.len(), 1, ls.as_slice()), None)?
        }
        LoadingPrecisions::PerElement(ls) => matrix_to_csv(ls, None)?,
    };
    fs::write(dir.join(format!("lambda_{iteration:06}.csv")), lambda)?;
    let psi = chain.psi_inv();
    fs::write(
        dir.join(format!("psi_inv_{iteration:06}.csv")),
        matrix_to_csv(&DMatrix::from_column_slice(psi.len(), 1, psi.as_slice()), None)?,
    )?;
    Ok(())
}
