//! The `metrics` command: score an estimated loading matrix against the
//! truth that generated the data, and optionally summarize a trace.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};

use nsfa::eval::{posterior_k_histogram, reconstruction_error, support_metrics, MatchMode};
use nsfa::io::{parse_trace_csv, read_matrix};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Matching {
    /// Compare loadings exactly as stored.
    Verbatim,
    /// Allow a global sign flip per factor before matching.
    SignAware,
}

impl Matching {
    fn mode(self) -> MatchMode {
        match self {
            Matching::Verbatim => MatchMode::Verbatim,
            Matching::SignAware => MatchMode::SignAware,
        }
    }
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Generating loading matrix CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Estimated loading matrix CSV.
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long, value_enum, default_value_t = Matching::SignAware)]
    pub mode: Matching,
    /// Loadings at or below this magnitude count as inactive support.
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    /// Trace CSV; adds factor-count summaries over post-burn-in rows.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Iterations to discard from the trace summaries.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
}

pub fn run(args: &MetricsArgs) -> Result<()> {
    let (g_true, _) = read_matrix(&args.truth)?;
    let (g_hat, _) = read_matrix(&args.estimate)?;
    let err = reconstruction_error(&g_true, &g_hat, args.mode.mode())?;
    let support = support_metrics(&g_true, &g_hat, args.threshold, args.mode.mode())?;
    println!("metric,value");
    println!("reconstruction_error,{err}");
    println!("support_precision,{}", support.precision);
    println!("support_recall,{}", support.recall);

    if let Some(path) = &args.trace {
        let records = parse_trace_csv(&fs::read_to_string(path)?)?;
        let ks: Vec<usize> = records
            .iter()
            .filter(|r| r.iteration > args.burn_in)
            .map(|r| r.k_active as usize)
            .collect();
        if !ks.is_empty() {
            let mean_k = ks.iter().sum::<usize>() as f64 / ks.len() as f64;
            println!("mean_k,{mean_k}");
            // Ties break toward the smaller count, as in run's metrics.
            let mut mode_k = (0usize, 0usize);
            for (k, count) in posterior_k_histogram(&ks) {
                if count > mode_k.1 {
                    mode_k = (k, count);
                }
            }
            println!("mode_k,{}", mode_k.0);
        }
    }
    Ok(())
}
