//! CSV serialization for data matrices, sampler traces, and posterior
//! samples.
//!
//! Matrix files hold one row per dimension, comma-separated, with `NA`
//! marking missing entries. Values are written with the standard float
//! formatter, which emits the shortest string that parses back to the
//! identical bits, so write/read round-trips are exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sampler::TraceRecord;

/// Token marking a missing entry.
pub const NA: &str = "NA";

/// Header of trace files.
pub const TRACE_HEADER: &str =
    "iteration,k_active,log_likelihood,alpha,mean_lambda,mean_psi_inv,births_proposed,births_accepted";

/// Render a matrix as CSV. Entries where `mask` is false are written as
/// `NA`; omit the mask for fully observed output.
pub fn matrix_to_csv(values: &DMatrix<f64>, mask: Option<&DMatrix<bool>>) -> Result<String> {
    if let Some(m) = mask {
        if m.shape() != values.shape() {
            return Err(Error::shape("mask shape does not match matrix"));
        }
    }
    let mut out = String::new();
    for d in 0..values.nrows() {
        for n in 0..values.ncols() {
            if n > 0 {
                out.push(',');
            }
            let observed = mask.map_or(true, |m| m[(d, n)]);
            if observed {
                out.push_str(&values[(d, n)].to_string());
            } else {
                out.push_str(NA);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parse a CSV matrix. Returns values and an observation mask (`NA`
/// entries are false and hold 0.0). Errors carry 1-based line numbers.
pub fn parse_matrix_csv(text: &str) -> Result<(DMatrix<f64>, DMatrix<bool>)> {
    let mut rows: Vec<Vec<(f64, bool)>> = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if text.lines().skip(idx).all(|l| l.trim().is_empty()) {
                break;
            }
            return Err(Error::Parse {
                line: line_no,
                msg: "blank line inside matrix".into(),
            });
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let field = field.trim();
            if field == NA {
                row.push((0.0, false));
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("cannot parse '{field}' as a number"),
                })?;
                row.push((v, true));
            }
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {w} fields, found {}", row.len()),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "file holds no data".into(),
        });
    }
    let dims = rows.len();
    let cols = width.unwrap();
    let values = DMatrix::from_fn(dims, cols, |d, n| rows[d][n].0);
    let mask = DMatrix::from_fn(dims, cols, |d, n| rows[d][n].1);
    Ok((values, mask))
}

/// Write a matrix CSV file.
pub fn write_matrix(
    path: impl AsRef<Path>,
    values: &DMatrix<f64>,
    mask: Option<&DMatrix<bool>>,
) -> Result<()> {
    fs::write(path, matrix_to_csv(values, mask)?)?;
    Ok(())
}

/// Read a matrix CSV file.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, DMatrix<bool>)> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

/// Render an integer matrix (support patterns) as CSV.
pub fn binary_matrix_to_csv(z: &DMatrix<u8>) -> String {
    let mut out = String::new();
    for d in 0..z.nrows() {
        for n in 0..z.ncols() {
            if n > 0 {
                out.push(',');
            }
            out.push_str(&z[(d, n)].to_string());
        }
        out.push('\n');
    }
    out
}

/// Streaming trace writer: header on construction, one line per record.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{TRACE_HEADER}")?;
        Ok(Self { out })
    }

    pub fn record(&mut self, rec: &TraceRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{}",
            rec.iteration,
            rec.k_active,
            rec.log_likelihood,
            rec.alpha,
            rec.mean_lambda,
            rec.mean_psi_inv,
            rec.births_proposed,
            rec.births_accepted
        )?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Parse a trace file back into records (used by the metrics command).
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == TRACE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing or unexpected trace header".into(),
            });
        }
    }
    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let parse_usize = |s: &str, what: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse {what} '{s}'"),
            })
        };
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse {what} '{s}'"),
            })
        };
        records.push(TraceRecord {
            iteration: parse_usize(fields[0], "iteration")?,
            k_active: parse_usize(fields[1], "k_active")?,
            log_likelihood: parse_f64(fields[2], "log_likelihood")?,
            alpha: parse_f64(fields[3], "alpha")?,
            mean_lambda: parse_f64(fields[4], "mean_lambda")?,
            mean_psi_inv: parse_f64(fields[5], "mean_psi_inv")?,
            births_proposed: parse_usize(fields[6], "births_proposed")? as u32,
            births_accepted: parse_usize(fields[7], "births_accepted")? as u32,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip_hand_case() {
        let values = DMatrix::from_row_slice(2, 3, &[1.5, -2.0, 0.1, 0.0, 3.25, -0.5]);
        let mut mask = DMatrix::from_element(2, 3, true);
        mask[(1, 0)] = false;
        let text = matrix_to_csv(&values, Some(&mask)).unwrap();
        assert_eq!(text, "1.5,-2,0.1\nNA,3.25,-0.5\n");
        let (parsed, parsed_mask) = parse_matrix_csv(&text).unwrap();
        assert_eq!(parsed_mask, mask);
        for d in 0..2 {
            for n in 0..3 {
                if mask[(d, n)] {
                    assert_eq!(parsed[(d, n)], values[(d, n)]);
                } else {
                    assert_eq!(parsed[(d, n)], 0.0);
                }
            }
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_matrix_csv("1.0,2.0\n3.0,oops\n").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("oops"));
            }
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_matrix_csv("1.0,2.0\n3.0\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(parse_matrix_csv("").is_err());
    }

    #[test]
    fn trace_round_trip() {
        let records = vec![
            TraceRecord {
                iteration: 1,
                k_active: 4,
                log_likelihood: -123.456,
                alpha: 1.0,
                mean_lambda: 0.5,
                mean_psi_inv: 2.0,
                births_proposed: 3,
                births_accepted: 1,
            },
            TraceRecord {
                iteration: 2,
                k_active: 5,
                log_likelihood: -120.0,
                alpha: 1.25,
                mean_lambda: 0.75,
                mean_psi_inv: 2.5,
                births_proposed: 0,
                births_accepted: 0,
            },
        ];
        let mut writer = TraceWriter::new(Vec::new()).unwrap();
        for r in &records {
            writer.record(r).unwrap();
        }
        let text = String::from_utf8(writer.into_inner()).unwrap();
        let parsed = parse_trace_csv(&text).unwrap();
        assert_eq!(parsed, records);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            use rand::{RngExt, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values = DMatrix::from_fn(rows, cols, |_, _| {
                // Mix magnitudes to exercise the formatter.
                let v: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
                v * 10f64.powi(rng.random_range(-8..8))
            });
            let mask = DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() > 0.2);
            prop_assume!(mask.iter().any(|&m| m));
            let text = matrix_to_csv(&values, Some(&mask)).unwrap();
            let (parsed, parsed_mask) = parse_matrix_csv(&text).unwrap();
            prop_assert_eq!(&parsed_mask, &mask);
            for d in 0..rows {
                for n in 0..cols {
                    if mask[(d, n)] {
                        prop_assert_eq!(parsed[(d, n)].to_bits(), values[(d, n)].to_bits());
                    }
                }
            }
        }
    }
}
