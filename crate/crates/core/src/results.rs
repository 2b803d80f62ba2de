//! TE results as CSV, plus the per-epoch metrics table.
//!
//! Real values are printed as `{:.11e}` (12 significant digits). Reading such
//! a file and writing it again reproduces the bytes exactly: the parsed f64
//! is far closer to the printed decimal than to any neighbouring 12-digit
//! decimal, so the quantization is stable after the first write.

use std::path::Path;

use crate::analysis::TeRecord;
use crate::error::{Error, Result};
use crate::nn::EpochMetrics;

pub const RESULTS_COLUMNS: [&str; 6] = [
    "run_id",
    "epoch",
    "window_index",
    "pair_id",
    "te_mean",
    "pair_count",
];

pub fn format_real(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn write_records(path: &Path, records: &[TeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(RESULTS_COLUMNS).map_err(csv_io)?;
    for r in records {
        w.write_record([
            r.run_id.as_str(),
            &r.epoch.to_string(),
            &r.window_index.to_string(),
            &r.pair_id.to_string(),
            &format_real(r.te_mean),
            &r.pair_count.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn read_records(path: &Path) -> Result<Vec<TeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_io)?;
    {
        let headers = rdr.headers().map_err(|e| Error::ResultsRow {
            row: 1,
            reason: e.to_string(),
        })?;
        let got: Vec<&str> = headers.iter().collect();
        if got != RESULTS_COLUMNS {
            return Err(Error::ResultsRow {
                row: 1,
                reason: format!("expected columns {RESULTS_COLUMNS:?}, found {got:?}"),
            });
        }
    }

    let mut records = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::ResultsRow {
            row: e.position().map_or(0, csv::Position::line),
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(0, csv::Position::line);
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_usize = |i: usize| {
            field(i).parse::<usize>().map_err(|_| Error::ResultsRow {
                row,
                reason: format!("{}: {:?} is not a count", RESULTS_COLUMNS[i], field(i)),
            })
        };
        let te_mean: f64 = field(4).parse().map_err(|_| Error::ResultsRow {
            row,
            reason: format!("te_mean: {:?} is not a number", field(4)),
        })?;
        if !te_mean.is_finite() {
            return Err(Error::ResultsRow {
                row,
                reason: format!("te_mean: {:?} is not finite", field(4)),
            });
        }
        records.push(TeRecord {
            run_id: field(0).to_string(),
            epoch: parse_usize(1)?,
            window_index: parse_usize(2)?,
            pair_id: parse_usize(3)?,
            te_mean,
            pair_count: parse_usize(5)?,
        });
    }
    Ok(records)
}

pub fn write_metrics(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["epoch", "mean_loss", "train_accuracy", "test_accuracy"])
        .map_err(csv_io)?;
    for m in metrics {
        w.write_record([
            m.epoch.to_string(),
            format_real(m.mean_loss),
            format_real(m.train_accuracy),
            format_real(m.test_accuracy),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}
