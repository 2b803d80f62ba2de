//! Turning recorded activations into binary matrices.
//!
//! Activations for one (epoch, layer) are grouped into windows of training
//! steps, then each window is binarized against its own percentile threshold:
//! a bit is 1 where the activation is strictly greater than the threshold.
//! The threshold uses the nearest-rank (ceiling) convention, so it is always
//! an observed value, never an interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which leading steps of an epoch to ignore before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warmup {
    /// Skip floor(fraction * epoch length) steps.
    Fraction(f64),
    /// Skip a fixed number of steps.
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Growing prefixes of the epoch: one window per retained step, sizes 2,
    /// 3, ... up to the whole epoch.
    CumulativeEpoch,
    /// Non-overlapping chunks of exactly `w` steps; a partial tail is dropped.
    Sliding { w: usize },
    /// Non-overlapping chunks of exactly `b` steps, aligned with batches.
    PerBatch { b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapturePolicy {
    pub percentile: f64,
    pub warmup: Warmup,
    pub window_mode: WindowMode,
}

impl Default for CapturePolicy {
    fn default() -> Self {
        CapturePolicy {
            percentile: 95.0,
            warmup: Warmup::Fraction(0.05),
            window_mode: WindowMode::CumulativeEpoch,
        }
    }
}

impl CapturePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(Error::BadPercentile(self.percentile));
        }
        if let Warmup::Fraction(f) = self.warmup {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::BadWarmupFraction(f));
            }
        }
        match self.window_mode {
            WindowMode::Sliding { w } if w < 2 => Err(Error::BadWindowWidth(w)),
            WindowMode::PerBatch { b } if b < 2 => Err(Error::BadWindowWidth(b)),
            _ => Ok(()),
        }
    }

    /// Number of leading steps to drop from an epoch of `epoch_len` steps.
    pub fn warmup_cutoff(&self, epoch_len: usize) -> usize {
        match self.warmup {
            Warmup::Fraction(f) => (f * epoch_len as f64).floor() as usize,
            Warmup::Count(c) => c,
        }
    }
}

/// Activations of one layer at one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepActivations {
    pub step: usize,
    pub values: Vec<f64>,
}

/// A windowed slice of one layer's activations: `matrix` is neurons x steps.
#[derive(Debug, Clone)]
pub struct ActivationWindow {
    pub layer: usize,
    pub epoch: usize,
    pub window_index: usize,
    pub matrix: Matrix,
    pub step_ids: Vec<usize>,
}

/// Binarized activations, neurons x steps, each bit 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    neurons: usize,
    steps: usize,
    bits: Vec<u8>,
    threshold: f64,
}

impl BinaryMatrix {
    pub fn from_rows(rows: Vec<Vec<u8>>, threshold: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let steps = rows[0].len();
        if steps < 2 {
            return Err(Error::SeriesTooShort { len: steps, order: 1 });
        }
        let mut bits = Vec::with_capacity(rows.len() * steps);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != steps {
                return Err(Error::RaggedRecords {
                    expected: steps,
                    found: row.len(),
                    step: r,
                });
            }
            for (index, &value) in row.iter().enumerate() {
                if value > 1 {
                    return Err(Error::NotBinary { value, index });
                }
            }
            bits.extend_from_slice(row);
        }
        Ok(BinaryMatrix {
            neurons: rows.len(),
            steps,
            bits,
            threshold,
        })
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The series of neuron `r` across the window's steps.
    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.steps..(r + 1) * self.steps]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }
}

/// Nearest-rank percentile over all entries: the element at 1-based rank
/// ceil(p/100 * N) of the sorted values.
pub fn percentile_threshold(entries: &[f64], percentile: f64) -> Result<f64> {
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::BadPercentile(percentile));
    }
    if entries.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (percentile / 100.0 * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Binarize a window against the percentile of its own entries.
pub fn binarize(window: &ActivationWindow, percentile: f64) -> Result<BinaryMatrix> {
    let threshold = percentile_threshold(window.matrix.entries(), percentile)?;
    Ok(binarize_with_threshold(&window.matrix, threshold))
}

/// Binarize against a caller-chosen threshold: bit = entry > threshold.
pub fn binarize_with_threshold(matrix: &Matrix, threshold: f64) -> BinaryMatrix {
    let bits = matrix
        .entries()
        .iter()
        .map(|&v| (v > threshold) as u8)
        .collect();
    BinaryMatrix {
        neurons: matrix.rows(),
        steps: matrix.cols(),
        bits,
        threshold,
    }
}

/// Split one epoch's records for one layer into windows. Records must be
/// consistent in width and strictly increasing in step. Steps before the
/// warm-up cutoff are dropped first; if fewer than two steps remain, no
/// windows are produced. Applying the cutoff is idempotent, so records from a
/// trainer that already skipped warm-up pass through unchanged.
pub fn windows_for_epoch(
    layer: usize,
    epoch: usize,
    records: &[StepActivations],
    policy: &CapturePolicy,
) -> Result<Vec<ActivationWindow>> {
    policy.validate()?;
    if records.is_empty() {
        return Ok(Vec::new());
    }
    let neurons = records[0].values.len();
    for pair in records.windows(2) {
        if pair[1].step <= pair[0].step {
            return Err(Error::RecordsOutOfOrder { step: pair[1].step });
        }
    }
    for rec in records {
        if rec.values.len() != neurons {
            return Err(Error::RaggedRecords {
                expected: neurons,
                found: rec.values.len(),
                step: rec.step,
            });
        }
    }

    let epoch_len = records.last().unwrap().step + 1;
    let cutoff = policy.warmup_cutoff(epoch_len);
    let retained: Vec<&StepActivations> = records.iter().filter(|r| r.step >= cutoff).collect();
    if retained.len() < 2 {
        return Ok(Vec::new());
    }

    let build = |range: std::ops::Range<usize>, window_index: usize| {
        let slice = &retained[range];
        let mut matrix = Matrix::zeros(neurons, slice.len());
        for (col, rec) in slice.iter().enumerate() {
            for (row, &v) in rec.values.iter().enumerate() {
                matrix.set(row, col, v);
            }
        }
        ActivationWindow {
            layer,
            epoch,
            window_index,
            matrix,
            step_ids: slice.iter().map(|r| r.step).collect(),
        }
    };

    let windows = match policy.window_mode {
        WindowMode::CumulativeEpoch => (2..=retained.len())
            .enumerate()
            .map(|(i, end)| build(0..end, i))
            .collect(),
        WindowMode::Sliding { w } | WindowMode::PerBatch { b: w } => {
            let full = retained.len() / w;
            (0..full).map(|i| build(i * w..(i + 1) * w, i)).collect()
        }
    };
    Ok(windows)
}
