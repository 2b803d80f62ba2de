//! From traces to TE records, and from records to plottable curves.
//!
//! A TE record is one number: the mean TE over all ordered neuron pairs of
//! one adjacent layer pair, in one window of one epoch. Direction always runs
//! from the earlier layer into the later one. Pair ids count adjacent layer
//! pairs from the input side, so pair 0 is input->first hidden and the last
//! pair feeds the output layer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::capture::{binarize, windows_for_epoch, StepActivations};
use crate::error::{Error, Result};
use crate::te::{layer_pair_te_seq, HistoryOrder};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeRecord {
    pub run_id: String,
    pub epoch: usize,
    pub window_index: usize,
    pub pair_id: usize,
    /// Mean TE in bits over all source x target neuron pairs.
    pub te_mean: f64,
    /// How many neuron pairs that mean covers.
    pub pair_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedCurve {
    pub pair_id: usize,
    /// (window index, TE) sorted by window index.
    pub points: Vec<(usize, f64)>,
    pub normalized: bool,
}

/// Distinct pair ids present in the records, ascending.
pub fn pair_ids(records: &[TeRecord]) -> Vec<usize> {
    let set: BTreeSet<usize> = records.iter().map(|r| r.pair_id).collect();
    set.into_iter().collect()
}

fn require_pair(records: &[TeRecord], pair_id: usize) -> Result<()> {
    let ids = pair_ids(records);
    if !ids.contains(&pair_id) {
        return Err(Error::UnknownPair {
            pair_id,
            pair_count: ids.len(),
        });
    }
    Ok(())
}

/// Legend label for a pair, given how many adjacent pairs the run has.
pub fn pair_label(pair_id: usize, total_pairs: usize) -> String {
    if pair_id == 0 {
        "TE input".to_string()
    } else if pair_id + 1 == total_pairs {
        "TE output".to_string()
    } else if total_pairs == 3 {
        "TE hidden".to_string()
    } else {
        format!("TE hidden {pair_id}")
    }
}

/// One curve of (window index, TE) per kept epoch for a single pair. `stride`
/// keeps every stride-th epoch (epoch % stride == 0).
pub fn per_epoch_curves(
    records: &[TeRecord],
    pair_id: usize,
    stride: usize,
) -> Result<Vec<(usize, AggregatedCurve)>> {
    if stride == 0 {
        return Err(Error::ZeroStride);
    }
    require_pair(records, pair_id)?;
    let mut by_epoch: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.pair_id == pair_id) {
        by_epoch.entry(r.epoch).or_default().push((r.window_index, r.te_mean));
    }
    Ok(by_epoch
        .into_iter()
        .filter(|(epoch, _)| epoch % stride == 0)
        .map(|(epoch, mut points)| {
            points.sort_by_key(|&(w, _)| w);
            (
                epoch,
                AggregatedCurve {
                    pair_id,
                    points,
                    normalized: false,
                },
            )
        })
        .collect())
}

/// Mean TE per window index across epochs, over the window indices present
/// in every epoch. Epochs with extra windows only contribute the shared
/// prefix; a window index missing from any epoch is dropped.
pub fn average_across_epochs(records: &[TeRecord], pair_id: usize) -> Result<AggregatedCurve> {
    require_pair(records, pair_id)?;
    let mut by_epoch: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.pair_id == pair_id) {
        by_epoch.entry(r.epoch).or_default().insert(r.window_index, r.te_mean);
    }
    let mut common: Option<BTreeSet<usize>> = None;
    for windows in by_epoch.values() {
        let keys: BTreeSet<usize> = windows.keys().copied().collect();
        common = Some(match common {
            None => keys,
            Some(prev) => prev.intersection(&keys).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    if common.is_empty() {
        return Err(Error::NothingToPlot(format!(
            "pair {pair_id} has no window index present in every epoch"
        )));
    }
    let epochs = by_epoch.len() as f64;
    let points = common
        .into_iter()
        .map(|w| {
            let sum: f64 = by_epoch.values().map(|m| m[&w]).sum();
            (w, sum / epochs)
        })
        .collect();
    Ok(AggregatedCurve {
        pair_id,
        points,
        normalized: false,
    })
}

/// Min-max scale the curve's TE values to [0, 1]; a flat curve maps to zeros.
pub fn normalize_curve(curve: &AggregatedCurve) -> AggregatedCurve {
    let lo = curve.points.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    let hi = curve.points.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let points = curve
        .points
        .iter()
        .map(|&(w, v)| (w, if span == 0.0 { 0.0 } else { (v - lo) / span }))
        .collect();
    AggregatedCurve {
        pair_id: curve.pair_id,
        points,
        normalized: true,
    }
}

/// One information-plane point per epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpPoint {
    pub epoch: usize,
    /// Mean TE of the first (input-side) pair over the epoch's windows.
    pub x: f64,
    /// Mean TE of the last (output-side) pair.
    pub y: f64,
}

/// Mean TE over all windows of one (epoch, pair), if present.
pub fn epoch_pair_mean(records: &[TeRecord], epoch: usize, pair_id: usize) -> Option<f64> {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| r.epoch == epoch && r.pair_id == pair_id)
        .map(|r| r.te_mean)
        .collect();
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Information-plane trajectory: x from the first pair, y from the last.
/// Needs records for at least two distinct pairs.
pub fn ip_trajectory(records: &[TeRecord]) -> Result<Vec<IpPoint>> {
    let ids = pair_ids(records);
    if ids.len() < 2 {
        return Err(Error::NoIpCoordinates(format!(
            "results cover {} pair(s), need both an input and an output pair",
            ids.len()
        )));
    }
    let (first, last) = (ids[0], *ids.last().unwrap());
    let epochs: BTreeSet<usize> = records.iter().map(|r| r.epoch).collect();
    let points: Vec<IpPoint> = epochs
        .into_iter()
        .filter_map(|epoch| {
            let x = epoch_pair_mean(records, epoch, first)?;
            let y = epoch_pair_mean(records, epoch, last)?;
            Some(IpPoint { epoch, x, y })
        })
        .collect();
    if points.is_empty() {
        return Err(Error::NoIpCoordinates(
            "no epoch carries both the first and the last pair".into(),
        ));
    }
    Ok(points)
}

/// Pearson correlation. Undefined for fewer than three points or when either
/// side is constant.
pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            target_len: xs.len(),
            source_len: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            if vx == 0.0 { "x series is constant" } else { "y series is constant" }.into(),
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Score a whole trace: every adjacent pair of recorded layers, every epoch,
/// every window the capture policy yields. Windows too short for the history
/// order carry no scorable transition and are skipped. Output is sorted by
/// (epoch, window index, pair id).
pub fn records_from_trace(trace: &Trace, order: HistoryOrder) -> Result<Vec<TeRecord>> {
    let summary = crate::trace::summarize(trace)?;
    let pairs = &summary.adjacent_pairs;

    // epoch -> layer -> step activations, in record order (already sorted)
    let mut grouped: BTreeMap<usize, BTreeMap<usize, Vec<StepActivations>>> = BTreeMap::new();
    for rec in &trace.records {
        grouped
            .entry(rec.epoch)
            .or_default()
            .entry(rec.layer)
            .or_default()
            .push(StepActivations {
                step: rec.step,
                values: rec.act.clone(),
            });
    }

    // layers must see the same steps within an epoch, otherwise windows
    // would silently pair different slices of training time
    for (&epoch, layers) in &grouped {
        let mut iter = layers.iter();
        if let Some((&first_layer, first)) = iter.next() {
            let steps: Vec<usize> = first.iter().map(|r| r.step).collect();
            for (&layer, recs) in iter {
                if recs.iter().map(|r| r.step).ne(steps.iter().copied()) {
                    return Err(Error::UnalignedLayers {
                        a: first_layer,
                        b: layer,
                        epoch,
                    });
                }
            }
        }
    }

    let policy = trace.header.capture;
    let run_id = &trace.header.run_id;
    let epoch_records = |(&epoch, layers): (&usize, &BTreeMap<usize, Vec<StepActivations>>)| -> Result<Vec<TeRecord>> {
        let mut out = Vec::new();
        let mut windows = BTreeMap::new();
        for (&layer, recs) in layers {
            windows.insert(layer, windows_for_epoch(layer, epoch, recs, &policy)?);
        }
        for (pair_id, &(la, lb)) in pairs.iter().enumerate() {
            let (Some(wa), Some(wb)) = (windows.get(&la), windows.get(&lb)) else {
                continue;
            };
            for (w, (win_a, win_b)) in wa.iter().zip(wb).enumerate() {
                if win_a.matrix.cols() <= order.max() {
                    continue;
                }
                let ba = binarize(win_a, policy.percentile)?;
                let bb = binarize(win_b, policy.percentile)?;
                let lp = layer_pair_te_seq(&ba, &bb, order)?;
                out.push(TeRecord {
                    run_id: run_id.clone(),
                    epoch,
                    window_index: w,
                    pair_id,
                    te_mean: lp.mean,
                    pair_count: ba.neurons() * bb.neurons(),
                });
            }
        }
        Ok(out)
    };

    #[cfg(feature = "parallel")]
    let nested: Vec<Vec<TeRecord>> = {
        use rayon::prelude::*;
        grouped
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(epoch_records)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let nested: Vec<Vec<TeRecord>> = grouped
        .iter()
        .map(epoch_records)
        .collect::<Result<_>>()?;

    let mut records: Vec<TeRecord> = nested.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.epoch, r.window_index, r.pair_id));
    Ok(records)
}
