//! The activation trace file: JSON lines, one header then one record per
//! (epoch, step, layer).
//!
//! The header names the format ("ipte-trace"), a version, the run id, layer
//! widths, the capture policy, and the seed, so a trace is self-describing:
//! analysis needs nothing else. Serialization goes through serde_json's
//! shortest-roundtrip float encoding, which keeps write -> read -> write
//! byte-identical.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capture::CapturePolicy;
use crate::error::{Error, Result};
use crate::nn::ActivationSink;

pub const TRACE_FORMAT: &str = "ipte-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub run_id: String,
    pub layer_widths: Vec<usize>,
    pub capture: CapturePolicy,
    pub seed: u64,
}

impl TraceHeader {
    pub fn new(run_id: impl Into<String>, layer_widths: Vec<usize>, capture: CapturePolicy, seed: u64) -> Self {
        TraceHeader {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
            run_id: run_id.into(),
            layer_widths,
            capture,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    pub step: usize,
    pub layer: usize,
    pub act: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

/// Check a trace against the format's invariants. Violations are reported
/// with the line number the record would occupy in a file (header is line 1).
pub fn validate(trace: &Trace) -> Result<()> {
    if trace.header.format != TRACE_FORMAT {
        return Err(Error::NotATraceFile(format!(
            "header declares format {:?}",
            trace.header.format
        )));
    }
    if trace.header.version != TRACE_VERSION {
        return Err(Error::TraceVersion {
            found: trace.header.version,
            supported: TRACE_VERSION,
        });
    }
    if trace.header.layer_widths.is_empty() {
        return Err(Error::NotATraceFile("header lists no layers".into()));
    }
    trace.header.capture.validate()?;

    let widths = &trace.header.layer_widths;
    let mut prev: Option<(usize, usize)> = None;
    for (idx, rec) in trace.records.iter().enumerate() {
        let line = idx + 2;
        if rec.layer >= widths.len() {
            return Err(Error::TraceLine {
                line,
                reason: format!("layer {} out of range, trace has {} layers", rec.layer, widths.len()),
            });
        }
        if rec.act.len() != widths[rec.layer] {
            return Err(Error::TraceLine {
                line,
                reason: format!(
                    "layer {} has width {}, record carries {} activations",
                    rec.layer,
                    widths[rec.layer],
                    rec.act.len()
                ),
            });
        }
        if rec.act.iter().any(|v| !v.is_finite()) {
            return Err(Error::TraceLine {
                line,
                reason: "non-finite activation value".into(),
            });
        }
        if let Some((pe, ps)) = prev {
            if (rec.epoch, rec.step) < (pe, ps) {
                return Err(Error::TraceLine {
                    line,
                    reason: format!(
                        "records out of order: epoch {} step {} after epoch {pe} step {ps}",
                        rec.epoch, rec.step
                    ),
                });
            }
        }
        prev = Some((rec.epoch, rec.step));
    }
    Ok(())
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    validate(trace)?;
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut out, &trace.header).map_err(io_err)?;
    out.write_all(b"\n")?;
    for rec in &trace.records {
        serde_json::to_writer(&mut out, rec).map_err(io_err)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    read_trace_reader(std::fs::File::open(path)?)
}

pub fn read_trace_reader<R: Read>(reader: R) -> Result<Trace> {
    let mut lines = BufReader::new(reader).lines();
    let first = match lines.next() {
        Some(line) => line?,
        None => return Err(Error::NotATraceFile("file is empty".into())),
    };
    let header: TraceHeader = serde_json::from_str(&first)
        .map_err(|_| Error::NotATraceFile("first line is not a trace header".into()))?;

    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::TraceLine {
            line: idx + 2,
            reason: e.to_string(),
        })?;
        records.push(rec);
    }
    let trace = Trace { header, records };
    validate(&trace)?;
    Ok(trace)
}

/// What an ingested trace contains, at a glance.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub run_id: String,
    pub epochs: usize,
    pub records: usize,
    /// Layer ids that actually appear in the records, ascending.
    pub present_layers: Vec<usize>,
    /// Consecutive (earlier, later) layer ids that both appear.
    pub adjacent_pairs: Vec<(usize, usize)>,
}

/// Summarize which layers a trace actually recorded. Fails unless at least
/// one adjacent pair of layers is present, since nothing can be scored
/// otherwise.
pub fn summarize(trace: &Trace) -> Result<TraceSummary> {
    let present: BTreeSet<usize> = trace.records.iter().map(|r| r.layer).collect();
    let present_layers: Vec<usize> = present.iter().copied().collect();
    let adjacent_pairs: Vec<(usize, usize)> = present_layers
        .windows(2)
        .filter(|w| w[1] == w[0] + 1)
        .map(|w| (w[0], w[1]))
        .collect();
    if adjacent_pairs.is_empty() {
        return Err(Error::NoAdjacentPair {
            layers: present_layers,
        });
    }
    let epochs: BTreeSet<usize> = trace.records.iter().map(|r| r.epoch).collect();
    Ok(TraceSummary {
        run_id: trace.header.run_id.clone(),
        epochs: epochs.len(),
        records: trace.records.len(),
        present_layers,
        adjacent_pairs,
    })
}

/// Read a trace produced elsewhere (possibly covering only a subset of
/// layers) and report what it contains.
pub fn ingest_external(path: &Path) -> Result<(Trace, TraceSummary)> {
    let trace = read_trace(path)?;
    let summary = summarize(&trace)?;
    Ok((trace, summary))
}

/// Sink that accumulates records during training, ready to become a trace.
#[derive(Debug, Default)]
pub struct TraceCollector {
    records: Vec<TraceRecord>,
}

impl TraceCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_trace(self, header: TraceHeader) -> Trace {
        Trace {
            header,
            records: self.records,
        }
    }
}

impl ActivationSink for TraceCollector {
    fn record(&mut self, epoch: usize, step: usize, layer: usize, values: &[f64]) {
        self.records.push(TraceRecord {
            epoch,
            step,
            layer,
            act: values.to_vec(),
        });
    }
}
