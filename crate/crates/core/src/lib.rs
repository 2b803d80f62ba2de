//! Transfer entropy analysis of neural network training dynamics.
//!
//! The pipeline: train a small MLP sample by sample ([`nn`]), record every
//! layer's activations per step into a trace ([`trace`]), window and binarize
//! those activations ([`capture`]), estimate plug-in transfer entropy between
//! adjacent layers ([`te`]), aggregate per-epoch and averaged curves plus
//! information-plane trajectories ([`analysis`]), and write CSV results and
//! SVG plots ([`results`], [`plot`]).
//!
//! Everything is deterministic for a fixed seed: RNGs are ChaCha8 streams,
//! maps iterate in key order, and sums run in index order, so repeated runs
//! produce byte-identical artifacts.

pub mod analysis;
pub mod capture;
pub mod data;
pub mod error;
pub mod matrix;
pub mod nn;
pub mod plot;
pub mod results;
pub mod te;
pub mod trace;

pub use analysis::{records_from_trace, TeRecord};
pub use capture::{binarize, percentile_threshold, windows_for_epoch, BinaryMatrix, CapturePolicy};
pub use error::{Error, Result};
pub use nn::{train, ActivationSink, Mlp, MlpSpec, TrainConfig};
pub use te::{count_joint, layer_pair_te, layer_pair_te_seq, transfer_entropy, BinarySeries, HistoryOrder};
pub use trace::{read_trace, write_trace, Trace, TraceCollector, TraceHeader};
