use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for the whole crate. Message text is part of the
/// contract for a few variants (callers and the CLI match on phrases like
/// "series too short" or "divergence"), so rewording them is a breaking
/// change even though the enum shape stays the same.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series length mismatch: target has {target_len} steps, source has {source_len}")]
    LengthMismatch { target_len: usize, source_len: usize },

    #[error("series too short: {len} steps cannot support history order {order}")]
    SeriesTooShort { len: usize, order: usize },

    #[error("history order must be at least 1, got k={k}, l={l}")]
    ZeroHistoryOrder { k: usize, l: usize },

    #[error("binary series may only contain 0 or 1, found {value} at index {index}")]
    NotBinary { value: u8, index: usize },

    #[error("empty layer: {side} side of the pair has no neurons")]
    EmptyLayer { side: &'static str },

    #[error("step count mismatch between layers: source has {source_steps}, target has {target_steps}")]
    StepMismatch {
        source_steps: usize,
        target_steps: usize,
    },

    #[error("percentile must lie in (0, 100), got {0}")]
    BadPercentile(f64),

    #[error("empty activation window")]
    EmptyWindow,

    #[error("ragged activation records: expected {expected} values per step, found {found} at step {step}")]
    RaggedRecords {
        expected: usize,
        found: usize,
        step: usize,
    },

    #[error("activation records out of order at step {step}")]
    RecordsOutOfOrder { step: usize },

    #[error("warm-up fraction must lie in [0, 1), got {0}")]
    BadWarmupFraction(f64),

    #[error("window width must be at least 2, got {0}")]
    BadWindowWidth(usize),

    #[error("bad network shape: {0}")]
    BadNetworkShape(String),

    #[error("input length {got} does not match input layer width {expected}")]
    InputWidthMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for {classes} output classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("bad training config: {0}")]
    BadTrainConfig(String),

    #[error("divergence at epoch {epoch}, step {step}: loss or activations became non-finite")]
    Divergence { epoch: usize, step: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: u64, reason: String },

    #[error("label column {column} out of range for row with {width} fields")]
    BadLabelColumn { column: usize, width: usize },

    #[error("test fraction must lie in (0, 1), got {0}")]
    BadTestFraction(f64),

    #[error("class {class} has {size} samples; stratified split needs at least 2")]
    ClassTooSmall { class: usize, size: usize },

    #[error("checksum mismatch for {name}: manifest pins {expected}, file hashes to {actual}")]
    ChecksumMismatch {
        name: String,
        expected: String,
        actual: String,
    },

    #[error("unknown fixture {0:?}, built-ins are \"iris\" and \"xor\"")]
    UnknownFixture(String),

    #[error("bad manifest: {0}")]
    Manifest(String),

    #[error("not a trace file: {0}")]
    NotATraceFile(String),

    #[error("unsupported trace version {found}, this build reads version {supported}")]
    TraceVersion { found: u32, supported: u32 },

    #[error("trace line {line}: {reason}")]
    TraceLine { line: usize, reason: String },

    #[error("need at least one adjacent pair of recorded layers, found {layers:?}")]
    NoAdjacentPair { layers: Vec<usize> },

    #[error("layers {a} and {b} record different step sets in epoch {epoch}")]
    UnalignedLayers { a: usize, b: usize, epoch: usize },

    #[error("results row {row}: {reason}")]
    ResultsRow { row: u64, reason: String },

    #[error("unknown pair id {pair_id}, results contain {pair_count} pairs")]
    UnknownPair { pair_id: usize, pair_count: usize },

    #[error("stride must be at least 1")]
    ZeroStride,

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("no IP coordinates: {0}")]
    NoIpCoordinates(String),

    #[error("nothing to plot: {0}")]
    NothingToPlot(String),

    #[error("series {label:?} has a non-positive value {value} at point {index}, cannot use a log axis")]
    LogAxisNonPositive {
        label: String,
        value: f64,
        index: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
