//! Command line front end: `train` runs a configured experiment and leaves a
//! trace, `analyze` scores a trace into TE records, `plot` turns records into
//! SVG. The three stages only communicate through files, so a trace produced
//! by another framework drops into the same pipeline as a local run.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! validation error, 3 numeric divergence during training.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ipte_core::analysis::{
    average_across_epochs, ip_trajectory, normalize_curve, pair_ids, pair_label,
    per_epoch_curves, records_from_trace, AggregatedCurve, TeRecord,
};
use ipte_core::capture::CapturePolicy;
use ipte_core::data::{fixture, load_csv, normalize, split, CsvSchema, Dataset};
use ipte_core::error::Error as CoreError;
use ipte_core::nn::{train, HiddenActivation, MlpSpec, TrainConfig};
use ipte_core::plot::{render_svg, Plot, PlotOptions, Series, TrajectoryPoint};
use ipte_core::results::{read_records, write_metrics, write_records};
use ipte_core::te::HistoryOrder;
use ipte_core::trace::{ingest_external, write_trace, TraceCollector, TraceHeader};

#[derive(Parser)]
#[command(name = "ipte", version, about = "Train small nets, extract transfer entropy, plot the information plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a configured run and write trace.jsonl, metrics.csv, config.json
    Train {
        /// Run configuration, a JSON document
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overrides output_dir from the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trace file into a CSV of per-window TE records
    Analyze {
        /// Trace file, local or produced by an external trainer
        #[arg(long)]
        trace: PathBuf,
        /// Target history order
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Source history order
        #[arg(long, default_value_t = 1)]
        l: usize,
        /// Where to write the result CSV
        #[arg(long)]
        out: PathBuf,
    },
    /// Render TE records as an SVG figure
    Plot {
        /// Result CSV produced by analyze
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Layer pair to plot where the mode takes one; defaults to the input pair
        #[arg(long)]
        pair: Option<usize>,
        /// Keep every stride-th epoch in per-epoch mode
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Logarithmic y axis
        #[arg(long)]
        log_y: bool,
        /// Min-max scale each curve to [0, 1]
        #[arg(long)]
        normalize: bool,
        /// Where to write the SVG
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// One curve of TE over windows per kept epoch, single pair
    PerEpoch,
    /// TE per window averaged across epochs, single pair
    Averaged,
    /// Averaged curves for every pair in one figure
    Stacked,
    /// Information-plane trajectory: input-pair TE against output-pair TE
    Ip,
}

/// A failure carrying its exit code. Configuration problems are worth
/// distinguishing from data problems: the former are fixed by editing the
/// config or the invocation, the latter by fixing the inputs.
enum Failure {
    Config(String),
    Data(String),
    Divergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Data(_) => 2,
            Failure::Divergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Divergence(m) => m,
        }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Failure {
        use CoreError::*;
        match err {
            Divergence { .. } => Failure::Divergence(err.to_string()),
            BadPercentile(_) | BadWarmupFraction(_) | BadWindowWidth(_) | BadNetworkShape(_)
            | BadTrainConfig(_) | ZeroHistoryOrder { .. } | BadTestFraction(_)
            | UnknownFixture(_) | ZeroStride => Failure::Config(err.to_string()),
            _ => Failure::Data(err.to_string()),
        }
    }
}

/// Adds the offending flag to errors that are really about how the plot
/// command was invoked.
fn name_plot_flag(err: CoreError) -> Failure {
    match &err {
        CoreError::LogAxisNonPositive { .. } => Failure::Data(format!("--log-y: {err}")),
        CoreError::NoIpCoordinates(_) => Failure::Data(format!("--mode ip: {err}")),
        CoreError::UnknownPair { .. } => Failure::Data(format!("--pair: {err}")),
        CoreError::ZeroStride => Failure::Config(format!("--stride: {err}")),
        _ => err.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let help = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if help { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    let outcome = match cli.command {
        Command::Train { config, out } => cmd_train(&config, out),
        Command::Analyze { trace, k, l, out } => cmd_analyze(&trace, k, l, &out),
        Command::Plot {
            results,
            mode,
            pair,
            stride,
            log_y,
            normalize,
            out,
        } => cmd_plot(&results, mode, pair, stride, log_y, normalize, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_learning_rate() -> f64 {
    0.05
}

fn default_epochs() -> usize {
    200
}

fn default_true() -> bool {
    true
}

fn default_order() -> usize {
    1
}

fn default_activation() -> HiddenActivation {
    HiddenActivation::Tanh
}

/// The run configuration document. Defaults follow the iris experiment;
/// the seed has no default on purpose, every run must pin one.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    dataset: DatasetSection,
    model: ModelSection,
    train: TrainSection,
    #[serde(default)]
    te: TeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetSection {
    /// Built-in dataset name; exactly one of `fixture` and `path` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    /// CSV layout, only meaningful together with `path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema: Option<CsvSchema>,
    #[serde(default = "default_test_fraction")]
    test_fraction: f64,
    #[serde(default)]
    normalize: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    layer_widths: Vec<usize>,
    #[serde(default = "default_activation")]
    hidden_activation: HiddenActivation,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    #[serde(default = "default_learning_rate")]
    learning_rate: f64,
    #[serde(default = "default_epochs")]
    epochs: usize,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default = "default_true")]
    shuffle_each_epoch: bool,
    #[serde(default)]
    capture: CapturePolicy,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TeSection {
    #[serde(default = "default_order")]
    k: usize,
    #[serde(default = "default_order")]
    l: usize,
}

impl Default for TeSection {
    fn default() -> Self {
        TeSection { k: 1, l: 1 }
    }
}

/// Everything cmd_train needs, checked and loaded, nothing written yet.
struct ResolvedRun {
    config: RunConfig,
    dataset: Dataset,
    spec: MlpSpec,
    train_config: TrainConfig,
    out_dir: PathBuf,
    run_id: String,
}

fn resolve(config_path: &Path, out_flag: Option<PathBuf>) -> Result<ResolvedRun, Failure> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", config_path.display())))?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("config {}: {e}", config_path.display())))?;

    let ds = &config.dataset;
    let dataset = match (&ds.fixture, &ds.path) {
        (Some(_), Some(_)) => {
            return Err(Failure::Config("dataset: set either fixture or path, not both".into()))
        }
        (None, None) => {
            return Err(Failure::Config("dataset: set one of fixture or path".into()))
        }
        (Some(name), None) => {
            if ds.schema.is_some() {
                return Err(Failure::Config(
                    "dataset.schema only applies to path datasets".into(),
                ));
            }
            fixture(name)?
        }
        (None, Some(path)) => {
            if !path.exists() {
                return Err(Failure::Config(format!(
                    "dataset.path {} does not exist",
                    path.display()
                )));
            }
            let schema = ds.schema.clone().unwrap_or_default();
            let loaded = load_csv(path, &schema)?;
            config.dataset.schema = Some(schema);
            loaded
        }
    };
    if !(config.dataset.test_fraction > 0.0 && config.dataset.test_fraction < 1.0) {
        return Err(CoreError::BadTestFraction(config.dataset.test_fraction).into());
    }
    let dataset = if config.dataset.normalize { normalize(&dataset) } else { dataset };

    let spec = MlpSpec {
        layer_widths: config.model.layer_widths.clone(),
        hidden_activation: config.model.hidden_activation,
    };
    spec.validate()?;

    let seed = config.train.seed.ok_or_else(|| {
        Failure::Config("train.seed is mandatory, runs are seeded rather than wall-clock".into())
    })?;
    let train_config = TrainConfig {
        learning_rate: config.train.learning_rate,
        epochs: config.train.epochs,
        seed,
        shuffle_each_epoch: config.train.shuffle_each_epoch,
        capture: config.train.capture,
    };
    train_config.validate()?;

    // the analysis stage reads k and l from this document later; reject
    // nonsense before anything trains
    HistoryOrder::new(config.te.k, config.te.l)?;

    let out_dir = out_flag
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            Failure::Config("no output directory: set output_dir in the config or pass --out".into())
        })?;
    config.output_dir = Some(out_dir.clone());

    let run_id = format!("{}-s{}", dataset.name(), seed);
    Ok(ResolvedRun {
        config,
        dataset,
        spec,
        train_config,
        out_dir,
        run_id,
    })
}

/// Removes the files it was given unless disarmed, so a failed run does not
/// leave a half-written output directory behind.
struct Cleanup {
    paths: Vec<PathBuf>,
    armed: bool,
}

impl Cleanup {
    fn new() -> Self {
        Cleanup { paths: Vec::new(), armed: true }
    }

    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.paths.push(path.clone());
        path
    }

    fn disarm(&mut self) {
        self.armed = false;
    }
}

impl Drop for Cleanup {
    fn drop(&mut self) {
        if self.armed {
            for path in &self.paths {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

fn cmd_train(config_path: &Path, out_flag: Option<PathBuf>) -> Result<(), Failure> {
    let run = resolve(config_path, out_flag)?;
    let (train_set, test_set) = split(&run.dataset, run.config.dataset.test_fraction, run.train_config.seed)?;

    let mut sink = TraceCollector::new();
    let result = train(&run.spec, &run.train_config, &train_set, &test_set, &mut sink)?;
    let header = TraceHeader::new(
        run.run_id.clone(),
        run.spec.layer_widths.clone(),
        run.train_config.capture,
        run.train_config.seed,
    );
    let trace = sink.into_trace(header);

    std::fs::create_dir_all(&run.out_dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", run.out_dir.display())))?;
    let mut cleanup = Cleanup::new();
    let trace_path = cleanup.track(run.out_dir.join("trace.jsonl"));
    let metrics_path = cleanup.track(run.out_dir.join("metrics.csv"));
    let config_copy = cleanup.track(run.out_dir.join("config.json"));

    write_trace(&trace_path, &trace)?;
    write_metrics(&metrics_path, &result.epochs)?;
    let resolved = serde_json::to_string_pretty(&run.config)
        .map_err(|e| Failure::Data(format!("cannot serialize resolved config: {e}")))?;
    std::fs::write(&config_copy, resolved + "\n")
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", config_copy.display())))?;
    cleanup.disarm();

    let last = result.epochs.last().expect("at least one epoch");
    println!(
        "run {}: {} epochs, final train accuracy {:.3}, test accuracy {:.3}",
        run.run_id,
        result.epochs.len(),
        last.train_accuracy,
        last.test_accuracy
    );
    println!(
        "wrote {} ({} records), {}, {}",
        trace_path.display(),
        trace.records.len(),
        metrics_path.display(),
        config_copy.display()
    );
    Ok(())
}

fn cmd_analyze(trace_path: &Path, k: usize, l: usize, out: &Path) -> Result<(), Failure> {
    let order = HistoryOrder::new(k, l)?;
    let (trace, summary) = ingest_external(trace_path)?;
    let first_epoch = trace.records.first().map(|r| (r.epoch, r.layer));
    let steps_per_epoch = first_epoch.map_or(0, |(e, l0)| {
        trace.records.iter().filter(|r| r.epoch == e && r.layer == l0).count()
    });
    println!(
        "trace {}: {} epochs, layers {:?}, {} steps per epoch, {} records",
        summary.run_id, summary.epochs, summary.present_layers, steps_per_epoch, summary.records
    );

    let records = records_from_trace(&trace, order)?;
    let mut cleanup = Cleanup::new();
    let out_path = cleanup.track(out.to_path_buf());
    write_records(&out_path, &records)?;
    cleanup.disarm();
    println!(
        "wrote {}: {} TE records over {} pair(s)",
        out.display(),
        records.len(),
        summary.adjacent_pairs.len()
    );
    Ok(())
}

fn curve_series(curve: &AggregatedCurve, label: String) -> Series {
    Series {
        label,
        points: curve.points.iter().map(|&(w, te)| (w as f64, te)).collect(),
    }
}

fn cmd_plot(
    results: &Path,
    mode: Mode,
    pair: Option<usize>,
    stride: usize,
    log_y: bool,
    scale: bool,
    out: &Path,
) -> Result<(), Failure> {
    let records: Vec<TeRecord> = read_records(results)?;
    let run_id = records.first().map(|r| r.run_id.clone()).unwrap_or_default();
    let ids = pair_ids(&records);
    let total = ids.len();
    let y_label = if scale { "TE (scaled)" } else { "TE (bits)" };

    let (plot, title, x_label) = match mode {
        Mode::PerEpoch => {
            let pair_id = pair.unwrap_or(0);
            let curves = per_epoch_curves(&records, pair_id, stride).map_err(name_plot_flag)?;
            let series = curves
                .into_iter()
                .map(|(epoch, curve)| {
                    let curve = if scale { normalize_curve(&curve) } else { curve };
                    curve_series(&curve, format!("epoch {epoch}"))
                })
                .collect();
            (
                Plot::Lines(series),
                format!("{run_id} {} per window", pair_label(pair_id, total)),
                "window",
            )
        }
        Mode::Averaged => {
            let pair_id = pair.unwrap_or(0);
            let curve = average_across_epochs(&records, pair_id).map_err(name_plot_flag)?;
            let curve = if scale { normalize_curve(&curve) } else { curve };
            let series = vec![curve_series(&curve, pair_label(pair_id, total))];
            (
                Plot::Lines(series),
                format!("{run_id} mean TE per window"),
                "window",
            )
        }
        Mode::Stacked => {
            let mut series = Vec::new();
            for &pair_id in &ids {
                let curve = average_across_epochs(&records, pair_id).map_err(name_plot_flag)?;
                let curve = if scale { normalize_curve(&curve) } else { curve };
                series.push(curve_series(&curve, pair_label(pair_id, total)));
            }
            (
                Plot::Lines(series),
                format!("{run_id} mean TE per window, all pairs"),
                "window",
            )
        }
        Mode::Ip => {
            let points = ip_trajectory(&records).map_err(name_plot_flag)?;
            let points: Vec<TrajectoryPoint> = points
                .into_iter()
                .map(|p| TrajectoryPoint { epoch: p.epoch, x: p.x, y: p.y })
                .collect();
            (
                Plot::Trajectory(points),
                format!("{run_id} information plane"),
                "TE input (bits)",
            )
        }
    };

    let opts = PlotOptions {
        title,
        x_label: x_label.to_string(),
        y_label: if mode == Mode::Ip { "TE output (bits)".to_string() } else { y_label.to_string() },
        log_y,
    };
    let svg = render_svg(&plot, &opts).map_err(name_plot_flag)?;
    let mut cleanup = Cleanup::new();
    let out_path = cleanup.track(out.to_path_buf());
    std::fs::write(&out_path, &svg)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", out_path.display())))?;
    cleanup.disarm();
    println!("wrote {}", out.display());
    Ok(())
}
