use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csi_core::detector::{evaluate, GroundTruth, DEFAULT_THRESHOLDS};
use csi_core::pipeline::{run_pipeline, PipelineParams};
use csi_core::registry::FormatRegistry;
use csi_core::storage::{EvalSettings, QuantOptions, RawRange, StageId, BIT_GRID, RATE_GRID};
use csi_core::{CaptureDocument, DeviceId};
use csi_sniffer::broker::EmbeddedBroker;
use csi_sniffer::capture_csv::{read_capture_file, write_capture_file};
use csi_sniffer::collector::{describe_source, run_collector, Collector, CollectorOptions, SourceSpec};
use csi_sniffer::control::{ControlOptions, ControlService, DEFAULT_DOWNLOAD_TIMEOUT};
use csi_sniffer::store::ConfigStore;
use csi_sniffer::{formats, http, sweep, Error, Result};

const PIPELINE_DEFAULTS: &str = "\
Pipeline parameters (JSON file via --params, single fields via flags):
  lambda          3      outlier threshold, in standard deviations
  w1              5      outlier statistics window, seconds
  w2              3      aggregation window, seconds
  subcarriers            registry default for the capture width
                         (20 MHz: -28..-1, 1..28)
  overlap_frac    0.5    window is positive when activity covers
                         at least overlap_frac * w2 seconds of it
  history         raw    trailing window statistics use raw amplitudes
                         (\"filtered\" uses already-filtered values)
  outlier_filter  true
ROC: 1000 linearly spaced thresholds between the smallest and largest score.";

#[derive(Parser)]
#[command(name = "csi-sniffer", version, about = "CSI capture analysis, storage study and capture services")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic capture and its ground truth from a scenario file.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory; receives capture.csv and truth.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline and print metrics and AUC.
    #[command(after_help = PIPELINE_DEFAULTS)]
    Analyze {
        #[command(flatten)]
        input: AnalysisInput,
        /// Also write the per-window feature series as CSV.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Export the ROC curve over the threshold grid.
    #[command(after_help = PIPELINE_DEFAULTS)]
    Roc {
        #[command(flatten)]
        input: AnalysisInput,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLDS)]
        thresholds: usize,
    },
    /// AUC and storage for each decimation factor.
    #[command(after_help = PIPELINE_DEFAULTS)]
    SweepRate {
        #[command(flatten)]
        input: AnalysisInput,
        /// Decimation factors [default: 1..=25, 50].
        #[arg(long, value_delimiter = ',')]
        factors: Vec<usize>,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// AUC and storage for each (stage, bits) quantization cell.
    #[command(after_help = PIPELINE_DEFAULTS)]
    SweepQuant {
        #[command(flatten)]
        input: AnalysisInput,
        /// Stages 1-4 [default: all].
        #[arg(long, value_delimiter = ',')]
        stages: Vec<u8>,
        /// Bit depths [default: 2..=16].
        #[arg(long, value_delimiter = ',')]
        bits: Vec<u8>,
        /// Normalisation range of raw components at stage 1.
        #[arg(long, value_enum, default_value_t = RangeArg::Split)]
        raw_range: RangeArg,
        /// One range per subcarrier instead of one per dataset.
        #[arg(long)]
        per_subcarrier: bool,
        #[command(flatten)]
        output: SweepOutput,
    },
    /// Run the control service (configuration store, MQTT publisher, HTTP API).
    Serve {
        /// MQTT broker, host:port.
        #[arg(long, env = "CSI_BROKER", default_value = "127.0.0.1:1883")]
        broker: String,
        #[arg(long, env = "CSI_STORE", default_value = "configs.json")]
        store: PathBuf,
        #[arg(long, env = "CSI_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Seconds to wait for a download reply.
        #[arg(long, env = "CSI_DOWNLOAD_TIMEOUT", default_value_t = DEFAULT_DOWNLOAD_TIMEOUT.as_secs_f64())]
        download_timeout: f64,
        /// Static files served under /ui.
        #[arg(long, env = "CSI_UI_DIR")]
        ui_dir: Option<PathBuf>,
        /// Also run an MQTT broker in-process on the --broker address.
        #[arg(long)]
        embedded_broker: bool,
    },
    /// Run the simulated collector.
    Collector {
        #[arg(long, env = "CSI_BROKER", default_value = "127.0.0.1:1883")]
        broker: String,
        /// Capture CSV to replay.
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        replay: Option<PathBuf>,
        /// Scenario file to synthesise frames from.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Replay speed relative to the source timestamps; 0 is unpaced.
        #[arg(long, default_value_t = 1.0)]
        acceleration: f64,
        #[arg(long, default_value = "captures")]
        capture_dir: PathBuf,
        #[arg(long, default_value = "csi-collector")]
        client_id: String,
    },
    /// Run a standalone MQTT broker.
    Broker {
        #[arg(long, default_value = "127.0.0.1:1883")]
        listen: SocketAddr,
    },
}

#[derive(Args)]
struct AnalysisInput {
    /// Capture CSV.
    #[arg(long)]
    capture: PathBuf,
    /// Ground truth CSV (start,end per activity interval).
    #[arg(long)]
    truth: PathBuf,
    /// Pipeline parameters as JSON; missing fields take their defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Format registry replacing the built-in one.
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long)]
    overlap_frac: Option<f64>,
    /// Aggregate raw amplitudes without the outlier filter.
    #[arg(long)]
    no_filter: bool,
    /// Leave windows with fewer than two frames out of the evaluation.
    #[arg(long)]
    exclude_invalid: bool,
    /// Keep only frames from these transmitters (repeatable).
    #[arg(long = "device")]
    devices: Vec<DeviceId>,
}

struct Loaded {
    doc: CaptureDocument,
    truth: GroundTruth,
    settings: EvalSettings,
}

impl AnalysisInput {
    fn load(&self) -> Result<Loaded> {
        let doc = read_capture_file(&self.capture)?;
        let truth = formats::load_truth(&self.truth)?;
        let registry = match &self.registry {
            Some(p) => FormatRegistry::parse(&read_text(p)?)?,
            None => FormatRegistry::builtin(),
        };
        let text = self.params.as_deref().map(read_text).transpose()?;
        let mut params = formats::params_for(text.as_deref(), &registry, doc.bandwidth())?;
        self.apply_overrides(&mut params);
        params.validate()?;
        let settings = EvalSettings {
            params,
            device_filter: self.devices.clone(),
            n_thresholds: DEFAULT_THRESHOLDS,
            exclude_invalid: self.exclude_invalid,
        };
        Ok(Loaded { doc, truth, settings })
    }

    fn apply_overrides(&self, p: &mut PipelineParams) {
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = self.w1 {
            p.w1 = v;
        }
        if let Some(v) = self.w2 {
            p.w2 = v;
        }
        if let Some(v) = self.overlap_frac {
            p.overlap_frac = v;
        }
        if self.no_filter {
            p.outlier_filter = false;
        }
    }
}

#[derive(Args)]
struct SweepOutput {
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print an aligned table to stdout (in addition to --out).
    #[arg(long)]
    table: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RangeArg {
    /// Separate dataset ranges for real and imaginary parts.
    Split,
    /// One dataset range for both parts.
    Joint,
    /// The full i16 range; lossless at 16 bits.
    Type,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

fn emit_sweep(report: &csi_core::storage::SweepReport, output: &SweepOutput) -> Result<()> {
    let csv = formats::sweep_csv(report);
    match &output.out {
        Some(path) => write_text(path, &csv)?,
        None if !output.table => print!("{csv}"),
        None => {}
    }
    if output.table {
        print!("{}", formats::sweep_table(report));
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { scenario, out } => {
            let sc = formats::load_scenario(&scenario)?;
            let (doc, truth) = csi_core::synth::generate(&sc)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::file(&out, e))?;
            write_capture_file(&doc, &out.join("capture.csv"))?;
            write_text(&out.join("truth.csv"), &formats::write_truth(&truth))?;
            println!("frames: {}", doc.len());
            println!("intervals: {}", truth.intervals().len());
        }
        Command::Analyze { input, features } => {
            let l = input.load()?;
            let series = run_pipeline(&l.doc, &l.settings.params, &l.settings.device_filter)?;
            let eval = evaluate(&series, &l.truth, l.settings.params.overlap_frac, DEFAULT_THRESHOLDS, l.settings.exclude_invalid)?;
            if let Some(path) = features {
                write_text(&path, &formats::feature_csv(&series))?;
            }
            print!("{}", formats::metrics_report(&l.settings.params, &series, &eval, l.settings.exclude_invalid).render());
        }
        Command::Roc { input, out, thresholds } => {
            let l = input.load()?;
            let series = run_pipeline(&l.doc, &l.settings.params, &l.settings.device_filter)?;
            let eval = evaluate(&series, &l.truth, l.settings.params.overlap_frac, thresholds, l.settings.exclude_invalid)?;
            write_text(&out, &formats::roc_csv(&eval))?;
            println!("auc: {:.6}", eval.auc);
        }
        Command::SweepRate { input, factors, output } => {
            let l = input.load()?;
            let factors = if factors.is_empty() { RATE_GRID.to_vec() } else { factors };
            let report = sweep::rate_sweep(&l.doc, &l.truth, &l.settings, &factors)?;
            emit_sweep(&report, &output)?;
        }
        Command::SweepQuant { input, stages, bits, raw_range, per_subcarrier, output } => {
            let l = input.load()?;
            let stages = if stages.is_empty() {
                StageId::ALL.to_vec()
            } else {
                stages.into_iter().map(StageId::from_number).collect::<csi_core::Result<_>>()?
            };
            let bits = if bits.is_empty() { BIT_GRID.to_vec() } else { bits };
            let opts = QuantOptions {
                raw_range: match raw_range {
                    RangeArg::Split => RawRange::SplitDataset,
                    RangeArg::Joint => RawRange::JointDataset,
                    RangeArg::Type => RawRange::TypeExtremes,
                },
                per_subcarrier,
            };
            let report = sweep::quant_sweep(&l.doc, &l.truth, &l.settings, &stages, &bits, opts)?;
            emit_sweep(&report, &output)?;
        }
        Command::Serve { broker, store, listen, download_timeout, ui_dir, embedded_broker } => {
            if !(download_timeout > 0.0 && download_timeout.is_finite()) {
                return Err(Error::InvalidConfig("download timeout must be positive".into()));
            }
            if embedded_broker {
                let addr: SocketAddr = broker
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("--embedded-broker needs an ip:port, got {broker:?}")))?;
                EmbeddedBroker::start(addr)?;
                log::info!("embedded broker listening on {addr}");
            }
            let store = ConfigStore::open(&store)?;
            let mut options = ControlOptions::new(broker);
            options.download_timeout = Duration::from_secs_f64(download_timeout);
            runtime()?.block_on(async move {
                let service = ControlService::spawn(store, &options)?;
                let listener = tokio::net::TcpListener::bind(listen).await.map_err(|e| Error::Unavailable(format!("{listen}: {e}")))?;
                log::info!("control service listening on http://{}", listener.local_addr()?);
                http::serve(listener, http::router(service, ui_dir), shutdown_signal()).await?;
                Ok::<_, Error>(())
            })?;
        }
        Command::Collector { broker, replay, scenario, acceleration, capture_dir, client_id } => {
            let spec = match (replay, scenario) {
                (Some(p), _) => SourceSpec::Replay(p),
                (None, Some(p)) => SourceSpec::Scenario(p),
                (None, None) => return Err(Error::InvalidConfig("give --replay or --scenario".into())),
            };
            let source = spec.load()?;
            log::info!("source: {}", describe_source(&source));
            let collector = Collector::new(source, CollectorOptions { capture_dir, acceleration })?;
            let handle = run_collector(collector, &broker, &client_id)?;
            runtime()?.block_on(shutdown_signal());
            handle.stop();
        }
        Command::Broker { listen } => {
            let broker = EmbeddedBroker::start(listen)?;
            log::info!("broker listening on {}", broker.addr);
            runtime()?.block_on(shutdown_signal());
        }
    }
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        log::error!("cannot listen for ctrl-c: {e}");
        std::future::pending::<()>().await;
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let default_level = match cli.command {
        Command::Serve { .. } | Command::Collector { .. } | Command::Broker { .. } => "info",
        _ => "warn",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
