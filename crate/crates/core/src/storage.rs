//! Storage-versus-accuracy study: frame decimation, scalar quantization at
//! each pipeline stage, storage accounting and the two sweeps built on them.
//!
//! Stages:
//!
//! 1. raw complex samples (two 16-bit integers each),
//! 2. amplitudes,
//! 3. outlier-filtered amplitudes,
//! 4. the per-window aggregate feature.
//!
//! Quantizing a stage replaces its data with the reconstruction from the
//! quantized codes; the remaining stages then run unchanged.

use alloc::vec::Vec;
use core::fmt;

use crate::detector::{evaluate, GroundTruth, DEFAULT_THRESHOLDS};
use crate::pipeline::{
    aggregate, amplitudes_from_components, extract_amplitudes, filter_outliers, run_from_amplitudes,
    AmplitudeMatrix, FeatureSeries, NoHooks, PipelineParams,
};
use crate::quant::{
    min_max, packed_len, read_quant, ContainerHeader, Quantizer, FIXED_HEADER_LEN, FLAG_PER_COLUMN,
    FORMAT_VERSION, STREAM_HEADER_LEN,
};
use crate::types::{Bandwidth, CaptureDocument, DeviceId};
use crate::{Error, Result};

/// Frame-decimation factors of the transmission-rate study.
pub const RATE_GRID: [usize; 26] = [
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 50,
];

/// Bit depths of the quantization study, 2 through 16.
pub const BIT_GRID: [u8; 15] = [2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StageId {
    RawComplex = 1,
    Amplitude = 2,
    FilteredAmplitude = 3,
    Aggregate = 4,
}

impl StageId {
    pub const ALL: [StageId; 4] = [Self::RawComplex, Self::Amplitude, Self::FilteredAmplitude, Self::Aggregate];

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::RawComplex),
            2 => Ok(Self::Amplitude),
            3 => Ok(Self::FilteredAmplitude),
            4 => Ok(Self::Aggregate),
            other => Err(Error::InvalidStage(other)),
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Keeps, per device, the frames whose arrival rank is a multiple of `factor`.
pub fn decimate(doc: &CaptureDocument, factor: usize) -> Result<CaptureDocument> {
    if factor == 0 {
        return Err(Error::InvalidParameter("decimation factor must be >= 1"));
    }
    let mut ranks: Vec<(DeviceId, usize)> = Vec::new();
    Ok(doc.retain_frames(|_, frame| {
        let device = frame.device();
        let rank = match ranks.iter_mut().find(|(d, _)| *d == device) {
            Some((_, n)) => {
                *n += 1;
                *n
            }
            None => {
                ranks.push((device, 0));
                0
            }
        };
        rank % factor == 0
    }))
}

/// How raw complex components are normalised at stage 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RawRange {
    /// Separate dataset-wide ranges for real and imaginary parts.
    #[default]
    SplitDataset,
    /// One dataset-wide range shared by both parts.
    JointDataset,
    /// The full signed 16-bit range.
    TypeExtremes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QuantOptions {
    pub raw_range: RawRange,
    /// One range per subcarrier column instead of one per dataset.
    pub per_subcarrier: bool,
}

/// Data entering a quantization stage.
#[derive(Debug, Clone, Copy)]
pub enum StageInput<'a> {
    Capture(&'a CaptureDocument),
    Amplitudes(&'a AmplitudeMatrix),
    Features(&'a FeatureSeries),
}

impl StageInput<'_> {
    fn kind(&self) -> &'static str {
        match self {
            Self::Capture(_) => "raw capture",
            Self::Amplitudes(m) if m.is_filtered() => "filtered amplitude",
            Self::Amplitudes(_) => "amplitude",
            Self::Features(_) => "feature series",
        }
    }
}

/// Raw capture with real-valued components, as reconstructed from codes.
#[derive(Debug, Clone, PartialEq)]
pub struct RawComponents {
    pub bandwidth: Bandwidth,
    pub timestamps: Vec<f64>,
    pub devices: Vec<DeviceId>,
    /// Row-major, `frames × fft_size`.
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl RawComponents {
    pub fn from_capture(doc: &CaptureDocument) -> Self {
        let n = doc.len() * doc.fft_size();
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for frame in doc.frames() {
            for s in frame.csi() {
                re.push(f64::from(s.re));
                im.push(f64::from(s.im));
            }
        }
        Self {
            bandwidth: doc.bandwidth(),
            timestamps: doc.frames().iter().map(|f| f.timestamp()).collect(),
            devices: doc.frames().iter().map(|f| f.device()).collect(),
            re,
            im,
        }
    }

    pub fn amplitudes(&self, params: &PipelineParams, device_filter: &[DeviceId]) -> Result<AmplitudeMatrix> {
        amplitudes_from_components(
            self.timestamps.clone(),
            &self.devices,
            self.bandwidth.fft_size(),
            &self.re,
            &self.im,
            &params.subcarriers,
            device_filter,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageData {
    Raw(RawComponents),
    Amplitudes(AmplitudeMatrix),
    Features(FeatureSeries),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedStage {
    pub stage: StageId,
    /// Serialised `CSIQ` container.
    pub container: Vec<u8>,
    /// Reconstructed data ready for the remaining stages.
    pub data: StageData,
}

/// Value streams of a stage in container order, with their shape.
struct StreamLayout {
    rows: usize,
    cols: usize,
    streams: Vec<Vec<f64>>,
}

fn split_columns(values: &[f64], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..cols)
        .map(|c| (0..rows).map(|r| values[r * cols + c]).collect())
        .collect()
}

fn join_columns(streams: &[&[f64]], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = alloc::vec![0.0; rows * cols];
    for (c, column) in streams.iter().enumerate() {
        for (r, &v) in column.iter().enumerate() {
            out[r * cols + c] = v;
        }
    }
    out
}

fn layout(input: &StageInput<'_>, opts: &QuantOptions) -> StreamLayout {
    match *input {
        StageInput::Capture(doc) => {
            let raw = RawComponents::from_capture(doc);
            let (rows, cols) = (doc.len(), doc.fft_size());
            let streams = if opts.per_subcarrier {
                let mut s = split_columns(&raw.re, rows, cols);
                s.extend(split_columns(&raw.im, rows, cols));
                s
            } else if opts.raw_range == RawRange::JointDataset {
                let mut joint = raw.re;
                joint.extend(raw.im);
                alloc::vec![joint]
            } else {
                alloc::vec![raw.re, raw.im]
            };
            StreamLayout { rows, cols, streams }
        }
        StageInput::Amplitudes(m) => {
            let streams = if opts.per_subcarrier {
                split_columns(m.values(), m.rows(), m.width())
            } else {
                alloc::vec![m.values().to_vec()]
            };
            StreamLayout { rows: m.rows(), cols: m.width(), streams }
        }
        StageInput::Features(s) => StreamLayout { rows: s.len(), cols: 1, streams: alloc::vec![s.values().to_vec()] },
    }
}

fn check_stage(input: &StageInput<'_>, stage: StageId) -> Result<()> {
    let ok = matches!(
        (stage, input),
        (StageId::RawComplex, StageInput::Capture(_))
            | (StageId::Aggregate, StageInput::Features(_))
    ) || matches!((stage, input), (StageId::Amplitude, StageInput::Amplitudes(m)) if !m.is_filtered())
        || matches!((stage, input), (StageId::FilteredAmplitude, StageInput::Amplitudes(m)) if m.is_filtered());
    if ok {
        Ok(())
    } else {
        Err(Error::StageMismatch { stage: stage.number(), input: input.kind() })
    }
}

fn header_for(input: &StageInput<'_>, stage: StageId, bits: u8, opts: &QuantOptions, layout: &StreamLayout) -> ContainerHeader {
    let ranges = if stage == StageId::RawComplex && opts.raw_range == RawRange::TypeExtremes {
        alloc::vec![(f64::from(i16::MIN), f64::from(i16::MAX)); layout.streams.len()]
    } else {
        layout.streams.iter().map(|s| min_max(s).unwrap_or((0.0, 0.0))).collect()
    };
    let (bandwidth_mhz, window_start, window_length) = match *input {
        StageInput::Capture(doc) => (doc.bandwidth().mhz() as u16, 0.0, 0.0),
        StageInput::Amplitudes(_) => (0, 0.0, 0.0),
        StageInput::Features(s) => (0, s.window_starts().first().copied().unwrap_or(0.0), s.window_length()),
    };
    ContainerHeader {
        version: FORMAT_VERSION,
        stage: stage.number(),
        bits,
        flags: if opts.per_subcarrier { FLAG_PER_COLUMN } else { 0 },
        bandwidth_mhz,
        rows: layout.rows as u32,
        cols: layout.cols as u32,
        window_start,
        window_length,
        ranges,
    }
}

/// Rebuilds stage data from streams in container order, borrowing the
/// non-quantized metadata (timestamps, devices, windows) from `template`.
fn rebuild(template: &StageInput<'_>, header: &ContainerHeader, streams: &[&[f64]]) -> Result<StageData> {
    let (rows, cols) = (header.rows as usize, header.cols as usize);
    let per_column = header.flags & FLAG_PER_COLUMN != 0;
    match *template {
        StageInput::Capture(doc) => {
            if rows != doc.len() || cols != doc.fft_size() {
                return Err(Error::Container("container shape does not match the capture"));
            }
            let (re, im) = if per_column {
                (join_columns(&streams[..cols], rows, cols), join_columns(&streams[cols..], rows, cols))
            } else if streams.len() == 1 {
                let (re, im) = streams[0].split_at(rows * cols);
                (re.to_vec(), im.to_vec())
            } else {
                (streams[0].to_vec(), streams[1].to_vec())
            };
            Ok(StageData::Raw(RawComponents {
                bandwidth: doc.bandwidth(),
                timestamps: doc.frames().iter().map(|f| f.timestamp()).collect(),
                devices: doc.frames().iter().map(|f| f.device()).collect(),
                re,
                im,
            }))
        }
        StageInput::Amplitudes(m) => {
            if rows != m.rows() || cols != m.width() {
                return Err(Error::Container("container shape does not match the matrix"));
            }
            let values = if per_column { join_columns(streams, rows, cols) } else { streams[0].to_vec() };
            Ok(StageData::Amplitudes(m.with_values(values)?))
        }
        StageInput::Features(s) => {
            if rows != s.len() {
                return Err(Error::Container("container shape does not match the series"));
            }
            Ok(StageData::Features(s.with_values(streams[0].to_vec())?))
        }
    }
}

/// Quantizes one stage's data with `bits` per value.
pub fn quantize_stage(input: StageInput<'_>, stage: StageId, bits: u8, opts: &QuantOptions) -> Result<QuantizedStage> {
    check_stage(&input, stage)?;
    let layout = layout(&input, opts);
    let header = header_for(&input, stage, bits, opts, &layout);
    let refs: Vec<&[f64]> = layout.streams.iter().map(Vec::as_slice).collect();
    let container = crate::quant::write_quant(&header, &refs)?;

    let mut reconstructed = Vec::with_capacity(layout.streams.len());
    for (values, &(lo, hi)) in layout.streams.iter().zip(&header.ranges) {
        let q = Quantizer::new(lo, hi, bits)?;
        reconstructed.push(values.iter().map(|&v| q.decode(q.encode(v))).collect::<Vec<_>>());
    }
    let refs: Vec<&[f64]> = reconstructed.iter().map(Vec::as_slice).collect();
    let data = rebuild(&input, &header, &refs)?;
    Ok(QuantizedStage { stage, container, data })
}

/// Decodes a stored container back into stage data. `template` supplies the
/// timestamps, devices and windows, which the container does not store.
pub fn restore_stage(bytes: &[u8], template: StageInput<'_>) -> Result<(StageId, StageData)> {
    let decoded = read_quant(bytes)?;
    let stage = StageId::from_number(decoded.header.stage)?;
    check_stage(&template, stage)?;
    let streams: Vec<&[f64]> = (0..decoded.header.ranges.len()).map(|s| decoded.stream(s)).collect();
    let data = rebuild(&template, &decoded.header, &streams)?;
    Ok((stage, data))
}

/// Shape of a dataset for storage accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageCounts {
    pub frames: usize,
    pub fft_size: usize,
    pub subcarriers: usize,
    pub windows: usize,
}

impl StageCounts {
    fn cells(&self, stage: StageId) -> usize {
        match stage {
            StageId::RawComplex => self.frames * self.fft_size,
            StageId::Amplitude | StageId::FilteredAmplitude => self.frames * self.subcarriers,
            StageId::Aggregate => self.windows,
        }
    }
}

/// Bytes needed to store a stage: 4 bytes per value without quantization
/// (two 16-bit integers per raw sample, one 32-bit float otherwise), or the
/// packed payload plus container header with `bits` per value. Stage 1 counts
/// two value streams, the others one.
pub fn storage_bytes(stage: StageId, counts: &StageCounts, bits: Option<u8>) -> u64 {
    let cells = counts.cells(stage);
    match bits {
        None => 4 * cells as u64,
        Some(bits) => {
            let (values, streams) = match stage {
                StageId::RawComplex => (2 * cells, 2),
                _ => (cells, 1),
            };
            (packed_len(values, bits) + FIXED_HEADER_LEN + STREAM_HEADER_LEN * streams) as u64
        }
    }
}

/// Pipeline and evaluation settings shared by both sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub params: PipelineParams,
    pub device_filter: Vec<DeviceId>,
    pub n_thresholds: usize,
    pub exclude_invalid: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            params: PipelineParams::default(),
            device_filter: Vec::new(),
            n_thresholds: DEFAULT_THRESHOLDS,
            exclude_invalid: false,
        }
    }
}

impl EvalSettings {
    pub fn auc(&self, series: &FeatureSeries, truth: &GroundTruth) -> Result<f64> {
        Ok(evaluate(series, truth, self.params.overlap_frac, self.n_thresholds, self.exclude_invalid)?.auc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Quantization,
    Rate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub stage: StageId,
    /// Bits per value (quantization) or decimation factor (rate).
    pub setting: u32,
    pub auc: f64,
    pub stored_bytes: u64,
    pub baseline_bytes: u64,
    /// Retained frames per second of capture (rate sweep only).
    pub packets_per_s: Option<f64>,
}

impl SweepRow {
    pub fn ratio(&self) -> f64 {
        self.baseline_bytes as f64 / self.stored_bytes as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub kind: SweepKind,
    /// AUC of the unmodified pipeline.
    pub baseline_auc: f64,
    pub rows: Vec<SweepRow>,
}

/// Precomputed intermediate data for the quantization sweep. Each
/// `(stage, bits)` cell is independent and can be evaluated in any order.
pub struct QuantSweep<'a> {
    doc: &'a CaptureDocument,
    truth: &'a GroundTruth,
    settings: &'a EvalSettings,
    opts: QuantOptions,
    raw: AmplitudeMatrix,
    filtered: Option<AmplitudeMatrix>,
    series: FeatureSeries,
    baseline_auc: f64,
}

impl<'a> QuantSweep<'a> {
    pub fn new(
        doc: &'a CaptureDocument,
        truth: &'a GroundTruth,
        settings: &'a EvalSettings,
        opts: QuantOptions,
    ) -> Result<Self> {
        let params = &settings.params;
        params.validate()?;
        let raw = extract_amplitudes(doc, &params.subcarriers, &settings.device_filter)?;
        let (filtered, series) = if params.outlier_filter {
            let filtered = filter_outliers(&raw, params)?;
            let series = aggregate(&filtered, params)?;
            (Some(filtered), series)
        } else {
            (None, crate::pipeline::aggregate_with(&raw, params, true)?)
        };
        let baseline_auc = settings.auc(&series, truth)?;
        Ok(Self { doc, truth, settings, opts, raw, filtered, series, baseline_auc })
    }

    pub fn baseline_auc(&self) -> f64 {
        self.baseline_auc
    }

    /// Input for a stage, as fed to [`quantize_stage`].
    pub fn stage_input(&self, stage: StageId) -> Result<StageInput<'_>> {
        Ok(match stage {
            StageId::RawComplex => StageInput::Capture(self.doc),
            StageId::Amplitude => StageInput::Amplitudes(&self.raw),
            StageId::FilteredAmplitude => StageInput::Amplitudes(
                self.filtered
                    .as_ref()
                    .ok_or(Error::InvalidParameter("stage 3 requires the outlier filter"))?,
            ),
            StageId::Aggregate => StageInput::Features(&self.series),
        })
    }

    fn counts(&self) -> StageCounts {
        StageCounts {
            frames: self.doc.len(),
            fft_size: self.doc.fft_size(),
            subcarriers: self.raw.width(),
            windows: self.series.len(),
        }
    }

    /// Runs the stages after `stage` on reconstructed data.
    pub fn continue_from(&self, data: StageData) -> Result<FeatureSeries> {
        let params = &self.settings.params;
        match data {
            StageData::Raw(raw) => {
                run_from_amplitudes(raw.amplitudes(params, &self.settings.device_filter)?, params, &mut NoHooks)
            }
            StageData::Amplitudes(m) if m.is_filtered() => aggregate(&m, params),
            StageData::Amplitudes(m) => run_from_amplitudes(m, params, &mut NoHooks),
            StageData::Features(s) => Ok(s),
        }
    }

    pub fn cell(&self, stage: StageId, bits: u8) -> Result<SweepRow> {
        let q = quantize_stage(self.stage_input(stage)?, stage, bits, &self.opts)?;
        let stored_bytes = q.container.len() as u64;
        let series = self.continue_from(q.data)?;
        Ok(SweepRow {
            stage,
            setting: u32::from(bits),
            auc: self.settings.auc(&series, self.truth)?,
            stored_bytes,
            baseline_bytes: storage_bytes(stage, &self.counts(), None),
            packets_per_s: None,
        })
    }

    /// AUC obtained from a stored container, re-running the remaining stages.
    pub fn auc_from_container(&self, bytes: &[u8]) -> Result<f64> {
        let header = crate::quant::read_header(bytes)?.0;
        let stage = StageId::from_number(header.stage)?;
        let (_, data) = restore_stage(bytes, self.stage_input(stage)?)?;
        self.settings.auc(&self.continue_from(data)?, self.truth)
    }
}

/// Every `(stage, bits)` combination, rows ordered by stage then bits.
pub fn run_quant_sweep(
    doc: &CaptureDocument,
    truth: &GroundTruth,
    settings: &EvalSettings,
    stages: &[StageId],
    bits: &[u8],
    opts: QuantOptions,
) -> Result<SweepReport> {
    let sweep = QuantSweep::new(doc, truth, settings, opts)?;
    let mut rows = Vec::with_capacity(stages.len() * bits.len());
    for &stage in stages {
        for &b in bits {
            rows.push(sweep.cell(stage, b)?);
        }
    }
    Ok(SweepReport { kind: SweepKind::Quantization, baseline_auc: sweep.baseline_auc(), rows })
}

/// Transmission-rate study: decimate, run the full pipeline, evaluate.
pub struct RateSweep<'a> {
    doc: &'a CaptureDocument,
    truth: &'a GroundTruth,
    settings: &'a EvalSettings,
}

impl<'a> RateSweep<'a> {
    pub fn new(doc: &'a CaptureDocument, truth: &'a GroundTruth, settings: &'a EvalSettings) -> Result<Self> {
        settings.params.validate()?;
        Ok(Self { doc, truth, settings })
    }

    pub fn cell(&self, factor: usize) -> Result<SweepRow> {
        let kept = decimate(self.doc, factor)?;
        let series = crate::pipeline::run_pipeline(&kept, &self.settings.params, &self.settings.device_filter)?;
        let counts = |doc: &CaptureDocument| StageCounts { frames: doc.len(), fft_size: doc.fft_size(), ..StageCounts::default() };
        let duration = self.doc.duration();
        Ok(SweepRow {
            stage: StageId::RawComplex,
            setting: factor as u32,
            auc: self.settings.auc(&series, self.truth)?,
            stored_bytes: storage_bytes(StageId::RawComplex, &counts(&kept), None),
            baseline_bytes: storage_bytes(StageId::RawComplex, &counts(self.doc), None),
            packets_per_s: Some(if duration > 0.0 { kept.len() as f64 / duration } else { 0.0 }),
        })
    }
}

pub fn run_rate_sweep(
    doc: &CaptureDocument,
    truth: &GroundTruth,
    settings: &EvalSettings,
    factors: &[usize],
) -> Result<SweepReport> {
    let sweep = RateSweep::new(doc, truth, settings)?;
    let rows = factors.iter().map(|&f| sweep.cell(f)).collect::<Result<Vec<_>>>()?;
    let baseline_auc = match rows.iter().find(|r| r.setting == 1) {
        Some(r) => r.auc,
        None => sweep.cell(1)?.auc,
    };
    Ok(SweepReport { kind: SweepKind::Rate, baseline_auc, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::run_pipeline;
    use crate::synth::{generate, Scenario};
    use crate::types::{ComplexSample, CsiFrame};
    use alloc::vec;

    fn doc_with(devices: &[u8], per_device: usize) -> CaptureDocument {
        let mut frames = Vec::new();
        for (k, &d) in devices.iter().enumerate() {
            for i in 0..per_device {
                let t = i as f64 + k as f64 * 0.1;
                frames.push(CsiFrame::new(t, DeviceId([d; 6]), vec![ComplexSample::new(i as i16, 0); 64]).unwrap());
            }
        }
        CaptureDocument::new(Bandwidth::Mhz20, frames, None).unwrap()
    }

    #[test]
    fn decimation_examples() {
        let doc = doc_with(&[1], 10);
        assert_eq!(decimate(&doc, 1).unwrap(), doc);
        let one = decimate(&doc, 10).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.frames()[0].timestamp(), 0.0);

        let doc = doc_with(&[1], 100);
        let kept = decimate(&doc, 3).unwrap();
        assert_eq!(kept.len(), 34);
        let ranks: Vec<i16> = kept.frames().iter().map(|f| f.csi()[0].re).collect();
        assert_eq!(ranks, (0..100).step_by(3).collect::<Vec<i16>>());
        assert!(decimate(&doc, 0).is_err());
    }

    #[test]
    fn decimation_is_per_device() {
        let doc = doc_with(&[1, 2], 7);
        let kept = decimate(&doc, 3).unwrap();
        // ceil(7 / 3) = 3 frames for each device.
        assert_eq!(kept.len(), 6);
        for d in [1u8, 2] {
            let ranks: Vec<i16> =
                kept.frames().iter().filter(|f| f.device().0[0] == d).map(|f| f.csi()[0].re).collect();
            assert_eq!(ranks, vec![0, 3, 6]);
        }
    }

    #[test]
    fn storage_examples() {
        let c = StageCounts { frames: 1000, fft_size: 64, subcarriers: 56, windows: 100 };
        assert_eq!(storage_bytes(StageId::RawComplex, &c, None), 256_000);
        assert_eq!(storage_bytes(StageId::Amplitude, &c, None), 224_000);
        assert_eq!(storage_bytes(StageId::Aggregate, &c, None), 400);
        assert_eq!(storage_bytes(StageId::Aggregate, &c, Some(5)), 63 + 52);
        assert_eq!(storage_bytes(StageId::RawComplex, &c, Some(8)), 128_000 + 68);
        let mut last = 0;
        for b in 1..=16 {
            let s = storage_bytes(StageId::FilteredAmplitude, &c, Some(b));
            assert!(s > last);
            last = s;
        }
    }

    #[test]
    fn stage_mismatch() {
        let doc = doc_with(&[1], 4);
        let opts = QuantOptions::default();
        assert!(matches!(
            quantize_stage(StageInput::Capture(&doc), StageId::Amplitude, 8, &opts),
            Err(Error::StageMismatch { stage: 2, .. })
        ));
        let params = PipelineParams::default();
        let raw = extract_amplitudes(&doc, &params.subcarriers, &[]).unwrap();
        assert!(quantize_stage(StageInput::Amplitudes(&raw), StageId::FilteredAmplitude, 8, &opts).is_err());
        assert!(quantize_stage(StageInput::Amplitudes(&raw), StageId::Amplitude, 8, &opts).is_ok());
    }

    #[test]
    fn stage_two_endpoint_codes() {
        let set = crate::types::SubcarrierSet::new(vec![1]).unwrap();
        let m = AmplitudeMatrix::new(vec![0.0, 1.0], set, vec![0.0, 10.0], false).unwrap();
        let q = quantize_stage(StageInput::Amplitudes(&m), StageId::Amplitude, 2, &QuantOptions::default()).unwrap();
        let decoded = read_quant(&q.container).unwrap();
        assert_eq!(decoded.codes, vec![0, 3]);
    }

    #[test]
    fn constant_series_survives_stage_four() {
        let s = FeatureSeries::regular(0.0, 3.0, vec![2.5; 8]).unwrap();
        let q = quantize_stage(StageInput::Features(&s), StageId::Aggregate, 4, &QuantOptions::default()).unwrap();
        assert!(read_quant(&q.container).unwrap().codes.iter().all(|&c| c == 0));
        assert_eq!(q.data, StageData::Features(s));
    }

    #[test]
    fn sixteen_bit_type_range_is_lossless() {
        let (doc, _) = generate(&Scenario::new(5, 4.0, 30.0)).unwrap();
        let opts = QuantOptions { raw_range: RawRange::TypeExtremes, per_subcarrier: false };
        let q = quantize_stage(StageInput::Capture(&doc), StageId::RawComplex, 16, &opts).unwrap();
        assert_eq!(q.data, StageData::Raw(RawComponents::from_capture(&doc)));
    }

    #[test]
    fn restore_matches_in_memory() {
        let (doc, _) = generate(&Scenario::new(6, 6.0, 30.0)).unwrap();
        let params = PipelineParams::default();
        let raw = extract_amplitudes(&doc, &params.subcarriers, &[]).unwrap();
        let filtered = filter_outliers(&raw, &params).unwrap();
        let series = aggregate(&filtered, &params).unwrap();
        for opts in [
            QuantOptions::default(),
            QuantOptions { raw_range: RawRange::JointDataset, per_subcarrier: false },
            QuantOptions { raw_range: RawRange::SplitDataset, per_subcarrier: true },
        ] {
            let inputs = [
                (StageId::RawComplex, StageInput::Capture(&doc)),
                (StageId::Amplitude, StageInput::Amplitudes(&raw)),
                (StageId::FilteredAmplitude, StageInput::Amplitudes(&filtered)),
                (StageId::Aggregate, StageInput::Features(&series)),
            ];
            for (stage, input) in inputs {
                for bits in [3, 9] {
                    let q = quantize_stage(input, stage, bits, &opts).unwrap();
                    let (s, data) = restore_stage(&q.container, input).unwrap();
                    assert_eq!(s, stage);
                    assert_eq!(data, q.data, "stage {stage} bits {bits} {opts:?}");
                }
            }
        }
    }

    #[test]
    fn quant_sweep_shape_and_near_lossless_top() {
        let mut sc = Scenario::new(9, 60.0, 20.0);
        sc.activity_intervals = vec![(10.0, 25.0), (40.0, 52.0)];
        let (doc, truth) = generate(&sc).unwrap();
        let settings = EvalSettings::default();
        let report = run_quant_sweep(&doc, &truth, &settings, &StageId::ALL, &[4, 16], QuantOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 8);
        let baseline = run_pipeline(&doc, &settings.params, &[]).unwrap();
        assert_eq!(report.baseline_auc, settings.auc(&baseline, &truth).unwrap());
        for row in report.rows.iter().filter(|r| r.setting == 16) {
            assert!((row.auc - report.baseline_auc).abs() < 1e-6, "{row:?}");
        }
        for row in &report.rows {
            assert!(row.stored_bytes > 0);
            assert_eq!(
                row.stored_bytes,
                storage_bytes(row.stage, &QuantSweep::new(&doc, &truth, &settings, QuantOptions::default()).unwrap().counts(), Some(row.setting as u8))
            );
        }
    }

    #[test]
    fn rate_sweep_rows() {
        let mut sc = Scenario::new(10, 40.0, 20.0);
        sc.activity_intervals = vec![(10.0, 20.0)];
        let (doc, truth) = generate(&sc).unwrap();
        let settings = EvalSettings::default();
        let report = run_rate_sweep(&doc, &truth, &settings, &[1, 2, 5]).unwrap();
        assert_eq!(report.rows.len(), 3);
        let full = run_pipeline(&doc, &settings.params, &[]).unwrap();
        assert_eq!(report.rows[0].auc, settings.auc(&full, &truth).unwrap());
        assert_eq!(report.rows[0].stored_bytes, report.rows[0].baseline_bytes);
        let pps = report.rows[0].packets_per_s.unwrap();
        assert!((pps - doc.len() as f64 / doc.duration()).abs() < 1e-12);
    }
}
