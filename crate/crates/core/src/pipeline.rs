//! Amplitude pipeline: extraction, trailing-window outlier removal and
//! per-window aggregation into a single motion feature.
//!
//! Outlier removal works on each subcarrier independently. For a frame at
//! time `t` the statistics window holds the subcarrier's preceding values with
//! timestamps in `[t - w1, t)`. A value `A` is kept when the window has fewer
//! than two values, or when `|A - mean| / std < lambda`; otherwise it is
//! replaced by the previous frame's filtered value. A window with zero
//! deviation keeps `A` only if it equals the mean.
//!
//! Aggregation splits time into consecutive windows of `w2` seconds anchored
//! at the first frame. For every window with at least two frames the feature
//! is the mean over subcarriers of each subcarrier's standard deviation in
//! that window. All standard deviations are population (divide by `n`).

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::types::{amplitude, CaptureDocument, DeviceId, SubcarrierSet};
use crate::{Error, Result};

/// Which values feed the trailing statistics window of the outlier filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HistorySource {
    /// Previously filtered values (sequential semantics). Sticky: once the
    /// window holds a single repeated value, σ = 0 and every later sample that
    /// differs is replaced, so sparse captures can freeze a subcarrier.
    Filtered,
    /// Raw, unfiltered amplitudes.
    #[default]
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineParams {
    /// Outlier threshold in standard deviations.
    pub lambda: f64,
    /// Outlier statistics window, seconds.
    pub w1: f64,
    /// Aggregation window, seconds.
    pub w2: f64,
    pub subcarriers: SubcarrierSet,
    /// Fraction of a window an activity interval must cover for the window to
    /// be labelled positive.
    pub overlap_frac: f64,
    pub history: HistorySource,
    /// Run the outlier filter. Disabling it aggregates raw amplitudes.
    pub outlier_filter: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            lambda: 3.0,
            w1: 5.0,
            w2: 3.0,
            subcarriers: crate::types::default_subcarrier_set(20).expect("20 MHz set"),
            overlap_frac: 0.5,
            history: HistorySource::Raw,
            outlier_filter: true,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.lambda) {
            return Err(Error::InvalidParameter("lambda must be > 0"));
        }
        if !positive(self.w1) {
            return Err(Error::InvalidParameter("w1 must be > 0"));
        }
        if !positive(self.w2) {
            return Err(Error::InvalidParameter("w2 must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.overlap_frac) {
            return Err(Error::InvalidParameter("overlap_frac must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Per-frame amplitudes, stored row-major: one row per frame, one column per
/// subcarrier in ascending index order.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix {
    timestamps: Vec<f64>,
    subcarriers: SubcarrierSet,
    values: Vec<f64>,
    filtered: bool,
}

impl AmplitudeMatrix {
    pub fn new(
        timestamps: Vec<f64>,
        subcarriers: SubcarrierSet,
        values: Vec<f64>,
        filtered: bool,
    ) -> Result<Self> {
        if values.len() != timestamps.len() * subcarriers.len() {
            return Err(Error::InvalidParameter("matrix shape does not match timestamps × subcarriers"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("amplitudes must be finite and non-negative"));
        }
        if timestamps.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] > w[1]) {
            return Err(Error::InvalidParameter("timestamps must be non-decreasing"));
        }
        Ok(Self { timestamps, subcarriers, values, filtered })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn subcarriers(&self) -> &SubcarrierSet {
        &self.subcarriers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_filtered(&self) -> bool {
        self.filtered
    }

    pub fn rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn width(&self) -> usize {
        self.subcarriers.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width() + col]
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(col).step_by(self.width().max(1)).copied()
    }

    /// Same timestamps and subcarriers, new values. Used when a stage's data
    /// are replaced by their quantized reconstruction.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.timestamps.clone(), self.subcarriers.clone(), values, self.filtered)
    }
}

/// The aggregate feature, one value per window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    window_starts: Vec<f64>,
    window_length: f64,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl FeatureSeries {
    pub fn new(window_starts: Vec<f64>, window_length: f64, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != window_starts.len() || valid.len() != window_starts.len() {
            return Err(Error::InvalidParameter("feature series columns differ in length"));
        }
        if window_length.is_nan() || window_length <= 0.0 {
            return Err(Error::InvalidParameter("window length must be > 0"));
        }
        Ok(Self { window_starts, window_length, values, valid })
    }

    /// Consecutive windows starting at `t0`; every window marked valid.
    pub fn regular(t0: f64, window_length: f64, values: Vec<f64>) -> Result<Self> {
        let starts = (0..values.len()).map(|k| window_start(t0, window_length, k)).collect();
        let valid = alloc::vec![true; values.len()];
        Self::new(starts, window_length, values, valid)
    }

    pub fn window_starts(&self) -> &[f64] {
        &self.window_starts
    }

    pub fn window_length(&self) -> f64 {
        self.window_length
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.window_starts.clone(), self.window_length, values, self.valid.clone())
    }
}

#[inline]
fn window_start(t0: f64, w2: f64, k: usize) -> f64 {
    t0 + k as f64 * w2
}

/// Window index of `t`: the unique `k` with `t0 + k·w2 <= t < t0 + (k+1)·w2`,
/// evaluated with the same floating-point expressions as the window bounds.
fn window_index(t: f64, t0: f64, w2: f64) -> usize {
    let mut k = libm::floor((t - t0) / w2).max(0.0) as usize;
    while k > 0 && t < window_start(t0, w2, k) {
        k -= 1;
    }
    while t >= window_start(t0, w2, k + 1) {
        k += 1;
    }
    k
}

/// One row per frame whose device passes the filter. An empty filter keeps
/// every device.
pub fn extract_amplitudes(
    doc: &CaptureDocument,
    set: &SubcarrierSet,
    device_filter: &[DeviceId],
) -> Result<AmplitudeMatrix> {
    let positions = set.positions(doc.fft_size())?;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for frame in doc.frames() {
        if !device_filter.is_empty() && !device_filter.contains(&frame.device()) {
            continue;
        }
        timestamps.push(frame.timestamp());
        values.extend(positions.iter().map(|&p| amplitude(frame.csi()[p])));
    }
    if timestamps.is_empty() {
        return Err(Error::NoFrames);
    }
    Ok(AmplitudeMatrix { timestamps, subcarriers: set.clone(), values, filtered: false })
}

/// Builds an unfiltered amplitude matrix from real-valued complex components
/// (row-major, `rows × fft_size` each), used when raw samples come back from
/// quantization as reals.
pub fn amplitudes_from_components(
    timestamps: Vec<f64>,
    devices: &[DeviceId],
    fft_size: usize,
    re: &[f64],
    im: &[f64],
    set: &SubcarrierSet,
    device_filter: &[DeviceId],
) -> Result<AmplitudeMatrix> {
    let positions = set.positions(fft_size)?;
    let mut kept_ts = Vec::new();
    let mut values = Vec::new();
    for (r, &t) in timestamps.iter().enumerate() {
        if !device_filter.is_empty() && !device_filter.contains(&devices[r]) {
            continue;
        }
        kept_ts.push(t);
        let base = r * fft_size;
        values.extend(positions.iter().map(|&p| {
            let (x, y) = (re[base + p], im[base + p]);
            libm::sqrt(x * x + y * y)
        }));
    }
    if kept_ts.is_empty() {
        return Err(Error::NoFrames);
    }
    AmplitudeMatrix::new(kept_ts, set.clone(), values, false)
}

/// Running window statistics over one subcarrier's history.
///
/// Sums are kept relative to a fixed reference value to limit cancellation,
/// and recomputed from the window contents periodically to stop drift.
/// Monotone deques track the window extremes so that a zero-deviation window
/// is recognised exactly.
struct TrailingWindow {
    reference: f64,
    sum: f64,
    sum_sq: f64,
    lo: usize,
    hi: usize,
    mins: VecDeque<usize>,
    maxs: VecDeque<usize>,
    updates: usize,
}

const RESUM_INTERVAL: usize = 1024;

impl TrailingWindow {
    fn new(reference: f64) -> Self {
        Self {
            reference,
            sum: 0.0,
            sum_sq: 0.0,
            lo: 0,
            hi: 0,
            mins: VecDeque::new(),
            maxs: VecDeque::new(),
            updates: 0,
        }
    }

    fn push(&mut self, history: &[f64]) {
        let i = self.hi;
        let v = history[i];
        let d = v - self.reference;
        self.sum += d;
        self.sum_sq += d * d;
        while self.mins.back().is_some_and(|&j| history[j] >= v) {
            self.mins.pop_back();
        }
        self.mins.push_back(i);
        while self.maxs.back().is_some_and(|&j| history[j] <= v) {
            self.maxs.pop_back();
        }
        self.maxs.push_back(i);
        self.hi += 1;
        self.tick(history);
    }

    fn pop(&mut self, history: &[f64]) {
        let i = self.lo;
        let d = history[i] - self.reference;
        self.sum -= d;
        self.sum_sq -= d * d;
        if self.mins.front() == Some(&i) {
            self.mins.pop_front();
        }
        if self.maxs.front() == Some(&i) {
            self.maxs.pop_front();
        }
        self.lo += 1;
        self.tick(history);
    }

    fn tick(&mut self, history: &[f64]) {
        self.updates += 1;
        if self.updates.is_multiple_of(RESUM_INTERVAL) {
            self.resum(history);
        }
    }

    fn resum(&mut self, history: &[f64]) {
        let (mut s, mut s2) = (0.0, 0.0);
        for &v in &history[self.lo..self.hi] {
            let d = v - self.reference;
            s += d;
            s2 += d * d;
        }
        self.sum = s;
        self.sum_sq = s2;
    }

    fn len(&self) -> usize {
        self.hi - self.lo
    }

    /// Mean and population standard deviation, with an exact zero deviation
    /// when every value in the window is identical.
    fn stats(&self, history: &[f64]) -> (f64, f64) {
        let n = self.len() as f64;
        let min = history[*self.mins.front().expect("non-empty window")];
        let max = history[*self.maxs.front().expect("non-empty window")];
        if min == max {
            return (min, 0.0);
        }
        let mean_d = self.sum / n;
        let var = self.sum_sq / n - mean_d * mean_d;
        if var > 0.0 && var * 1e10 > (max - min) * (max - min) {
            return (self.reference + mean_d, libm::sqrt(var));
        }
        // Cancellation swamped the running variance; fall back to two passes.
        let slice = &history[self.lo..self.hi];
        let mean = slice.iter().sum::<f64>() / n;
        let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, libm::sqrt(var))
    }
}

/// Trailing-window outlier removal, applied to each subcarrier column.
pub fn filter_outliers(m: &AmplitudeMatrix, params: &PipelineParams) -> Result<AmplitudeMatrix> {
    params.validate()?;
    if m.filtered {
        return Err(Error::InvalidParameter("matrix is already filtered"));
    }
    let rows = m.rows();
    let width = m.width();
    let ts = &m.timestamps;
    let mut out = alloc::vec![0.0; m.values.len()];
    let mut raw = alloc::vec![0.0; rows];
    let mut filtered = alloc::vec![0.0; rows];

    for col in 0..width {
        for (r, v) in raw.iter_mut().enumerate() {
            *v = m.values[r * width + col];
        }
        filter_column(ts, &raw, &mut filtered, params);
        for (r, v) in filtered.iter().enumerate() {
            out[r * width + col] = *v;
        }
    }

    Ok(AmplitudeMatrix {
        timestamps: m.timestamps.clone(),
        subcarriers: m.subcarriers.clone(),
        values: out,
        filtered: true,
    })
}

fn filter_column(ts: &[f64], raw: &[f64], out: &mut [f64], params: &PipelineParams) {
    if raw.is_empty() {
        return;
    }
    let mut window = TrailingWindow::new(raw[0]);
    for i in 0..raw.len() {
        let t = ts[i];
        let history: &[f64] = match params.history {
            HistorySource::Filtered => out,
            HistorySource::Raw => raw,
        };
        // Admit frames strictly before t, then drop those older than t - w1.
        while window.hi < i && ts[window.hi] < t {
            window.push(history);
        }
        while window.lo < window.hi && ts[window.lo] < t - params.w1 {
            window.pop(history);
        }

        let a = raw[i];
        let keep = if window.len() < 2 {
            true
        } else {
            let (mean, std) = window.stats(history);
            if std > 0.0 {
                libm::fabs(a - mean) / std < params.lambda
            } else {
                a == mean
            }
        };
        out[i] = if keep || i == 0 { a } else { out[i - 1] };
    }
}

/// Aggregates a filtered matrix into the per-window feature.
pub fn aggregate(m: &AmplitudeMatrix, params: &PipelineParams) -> Result<FeatureSeries> {
    aggregate_with(m, params, false)
}

/// `allow_unfiltered` lifts the requirement that `m` went through
/// [`filter_outliers`].
pub fn aggregate_with(m: &AmplitudeMatrix, params: &PipelineParams, allow_unfiltered: bool) -> Result<FeatureSeries> {
    params.validate()?;
    if !m.filtered && !allow_unfiltered {
        return Err(Error::Unfiltered);
    }
    let w2 = params.w2;
    let Some(&t0) = m.timestamps.first() else {
        return FeatureSeries::new(Vec::new(), w2, Vec::new(), Vec::new());
    };
    let t_last = *m.timestamps.last().expect("non-empty");
    let n_windows = window_index(t_last, t0, w2) + 1;
    let width = m.width();

    let mut starts = Vec::with_capacity(n_windows);
    let mut values = Vec::with_capacity(n_windows);
    let mut valid = Vec::with_capacity(n_windows);
    let mut row = 0;
    for k in 0..n_windows {
        let start = window_start(t0, w2, k);
        let end = window_start(t0, w2, k + 1);
        let first = row;
        while row < m.rows() && m.timestamps[row] < end {
            row += 1;
        }
        let count = row - first;
        starts.push(start);
        if count < 2 {
            values.push(0.0);
            valid.push(false);
            continue;
        }
        let n = count as f64;
        let mut total = 0.0;
        for col in 0..width {
            let column = (first..row).map(|r| m.values[r * width + col]);
            let head = m.values[first * width + col];
            if column.clone().all(|v| v == head) {
                // exactly zero, whatever sum / n rounds to
                continue;
            }
            let mean = column.clone().sum::<f64>() / n;
            let var = column.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            total += libm::sqrt(var);
        }
        values.push(if width == 0 { 0.0 } else { total / width as f64 });
        valid.push(true);
    }
    FeatureSeries::new(starts, w2, values, valid)
}

/// Interception points between pipeline stages. Each hook may replace the
/// data flowing to the next stage; the defaults pass data through.
pub trait PipelineHooks {
    fn raw_amplitudes(&mut self, m: AmplitudeMatrix) -> Result<AmplitudeMatrix> {
        Ok(m)
    }

    fn filtered_amplitudes(&mut self, m: AmplitudeMatrix) -> Result<AmplitudeMatrix> {
        Ok(m)
    }

    fn features(&mut self, s: FeatureSeries) -> Result<FeatureSeries> {
        Ok(s)
    }
}

/// Hooks that change nothing.
pub struct NoHooks;

impl PipelineHooks for NoHooks {}

/// extract → filter → aggregate.
pub fn run_pipeline(doc: &CaptureDocument, params: &PipelineParams, device_filter: &[DeviceId]) -> Result<FeatureSeries> {
    run_pipeline_with(doc, params, device_filter, &mut NoHooks)
}

pub fn run_pipeline_with(
    doc: &CaptureDocument,
    params: &PipelineParams,
    device_filter: &[DeviceId],
    hooks: &mut impl PipelineHooks,
) -> Result<FeatureSeries> {
    params.validate()?;
    let raw = extract_amplitudes(doc, &params.subcarriers, device_filter)?;
    run_from_amplitudes(raw, params, hooks)
}

/// Pipeline tail starting from raw amplitudes.
pub fn run_from_amplitudes(
    raw: AmplitudeMatrix,
    params: &PipelineParams,
    hooks: &mut impl PipelineHooks,
) -> Result<FeatureSeries> {
    let raw = hooks.raw_amplitudes(raw)?;
    let series = if params.outlier_filter {
        let filtered = hooks.filtered_amplitudes(filter_outliers(&raw, params)?)?;
        aggregate(&filtered, params)?
    } else {
        aggregate_with(&raw, params, true)?
    };
    hooks.features(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params_with(set: SubcarrierSet) -> PipelineParams {
        PipelineParams { subcarriers: set, ..PipelineParams::default() }
    }

    fn single(values: &[f64], ts: &[f64]) -> AmplitudeMatrix {
        AmplitudeMatrix::new(ts.to_vec(), SubcarrierSet::new(vec![1]).unwrap(), values.to_vec(), false).unwrap()
    }

    #[test]
    fn spike_is_replaced() {
        let m = single(&[10.0, 10.0, 10.0, 10.0, 10.0, 100.0], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let params = params_with(SubcarrierSet::new(vec![1]).unwrap());
        let f = filter_outliers(&m, &params).unwrap();
        assert_eq!(f.values(), &[10.0; 6]);
        assert!(f.is_filtered());
    }

    #[test]
    fn spike_after_varying_history() {
        // Window for t=5 is [0, 5): values 9, 11, 9, 11, 10 -> mean 10, std sqrt(0.8).
        let m = single(&[9.0, 11.0, 9.0, 11.0, 10.0, 12.0, 10.5], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let params = params_with(SubcarrierSet::new(vec![1]).unwrap());
        let f = filter_outliers(&m, &params).unwrap();
        // |12 - 10| / 0.894 = 2.24 < 3 keeps 12.
        assert_eq!(f.values()[5], 12.0);
        assert_eq!(f.values()[6], 10.5);
    }

    #[test]
    fn first_two_frames_pass() {
        let m = single(&[1.0, 1000.0, 1.0], &[0.0, 0.1, 0.2]);
        let params = params_with(SubcarrierSet::new(vec![1]).unwrap());
        let f = filter_outliers(&m, &params).unwrap();
        assert_eq!(f.values()[..2], [1.0, 1000.0]);
    }

    #[test]
    fn constant_series_is_a_fixpoint() {
        let m = single(&[4.5; 50], &(0..50).map(|k| k as f64 * 0.25).collect::<Vec<_>>());
        let f = filter_outliers(&m, &params_with(SubcarrierSet::new(vec![1]).unwrap())).unwrap();
        assert_eq!(f.values(), m.values());
    }

    #[test]
    fn zero_deviation_outlier() {
        let m = single(&[2.0, 2.0, 2.0, 2.0000001], &[0.0, 1.0, 2.0, 3.0]);
        let f = filter_outliers(&m, &params_with(SubcarrierSet::new(vec![1]).unwrap())).unwrap();
        assert_eq!(f.values()[3], 2.0);
    }

    #[test]
    fn same_timestamp_frames_are_not_history() {
        // Three frames at t=0 never see each other; all pass.
        let m = single(&[1.0, 50.0, 1.0, 1.0], &[0.0, 0.0, 0.0, 10.0]);
        let f = filter_outliers(&m, &params_with(SubcarrierSet::new(vec![1]).unwrap())).unwrap();
        assert_eq!(f.values(), m.values());
    }

    #[test]
    fn window_excludes_old_frames() {
        // At t=10 the window [5, 10) holds nothing, so 100 passes.
        let m = single(&[1.0, 1.0, 1.0, 100.0], &[0.0, 1.0, 2.0, 10.0]);
        let f = filter_outliers(&m, &params_with(SubcarrierSet::new(vec![1]).unwrap())).unwrap();
        assert_eq!(f.values()[3], 100.0);
    }

    #[test]
    fn raw_history_differs_from_filtered() {
        // Spike at t=5 is replaced; with raw history it inflates later statistics.
        let vals = [10.0, 10.0, 10.0, 10.0, 10.0, 100.0, 30.0];
        let ts = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut params = params_with(SubcarrierSet::new(vec![1]).unwrap());
        params.history = HistorySource::Filtered;
        let filtered_hist = filter_outliers(&single(&vals, &ts), &params).unwrap();
        assert_eq!(filtered_hist.values()[6], 10.0);
        params.history = HistorySource::Raw;
        let raw_hist = filter_outliers(&single(&vals, &ts), &params).unwrap();
        // Raw window [1, 6): 10,10,10,10,100 -> mean 28, std 36; |30-28|/36 < 3.
        assert_eq!(raw_hist.values()[6], 30.0);
    }

    #[test]
    fn filtered_history_can_freeze_a_column() {
        // Two early jumps are replaced; the window then holds only 10s and no
        // later value differing from 10 can pass. Raw history recovers.
        let vals = [10.0, 10.0, 10.0, 50.0, 52.0, 51.0, 53.0, 50.0, 52.0];
        let ts: Vec<f64> = (0..vals.len()).map(|i| i as f64).collect();
        let mut params = params_with(SubcarrierSet::new(vec![1]).unwrap());
        params.history = HistorySource::Filtered;
        let f = filter_outliers(&single(&vals, &ts), &params).unwrap();
        assert!(f.values().iter().all(|&v| v == 10.0));
        params.history = HistorySource::Raw;
        let r = filter_outliers(&single(&vals, &ts), &params).unwrap();
        assert_eq!(r.values()[8], 52.0);
    }

    #[test]
    fn filtering_twice_is_rejected() {
        let m = single(&[1.0, 2.0], &[0.0, 1.0]);
        let params = params_with(SubcarrierSet::new(vec![1]).unwrap());
        let f = filter_outliers(&m, &params).unwrap();
        assert!(filter_outliers(&f, &params).is_err());
    }

    #[test]
    fn aggregate_two_frames() {
        let set = crate::types::default_subcarrier_set(20).unwrap();
        let mut values = vec![2.0; 56];
        values.extend(vec![4.0; 56]);
        let m = AmplitudeMatrix::new(vec![0.0, 1.0], set.clone(), values, true).unwrap();
        let s = aggregate(&m, &params_with(set)).unwrap();
        assert_eq!(s.values(), &[1.0]);
        assert_eq!(s.valid(), &[true]);
        assert_eq!(s.window_starts(), &[0.0]);
    }

    #[test]
    fn aggregate_requires_filtered_input() {
        let set = SubcarrierSet::new(vec![1]).unwrap();
        let m = AmplitudeMatrix::new(vec![0.0, 1.0], set.clone(), vec![1.0, 2.0], false).unwrap();
        assert_eq!(aggregate(&m, &params_with(set.clone())), Err(Error::Unfiltered));
        assert_eq!(aggregate_with(&m, &params_with(set), true).unwrap().values(), &[0.5]);
    }

    #[test]
    fn aggregate_gap_gives_invalid_window() {
        let set = SubcarrierSet::new(vec![1]).unwrap();
        // Frames in [0,3) and [6,9); the window [3,6) is empty.
        let ts = vec![0.0, 1.0, 2.0, 6.0, 7.0];
        let m = AmplitudeMatrix::new(ts, set.clone(), vec![1.0, 3.0, 1.0, 5.0, 5.0], true).unwrap();
        let s = aggregate(&m, &params_with(set)).unwrap();
        assert_eq!(s.window_starts(), &[0.0, 3.0, 6.0]);
        assert_eq!(s.valid(), &[true, false, true]);
        assert_eq!(s.values()[1], 0.0);
        assert_eq!(s.values()[2], 0.0);
        assert!((s.values()[0] - libm::sqrt(8.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn aggregate_singleton_window() {
        let set = SubcarrierSet::new(vec![1]).unwrap();
        let m = AmplitudeMatrix::new(vec![0.5, 1.0, 3.5], set.clone(), vec![1.0, 3.0, 7.0], true).unwrap();
        let s = aggregate(&m, &params_with(set)).unwrap();
        assert_eq!(s.valid(), &[true, false]);
        assert_eq!(s.window_starts(), &[0.5, 3.5]);
    }

    #[test]
    fn window_index_matches_bounds() {
        for (t, k) in [(0.0, 0), (2.999_999, 0), (3.0, 1), (6.0, 2), (0.3, 0)] {
            assert_eq!(window_index(t, 0.0, 3.0), k, "t = {t}");
        }
        // 0.1 + 3 * 0.1 is not 0.4 in binary; the index follows the bound expressions.
        let t0 = 0.1;
        let t = t0 + 3.0 * 0.1;
        assert_eq!(window_index(t, t0, 0.1), 3);
    }

    #[test]
    fn params_validation() {
        let mut p = PipelineParams::default();
        p.validate().unwrap();
        p.lambda = 0.0;
        assert!(p.validate().is_err());
        p = PipelineParams { w1: -1.0, ..PipelineParams::default() };
        assert!(p.validate().is_err());
        p = PipelineParams { w2: f64::NAN, ..PipelineParams::default() };
        assert!(p.validate().is_err());
        p = PipelineParams { overlap_frac: 1.5, ..PipelineParams::default() };
        assert!(p.validate().is_err());
    }
}
