//! Text formats for analysis inputs and outputs: scenario, parameter and
//! ground-truth files; feature, ROC and sweep CSVs; the metrics report.

use std::fmt::Write as _;
use std::path::Path;

use csi_core::detector::{Evaluation, GroundTruth};
use csi_core::pipeline::{FeatureSeries, PipelineParams};
use csi_core::storage::{SweepKind, SweepReport};
use csi_core::registry::FormatRegistry;
use csi_core::synth::Scenario;
use csi_core::Bandwidth;

use crate::{Error, Result};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&read_text(path)?)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let sc: Scenario = serde_json::from_str(text)?;
    sc.validate()?;
    Ok(sc)
}

/// Pipeline parameters as JSON; missing fields take their defaults.
pub fn load_params(path: &Path) -> Result<PipelineParams> {
    parse_params(&read_text(path)?)
}

pub fn parse_params(text: &str) -> Result<PipelineParams> {
    let params: PipelineParams = serde_json::from_str(text)?;
    params.validate()?;
    Ok(params)
}

/// Parameters for a capture of the given width. When `text` does not list
/// `subcarriers`, the registry's default set for that width is used.
pub fn params_for(text: Option<&str>, registry: &FormatRegistry, bandwidth: Bandwidth) -> Result<PipelineParams> {
    let value: serde_json::Value = match text {
        Some(t) => serde_json::from_str(t)?,
        None => serde_json::json!({}),
    };
    let explicit_set = value.get("subcarriers").is_some();
    let mut params: PipelineParams = serde_json::from_value(value)?;
    if !explicit_set {
        params.subcarriers = registry.default_set(bandwidth)?;
    }
    params.validate()?;
    Ok(params)
}

/// Ground truth as `start,end` rows (seconds) under a `start,end` header.
pub fn write_truth(truth: &GroundTruth) -> String {
    let mut out = String::from("start,end\n");
    for (s, e) in truth.intervals() {
        writeln!(out, "{s},{e}").expect("write to String");
    }
    out
}

pub fn parse_truth(text: &str) -> Result<GroundTruth> {
    let mut intervals = Vec::new();
    let mut header_seen = false;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "start,end" {
                return Err(Error::parse(idx + 1, "expected header start,end"));
            }
            header_seen = true;
            continue;
        }
        let (s, e) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(idx + 1, "expected start,end"))?;
        let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::parse(idx + 1, format!("bad number {v:?}")));
        intervals.push((parse(s)?, parse(e)?));
    }
    Ok(GroundTruth::new(intervals)?)
}

pub fn load_truth(path: &Path) -> Result<GroundTruth> {
    parse_truth(&read_text(path)?)
}

/// `window_start,value,valid` with `valid` as 1 or 0.
pub fn feature_csv(series: &FeatureSeries) -> String {
    let mut out = String::from("window_start,value,valid\n");
    for ((start, value), valid) in series.window_starts().iter().zip(series.values()).zip(series.valid()) {
        writeln!(out, "{start},{value},{}", u8::from(*valid)).expect("write to String");
    }
    out
}

/// The CSV does not carry the window length; pass the `w2` it was built with.
pub fn parse_feature_csv(text: &str, window_length: f64) -> Result<FeatureSeries> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, "window_start,value,valid")) => {}
        _ => return Err(Error::parse(1, "expected header window_start,value,valid")),
    }
    let (mut starts, mut values, mut valid) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let [s, v, ok] = fields[..] else {
            return Err(Error::parse(idx + 1, "expected three columns"));
        };
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::parse(idx + 1, format!("bad number {t:?}")));
        starts.push(num(s)?);
        values.push(num(v)?);
        valid.push(match ok {
            "1" => true,
            "0" => false,
            other => return Err(Error::parse(idx + 1, format!("bad flag {other:?}"))),
        });
    }
    Ok(FeatureSeries::new(starts, window_length, values, valid)?)
}

/// One `tau,tpr,fpr` row per threshold, in grid order. The `(0,0)` and
/// `(1,1)` anchors used for the area are noted in the leading comment rather
/// than emitted as rows.
pub fn roc_csv(eval: &Evaluation) -> String {
    let mut out = format!(
        "# anchors (fpr,tpr)=(0,0) and (1,1) implied; thresholds={}; auc={}\ntau,tpr,fpr\n",
        eval.curve.samples().len(),
        eval.auc
    );
    for s in eval.curve.samples() {
        writeln!(out, "{},{},{}", s.tau, s.tpr(), s.fpr()).expect("write to String");
    }
    out
}

/// Name/value report of one evaluation.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub entries: Vec<(String, String)>,
}

impl MetricsReport {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn push(&mut self, name: &str, value: impl ToString) {
        self.entries.push((name.to_string(), value.to_string()));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.entries {
            writeln!(out, "{name}: {value}").expect("write to String");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = Self::new();
        for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (name, value) = line.split_once(": ").ok_or_else(|| Error::parse(idx + 1, "expected name: value"))?;
            report.push(name, value);
        }
        Ok(report)
    }
}

impl Default for MetricsReport {
    fn default() -> Self {
        Self::new()
    }
}

pub fn metrics_report(params: &PipelineParams, series: &FeatureSeries, eval: &Evaluation, exclude_invalid: bool) -> MetricsReport {
    let positives = eval.labels.iter().filter(|&&g| g).count();
    // Operating point maximising TPR - FPR.
    let best = eval
        .curve
        .samples()
        .iter()
        .max_by(|a, b| (a.tpr() - a.fpr()).total_cmp(&(b.tpr() - b.fpr())));
    let mut r = MetricsReport::new();
    r.push("lambda", params.lambda);
    r.push("w1_s", params.w1);
    r.push("w2_s", params.w2);
    r.push("subcarriers", params.subcarriers.len());
    r.push("history", format!("{:?}", params.history).to_lowercase());
    r.push("outlier_filter", params.outlier_filter);
    r.push("ground_truth_rule", format!("overlap >= {} * w2", params.overlap_frac));
    r.push("overlap_frac", params.overlap_frac);
    r.push("invalid_windows", if exclude_invalid { "excluded" } else { "included" });
    r.push("windows", series.len());
    r.push("invalid_window_count", series.valid().iter().filter(|v| !**v).count());
    r.push("evaluated_windows", eval.labels.len());
    r.push("positives", positives);
    r.push("negatives", eval.labels.len() - positives);
    r.push("thresholds", eval.curve.samples().len());
    if let Some(best) = best {
        r.push("best_tau", best.tau);
        r.push("best_tpr", best.tpr());
        r.push("best_fpr", best.fpr());
    }
    r.push("auc", format!("{:.6}", eval.auc));
    r
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let rate = report.kind == SweepKind::Rate;
    let mut out = String::from("stage,bits_or_f,auc,stored_bytes,baseline_bytes,ratio");
    if rate {
        out.push_str(",packets_per_s");
    }
    out.push('\n');
    for row in &report.rows {
        write!(
            out,
            "{},{},{:.6},{},{},{:.4}",
            row.stage, row.setting, row.auc, row.stored_bytes, row.baseline_bytes, row.ratio()
        )
        .expect("write to String");
        if rate {
            write!(out, ",{:.4}", row.packets_per_s.unwrap_or(0.0)).expect("write to String");
        }
        out.push('\n');
    }
    out
}

pub fn sweep_table(report: &SweepReport) -> String {
    let rate = report.kind == SweepKind::Rate;
    let mut out = String::new();
    let setting = if rate { "f" } else { "bits" };
    writeln!(out, "baseline AUC {:.4}", report.baseline_auc).expect("write to String");
    write!(out, "{:>5} {:>5} {:>8} {:>14} {:>14} {:>9}", "stage", setting, "auc", "stored_bytes", "baseline_bytes", "ratio")
        .expect("write to String");
    if rate {
        write!(out, " {:>9}", "pkts/s").expect("write to String");
    }
    out.push('\n');
    for row in &report.rows {
        write!(
            out,
            "{:>5} {:>5} {:>8.4} {:>14} {:>14} {:>9.2}",
            row.stage, row.setting, row.auc, row.stored_bytes, row.baseline_bytes, row.ratio()
        )
        .expect("write to String");
        if rate {
            write!(out, " {:>9.2}", row.packets_per_s.unwrap_or(0.0)).expect("write to String");
        }
        out.push('\n');
    }
    out
}
