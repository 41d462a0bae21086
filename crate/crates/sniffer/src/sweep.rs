//! Parallel sweep runners. Cells run on the rayon pool; rows come back in
//! the same `(stage, bits)` or factor order as the sequential runners.

use csi_core::detector::GroundTruth;
use csi_core::storage::{EvalSettings, QuantOptions, QuantSweep, RateSweep, StageId, SweepKind, SweepReport};
use csi_core::CaptureDocument;
use rayon::prelude::*;

use crate::Result;

pub fn quant_sweep(
    doc: &CaptureDocument,
    truth: &GroundTruth,
    settings: &EvalSettings,
    stages: &[StageId],
    bits: &[u8],
    opts: QuantOptions,
) -> Result<SweepReport> {
    let sweep = QuantSweep::new(doc, truth, settings, opts)?;
    let cells: Vec<(StageId, u8)> = stages.iter().flat_map(|&s| bits.iter().map(move |&b| (s, b))).collect();
    let rows = cells
        .par_iter()
        .map(|&(stage, b)| sweep.cell(stage, b))
        .collect::<csi_core::Result<Vec<_>>>()?;
    Ok(SweepReport { kind: SweepKind::Quantization, baseline_auc: sweep.baseline_auc(), rows })
}

pub fn rate_sweep(doc: &CaptureDocument, truth: &GroundTruth, settings: &EvalSettings, factors: &[usize]) -> Result<SweepReport> {
    let sweep = RateSweep::new(doc, truth, settings)?;
    let rows = factors
        .par_iter()
        .map(|&f| sweep.cell(f))
        .collect::<csi_core::Result<Vec<_>>>()?;
    let baseline_auc = match rows.iter().find(|r| r.setting == 1) {
        Some(r) => r.auc,
        None => sweep.cell(1)?.auc,
    };
    Ok(SweepReport { kind: SweepKind::Rate, baseline_auc, rows })
}
