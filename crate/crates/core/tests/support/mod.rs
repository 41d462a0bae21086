//! Brute-force reference implementations shared by the oracle and
//! acceptance tests.
#![allow(dead_code)]

use csi_core::pipeline::{HistorySource, PipelineParams};
use csi_core::{Bandwidth, CaptureDocument, ComplexSample, CsiFrame, DeviceId, SubcarrierSet};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

pub fn random_document(rng: &mut Rng) -> CaptureDocument {
    let n = 1 + rng.below(200);
    let mut t = rng.range(0.0, 100.0);
    let level = rng.range(20.0, 800.0);
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        // repeated timestamps now and then
        if rng.unit() > 0.1 {
            t += rng.range(0.0, 0.3);
        }
        let device = DeviceId([2, 0, 0, 0, 0, 1 + rng.below(2) as u8]);
        let csi = (0..64)
            .map(|_| {
                let spike = if rng.unit() < 0.03 { rng.range(3.0, 8.0) } else { 1.0 };
                let a = level * (1.0 + 0.1 * rng.normal()) * spike;
                let phase = rng.range(0.0, std::f64::consts::TAU);
                let q = |v: f64| v.round().clamp(-32768.0, 32767.0) as i16;
                // occasional constant stretches give zero-deviation windows
                if rng.unit() < 0.05 {
                    ComplexSample::new(10, 0)
                } else {
                    ComplexSample::new(q(a * phase.cos()), q(a * phase.sin()))
                }
            })
            .collect();
        frames.push(CsiFrame::new(t, device, csi).unwrap());
    }
    CaptureDocument::new(Bandwidth::Mhz20, frames, None).unwrap()
}

pub fn random_params(rng: &mut Rng) -> PipelineParams {
    let mut all: Vec<i16> = (-28..=28).filter(|&i| i != 0).collect();
    let keep = 1 + rng.below(all.len());
    for i in 0..keep {
        let j = i + rng.below(all.len() - i);
        all.swap(i, j);
    }
    all.truncate(keep);
    PipelineParams {
        lambda: rng.range(1.0, 4.0),
        w1: rng.range(0.2, 4.0),
        w2: rng.range(0.1, 3.0),
        subcarriers: SubcarrierSet::from_unsorted(all).unwrap(),
        overlap_frac: 0.5,
        history: if rng.unit() < 0.5 { HistorySource::Filtered } else { HistorySource::Raw },
        outlier_filter: true,
    }
}

/// Two-pass mean with one correction step, then the population deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mean = mean + values.iter().map(|v| v - mean).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Direct evaluation: amplitudes, per-subcarrier trailing-window filter,
/// windowed mean of per-subcarrier standard deviations.
pub fn brute_force(doc: &CaptureDocument, p: &PipelineParams) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let ts: Vec<f64> = doc.frames().iter().map(|f| f.timestamp()).collect();
    let n = ts.len();
    let cols: Vec<Vec<f64>> = p
        .subcarriers
        .indices()
        .iter()
        .map(|&k| {
            doc.frames()
                .iter()
                .map(|f| {
                    let s = f.csi()[(k + 32) as usize];
                    (f64::from(s.re).powi(2) + f64::from(s.im).powi(2)).sqrt()
                })
                .collect()
        })
        .collect();

    let filtered: Vec<Vec<f64>> = cols
        .iter()
        .map(|raw| {
            let mut out: Vec<f64> = Vec::with_capacity(n);
            for i in 0..n {
                let history = match p.history {
                    HistorySource::Filtered => &out[..],
                    HistorySource::Raw => &raw[..i],
                };
                let window: Vec<f64> = (0..i)
                    .filter(|&j| ts[j] >= ts[i] - p.w1 && ts[j] < ts[i])
                    .map(|j| history[j])
                    .collect();
                let keep = if window.len() < 2 {
                    true
                } else {
                    let (mu, sigma) = mean_std(&window);
                    if sigma > 0.0 {
                        (raw[i] - mu).abs() / sigma < p.lambda
                    } else {
                        raw[i] == mu
                    }
                };
                let v = if keep || i == 0 { raw[i] } else { out[i - 1] };
                out.push(v);
            }
            out
        })
        .collect();

    let t0 = ts[0];
    let (mut starts, mut values, mut valid) = (Vec::new(), Vec::new(), Vec::new());
    let mut k = 0usize;
    loop {
        let start = t0 + k as f64 * p.w2;
        let end = t0 + (k + 1) as f64 * p.w2;
        if start > ts[n - 1] {
            break;
        }
        let rows: Vec<usize> = (0..n).filter(|&r| ts[r] >= start && ts[r] < end).collect();
        starts.push(start);
        if rows.len() < 2 {
            values.push(0.0);
            valid.push(false);
        } else {
            let sum: f64 = filtered
                .iter()
                .map(|col| mean_std(&rows.iter().map(|&r| col[r]).collect::<Vec<_>>()).1)
                .sum();
            values.push(sum / filtered.len() as f64);
            valid.push(true);
        }
        k += 1;
    }
    (starts, values, valid)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Probability that a positive outscores a negative, ties counting half.
pub fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Grid cell of a score: how many thresholds it reaches.
pub fn cell(thresholds: &[f64], s: f64) -> f64 {
    thresholds.partition_point(|&t| t <= s) as f64
}

/// A random label/score set of 2..=300 windows holding both classes.
/// Positives are shifted upwards; `discrete` rounds scores to integers.
pub fn scored_set(rng: &mut Rng, discrete: bool) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = 2 + rng.below(299);
        let shift = rng.range(0.0, 3.0);
        let labels: Vec<bool> = (0..n).map(|_| rng.unit() < 0.4).collect();
        if labels.iter().all(|&g| g) || labels.iter().all(|&g| !g) {
            continue;
        }
        let scores = labels
            .iter()
            .map(|&g| {
                let s = rng.normal() + if g { shift } else { 0.0 };
                if discrete {
                    s.round()
                } else {
                    s
                }
            })
            .collect();
        return (scores, labels);
    }
}
