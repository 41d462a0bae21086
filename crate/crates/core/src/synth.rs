//! Seeded synthetic capture scenarios.
//!
//! The amplitude model is deliberately simple:
//!
//! * frames arrive as a Poisson process of `rate` frames per second over
//!   `[0, duration)`, timestamps rounded to whole microseconds;
//! * subcarrier `i` has baseline `b_i = baseline_scale · (1 + 0.3 · sin(π·i/29))`;
//! * each amplitude is `b_i · (1 + ε)` with `ε ~ N(0, s²)`, where `s` is
//!   `s_active` inside an activity interval and `s_idle` outside;
//! * with probability `spike_prob` an amplitude is multiplied by a gain drawn
//!   uniformly from `spike_gain`;
//! * the complex sample takes a uniformly random phase and is rounded to the
//!   nearest 16-bit integers (saturating).
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`, using one stream per concern: stream 0 for arrival
//! gaps, 1 for amplitude noise, 2 for spikes and 3 for phases. Uniform reals
//! are `(next_u64 >> 11) · 2⁻⁵³`; normals use the Box–Muller transform and
//! consume both outputs of each pair.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::detector::GroundTruth;
use crate::types::{Bandwidth, CaptureDocument, ComplexSample, CsiFrame, DeviceId};
use crate::{Error, Result};

const STREAM_ARRIVALS: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_SPIKES: u64 = 2;
const STREAM_PHASE: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Scenario {
    pub seed: u64,
    /// Seconds.
    pub duration: f64,
    /// Mean frames per second.
    pub rate: f64,
    pub device: DeviceId,
    /// Channel width in MHz.
    pub bandwidth: u32,
    /// `[start, end)` pairs in seconds.
    #[cfg_attr(feature = "serde", serde(default))]
    pub activity_intervals: Vec<(f64, f64)>,
    #[cfg_attr(feature = "serde", serde(default = "defaults::s_idle"))]
    pub s_idle: f64,
    #[cfg_attr(feature = "serde", serde(default = "defaults::s_active"))]
    pub s_active: f64,
    #[cfg_attr(feature = "serde", serde(default = "defaults::spike_prob"))]
    pub spike_prob: f64,
    #[cfg_attr(feature = "serde", serde(default = "defaults::spike_gain"))]
    pub spike_gain: (f64, f64),
    #[cfg_attr(feature = "serde", serde(default = "defaults::baseline_scale"))]
    pub baseline_scale: f64,
}

mod defaults {
    pub fn s_idle() -> f64 {
        0.01
    }
    pub fn s_active() -> f64 {
        0.08
    }
    pub fn spike_prob() -> f64 {
        0.001
    }
    pub fn spike_gain() -> (f64, f64) {
        (3.0, 6.0)
    }
    pub fn baseline_scale() -> f64 {
        500.0
    }
}

impl Scenario {
    /// Default noise and spike settings for the given timing.
    pub fn new(seed: u64, duration: f64, rate: f64) -> Self {
        Self {
            seed,
            duration,
            rate,
            device: DeviceId([0x02, 0x00, 0x00, 0x00, 0x00, 0x01]),
            bandwidth: 20,
            activity_intervals: Vec::new(),
            s_idle: defaults::s_idle(),
            s_active: defaults::s_active(),
            spike_prob: defaults::spike_prob(),
            spike_gain: defaults::spike_gain(),
            baseline_scale: defaults::baseline_scale(),
        }
    }

    pub fn validate(&self) -> Result<Bandwidth> {
        let bandwidth = Bandwidth::from_mhz(self.bandwidth)?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidScenario("duration must be > 0"));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::InvalidScenario("rate must be > 0"));
        }
        if !(self.s_idle > 0.0 && self.s_active > self.s_idle && self.s_active.is_finite()) {
            return Err(Error::InvalidScenario("noise levels must satisfy s_active > s_idle > 0"));
        }
        if !(0.0..=1.0).contains(&self.spike_prob) {
            return Err(Error::InvalidScenario("spike_prob must be in [0, 1]"));
        }
        let (g_lo, g_hi) = self.spike_gain;
        if !(g_lo > 0.0 && g_hi >= g_lo && g_hi.is_finite()) {
            return Err(Error::InvalidScenario("spike_gain must be a positive range"));
        }
        if !(self.baseline_scale.is_finite() && self.baseline_scale > 0.0) {
            return Err(Error::InvalidScenario("baseline_scale must be > 0"));
        }
        let mut sorted = self.activity_intervals.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(s, e) in &sorted {
            if !(s >= 0.0 && e > s && e <= self.duration) {
                return Err(Error::InvalidScenario("activity intervals must lie within [0, duration]"));
            }
        }
        if sorted.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::InvalidScenario("activity intervals overlap"));
        }
        Ok(bandwidth)
    }

    fn active_at(&self, t: f64) -> bool {
        self.activity_intervals.iter().any(|&(s, e)| s <= t && t < e)
    }
}

struct Uniform(ChaCha20Rng);

impl Uniform {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    /// `[0, 1)` with 53 random bits.
    fn next(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

struct Normal {
    uniform: Uniform,
    spare: Option<f64>,
}

impl Normal {
    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform.next();
        let u2 = self.uniform.next();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

fn to_i16(v: f64) -> i16 {
    libm::round(v).clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
}

/// Baseline amplitude of a subcarrier index.
pub fn baseline(scale: f64, index: i16) -> f64 {
    scale * (1.0 + 0.3 * libm::sin(PI * f64::from(index) / 29.0))
}

/// Generates the capture and its ground truth. Identical scenarios give
/// identical output.
pub fn generate(sc: &Scenario) -> Result<(CaptureDocument, GroundTruth)> {
    let bandwidth = sc.validate()?;
    let fft = bandwidth.fft_size();
    let baselines: Vec<f64> = (bandwidth.min_index()..=bandwidth.max_index())
        .map(|i| baseline(sc.baseline_scale, i))
        .collect();

    let mut arrivals = Uniform::new(sc.seed, STREAM_ARRIVALS);
    let mut noise = Normal { uniform: Uniform::new(sc.seed, STREAM_NOISE), spare: None };
    let mut spikes = Uniform::new(sc.seed, STREAM_SPIKES);
    let mut phases = Uniform::new(sc.seed, STREAM_PHASE);
    let (g_lo, g_hi) = sc.spike_gain;

    let expected = (sc.duration * sc.rate) as usize;
    let mut frames = Vec::with_capacity(expected + expected / 8);
    let mut t = 0.0;
    loop {
        t += -libm::log(1.0 - arrivals.next()) / sc.rate;
        if t >= sc.duration {
            break;
        }
        let ts = libm::round(t * 1e6) / 1e6;
        let sigma = if sc.active_at(ts) { sc.s_active } else { sc.s_idle };
        let csi = baselines
            .iter()
            .map(|&b| {
                let mut a = (b * (1.0 + sigma * noise.next())).max(0.0);
                if spikes.next() < sc.spike_prob {
                    a *= g_lo + (g_hi - g_lo) * spikes.next();
                }
                let phi = 2.0 * PI * phases.next();
                ComplexSample::new(to_i16(a * libm::cos(phi)), to_i16(a * libm::sin(phi)))
            })
            .collect::<Vec<_>>();
        debug_assert_eq!(csi.len(), fft);
        frames.push(CsiFrame::new(ts, sc.device, csi)?);
    }

    let doc = CaptureDocument::new(bandwidth, frames, None)?;
    let truth = GroundTruth::new(sc.activity_intervals.clone())?;
    Ok((doc, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn deterministic_for_a_seed() {
        let sc = Scenario::new(7, 5.0, 40.0);
        let (a, _) = generate(&sc).unwrap();
        let (b, _) = generate(&sc).unwrap();
        assert_eq!(a, b);
        let (c, _) = generate(&Scenario::new(8, 5.0, 40.0)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_frame_count() {
        let (doc, _) = generate(&Scenario::new(1, 100.0, 40.0)).unwrap();
        let bound = 4.0 * libm::sqrt(4000.0);
        assert!((doc.len() as f64 - 4000.0).abs() <= bound, "{} frames", doc.len());
        assert!(doc.frames().iter().all(|f| f.timestamp() < 100.0));
    }

    #[test]
    fn timestamps_are_whole_microseconds() {
        let (doc, _) = generate(&Scenario::new(3, 2.0, 100.0)).unwrap();
        for f in doc.frames() {
            let us = f.timestamp() * 1e6;
            assert!((us - libm::round(us)).abs() < 1e-3);
        }
    }

    #[test]
    fn truth_echoes_intervals() {
        let mut sc = Scenario::new(2, 30.0, 10.0);
        sc.activity_intervals = vec![(20.0, 25.0), (1.0, 4.0)];
        let (_, truth) = generate(&sc).unwrap();
        assert_eq!(truth.intervals(), &[(1.0, 4.0), (20.0, 25.0)]);
    }

    #[test]
    fn validation() {
        let ok = Scenario::new(0, 10.0, 10.0);
        ok.validate().unwrap();
        let mut bad = ok.clone();
        bad.s_active = bad.s_idle;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.rate = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.activity_intervals = vec![(5.0, 11.0)];
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.activity_intervals = vec![(1.0, 3.0), (2.0, 4.0)];
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.bandwidth = 30;
        assert!(bad.validate().is_err());
        let mut bad = ok;
        bad.spike_gain = (2.0, 1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn wider_channels() {
        let mut sc = Scenario::new(4, 1.0, 20.0);
        sc.bandwidth = 80;
        let (doc, _) = generate(&sc).unwrap();
        assert!(doc.frames().iter().all(|f| f.fft_size() == 256));
    }

    #[test]
    fn uniform_stream_is_pinned() {
        // Guards the documented generator and stream scheme against silent changes.
        let mut u = Uniform::new(42, STREAM_ARRIVALS);
        let first = u.next();
        let mut again = Uniform::new(42, STREAM_ARRIVALS);
        assert_eq!(first, again.next());
        let mut other = Uniform::new(42, STREAM_NOISE);
        assert_ne!(first, other.next());
        assert!((0.0..1.0).contains(&first));
    }
}
