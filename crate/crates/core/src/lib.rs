//! Channel state information (CSI) analysis core.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (an allocator is required):
//!
//! * [`types`] and [`registry`]: frames, subcarrier sets and the bandwidth table.
//! * [`pipeline`]: amplitude extraction, trailing-window outlier removal and
//!   the per-window aggregate feature.
//! * [`detector`]: ground-truth labelling, threshold classification, ROC and AUC.
//! * [`quant`]: scalar quantization and the bit-packed `CSIQ` container.
//! * [`storage`]: frame decimation, stage quantization, storage accounting and
//!   the accuracy-versus-storage sweeps.
//! * [`synth`]: seeded synthetic capture scenarios.
//!
//! Text and file formats, services and the command line live in the
//! `csi-sniffer` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod detector;
mod error;
pub mod pipeline;
pub mod quant;
pub mod registry;
pub mod storage;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    amplitude, default_subcarrier_set, frame_amplitudes, Bandwidth, CaptureDocument,
    ComplexSample, CsiFrame, DeviceId, SubcarrierSet,
};
