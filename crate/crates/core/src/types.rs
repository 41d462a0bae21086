//! Capture data model: devices, complex CSI samples, frames and documents.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::registry::FormatRegistry;
use crate::{Error, Result};

/// Transmitter hardware address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId(pub [u8; 6]);

impl DeviceId {
    pub const fn new(octets: [u8; 6]) -> Self {
        Self(octets)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

/// Only the canonical form is accepted: six lowercase two-digit hex octets
/// separated by colons.
impl FromStr for DeviceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = || Error::InvalidDeviceId(s.to_string());
        let bytes = s.as_bytes();
        if bytes.len() != 17 {
            return Err(invalid());
        }
        let mut octets = [0u8; 6];
        for (k, octet) in octets.iter_mut().enumerate() {
            let at = k * 3;
            if k < 5 && bytes[at + 2] != b':' {
                return Err(invalid());
            }
            let hi = lower_hex(bytes[at]).ok_or_else(invalid)?;
            let lo = lower_hex(bytes[at + 1]).ok_or_else(invalid)?;
            *octet = (hi << 4) | lo;
        }
        Ok(Self(octets))
    }
}

fn lower_hex(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        _ => None,
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for DeviceId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for DeviceId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One complex CSI value as stored by the capture tool: two signed 16-bit
/// integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ComplexSample {
    pub re: i16,
    pub im: i16,
}

impl ComplexSample {
    pub const fn new(re: i16, im: i16) -> Self {
        Self { re, im }
    }
}

/// Magnitude of a complex sample. Integer inputs make this exact up to the
/// final square root.
pub fn amplitude(sample: ComplexSample) -> f64 {
    let re = f64::from(sample.re);
    let im = f64::from(sample.im);
    libm::sqrt(re * re + im * im)
}

/// Channel width. Each width fixes the FFT size of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bandwidth {
    Mhz20,
    Mhz40,
    Mhz80,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 3] = [Bandwidth::Mhz20, Bandwidth::Mhz40, Bandwidth::Mhz80];

    pub fn from_mhz(mhz: u32) -> Result<Self> {
        match mhz {
            20 => Ok(Self::Mhz20),
            40 => Ok(Self::Mhz40),
            80 => Ok(Self::Mhz80),
            other => Err(Error::UnsupportedBandwidth(other)),
        }
    }

    pub fn from_fft_size(fft_size: usize) -> Result<Self> {
        match fft_size {
            64 => Ok(Self::Mhz20),
            128 => Ok(Self::Mhz40),
            256 => Ok(Self::Mhz80),
            other => Err(Error::InvalidFftSize(other)),
        }
    }

    pub fn mhz(self) -> u32 {
        match self {
            Self::Mhz20 => 20,
            Self::Mhz40 => 40,
            Self::Mhz80 => 80,
        }
    }

    pub fn fft_size(self) -> usize {
        match self {
            Self::Mhz20 => 64,
            Self::Mhz40 => 128,
            Self::Mhz80 => 256,
        }
    }

    /// Lowest subcarrier index, `-N/2`.
    pub fn min_index(self) -> i16 {
        -(self.fft_size() as i16 / 2)
    }

    /// Highest subcarrier index, `N/2 - 1`.
    pub fn max_index(self) -> i16 {
        self.fft_size() as i16 / 2 - 1
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MHz", self.mhz())
    }
}

/// One captured frame. `csi` is ordered by subcarrier index from `-N/2` up
/// to `N/2 - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    timestamp: f64,
    device: DeviceId,
    csi: Vec<ComplexSample>,
}

impl CsiFrame {
    pub fn new(timestamp: f64, device: DeviceId, csi: Vec<ComplexSample>) -> Result<Self> {
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(Error::InvalidTimestamp(timestamp));
        }
        Bandwidth::from_fft_size(csi.len())?;
        Ok(Self { timestamp, device, csi })
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn csi(&self) -> &[ComplexSample] {
        &self.csi
    }

    pub fn fft_size(&self) -> usize {
        self.csi.len()
    }

    pub fn bandwidth(&self) -> Bandwidth {
        // Validated at construction.
        Bandwidth::from_fft_size(self.csi.len()).expect("frame FFT size")
    }

    /// Sample at a signed subcarrier index, if the index is inside the FFT range.
    pub fn sample(&self, index: i16) -> Option<ComplexSample> {
        let pos = i32::from(index) + (self.csi.len() / 2) as i32;
        usize::try_from(pos).ok().and_then(|p| self.csi.get(p).copied())
    }
}

/// Sorted, duplicate-free set of subcarrier indices that never contains the
/// DC subcarrier 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<i16>", into = "Vec<i16>"))]
pub struct SubcarrierSet {
    indices: Vec<i16>,
}

impl SubcarrierSet {
    pub fn new(indices: Vec<i16>) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidSubcarrierSet("contains the DC subcarrier 0"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubcarrierSet("indices must be strictly ascending"));
        }
        Ok(Self { indices })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<i16>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices)
    }

    pub fn indices(&self) -> &[i16] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks every index against the range of an FFT size.
    pub fn check_fft_size(&self, fft_size: usize) -> Result<()> {
        let half = (fft_size / 2) as i32;
        match self
            .indices
            .iter()
            .find(|&&i| i32::from(i) < -half || i32::from(i) >= half)
        {
            Some(&index) => Err(Error::SubcarrierOutOfRange { index, fft_size }),
            None => Ok(()),
        }
    }

    /// Frame positions (0-based offsets into `CsiFrame::csi`) of each index.
    pub fn positions(&self, fft_size: usize) -> Result<Vec<usize>> {
        self.check_fft_size(fft_size)?;
        let half = (fft_size / 2) as i32;
        Ok(self
            .indices
            .iter()
            .map(|&i| (i32::from(i) + half) as usize)
            .collect())
    }
}

impl TryFrom<Vec<i16>> for SubcarrierSet {
    type Error = Error;

    fn try_from(indices: Vec<i16>) -> Result<Self> {
        Self::new(indices)
    }
}

impl From<SubcarrierSet> for Vec<i16> {
    fn from(set: SubcarrierSet) -> Self {
        set.indices
    }
}

/// Amplitudes of the subcarriers in `set`, in set order.
pub fn frame_amplitudes(frame: &CsiFrame, set: &SubcarrierSet) -> Result<Vec<f64>> {
    let positions = set.positions(frame.fft_size())?;
    Ok(positions.into_iter().map(|p| amplitude(frame.csi[p])).collect())
}

/// Usable subcarriers for a channel width, taken from the built-in format
/// registry. For 20 MHz this is `-28..=-1` and `1..=28`.
pub fn default_subcarrier_set(bandwidth_mhz: u32) -> Result<SubcarrierSet> {
    let bandwidth = Bandwidth::from_mhz(bandwidth_mhz)?;
    FormatRegistry::builtin().default_set(bandwidth)
}

/// A capture: frames sorted by timestamp, all with the same FFT size.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureDocument {
    frames: Vec<CsiFrame>,
    bandwidth: Bandwidth,
    source_config: Option<String>,
}

impl CaptureDocument {
    /// Stable-sorts frames by timestamp so equal timestamps keep input order.
    pub fn new(
        bandwidth: Bandwidth,
        mut frames: Vec<CsiFrame>,
        source_config: Option<String>,
    ) -> Result<Self> {
        let expected = bandwidth.fft_size();
        if let Some(frame) = frames.iter().find(|f| f.fft_size() != expected) {
            return Err(Error::MixedFftSize { expected, found: frame.fft_size() });
        }
        frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Self { frames, bandwidth, source_config })
    }

    pub fn empty(bandwidth: Bandwidth) -> Self {
        Self { frames: Vec::new(), bandwidth, source_config: None }
    }

    pub fn frames(&self) -> &[CsiFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<CsiFrame> {
        self.frames
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bandwidth
    }

    pub fn fft_size(&self) -> usize {
        self.bandwidth.fft_size()
    }

    pub fn source_config(&self) -> Option<&str> {
        self.source_config.as_deref()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Time between the first and last frame, zero for fewer than two frames.
    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.timestamp - a.timestamp,
            _ => 0.0,
        }
    }

    /// Keeps the frames for which `keep` returns true; order is preserved.
    pub fn retain_frames(&self, mut keep: impl FnMut(usize, &CsiFrame) -> bool) -> Self {
        let frames = self
            .frames
            .iter()
            .enumerate()
            .filter(|(i, f)| keep(*i, f))
            .map(|(_, f)| f.clone())
            .collect();
        Self { frames, bandwidth: self.bandwidth, source_config: self.source_config.clone() }
    }
}
