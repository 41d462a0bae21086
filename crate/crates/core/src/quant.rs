//! Scalar quantization and the `CSIQ` bit-packed container.
//!
//! A value `v` in `[min, max]` is coded as
//! `round((v - min) / (max - min) * (2^B - 1))`, rounding half away from
//! zero. Values outside the range are clamped first; a degenerate range
//! (`min == max`) codes everything as 0 and decodes to `min`.
//!
//! Container layout, all integers big-endian:
//!
//! | offset | size | field                                              |
//! |-------:|-----:|----------------------------------------------------|
//! | 0      | 4    | magic `CSIQ`                                       |
//! | 4      | 1    | format version (1)                                 |
//! | 5      | 1    | pipeline stage, 1..=4                              |
//! | 6      | 1    | bits per code `B`, 1..=16                          |
//! | 7      | 1    | flags (bit 0: one stream per column)               |
//! | 8      | 2    | bandwidth in MHz (0 when not applicable)           |
//! | 10     | 2    | stream count `S`                                   |
//! | 12     | 4    | rows                                               |
//! | 16     | 4    | columns                                            |
//! | 20     | 8    | window start, f64 (stage 4, else 0)                |
//! | 28     | 8    | window length, f64 (stage 4, else 0)               |
//! | 36     | 16·S | per stream: min f64, max f64                       |
//! | 36+16S | …    | payload                                            |
//!
//! The payload holds `rows × columns × c` codes, where `c` is 2 for stage 1
//! (real and imaginary parts) and 1 otherwise, split evenly into `S`
//! consecutive streams. Codes are packed contiguously, most significant bit
//! first, and the last byte is zero-padded.

use alloc::vec::Vec;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSIQ";
pub const FORMAT_VERSION: u8 = 1;
pub const FIXED_HEADER_LEN: usize = 36;
pub const STREAM_HEADER_LEN: usize = 16;
pub const FLAG_PER_COLUMN: u8 = 0b1;

/// Maps reals in `[min, max]` onto `0..=2^bits - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    min: f64,
    max: f64,
    bits: u8,
}

impl Quantizer {
    pub fn new(min: f64, max: f64, bits: u8) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(Error::BitsOutOfRange(bits));
        }
        if !min.is_finite() || !max.is_finite() || max < min {
            return Err(Error::InvalidParameter("quantization range must be finite with min <= max"));
        }
        Ok(Self { min, max, bits })
    }

    /// Range spanning every value of `values`; `(0, 0)` for an empty slice.
    pub fn fit(values: &[f64], bits: u8) -> Result<Self> {
        let (min, max) = min_max(values).unwrap_or((0.0, 0.0));
        Self::new(min, max, bits)
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn levels(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Distance between adjacent reconstruction levels.
    pub fn step(&self) -> f64 {
        (self.max - self.min) / f64::from(self.levels())
    }

    pub fn encode(&self, v: f64) -> u16 {
        let range = self.max - self.min;
        if range == 0.0 || v.is_nan() {
            return 0;
        }
        let levels = f64::from(self.levels());
        let unit = ((v - self.min) / range).clamp(0.0, 1.0);
        libm::round(unit * levels) as u16
    }

    pub fn decode(&self, code: u16) -> f64 {
        if self.max == self.min {
            return self.min;
        }
        self.min + f64::from(code) * self.step()
    }
}

pub fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    let mut it = values.iter().copied();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// Packs codes of `bits` width MSB-first, zero-padding the last byte.
pub fn pack_codes(codes: &[u16], bits: u8, out: &mut Vec<u8>) {
    let bits = u32::from(bits);
    let mut acc: u32 = 0;
    let mut filled = 0u32;
    for &code in codes {
        acc = (acc << bits) | u32::from(code);
        filled += bits;
        while filled >= 8 {
            filled -= 8;
            out.push((acc >> filled) as u8);
        }
        acc &= (1u32 << filled) - 1;
    }
    if filled > 0 {
        out.push((acc << (8 - filled)) as u8);
    }
}

/// Inverse of [`pack_codes`]: reads `count` codes.
pub fn unpack_codes(bytes: &[u8], bits: u8, count: usize) -> Result<Vec<u16>> {
    if packed_len(count, bits) > bytes.len() {
        return Err(Error::Container("truncated payload"));
    }
    let bits = u32::from(bits);
    let mask = (1u32 << bits) - 1;
    let mut codes = Vec::with_capacity(count);
    let mut acc: u32 = 0;
    let mut filled = 0u32;
    let mut bytes = bytes.iter();
    for _ in 0..count {
        while filled < bits {
            acc = (acc << 8) | u32::from(*bytes.next().expect("length checked"));
            filled += 8;
        }
        filled -= bits;
        codes.push(((acc >> filled) & mask) as u16);
        acc &= (1u32 << filled) - 1;
    }
    Ok(codes)
}

pub fn packed_len(count: usize, bits: u8) -> usize {
    (count * usize::from(bits)).div_ceil(8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerHeader {
    pub version: u8,
    pub stage: u8,
    pub bits: u8,
    pub flags: u8,
    pub bandwidth_mhz: u16,
    pub rows: u32,
    pub cols: u32,
    pub window_start: f64,
    pub window_length: f64,
    /// `(min, max)` per stream.
    pub ranges: Vec<(f64, f64)>,
}

impl ContainerHeader {
    pub fn values_per_cell(&self) -> usize {
        if self.stage == 1 {
            2
        } else {
            1
        }
    }

    pub fn value_count(&self) -> usize {
        self.rows as usize * self.cols as usize * self.values_per_cell()
    }

    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER_LEN + STREAM_HEADER_LEN * self.ranges.len()
    }

    fn validate(&self) -> Result<()> {
        if self.version != FORMAT_VERSION {
            return Err(Error::ContainerVersion(self.version));
        }
        if !(1..=4).contains(&self.stage) {
            return Err(Error::InvalidStage(self.stage));
        }
        if !(1..=16).contains(&self.bits) {
            return Err(Error::BitsOutOfRange(self.bits));
        }
        let streams = self.ranges.len();
        if streams == 0 || streams > usize::from(u16::MAX) || !self.value_count().is_multiple_of(streams) {
            return Err(Error::Container("stream count must divide the value count"));
        }
        if self
            .ranges
            .iter()
            .any(|&(lo, hi)| !lo.is_finite() || !hi.is_finite() || hi < lo)
        {
            return Err(Error::Container("invalid stream range"));
        }
        Ok(())
    }
}

/// Container contents after decoding: header, raw codes and the values they
/// reconstruct, both in payload order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedContainer {
    pub header: ContainerHeader,
    pub codes: Vec<u16>,
    pub values: Vec<f64>,
}

impl DecodedContainer {
    /// Reconstructed values of one stream.
    pub fn stream(&self, s: usize) -> &[f64] {
        let len = self.values.len() / self.header.ranges.len();
        &self.values[s * len..(s + 1) * len]
    }
}

/// Quantizes `streams` (each against its own range in `header.ranges`) and
/// serialises the container. Header `version` is ignored; the current format
/// version is always written.
pub fn write_quant(header: &ContainerHeader, streams: &[&[f64]]) -> Result<Vec<u8>> {
    let header = ContainerHeader { version: FORMAT_VERSION, ..header.clone() };
    header.validate()?;
    if streams.len() != header.ranges.len() {
        return Err(Error::Container("one range per stream required"));
    }
    let per_stream = header.value_count() / streams.len();
    if streams.iter().any(|s| s.len() != per_stream) {
        return Err(Error::Container("stream length does not match header counts"));
    }

    let mut out = Vec::with_capacity(header.encoded_len() + packed_len(header.value_count(), header.bits));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[header.version, header.stage, header.bits, header.flags]);
    out.extend_from_slice(&header.bandwidth_mhz.to_be_bytes());
    out.extend_from_slice(&(header.ranges.len() as u16).to_be_bytes());
    out.extend_from_slice(&header.rows.to_be_bytes());
    out.extend_from_slice(&header.cols.to_be_bytes());
    out.extend_from_slice(&header.window_start.to_be_bytes());
    out.extend_from_slice(&header.window_length.to_be_bytes());
    for &(lo, hi) in &header.ranges {
        out.extend_from_slice(&lo.to_be_bytes());
        out.extend_from_slice(&hi.to_be_bytes());
    }

    let mut codes = Vec::with_capacity(header.value_count());
    for (values, &(lo, hi)) in streams.iter().zip(&header.ranges) {
        let q = Quantizer::new(lo, hi, header.bits)?;
        codes.extend(values.iter().map(|&v| q.encode(v)));
    }
    pack_codes(&codes, header.bits, &mut out);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let slice = self
            .bytes
            .get(self.at..self.at + N)
            .ok_or(Error::Container("truncated header"))?;
        self.at += N;
        Ok(slice.try_into().expect("length N"))
    }
}

pub fn read_header(bytes: &[u8]) -> Result<(ContainerHeader, usize)> {
    let mut c = Cursor { bytes, at: 0 };
    if &c.take::<4>()? != MAGIC {
        return Err(Error::Container("bad magic"));
    }
    let [version, stage, bits, flags] = c.take::<4>()?;
    if version != FORMAT_VERSION {
        return Err(Error::ContainerVersion(version));
    }
    let bandwidth_mhz = u16::from_be_bytes(c.take()?);
    let streams = u16::from_be_bytes(c.take()?);
    let rows = u32::from_be_bytes(c.take()?);
    let cols = u32::from_be_bytes(c.take()?);
    let window_start = f64::from_be_bytes(c.take()?);
    let window_length = f64::from_be_bytes(c.take()?);
    let mut ranges = Vec::with_capacity(usize::from(streams));
    for _ in 0..streams {
        let lo = f64::from_be_bytes(c.take()?);
        let hi = f64::from_be_bytes(c.take()?);
        ranges.push((lo, hi));
    }
    let header = ContainerHeader {
        version,
        stage,
        bits,
        flags,
        bandwidth_mhz,
        rows,
        cols,
        window_start,
        window_length,
        ranges,
    };
    header.validate()?;
    Ok((header, c.at))
}

pub fn read_quant(bytes: &[u8]) -> Result<DecodedContainer> {
    let (header, offset) = read_header(bytes)?;
    let count = header.value_count();
    let payload = &bytes[offset..];
    let expected = packed_len(count, header.bits);
    if payload.len() < expected {
        return Err(Error::Container("truncated payload"));
    }
    if payload.len() > expected {
        return Err(Error::Container("trailing bytes after payload"));
    }
    let codes = unpack_codes(payload, header.bits, count)?;
    let per_stream = count / header.ranges.len();
    let mut values = Vec::with_capacity(count);
    for (s, &(lo, hi)) in header.ranges.iter().enumerate() {
        let q = Quantizer::new(lo, hi, header.bits)?;
        values.extend(codes[s * per_stream..(s + 1) * per_stream].iter().map(|&c| q.decode(c)));
    }
    Ok(DecodedContainer { header, codes, values })
}
