//! Bandwidth registry: FFT size and default usable subcarriers per channel
//! width, loaded from a small versioned `key = value` text file.
//!
//! ```text
//! version = 1
//! bandwidth.20.fft_size = 64
//! bandwidth.20.usable = -28..-1, 1..28
//! ```
//!
//! Lines starting with `#` are comments. `usable` lists inclusive ranges or
//! single indices separated by commas.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::types::{Bandwidth, SubcarrierSet};
use crate::{Error, Result};

pub const REGISTRY_VERSION: u32 = 1;

const BUILTIN: &str = include_str!("../data/formats.reg");

#[derive(Debug, Clone, PartialEq)]
pub struct FormatEntry {
    pub bandwidth: Bandwidth,
    pub fft_size: usize,
    pub usable: SubcarrierSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormatRegistry {
    entries: Vec<FormatEntry>,
}

impl FormatRegistry {
    /// The registry shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in format registry is valid")
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut fft: Vec<(Bandwidth, usize)> = Vec::new();
        let mut usable: Vec<(Bandwidth, Vec<i16>)> = Vec::new();

        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::Registry(format!("line {}: {msg}", n + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "version" {
                let v: u32 = value.parse().map_err(|_| err("bad version"))?;
                if v != REGISTRY_VERSION {
                    return Err(err("unsupported registry version"));
                }
                version = Some(v);
                continue;
            }
            let mut parts = key.split('.');
            let (Some("bandwidth"), Some(mhz), Some(field), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(err("unknown key"));
            };
            let mhz: u32 = mhz.parse().map_err(|_| err("bad bandwidth"))?;
            let bw = Bandwidth::from_mhz(mhz).map_err(|e| err(&e.to_string()))?;
            match field {
                "fft_size" => {
                    let size: usize = value.parse().map_err(|_| err("bad fft_size"))?;
                    if size != bw.fft_size() {
                        return Err(err("fft_size disagrees with channel width"));
                    }
                    fft.push((bw, size));
                }
                "usable" => usable.push((bw, parse_index_list(value).ok_or_else(|| err("bad index list"))?)),
                _ => return Err(err("unknown field")),
            }
        }

        if version.is_none() {
            return Err(Error::Registry("missing version".into()));
        }
        let mut entries = Vec::new();
        for (bw, fft_size) in fft {
            let indices = usable
                .iter()
                .find(|(b, _)| *b == bw)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Registry(format!("{bw}: missing usable list")))?;
            let set = SubcarrierSet::from_unsorted(indices)?;
            set.check_fft_size(fft_size)?;
            entries.push(FormatEntry { bandwidth: bw, fft_size, usable: set });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[FormatEntry] {
        &self.entries
    }

    pub fn entry(&self, bandwidth: Bandwidth) -> Option<&FormatEntry> {
        self.entries.iter().find(|e| e.bandwidth == bandwidth)
    }

    pub fn default_set(&self, bandwidth: Bandwidth) -> Result<SubcarrierSet> {
        self.entry(bandwidth)
            .map(|e| e.usable.clone())
            .ok_or(Error::UnsupportedBandwidth(bandwidth.mhz()))
    }
}

fn parse_index_list(value: &str) -> Option<Vec<i16>> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        // `-28..-1`: split on the range marker, not on the sign.
        match item.split_once("..") {
            Some((lo, hi)) => {
                let lo: i16 = lo.trim().parse().ok()?;
                let hi: i16 = hi.trim().parse().ok()?;
                if lo > hi {
                    return None;
                }
                out.extend(lo..=hi);
            }
            None => out.push(item.parse().ok()?),
        }
    }
    Some(out)
}
