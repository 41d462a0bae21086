//! Capture CSV: one row per frame.
//!
//! ```text
//! ts,mac,re_-32,im_-32,re_-31,im_-31,...,re_31,im_31
//! 12.000250,a4:5e:60:0b:ff:01,-12,33,...
//! ```
//!
//! The canonical form has the timestamp with six decimals, a lowercase MAC and
//! one real/imaginary column pair per subcarrier from `-N/2` to `N/2 - 1`; the
//! column count therefore fixes the channel width. An optional first line
//! `# config=<name>` records the configuration that produced the capture.
//! Other lines starting with `#` are comments and are skipped on input.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use csi_core::{Bandwidth, CaptureDocument, ComplexSample, CsiFrame, DeviceId};

use crate::{Error, Result};

const CONFIG_PREFIX: &str = "# config=";

pub fn header_line(bandwidth: Bandwidth) -> String {
    let mut line = String::from("ts,mac");
    for i in bandwidth.min_index()..=bandwidth.max_index() {
        write!(line, ",re_{i},im_{i}").expect("write to String");
    }
    line
}

fn bandwidth_from_header(line: &str) -> Option<Bandwidth> {
    let columns = line.split(',').count();
    let fft = columns.checked_sub(2)? / 2;
    let bw = Bandwidth::from_fft_size(fft).ok()?;
    (header_line(bw) == line).then_some(bw)
}

/// Appends one canonical data row, newline included.
pub fn write_row(out: &mut String, frame: &CsiFrame) {
    write!(out, "{:.6},{}", frame.timestamp(), frame.device()).expect("write to String");
    for s in frame.csi() {
        write!(out, ",{},{}", s.re, s.im).expect("write to String");
    }
    out.push('\n');
}

pub fn write_capture_csv(doc: &CaptureDocument, mut out: impl Write) -> Result<()> {
    let mut buf = String::with_capacity(64 * 1024);
    if let Some(name) = doc.source_config() {
        writeln!(buf, "{CONFIG_PREFIX}{name}").expect("write to String");
    }
    buf.push_str(&header_line(doc.bandwidth()));
    buf.push('\n');
    for frame in doc.frames() {
        write_row(&mut buf, frame);
        if buf.len() >= 60 * 1024 {
            out.write_all(buf.as_bytes())?;
            buf.clear();
        }
    }
    out.write_all(buf.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn capture_csv_bytes(doc: &CaptureDocument) -> Vec<u8> {
    let mut out = Vec::new();
    write_capture_csv(doc, &mut out).expect("writing to a Vec cannot fail");
    out
}

pub fn parse_row(line: &str, line_no: usize, fft_size: usize) -> Result<CsiFrame> {
    let mut fields = line.split(',');
    let expected = 2 + 2 * fft_size;
    let count = line.split(',').count();
    if count != expected {
        return Err(Error::parse(line_no, format!("expected {expected} columns, found {count}")));
    }
    let ts_text = fields.next().unwrap_or_default();
    let ts: f64 = ts_text
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad timestamp {ts_text:?}")))?;
    let mac_text = fields.next().unwrap_or_default();
    let device: DeviceId = mac_text
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad MAC address {mac_text:?}")))?;
    let mut csi = Vec::with_capacity(fft_size);
    let mut component = |name: &str| -> Result<i16> {
        let text = fields.next().unwrap_or_default();
        text.parse()
            .map_err(|_| Error::parse(line_no, format!("bad {name} component {text:?}")))
    };
    for _ in 0..fft_size {
        let re = component("real")?;
        let im = component("imaginary")?;
        csi.push(ComplexSample::new(re, im));
    }
    CsiFrame::new(ts, device, csi).map_err(|e| Error::parse(line_no, e.to_string()))
}

pub fn parse_capture_csv(input: impl BufRead) -> Result<CaptureDocument> {
    let mut bandwidth = None;
    let mut source_config = None;
    let mut frames = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix(CONFIG_PREFIX) {
            if bandwidth.is_none() && source_config.is_none() {
                source_config = Some(name.to_string());
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        match bandwidth {
            None => {
                bandwidth = Some(
                    bandwidth_from_header(line)
                        .ok_or_else(|| Error::parse(line_no, "unrecognised header line"))?,
                );
            }
            Some(bw) => frames.push(parse_row(line, line_no, Bandwidth::fft_size(bw))?),
        }
    }
    let bandwidth = bandwidth.ok_or_else(|| Error::parse(0, "missing header line"))?;
    Ok(CaptureDocument::new(bandwidth, frames, source_config)?)
}

pub fn read_capture_file(path: &std::path::Path) -> Result<CaptureDocument> {
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_capture_csv(std::io::BufReader::new(file))
}

pub fn write_capture_file(doc: &CaptureDocument, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_capture_csv(doc, std::io::BufWriter::new(file))
}
