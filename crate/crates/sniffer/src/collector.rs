//! Simulated CSI collector. Reacts to `start`/`stop`/`download`, writes one
//! capture CSV per configuration name and answers downloads on `output`.
//!
//! [`Collector`] holds the session state machine and knows nothing about
//! MQTT; [`run_collector`] wires it to a broker.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use csi_core::{Bandwidth, CaptureDocument, CsiFrame, DeviceId};
use rumqttc::{Client, Event, Packet, QoS};

use crate::capture_csv::{header_line, read_capture_file, write_row};
use crate::config::validate_name;
use crate::wire::{
    DownloadMessage, OutputEnvelope, SessionState, StartMessage, StatusMessage, StopMessage, TOPIC_DOWNLOAD,
    TOPIC_OUTPUT, TOPIC_START, TOPIC_STATUS, TOPIC_STOP,
};
use crate::{broker, formats, Error, Result};

/// Where frames come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Replay(PathBuf),
    Scenario(PathBuf),
}

impl SourceSpec {
    pub fn load(&self) -> Result<CaptureDocument> {
        match self {
            Self::Replay(path) => read_capture_file(path),
            Self::Scenario(path) => {
                let scenario = formats::load_scenario(path)?;
                Ok(csi_core::synth::generate(&scenario)?.0)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollectorOptions {
    pub capture_dir: PathBuf,
    /// Replay speed-up relative to the source timestamps; 0 writes as fast as
    /// possible.
    pub acceleration: f64,
}

/// An outgoing message.
#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub topic: &'static str,
    pub payload: Vec<u8>,
}

impl Outgoing {
    fn status(msg: &StatusMessage) -> Self {
        Self { topic: TOPIC_STATUS, payload: serde_json::to_vec(msg).expect("status serializes") }
    }

    fn output(env: &OutputEnvelope) -> Self {
        Self { topic: TOPIC_OUTPUT, payload: serde_json::to_vec(env).expect("envelope serializes") }
    }

    pub fn decode_status(&self) -> Option<StatusMessage> {
        (self.topic == TOPIC_STATUS).then(|| serde_json::from_slice(&self.payload).ok()).flatten()
    }

    pub fn decode_output(&self) -> Option<OutputEnvelope> {
        (self.topic == TOPIC_OUTPUT).then(|| serde_json::from_slice(&self.payload).ok()).flatten()
    }
}

struct Writer {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<Result<usize>>,
}

struct Session {
    state: SessionState,
    path: PathBuf,
    /// Segments started so far; the first one writes the header.
    segments: u32,
    /// Next source frame to emit, so a restarted session carries on where
    /// the previous one stopped.
    cursor: usize,
    frames_written: Arc<AtomicU64>,
    /// Set once the writer has consumed the whole source.
    drained: Arc<AtomicBool>,
    writer: Option<Writer>,
}

pub struct Collector {
    source: Arc<CaptureDocument>,
    options: CollectorOptions,
    sessions: HashMap<String, Session>,
}

impl Collector {
    pub fn new(source: CaptureDocument, options: CollectorOptions) -> Result<Self> {
        if options.acceleration < 0.0 || !options.acceleration.is_finite() {
            return Err(Error::InvalidConfig("acceleration must be finite and >= 0".into()));
        }
        std::fs::create_dir_all(&options.capture_dir).map_err(|e| Error::file(&options.capture_dir, e))?;
        Ok(Self { source: Arc::new(source), options, sessions: HashMap::new() })
    }

    pub fn capture_path(&self, name: &str) -> PathBuf {
        self.options.capture_dir.join(format!("{name}.csv"))
    }

    pub fn state(&self, name: &str) -> SessionState {
        self.sessions.get(name).map_or(SessionState::Idle, |s| s.state)
    }

    /// True once a capturing session has written every source frame.
    pub fn is_drained(&self, name: &str) -> bool {
        self.sessions.get(name).is_some_and(|s| s.drained.load(Ordering::Relaxed))
    }

    /// Polls [`Self::is_drained`] for up to `limit`.
    pub fn wait_drained(&self, name: &str, limit: Duration) -> bool {
        let deadline = Instant::now() + limit;
        while !self.is_drained(name) {
            if Instant::now() >= deadline {
                return false;
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        true
    }

    pub fn frames_written(&self, name: &str) -> u64 {
        self.sessions.get(name).map_or(0, |s| s.frames_written.load(Ordering::Relaxed))
    }

    /// Dispatches one control message and returns what should be published.
    pub fn handle(&mut self, topic: &str, payload: &[u8]) -> Vec<Outgoing> {
        let result = match topic {
            TOPIC_START => self.on_start(payload),
            TOPIC_STOP => self.on_stop(payload),
            TOPIC_DOWNLOAD => self.on_download(payload),
            _ => return Vec::new(),
        };
        match result {
            Ok(out) => vec![out],
            Err(rejection) => vec![Outgoing::status(&rejection)],
        }
    }

    fn rejection(&self, name: &str, correlation_id: Option<String>, reason: String) -> StatusMessage {
        log::warn!("rejected request for {name:?}: {reason}");
        StatusMessage {
            name: name.to_string(),
            state: if name.is_empty() { SessionState::Error } else { self.state(name) },
            correlation_id,
            error: Some(reason),
            frames_written: self.frames_written(name),
        }
    }

    fn status(&self, name: &str, correlation_id: Option<String>) -> Outgoing {
        Outgoing::status(&StatusMessage {
            name: name.to_string(),
            state: self.state(name),
            correlation_id,
            error: None,
            frames_written: self.frames_written(name),
        })
    }

    fn parse<T: serde::de::DeserializeOwned>(&self, payload: &[u8]) -> std::result::Result<T, StatusMessage> {
        serde_json::from_slice(payload).map_err(|e| {
            let value: Option<serde_json::Value> = serde_json::from_slice(payload).ok();
            let field = |key: &str| value.as_ref().and_then(|v| v.get(key)?.as_str().map(str::to_string));
            let name = field("name").unwrap_or_default();
            StatusMessage {
                name,
                state: SessionState::Error,
                correlation_id: field("correlation_id"),
                error: Some(format!("malformed payload: {e}")),
                frames_written: 0,
            }
        })
    }

    fn on_start(&mut self, payload: &[u8]) -> std::result::Result<Outgoing, StatusMessage> {
        let msg: StartMessage = self.parse(payload)?;
        let name = msg.config.name.clone();
        let cid = msg.correlation_id.clone();
        msg.config.validate().map_err(|e| self.rejection(&name, cid.clone(), e.to_string()))?;
        if msg.config.bandwidth != self.source.bandwidth().mhz() {
            return Err(self.rejection(
                &name,
                cid,
                format!(
                    "configuration asks for {} MHz but the source delivers {} MHz",
                    msg.config.bandwidth,
                    self.source.bandwidth().mhz()
                ),
            ));
        }
        if self.state(&name) == SessionState::Capturing {
            return Err(self.rejection(&name, cid, format!("session {name:?} is already capturing")));
        }

        let path = self.capture_path(&name);
        let session = self.sessions.entry(name.clone()).or_insert_with(|| Session {
            state: SessionState::Idle,
            segments: existing_segments(&path),
            path,
            cursor: 0,
            frames_written: Arc::new(AtomicU64::new(0)),
            drained: Arc::new(AtomicBool::new(false)),
            writer: None,
        });
        session.drained.store(false, Ordering::Relaxed);
        let segment = session.segments + 1;
        let job = WriterJob {
            name: name.clone(),
            path: session.path.clone(),
            segment,
            source: Arc::clone(&self.source),
            start: session.cursor,
            filter: msg.config.device_filter.clone(),
            acceleration: self.options.acceleration,
            written: Arc::clone(&session.frames_written),
            drained: Arc::clone(&session.drained),
        };
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let spawned = std::thread::Builder::new()
            .name(format!("capture-{name}"))
            .spawn(move || job.run(&stop_flag));
        match spawned {
            Ok(handle) => {
                session.segments = segment;
                session.state = SessionState::Capturing;
                session.writer = Some(Writer { stop, handle });
                log::info!("session {name:?} capturing (segment {segment})");
                Ok(self.status(&name, cid))
            }
            Err(e) => Err(self.rejection(&name, cid, format!("cannot start writer: {e}"))),
        }
    }

    fn on_stop(&mut self, payload: &[u8]) -> std::result::Result<Outgoing, StatusMessage> {
        let msg: StopMessage = self.parse(payload)?;
        let cid = msg.correlation_id;
        let Some(session) = self.sessions.get_mut(&msg.name) else {
            return Err(self.rejection(&msg.name, cid, format!("no session named {:?}", msg.name)));
        };
        let Some(writer) = session.writer.take() else {
            return Err(self.rejection(&msg.name, cid, format!("session {:?} is not capturing", msg.name)));
        };
        writer.stop.store(true, Ordering::Relaxed);
        let joined = writer.handle.join();
        session.state = SessionState::Stopped;
        match joined {
            Ok(Ok(next)) => {
                session.cursor = next;
                log::info!("session {:?} stopped", msg.name);
                Ok(self.status(&msg.name, cid))
            }
            Ok(Err(e)) => Err(self.rejection(&msg.name, cid, format!("capture failed: {e}"))),
            Err(_) => Err(self.rejection(&msg.name, cid, "capture writer panicked".into())),
        }
    }

    fn on_download(&mut self, payload: &[u8]) -> std::result::Result<Outgoing, StatusMessage> {
        let msg: DownloadMessage = self.parse(payload)?;
        let cid = Some(msg.correlation_id.clone());
        if let Err(e) = validate_name(&msg.name) {
            return Err(self.rejection(&msg.name, cid, e.to_string()));
        }
        let path = self.capture_path(&msg.name);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(self.rejection(&msg.name, cid, format!("no capture for {:?}", msg.name)))
            }
            Err(e) => return Err(self.rejection(&msg.name, cid, format!("cannot read capture: {e}"))),
        };
        let env = OutputEnvelope::new(&msg.name, &msg.correlation_id, count_data_rows(&bytes), &bytes);
        Ok(Outgoing::output(&env))
    }

    /// Stops every running writer, flushing its file.
    pub fn shutdown(&mut self) {
        for session in self.sessions.values_mut() {
            if let Some(writer) = session.writer.take() {
                writer.stop.store(true, Ordering::Relaxed);
                let _ = writer.handle.join();
                session.state = SessionState::Stopped;
            }
        }
    }
}

impl Drop for Collector {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Frames in a capture file: every line that is neither a comment nor a header.
pub fn count_data_rows(bytes: &[u8]) -> u64 {
    bytes
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty() && !l.starts_with(b"#") && !l.starts_with(b"ts,mac"))
        .count() as u64
}

fn existing_segments(path: &Path) -> u32 {
    match std::fs::read(path) {
        Ok(bytes) if !bytes.is_empty() => {
            1 + bytes.split(|&b| b == b'\n').filter(|l| l.starts_with(b"# session ")).count() as u32
        }
        _ => 0,
    }
}

struct WriterJob {
    name: String,
    path: PathBuf,
    segment: u32,
    source: Arc<CaptureDocument>,
    start: usize,
    filter: Vec<DeviceId>,
    acceleration: f64,
    written: Arc<AtomicU64>,
    drained: Arc<AtomicBool>,
}

impl WriterJob {
    /// Appends frames until stopped or the source runs out, then flushes and
    /// syncs. Returns the next source position.
    fn run(self, stop: &AtomicBool) -> Result<usize> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::file(&self.path, e))?;
        let mut out = BufWriter::new(file);
        if self.segment == 1 {
            writeln!(out, "# config={}", self.name)?;
            writeln!(out, "{}", header_line(self.source.bandwidth()))?;
        } else {
            writeln!(out, "# session {} started", self.segment)?;
        }
        out.flush()?;

        let frames = self.source.frames();
        let t0 = frames.get(self.start).map_or(0.0, CsiFrame::timestamp);
        let wall0 = Instant::now();
        let mut line = String::with_capacity(1024);
        let mut pending = 0usize;
        let mut next = self.start;
        while next < frames.len() {
            if stop.load(Ordering::Relaxed) {
                break;
            }
            let frame = &frames[next];
            if self.acceleration > 0.0 {
                let due = wall0 + Duration::from_secs_f64((frame.timestamp() - t0).max(0.0) / self.acceleration);
                if !sleep_until(due, stop, &mut out, &mut pending)? {
                    break;
                }
            }
            next += 1;
            if !self.filter.is_empty() && !self.filter.contains(&frame.device()) {
                continue;
            }
            line.clear();
            write_row(&mut line, frame);
            out.write_all(line.as_bytes())?;
            pending += 1;
            if pending >= 256 {
                flush(&mut out, &mut pending)?;
            }
            self.written.fetch_add(1, Ordering::Relaxed);
        }
        flush(&mut out, &mut pending)?;
        if next == frames.len() {
            self.drained.store(true, Ordering::Relaxed);
        }
        while !stop.load(Ordering::Relaxed) {
            std::thread::sleep(Duration::from_millis(20));
        }
        let file = out.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        Ok(next)
    }
}

fn flush(out: &mut BufWriter<File>, pending: &mut usize) -> Result<()> {
    if *pending > 0 {
        out.flush()?;
        *pending = 0;
    }
    Ok(())
}

/// Sleeps until `due`, flushing first so readers see rows as they arrive.
/// Returns false when asked to stop meanwhile.
fn sleep_until(due: Instant, stop: &AtomicBool, out: &mut BufWriter<File>, pending: &mut usize) -> Result<bool> {
    let now = Instant::now();
    if due <= now {
        return Ok(true);
    }
    flush(out, pending)?;
    loop {
        if stop.load(Ordering::Relaxed) {
            return Ok(false);
        }
        let now = Instant::now();
        if due <= now {
            return Ok(true);
        }
        std::thread::sleep((due - now).min(Duration::from_millis(20)));
    }
}

/// A collector connected to a broker, running on background threads.
pub struct CollectorHandle {
    client: Client,
    shutdown: Arc<AtomicBool>,
    subscribed: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl CollectorHandle {
    pub fn stop(mut self) {
        self.stop_inner();
    }

    /// Waits until the control topics are subscribed.
    pub fn wait_ready(&self, limit: Duration) -> bool {
        let deadline = Instant::now() + limit;
        while !self.subscribed.load(Ordering::Relaxed) {
            if Instant::now() >= deadline {
                return false;
            }
            std::thread::sleep(Duration::from_millis(5));
        }
        true
    }

    fn stop_inner(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        let _ = self.client.try_disconnect();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    /// Blocks until the collector threads end.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for CollectorHandle {
    fn drop(&mut self) {
        if !self.threads.is_empty() {
            self.stop_inner();
        }
    }
}

/// Connects `collector` to the broker and serves control messages.
pub fn run_collector(mut collector: Collector, broker_addr: &str, client_id: &str) -> Result<CollectorHandle> {
    let opts = broker::client_options(client_id, broker_addr)?;
    let (client, mut connection) = Client::new(opts, 64);
    let shutdown = Arc::new(AtomicBool::new(false));
    let (tx, rx) = std::sync::mpsc::channel::<(String, Vec<u8>)>();

    let subscribed = Arc::new(AtomicBool::new(false));
    let net_subscribed = Arc::clone(&subscribed);
    let net_client = client.clone();
    let net_shutdown = Arc::clone(&shutdown);
    let mut acks = 0;
    let network = std::thread::Builder::new().name("collector-net".into()).spawn(move || {
        while !net_shutdown.load(Ordering::Relaxed) {
            match connection.recv_timeout(Duration::from_millis(200)) {
                Ok(Ok(Event::Incoming(Packet::ConnAck(_)))) => {
                    log::info!("collector connected");
                    acks = 0;
                    for topic in [TOPIC_START, TOPIC_STOP, TOPIC_DOWNLOAD] {
                        if let Err(e) = net_client.try_subscribe(topic, QoS::AtLeastOnce) {
                            log::error!("subscribe {topic}: {e}");
                        }
                    }
                }
                Ok(Ok(Event::Incoming(Packet::Publish(p)))) => {
                    if tx.send((p.topic, p.payload.to_vec())).is_err() {
                        break;
                    }
                }
                Ok(Ok(Event::Incoming(Packet::SubAck(_)))) => {
                    acks += 1;
                    if acks == 3 {
                        net_subscribed.store(true, Ordering::Relaxed);
                    }
                }
                Ok(Ok(_)) => {}
                Ok(Err(e)) => {
                    net_subscribed.store(false, Ordering::Relaxed);
                    if net_shutdown.load(Ordering::Relaxed) {
                        break;
                    }
                    log::warn!("collector connection: {e}");
                    std::thread::sleep(Duration::from_millis(500));
                }
                Err(rumqttc::RecvTimeoutError::Timeout) => {}
                Err(rumqttc::RecvTimeoutError::Disconnected) => break,
            }
        }
    })?;

    let out_client = client.clone();
    let worker_shutdown = Arc::clone(&shutdown);
    let worker = std::thread::Builder::new().name("collector".into()).spawn(move || {
        loop {
            match rx.recv_timeout(Duration::from_millis(200)) {
                Ok((topic, payload)) => {
                    for msg in collector.handle(&topic, &payload) {
                        if let Err(e) = out_client.publish(msg.topic, QoS::AtLeastOnce, false, msg.payload) {
                            log::error!("publish {}: {e}", msg.topic);
                        }
                    }
                }
                Err(std::sync::mpsc::RecvTimeoutError::Timeout) => {
                    if worker_shutdown.load(Ordering::Relaxed) {
                        break;
                    }
                }
                Err(std::sync::mpsc::RecvTimeoutError::Disconnected) => break,
            }
        }
        collector.shutdown();
    })?;

    Ok(CollectorHandle { client, shutdown, subscribed, threads: vec![network, worker] })
}

/// Bandwidth of a loaded source, for log lines.
pub fn describe_source(doc: &CaptureDocument) -> String {
    let bw: Bandwidth = doc.bandwidth();
    format!("{} frames, {} MHz, {:.1} s", doc.frames().len(), bw.mhz(), doc.duration())
}
