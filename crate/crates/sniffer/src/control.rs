//! Access-point side of the control plane: owns the configuration store,
//! publishes control messages and pairs downloads with collector replies.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, Weak};
use std::time::Duration;

use rumqttc::{AsyncClient, Event, EventLoop, Packet, QoS};
use serde::Serialize;
use tokio::sync::oneshot;

use crate::broker;
use crate::config::{CaptureConfig, CaptureSettings, RunStatus};
use crate::store::ConfigStore;
use crate::wire::{
    DownloadMessage, OutputEnvelope, SessionState, StartMessage, StatusMessage, StopMessage, TOPIC_DOWNLOAD,
    TOPIC_OUTPUT, TOPIC_START, TOPIC_STATUS, TOPIC_STOP,
};
use crate::{Error, Result};

pub const DEFAULT_DOWNLOAD_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ControlOptions {
    pub broker: String,
    pub client_id: String,
    pub download_timeout: Duration,
}

impl ControlOptions {
    pub fn new(broker: impl Into<String>) -> Self {
        Self {
            broker: broker.into(),
            client_id: format!("csi-ap-{}", uuid::Uuid::new_v4().simple()),
            download_timeout: DEFAULT_DOWNLOAD_TIMEOUT,
        }
    }
}

/// A downloaded capture.
#[derive(Debug, Clone, PartialEq)]
pub struct Download {
    pub row_count: u64,
    pub bytes: Vec<u8>,
}

type Reply = std::result::Result<OutputEnvelope, String>;

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub broker_connected: bool,
    pub configs: usize,
}

pub struct ControlService {
    store: Mutex<ConfigStore>,
    client: AsyncClient,
    connected: AtomicBool,
    pending: Mutex<HashMap<String, oneshot::Sender<Reply>>>,
    name_locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    timeout: Duration,
}

impl ControlService {
    /// Creates the service and starts its MQTT event loop on the current
    /// tokio runtime.
    pub fn spawn(store: ConfigStore, options: &ControlOptions) -> Result<Arc<Self>> {
        let opts = broker::client_options(&options.client_id, &options.broker)?;
        let (client, eventloop) = AsyncClient::new(opts, 64);
        let service = Arc::new(Self {
            store: Mutex::new(store),
            client,
            connected: AtomicBool::new(false),
            pending: Mutex::new(HashMap::new()),
            name_locks: Mutex::new(HashMap::new()),
            timeout: options.download_timeout,
        });
        tokio::spawn(drive(Arc::downgrade(&service), eventloop));
        Ok(service)
    }

    pub fn is_connected(&self) -> bool {
        self.connected.load(Ordering::Relaxed)
    }

    /// Waits up to `limit` for the broker connection.
    pub async fn wait_connected(&self, limit: Duration) -> bool {
        let deadline = tokio::time::Instant::now() + limit;
        while !self.is_connected() {
            if tokio::time::Instant::now() >= deadline {
                return false;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        true
    }

    pub fn health(&self) -> Health {
        Health { broker_connected: self.is_connected(), configs: self.store.lock().unwrap().list().len() }
    }

    pub fn list(&self) -> Vec<CaptureConfig> {
        self.store.lock().unwrap().list().to_vec()
    }

    pub fn get(&self, name: &str) -> Result<CaptureConfig> {
        self.store.lock().unwrap().get(name).cloned()
    }

    fn name_lock(&self, name: &str) -> Arc<tokio::sync::Mutex<()>> {
        Arc::clone(self.name_locks.lock().unwrap().entry(name.to_string()).or_default())
    }

    pub async fn create(&self, settings: CaptureSettings) -> Result<CaptureConfig> {
        let lock = self.name_lock(&settings.name);
        let _guard = lock.lock().await;
        self.store.lock().unwrap().create(settings)
    }

    pub async fn update(&self, name: &str, settings: CaptureSettings) -> Result<CaptureConfig> {
        let lock = self.name_lock(name);
        let _guard = lock.lock().await;
        self.store.lock().unwrap().update(name, settings)
    }

    pub async fn delete(&self, name: &str) -> Result<()> {
        let lock = self.name_lock(name);
        let _guard = lock.lock().await;
        self.store.lock().unwrap().delete(name)
    }

    fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Unavailable("not connected to the MQTT broker".into()))
        }
    }

    async fn publish(&self, topic: &str, payload: Vec<u8>) -> Result<()> {
        self.client
            .publish(topic, QoS::AtLeastOnce, false, payload)
            .await
            .map_err(|e| Error::Unavailable(e.to_string()))
    }

    pub async fn start(&self, name: &str) -> Result<CaptureConfig> {
        let lock = self.name_lock(name);
        let _guard = lock.lock().await;
        let config = self.get(name)?;
        if config.status == RunStatus::Running {
            return Err(Error::Conflict(format!("configuration {name:?} is already running")));
        }
        self.require_connected()?;
        let msg = StartMessage {
            config: config.settings.clone(),
            correlation_id: Some(uuid::Uuid::new_v4().to_string()),
        };
        self.publish(TOPIC_START, serde_json::to_vec(&msg)?).await?;
        self.store.lock().unwrap().set_status(name, RunStatus::Running)?;
        self.get(name)
    }

    pub async fn stop(&self, name: &str) -> Result<CaptureConfig> {
        let lock = self.name_lock(name);
        let _guard = lock.lock().await;
        let config = self.get(name)?;
        if config.status == RunStatus::Stopped {
            return Err(Error::Conflict(format!("configuration {name:?} is not running")));
        }
        self.require_connected()?;
        let msg = StopMessage { name: name.to_string(), correlation_id: Some(uuid::Uuid::new_v4().to_string()) };
        self.publish(TOPIC_STOP, serde_json::to_vec(&msg)?).await?;
        self.store.lock().unwrap().set_status(name, RunStatus::Stopped)?;
        self.get(name)
    }

    /// Asks the collector for the capture file and waits for its reply.
    pub async fn download(&self, name: &str) -> Result<Download> {
        self.get(name)?;
        self.require_connected()?;
        let correlation_id = uuid::Uuid::new_v4().to_string();
        let (tx, rx) = oneshot::channel();
        self.pending.lock().unwrap().insert(correlation_id.clone(), tx);
        let msg = DownloadMessage { name: name.to_string(), correlation_id: correlation_id.clone() };
        let outcome = async {
            self.publish(TOPIC_DOWNLOAD, serde_json::to_vec(&msg)?).await?;
            match tokio::time::timeout(self.timeout, rx).await {
                Err(_) => Err(Error::Timeout),
                Ok(Err(_)) => Err(Error::Unavailable("control service shutting down".into())),
                Ok(Ok(Err(reason))) => Err(Error::Collector(reason)),
                Ok(Ok(Ok(env))) => {
                    let bytes = env
                        .decode()
                        .map_err(|e| Error::Collector(format!("undecodable output payload: {e}")))?;
                    Ok(Download { row_count: env.row_count, bytes })
                }
            }
        }
        .await;
        self.pending.lock().unwrap().remove(&correlation_id);
        outcome
    }

    fn on_output(&self, payload: &[u8]) {
        let env: OutputEnvelope = match serde_json::from_slice(payload) {
            Ok(env) => env,
            Err(e) => return log::warn!("ignoring malformed output message: {e}"),
        };
        let Some(tx) = self.pending.lock().unwrap().remove(&env.correlation_id) else {
            return log::debug!("output for {:?} has no waiting request", env.name);
        };
        let _ = tx.send(Ok(env));
    }

    fn on_status(&self, payload: &[u8]) {
        let status: StatusMessage = match serde_json::from_slice(payload) {
            Ok(s) => s,
            Err(e) => return log::warn!("ignoring malformed status message: {e}"),
        };
        if let (Some(cid), Some(reason)) = (&status.correlation_id, &status.error) {
            if let Some(tx) = self.pending.lock().unwrap().remove(cid) {
                let _ = tx.send(Err(reason.clone()));
            }
        }
        if let Some(reason) = &status.error {
            log::warn!("collector reported for {:?}: {reason}", status.name);
        }
        let reported = match status.state {
            SessionState::Capturing => RunStatus::Running,
            SessionState::Idle | SessionState::Stopped => RunStatus::Stopped,
            SessionState::Error => return,
        };
        let mut store = self.store.lock().unwrap();
        if store.get(&status.name).is_ok_and(|c| c.status != reported) {
            if let Err(e) = store.set_status(&status.name, reported) {
                log::error!("cannot record status of {:?}: {e}", status.name);
            }
        }
    }
}

async fn drive(service: Weak<ControlService>, mut eventloop: EventLoop) {
    loop {
        let event = eventloop.poll().await;
        let Some(svc) = service.upgrade() else { return };
        match event {
            Ok(Event::Incoming(Packet::ConnAck(_))) => {
                log::info!("control service connected to broker");
                for topic in [TOPIC_OUTPUT, TOPIC_STATUS] {
                    if let Err(e) = svc.client.subscribe(topic, QoS::AtLeastOnce).await {
                        log::error!("subscribe {topic}: {e}");
                    }
                }
                svc.connected.store(true, Ordering::Relaxed);
            }
            Ok(Event::Incoming(Packet::Publish(p))) => match p.topic.as_str() {
                TOPIC_OUTPUT => svc.on_output(&p.payload),
                TOPIC_STATUS => svc.on_status(&p.payload),
                _ => {}
            },
            Ok(_) => {}
            Err(e) => {
                if svc.connected.swap(false, Ordering::Relaxed) {
                    log::warn!("lost broker connection: {e}");
                }
                drop(svc);
                tokio::time::sleep(Duration::from_millis(250)).await;
            }
        }
    }
}
