//! MQTT control-plane messages. Every payload is a JSON object.
//!
//! | topic      | direction          | payload            |
//! |------------|--------------------|--------------------|
//! | `start`    | AP → collector     | [`StartMessage`]   |
//! | `stop`     | AP → collector     | [`StopMessage`]    |
//! | `download` | AP → collector     | [`DownloadMessage`]|
//! | `output`   | collector → AP     | [`OutputEnvelope`] |
//! | `status`   | collector → AP     | [`StatusMessage`]  |

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::config::CaptureSettings;

pub const TOPIC_START: &str = "start";
pub const TOPIC_STOP: &str = "stop";
pub const TOPIC_DOWNLOAD: &str = "download";
pub const TOPIC_OUTPUT: &str = "output";
pub const TOPIC_STATUS: &str = "status";

/// Configuration parameters of a capture plus an optional correlation id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartMessage {
    #[serde(flatten)]
    pub config: CaptureSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopMessage {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownloadMessage {
    pub name: String,
    pub correlation_id: String,
}

/// Capture file returned on the `output` topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEnvelope {
    pub name: String,
    pub correlation_id: String,
    pub row_count: u64,
    /// Base64 (standard alphabet, padded) file bytes.
    pub payload: String,
}

impl OutputEnvelope {
    pub fn new(name: &str, correlation_id: &str, row_count: u64, file: &[u8]) -> Self {
        Self {
            name: name.to_string(),
            correlation_id: correlation_id.to_string(),
            row_count,
            payload: base64::engine::general_purpose::STANDARD.encode(file),
        }
    }

    pub fn decode(&self) -> Result<Vec<u8>, base64::DecodeError> {
        base64::engine::general_purpose::STANDARD.decode(&self.payload)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Idle,
    Capturing,
    Stopped,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusMessage {
    pub name: String,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub frames_written: u64,
}
