//! Embedded MQTT 3.1.1 broker for local runs and tests.

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::time::{Duration, Instant};

use rumqttd::{Broker, Config, ConnectionSettings, RouterConfig, ServerSettings};

use crate::{Error, Result};

/// Largest MQTT packet accepted by the embedded broker and by our clients.
/// Capture downloads travel as one publish, so this bounds the file size.
pub const MAX_PACKET_BYTES: usize = 256 * 1024 * 1024;

fn config(listen: SocketAddr) -> Config {
    let connections = ConnectionSettings {
        connection_timeout_ms: 60_000,
        max_payload_size: MAX_PACKET_BYTES,
        max_inflight_count: 256,
        auth: None,
        external_auth: None,
        dynamic_filters: true,
    };
    let server = ServerSettings {
        name: "v4-1".into(),
        listen,
        tls: None,
        next_connection_delay_ms: 1,
        connections,
    };
    Config {
        id: 0,
        router: RouterConfig {
            max_connections: 1024,
            max_outgoing_packet_count: 1024,
            max_segment_size: 2 * MAX_PACKET_BYTES,
            max_segment_count: 10,
            ..Default::default()
        },
        v4: Some(HashMap::from([("1".to_string(), server)])),
        ..Default::default()
    }
}

/// Handle to a broker running on a background thread. The broker lives until
/// the process exits.
#[derive(Debug, Clone, Copy)]
pub struct EmbeddedBroker {
    pub addr: SocketAddr,
}

impl EmbeddedBroker {
    /// Starts a broker on `listen` (port 0 picks a free port) and waits until
    /// it accepts connections.
    pub fn start(listen: SocketAddr) -> Result<Self> {
        let addr = if listen.port() == 0 {
            let probe = TcpListener::bind(listen)?;
            probe.local_addr()?
        } else {
            listen
        };
        let mut broker = Broker::new(config(addr));
        std::thread::Builder::new().name("mqtt-broker".into()).spawn(move || {
            if let Err(e) = broker.start() {
                log::error!("broker stopped: {e}");
            }
        })?;
        let deadline = Instant::now() + Duration::from_secs(10);
        while TcpStream::connect(addr).is_err() {
            if Instant::now() > deadline {
                return Err(Error::Unavailable(format!("embedded broker did not come up on {addr}")));
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        Ok(Self { addr })
    }

    pub fn loopback() -> Result<Self> {
        Self::start(SocketAddr::from(([127, 0, 0, 1], 0)))
    }

    /// Blocks the calling thread forever.
    pub fn park(self) -> ! {
        loop {
            std::thread::park();
        }
    }
}

/// Splits `host:port` (port defaults to 1883).
pub fn parse_broker_addr(text: &str) -> Result<(String, u16)> {
    let text = text.strip_prefix("mqtt://").unwrap_or(text);
    match text.rsplit_once(':') {
        Some((host, port)) if !host.is_empty() => {
            let port = port
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad broker port in {text:?}")))?;
            Ok((host.trim_matches(['[', ']']).to_string(), port))
        }
        None if !text.is_empty() => Ok((text.to_string(), 1883)),
        _ => Err(Error::InvalidConfig(format!("bad broker address {text:?}"))),
    }
}

/// Client options shared by the collector and the control service.
pub fn client_options(client_id: &str, broker: &str) -> Result<rumqttc::MqttOptions> {
    let (host, port) = parse_broker_addr(broker)?;
    let mut opts = rumqttc::MqttOptions::new(client_id, host, port);
    opts.set_keep_alive(Duration::from_secs(10));
    opts.set_max_packet_size(MAX_PACKET_BYTES, MAX_PACKET_BYTES);
    opts.set_clean_session(true);
    Ok(opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broker_addresses() {
        assert_eq!(parse_broker_addr("127.0.0.1:1999").unwrap(), ("127.0.0.1".into(), 1999));
        assert_eq!(parse_broker_addr("mqtt://ap.local").unwrap(), ("ap.local".into(), 1883));
        assert_eq!(parse_broker_addr("[::1]:1883").unwrap(), ("::1".into(), 1883));
        assert!(parse_broker_addr("host:xx").is_err());
        assert!(parse_broker_addr("").is_err());
    }
}
