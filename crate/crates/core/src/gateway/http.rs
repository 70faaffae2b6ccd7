use std::time::Duration;

use serde_json::Value;

use super::protocol::Route;
use super::{Transport, TransportError};

/// Blocking JSON-over-HTTP transport: `POST {endpoint}/{route}` and
/// `GET {endpoint}/health`.
pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { endpoint: endpoint.trim_end_matches('/').to_owned(), agent }
    }

    fn map_err(e: ureq::Error) -> TransportError {
        match e {
            ureq::Error::Status(status, resp) => {
                TransportError::Status { status, body: resp.into_string().unwrap_or_default() }
            }
            ureq::Error::Transport(t) => {
                let msg = t.to_string();
                if msg.contains("timed out") || msg.contains("Timeout") {
                    TransportError::Timeout
                } else {
                    TransportError::Unreachable(msg)
                }
            }
        }
    }

    fn read(resp: ureq::Response) -> Result<Value, TransportError> {
        let text = resp.into_string().map_err(|e| TransportError::Malformed(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| TransportError::Malformed(format!("{e}: {text:.80}")))
    }
}

impl Transport for HttpTransport {
    fn post(&self, route: Route, body: &Value) -> Result<Value, TransportError> {
        let url = format!("{}/{}", self.endpoint, route.path());
        let resp = self.agent.post(&url).send_json(body).map_err(Self::map_err)?;
        Self::read(resp)
    }

    fn health(&self) -> Result<Value, TransportError> {
        let resp = self.agent.get(&format!("{}/health", self.endpoint)).call().map_err(Self::map_err)?;
        Self::read(resp)
    }
}
