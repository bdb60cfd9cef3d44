//! Blocking JSON-over-HTTP client shared by the remote embedder and the
//! remote completion backend.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Connection settings for a remote JSON endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointConfig {
    pub url: String,
    /// Header name and value sent with every request, e.g. `("Authorization", "Bearer ...")`.
    pub auth_header: Option<(String, String)>,
    pub timeout: Duration,
    /// Extra attempts after the first one for retryable failures.
    pub retries: u32,
    pub retry_backoff: Duration,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            auth_header: None,
            timeout: Duration::from_secs(60),
            retries: 3,
            retry_backoff: Duration::from_millis(250),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub(crate) enum HttpError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("could not decode response: {0}")]
    Decode(String),
}

pub(crate) struct JsonClient {
    client: Client,
    config: EndpointConfig,
}

impl JsonClient {
    pub(crate) fn new(config: EndpointConfig) -> Result<Self, HttpError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| HttpError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self { client, config })
    }

    pub(crate) fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// POSTs `body` and decodes the JSON response. Connection errors, timeouts,
    /// 429 and 5xx responses are retried up to `retries` extra times.
    pub(crate) fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        body: &Req,
    ) -> Result<Resp, HttpError> {
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                thread::sleep(self.config.retry_backoff * (attempt - 1));
            }
            let mut req = self.client.post(&self.config.url).json(body);
            if let Some((name, value)) = &self.config.auth_header {
                req = req.header(name.as_str(), value.as_str());
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let text = resp.text().map_err(|e| HttpError::Decode(e.to_string()))?;
                        return serde_json::from_str(&text)
                            .map_err(|e| HttpError::Decode(e.to_string()));
                    }
                    let body = resp.text().unwrap_or_default();
                    if !is_retryable(status) {
                        return Err(HttpError::Status {
                            status: status.as_u16(),
                            body,
                        });
                    }
                    last = format!("HTTP {status}: {body}");
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(HttpError::Transport {
            attempts,
            message: last,
        })
    }
}

fn is_retryable(status: StatusCode) -> bool {
    status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error()
}
