use serde::{Deserialize, Serialize};

use super::{prompt_hash, DecodingParams};
use crate::http::{EndpointConfig, HttpError, JsonClient};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend refused prompt {prompt_hash}: {reason}")]
    Refused { prompt_hash: String, reason: String },
    #[error("token budget exceeded: {0}")]
    TokenBudget(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("mock backend has no response for prompt {prompt_hash}")]
    NoMockResponse { prompt_hash: String },
}

/// A text-completion model. Implementations must be deterministic under
/// greedy decoding and safe to call from several threads at once.
pub trait CompletionBackend: Send + Sync {
    fn identity_label(&self) -> &str;

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError>;

    /// Upper bound on concurrent `complete` calls, if the backend has one.
    fn max_in_flight(&self) -> Option<usize> {
        None
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn identity_label(&self) -> &str {
        (**self).identity_label()
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        (**self).complete(prompt, params)
    }

    fn max_in_flight(&self) -> Option<usize> {
        (**self).max_in_flight()
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Completion over JSON-over-HTTP.
///
/// Request: `{"prompt": string, "max_tokens": int, "temperature": 0}`.
/// Response: `{"text": string}`. HTTP 413 is reported as a token-budget
/// overflow; other 4xx responses are refusals.
pub struct RemoteBackend {
    client: JsonClient,
    label: String,
    in_flight: usize,
}

impl RemoteBackend {
    pub fn new(endpoint: EndpointConfig, in_flight: usize) -> Result<Self, BackendError> {
        let label = format!("remote:{}", endpoint.url);
        let client = JsonClient::new(endpoint).map_err(BackendError::from)?;
        Ok(Self {
            client,
            label,
            in_flight: in_flight.max(1),
        })
    }

    pub fn endpoint(&self) -> &EndpointConfig {
        self.client.config()
    }
}

impl From<HttpError> for BackendError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Transport { attempts, message } => BackendError::Transport { attempts, message },
            HttpError::Status { status: 413, body } => BackendError::TokenBudget(body),
            HttpError::Status { status, body } => BackendError::Refused {
                prompt_hash: String::new(),
                reason: format!("HTTP {status}: {body}"),
            },
            HttpError::Decode(m) => BackendError::Protocol(m),
        }
    }
}

impl CompletionBackend for RemoteBackend {
    fn identity_label(&self) -> &str {
        &self.label
    }

    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, BackendError> {
        let req = CompletionRequest {
            prompt,
            max_tokens: params.max_new_tokens,
            temperature: 0,
        };
        match self.client.post::<_, CompletionResponse>(&req) {
            Ok(resp) => Ok(resp.text),
            Err(e) => Err(match BackendError::from(e) {
                BackendError::Refused { reason, .. } => BackendError::Refused {
                    prompt_hash: prompt_hash(prompt),
                    reason,
                },
                other => other,
            }),
        }
    }

    fn max_in_flight(&self) -> Option<usize> {
        Some(self.in_flight)
    }
}
