//! Backend clients: a chat-completions LLM and an image-edit model, each
//! with a live HTTP implementation and a deterministic mock.
//!
//! Every backend owns a counting admission gate that caps in-flight
//! requests. Retries re-enter the gate, so backoff sleeps never hold a
//! permit.

pub mod http;
pub mod mock;

use std::future::Future;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BackendError, ForgeError, Result};
use crate::generate::{GenerationRequest, ImagePayload};
use crate::message::ChatMessage;

/// Configuration for one chat backend role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatBackendConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key. Secrets never
    /// live in config files.
    pub api_key_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default)]
    pub temperature: f64,
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_concurrency() -> usize {
    8
}

impl ChatBackendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_concurrency < 1 {
            return Err(ForgeError::Config("max_concurrency must be >= 1".into()));
        }
        if self.timeout_secs == 0 {
            return Err(ForgeError::Config("timeout_secs must be > 0".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ForgeError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Counting admission gate enforcing a backend's concurrency cap.
///
/// Tracks a high-water mark so tests (and the mock transcript) can assert
/// the cap was never breached.
#[derive(Debug)]
pub struct Gate {
    semaphore: tokio::sync::Semaphore,
    cap: usize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

impl Gate {
    pub fn new(cap: usize) -> Arc<Self> {
        Arc::new(Self {
            semaphore: tokio::sync::Semaphore::new(cap),
            cap,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        })
    }

    pub async fn admit(&self) -> GatePermit<'_> {
        let permit = self
            .semaphore
            .acquire()
            .await
            .expect("gate semaphore closed");
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        GatePermit {
            gate: self,
            _permit: permit,
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Highest number of simultaneously admitted requests observed so far.
    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

pub struct GatePermit<'a> {
    gate: &'a Gate,
    _permit: tokio::sync::SemaphorePermit<'a>,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        self.gate.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

/// Chat-completions client.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    /// Send one conversation and return the first choice's content.
    async fn chat_complete(
        &self,
        messages: &[ChatMessage],
    ) -> std::result::Result<String, BackendError>;

    fn model_id(&self) -> &str;

    /// The backend's admission gate, exposed for cap assertions.
    fn gate(&self) -> &Arc<Gate>;
}

/// Image-edit client.
#[async_trait]
pub trait EditBackend: Send + Sync {
    async fn edit_image(
        &self,
        request: &GenerationRequest,
    ) -> std::result::Result<ImagePayload, BackendError>;

    fn model_id(&self) -> &str;

    fn gate(&self) -> &Arc<Gate>;
}

/// Retry budget and backoff shape shared by all backend calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Maximum attempts, including the first one.
    pub budget: u32,
    pub base_ms: u64,
    pub cap_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            budget: 3,
            base_ms: 1_000,
            cap_ms: 60_000,
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff with jitter for the given 1-based attempt number.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let exp = self
            .base_ms
            .saturating_mul(2u64.saturating_pow(attempt.saturating_sub(1)))
            .min(self.cap_ms);
        let jittered = exp / 2 + rand::thread_rng().gen_range(0..=exp / 2);
        Duration::from_millis(jittered)
    }
}

/// Outcome of a retried operation, carrying the attempt count.
#[derive(Debug)]
pub struct Attempted<T> {
    pub result: Result<T>,
    pub attempts: u32,
}

/// Run an operation under the retry policy.
///
/// Retries only retriable errors (transport 5xx/timeout and parse errors);
/// a non-retriable error returns immediately with the attempts used so far.
pub async fn with_retries<T, F, Fut>(policy: &RetryPolicy, mut operation: F) -> Attempted<T>
where
    F: FnMut(u32) -> Fut,
    Fut: Future<Output = Result<T>>,
{
    let budget = policy.budget.max(1);
    let mut last_err = None;
    for attempt in 1..=budget {
        match operation(attempt).await {
            Ok(value) => {
                return Attempted {
                    result: Ok(value),
                    attempts: attempt,
                }
            }
            Err(err) => {
                let retriable = err.is_retriable();
                last_err = Some(err);
                if !retriable || attempt == budget {
                    return Attempted {
                        result: Err(last_err.unwrap()),
                        attempts: attempt,
                    };
                }
                tokio::time::sleep(policy.backoff(attempt)).await;
            }
        }
    }
    unreachable!("budget >= 1 guarantees a return above")
}
