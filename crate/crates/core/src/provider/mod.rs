//! Completion providers.
//!
//! A [`Backend`] turns a prompt into raw completion text: either the OpenAI-compatible HTTP
//! adapter or the deterministic [`MockProvider`]. [`CompletionClient`] wraps the registered
//! backends with the response cache, transient-failure retries, per-provider rate limits and
//! a [`CompletionRecord`] for every call, including cache hits.

mod cache;
mod mock;
mod openai;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::ResponseCache;
pub use mock::{MockProvider, Predictor};
pub use openai::{OpenAiProvider, API_KEY_ENV};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderParams {
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "one")]
    pub max_completion_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn one() -> u32 {
    1
}

impl ProviderParams {
    /// Temperature 0 and a single completion token.
    pub fn new(model: impl Into<String>) -> Self {
        ProviderParams { model: model.into(), temperature: 0.0, max_completion_tokens: 1, seed: None }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_completion_tokens == 0 {
            return Err("max_completion_tokens must be positive".into());
        }
        Ok(())
    }
}

/// How a backend call failed.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("rate limited")]
    RateLimited,
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("rejected request: {0}")]
    Config(String),
    #[error("mock: {0}")]
    Mock(String),
}

impl BackendError {
    fn is_transient(&self) -> bool {
        matches!(self, BackendError::RateLimited | BackendError::Transient(_))
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    /// True if calls leave the process.
    fn is_network(&self) -> bool;

    fn complete(&self, prompt: &str, params: &ProviderParams) -> Result<String, BackendError>;
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("no provider registered as '{0}'")]
    UnknownProvider(String),
    #[error("provider '{0}' needs the network but the client is offline")]
    Offline(String),
    #[error("provider '{provider}' failed after {retries} retries: {message}")]
    Transport { provider: String, retries: u32, message: String },
    #[error("provider '{provider}' rejected the request: {message}")]
    Config { provider: String, message: String },
    #[error("mock provider '{provider}': {message}")]
    Mock { provider: String, message: String },
    #[error("bad parameters for '{provider}': {message}")]
    Params { provider: String, message: String },
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// One provider call as written to the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub key: String,
    pub provider: String,
    pub params: ProviderParams,
    pub attempt: u32,
    pub prompt: String,
    pub completion: String,
    pub cached: bool,
    pub timestamp_ms: u64,
    pub latency_ms: u64,
    pub retries: u32,
}

/// Source of record timestamps. `Frozen` stamps every record with zero so that logs of
/// network-free runs are byte-reproducible.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clock {
    #[default]
    System,
    Frozen,
}

impl Clock {
    fn now_ms(self) -> u64 {
        match self {
            Clock::System => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
            Clock::Frozen => 0,
        }
    }

    fn elapsed_ms(self, since: Instant) -> u64 {
        match self {
            Clock::System => since.elapsed().as_millis() as u64,
            Clock::Frozen => 0,
        }
    }
}

fn push_field(h: &mut Sha256, bytes: &[u8]) {
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(bytes);
}

/// Stable digest of everything that determines a completion.
pub fn cache_key(provider: &str, params: &ProviderParams, prompt: &str) -> String {
    cache_key_for_attempt(provider, params, prompt, 0)
}

/// Like [`cache_key`], salted for re-asks after an unparsable answer so those get their
/// own cache entries. Attempt 0 is the plain key.
pub fn cache_key_for_attempt(provider: &str, params: &ProviderParams, prompt: &str, attempt: u32) -> String {
    let mut h = Sha256::new();
    push_field(&mut h, b"arena-completion-v1");
    push_field(&mut h, provider.as_bytes());
    push_field(&mut h, params.model.as_bytes());
    push_field(&mut h, &params.temperature.to_bits().to_le_bytes());
    push_field(&mut h, &params.max_completion_tokens.to_le_bytes());
    match params.seed {
        Some(s) => push_field(&mut h, &s.to_le_bytes()),
        None => push_field(&mut h, b"-"),
    }
    push_field(&mut h, prompt.as_bytes());
    if attempt > 0 {
        push_field(&mut h, &attempt.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 5, base_delay_ms: 500, max_delay_ms: 30_000 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

/// Token bucket admitting `per_second` requests on average with bursts up to `burst`.
#[derive(Debug)]
pub struct RateLimiter {
    per_second: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(per_second: f64, burst: u32) -> Self {
        let burst = f64::from(burst.max(1));
        RateLimiter { per_second, burst, state: Mutex::new((burst, Instant::now())) }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.per_second).min(self.burst);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.per_second
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

struct Registered {
    backend: Arc<dyn Backend>,
    params: ProviderParams,
    forward_seed: bool,
    limiter: Option<RateLimiter>,
}

#[derive(Clone, Debug, Default)]
pub struct ClientOptions {
    pub retry: RetryPolicy,
    pub cache_dir: Option<PathBuf>,
    /// Refuse to register network backends.
    pub offline: bool,
    pub clock: Clock,
}

#[derive(Clone, Debug, Default)]
pub struct ProviderOptions {
    pub forward_seed: bool,
    pub requests_per_second: Option<f64>,
    pub burst: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct CompletionRequest<'a> {
    pub provider: &'a str,
    pub prompt: &'a str,
    /// 0 for the first ask, 1.. for re-asks after an unparsable answer.
    pub attempt: u32,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Completion {
    pub text: String,
    pub record: CompletionRecord,
}

/// Shared entry point for all completions; safe to use from many matches at once.
pub struct CompletionClient {
    providers: BTreeMap<String, Registered>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    offline: bool,
    clock: Clock,
    backend_calls: AtomicU64,
    network_calls: AtomicU64,
}

impl CompletionClient {
    pub fn new(options: ClientOptions) -> Self {
        CompletionClient {
            providers: BTreeMap::new(),
            cache: options.cache_dir.map(ResponseCache::new),
            retry: options.retry,
            offline: options.offline,
            clock: options.clock,
            backend_calls: AtomicU64::new(0),
            network_calls: AtomicU64::new(0),
        }
    }

    pub fn register(
        &mut self,
        backend: Arc<dyn Backend>,
        params: ProviderParams,
        options: ProviderOptions,
    ) -> Result<(), ProviderError> {
        let id = backend.id().to_string();
        if self.offline && backend.is_network() {
            return Err(ProviderError::Offline(id));
        }
        params.validate().map_err(|message| ProviderError::Params { provider: id.clone(), message })?;
        let limiter = options.requests_per_second.map(|r| RateLimiter::new(r, options.burst));
        self.providers.insert(id, Registered { backend, params, forward_seed: options.forward_seed, limiter });
        Ok(())
    }

    pub fn has_provider(&self, id: &str) -> bool {
        self.providers.contains_key(id)
    }

    pub fn provider_ids(&self) -> impl Iterator<Item = &str> {
        self.providers.keys().map(String::as_str)
    }

    /// Calls that reached a backend (cache misses).
    pub fn backend_calls(&self) -> u64 {
        self.backend_calls.load(Ordering::Relaxed)
    }

    /// Calls that reached a network backend.
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::Relaxed)
    }

    pub fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, ProviderError> {
        let entry =
            self.providers.get(req.provider).ok_or_else(|| ProviderError::UnknownProvider(req.provider.into()))?;
        let mut params = entry.params.clone();
        if entry.forward_seed {
            params.seed = req.seed;
        }
        let key = cache_key_for_attempt(req.provider, &params, req.prompt, req.attempt);
        let timestamp_ms = self.clock.now_ms();
        let record = |completion: &str, cached: bool, latency_ms: u64, retries: u32| CompletionRecord {
            key: key.clone(),
            provider: req.provider.to_string(),
            params: params.clone(),
            attempt: req.attempt,
            prompt: req.prompt.to_string(),
            completion: completion.to_string(),
            cached,
            timestamp_ms,
            latency_ms,
            retries,
        };

        if let Some(cache) = &self.cache {
            if let Some(text) = cache.get(&key)? {
                let record = record(&text, true, 0, 0);
                return Ok(Completion { text, record });
            }
        }

        let started = Instant::now();
        let mut retries = 0;
        loop {
            if let Some(l) = &entry.limiter {
                l.acquire();
            }
            self.backend_calls.fetch_add(1, Ordering::Relaxed);
            if entry.backend.is_network() {
                self.network_calls.fetch_add(1, Ordering::Relaxed);
            }
            match entry.backend.complete(req.prompt, &params) {
                Ok(text) => {
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &text)?;
                    }
                    let record = record(&text, false, self.clock.elapsed_ms(started), retries);
                    return Ok(Completion { text, record });
                }
                Err(e) if e.is_transient() && retries < self.retry.max_retries => {
                    thread::sleep(self.retry.delay(retries));
                    retries += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(ProviderError::Transport {
                        provider: req.provider.into(),
                        retries,
                        message: e.to_string(),
                    })
                }
                Err(BackendError::Mock(message)) => {
                    return Err(ProviderError::Mock { provider: req.provider.into(), message })
                }
                Err(e) => return Err(ProviderError::Config { provider: req.provider.into(), message: e.to_string() }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flaky {
        failures: Mutex<Vec<BackendError>>,
        calls: AtomicU64,
    }

    impl Backend for Flaky {
        fn id(&self) -> &str {
            "flaky"
        }
        fn is_network(&self) -> bool {
            false
        }
        fn complete(&self, _: &str, _: &ProviderParams) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::Relaxed);
            match self.failures.lock().unwrap().pop() {
                Some(e) => Err(e),
                None => Ok("J".into()),
            }
        }
    }

    fn fast() -> RetryPolicy {
        RetryPolicy { max_retries: 2, base_delay_ms: 1, max_delay_ms: 2 }
    }

    fn client_with(failures: Vec<BackendError>) -> (CompletionClient, Arc<Flaky>) {
        let backend = Arc::new(Flaky { failures: Mutex::new(failures), calls: AtomicU64::new(0) });
        let mut c = CompletionClient::new(ClientOptions { retry: fast(), ..Default::default() });
        c.register(backend.clone(), ProviderParams::new("m"), ProviderOptions::default()).unwrap();
        (c, backend)
    }

    fn ask(c: &CompletionClient) -> Result<Completion, ProviderError> {
        c.complete(&CompletionRequest { provider: "flaky", prompt: "p", attempt: 0, seed: None })
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let (c, b) = client_with(vec![BackendError::Transient("boom".into()), BackendError::RateLimited]);
        let done = ask(&c).unwrap();
        assert_eq!(done.text, "J");
        assert_eq!(done.record.retries, 2);
        assert_eq!(b.calls.load(Ordering::Relaxed), 3);
    }

    #[test]
    fn gives_up_after_cap() {
        let (c, _) = client_with(vec![BackendError::RateLimited; 3]);
        assert!(matches!(ask(&c), Err(ProviderError::Transport { retries: 2, .. })));
    }

    #[test]
    fn config_errors_are_not_retried() {
        let (c, b) = client_with(vec![BackendError::Config("400".into())]);
        assert!(matches!(ask(&c), Err(ProviderError::Config { .. })));
        assert_eq!(b.calls.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn unknown_provider() {
        let (c, _) = client_with(vec![]);
        let r = c.complete(&CompletionRequest { provider: "nope", prompt: "p", attempt: 0, seed: None });
        assert!(matches!(r, Err(ProviderError::UnknownProvider(_))));
    }

    #[test]
    fn cache_key_properties() {
        let p = ProviderParams::new("gpt");
        assert_eq!(cache_key("a", &p, "hello"), cache_key("a", &p, "hello"));
        assert_ne!(cache_key("a", &p, "hello"), cache_key("a", &p, "hellp"));
        assert_ne!(cache_key("a", &p, "hello"), cache_key("b", &p, "hello"));
        let warm = ProviderParams { temperature: 0.5, ..p.clone() };
        assert_ne!(cache_key("a", &p, "hello"), cache_key("a", &warm, "hello"));
        assert_ne!(cache_key("a", &p, "x"), cache_key_for_attempt("a", &p, "x", 1));
        // field boundaries are length-prefixed
        assert_ne!(cache_key("ab", &p, "c"), cache_key("a", &p, "bc"));
        assert_eq!(cache_key("a", &p, "hello").len(), 64);
    }

    #[test]
    fn frozen_key_value() {
        // pins the digest layout; changing it invalidates every existing cache
        let p = ProviderParams::new("gpt-4");
        assert_eq!(cache_key("openai", &p, "Hi"), "759a8313da1b8a123eefb049fa33fec31ca375713904662df40d58ba9cefe45d");
    }

    #[test]
    fn negative_temperature_rejected() {
        let backend = Arc::new(Flaky { failures: Mutex::new(vec![]), calls: AtomicU64::new(0) });
        let mut c = CompletionClient::new(ClientOptions::default());
        let params = ProviderParams { temperature: -1.0, ..ProviderParams::new("m") };
        assert!(matches!(c.register(backend, params, ProviderOptions::default()), Err(ProviderError::Params { .. })));
    }

    #[test]
    fn backoff_is_exponential_and_capped() {
        let r = RetryPolicy { max_retries: 10, base_delay_ms: 100, max_delay_ms: 1000 };
        let ms: Vec<u128> = (0..6).map(|i| r.delay(i).as_millis()).collect();
        assert_eq!(ms, vec![100, 200, 400, 800, 1000, 1000]);
        assert_eq!(r.delay(200).as_millis(), 1000);
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let l = RateLimiter::new(100.0, 1);
        let t = Instant::now();
        for _ in 0..4 {
            l.acquire();
        }
        assert!(t.elapsed() >= Duration::from_millis(25));
    }
}
