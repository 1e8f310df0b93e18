//! Chat backends: a deterministic scripted backend for tests and offline
//! runs, and a remote backend speaking the OpenAI-compatible
//! chat-completions protocol.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::context::Phase;
use crate::emotion::{Emotion, Party};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// Which component is asking. Scripted rule tables key on it; remote
/// backends ignore it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Caller {
    Opponent,
    Negotiator,
    Judge,
    Recognizer,
    Extractor,
    Assessor,
    Orchestrator,
    Evaluator,
}

#[derive(Clone, Debug)]
pub struct ChatRequest<'a> {
    pub caller: Caller,
    pub round: u32,
    pub messages: &'a [ChatMessage],
    pub temperature: f64,
}

impl<'a> ChatRequest<'a> {
    pub fn new(caller: Caller, round: u32, messages: &'a [ChatMessage], temperature: f64) -> Self {
        ChatRequest {
            caller,
            round,
            messages,
            temperature,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, request: &ChatRequest<'_>) -> Result<String>;

    /// Scripted backends let recognizers and extractors read inline markers
    /// instead of prompting.
    fn is_scripted(&self) -> bool {
        false
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn chat(&self, request: &ChatRequest<'_>) -> Result<String> {
        (**self).chat(request)
    }

    fn is_scripted(&self) -> bool {
        (**self).is_scripted()
    }
}

/// Deterministic stand-in for a chat model.
///
/// Replies come from a rule table keyed by `(caller, round)` when a rule
/// matches, otherwise from a FIFO queue, otherwise [`ScriptedBackend::DEFAULT_REPLY`].
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    rules: BTreeMap<(Caller, u32), String>,
    calls: AtomicUsize,
    failing: bool,
}

impl ScriptedBackend {
    pub const DEFAULT_REPLY: &'static str = "[EMO:neutral] I have nothing to add.";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            queue: Mutex::new(replies.into_iter().map(Into::into).collect()),
            ..Self::default()
        }
    }

    /// A backend whose every call fails as unavailable.
    pub fn failing() -> Self {
        ScriptedBackend {
            failing: true,
            ..Self::default()
        }
    }

    pub fn with_rule(mut self, caller: Caller, round: u32, reply: impl Into<String>) -> Self {
        self.rules.insert((caller, round), reply.into());
        self
    }

    pub fn push(&self, reply: impl Into<String>) {
        self.queue.lock().expect("queue lock").push_back(reply.into());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("queue lock").len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, request: &ChatRequest<'_>) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.failing {
            return Err(Error::BackendUnavailable {
                attempts: 1,
                reason: "scripted failure".into(),
            });
        }
        if let Some(reply) = self.rules.get(&(request.caller, request.round)) {
            return Ok(reply.clone());
        }
        Ok(self
            .queue
            .lock()
            .expect("queue lock")
            .pop_front()
            .unwrap_or_else(|| Self::DEFAULT_REPLY.to_string()))
    }

    fn is_scripted(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Scripted,
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key. The key itself
    /// is never stored here.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub base_temperature: f64,
}

impl fmt::Debug for BackendConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendConfig")
            .field("kind", &self.kind)
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("api_key_env", &self.api_key_env)
            .field("timeout_secs", &self.timeout_secs)
            .field("retries", &self.retries)
            .finish()
    }
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::scripted()
    }
}

impl BackendConfig {
    pub fn scripted() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            endpoint: None,
            model: None,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60.0,
            retries: 3,
            backoff_ms: 500,
            base_temperature: 0.7,
        }
    }

    pub fn remote(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Remote,
            endpoint: Some(endpoint.into()),
            model: Some(model.into()),
            ..BackendConfig::scripted()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == BackendKind::Remote {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(Error::param("endpoint", "remote backend requires an endpoint"));
            }
            if self.model.as_deref().is_none_or(str::is_empty) {
                return Err(Error::param("model", "remote backend requires a model name"));
            }
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::param("timeout_secs", "must be positive"));
        }
        Ok(())
    }
}

/// Raw HTTP answer handed back by a [`Transport`].
#[derive(Clone, Debug)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransportError {
    Timeout,
    Connect(String),
    Other(String),
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportError::Timeout => f.write_str("request timed out"),
            TransportError::Connect(s) => write!(f, "connection failed: {s}"),
            TransportError::Other(s) => f.write_str(s),
        }
    }
}

/// One HTTP POST with a JSON body.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<HttpResponse, TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl Default for ReqwestTransport {
    fn default() -> Self {
        ReqwestTransport {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &Value,
        timeout: Duration,
    ) -> std::result::Result<HttpResponse, TransportError> {
        let mut req = self.client.post(url).timeout(timeout).json(body);
        if let Some(key) = bearer {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else if e.is_connect() {
                TransportError::Connect(e.without_url().to_string())
            } else {
                TransportError::Other(e.without_url().to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| TransportError::Other(e.without_url().to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// OpenAI-compatible chat-completions client with retry and exponential backoff.
pub struct RemoteBackend {
    config: BackendConfig,
    api_key: Option<String>,
    transport: Box<dyn Transport>,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackend {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(config: BackendConfig) -> Result<Self> {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_transport(config, key, Box::new(ReqwestTransport::default()))
    }

    pub fn with_transport(config: BackendConfig, api_key: Option<String>, transport: Box<dyn Transport>) -> Result<Self> {
        if config.kind != BackendKind::Remote {
            return Err(Error::param("kind", "RemoteBackend needs a remote config"));
        }
        config.validate()?;
        Ok(RemoteBackend {
            config,
            api_key,
            transport,
        })
    }

    pub fn request_body(&self, request: &ChatRequest<'_>) -> Value {
        json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": request.temperature,
        })
    }

    fn parse_reply(body: &str) -> std::result::Result<String, String> {
        let v: Value = serde_json::from_str(body).map_err(|e| format!("malformed response body: {e}"))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }

    fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.config.backoff_ms.saturating_mul(1u64 << attempt.min(16)))
    }
}

impl ChatBackend for RemoteBackend {
    fn chat(&self, request: &ChatRequest<'_>) -> Result<String> {
        if request.messages.is_empty() {
            return Err(Error::InvalidInput("chat needs at least one message".into()));
        }
        if !(request.temperature >= 0.0) {
            return Err(Error::param("temperature", "must be non-negative"));
        }
        let url = self.config.endpoint.as_deref().expect("validated");
        let body = self.request_body(request);
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let attempts = self.config.retries + 1;
        let mut last = String::new();

        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff(attempt - 1));
            }
            match self.transport.post_json(url, self.api_key.as_deref(), &body, timeout) {
                Ok(resp) if (200..300).contains(&resp.status) => match Self::parse_reply(&resp.body) {
                    Ok(text) => return Ok(text),
                    Err(e) => last = e,
                },
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last = format!("HTTP {}", resp.status);
                }
                Ok(resp) => {
                    return Err(Error::BackendRejected {
                        status: resp.status,
                        body: resp.body,
                    })
                }
                Err(e) => last = e.to_string(),
            }
            debug!("chat attempt {} of {} failed: {last}", attempt + 1, attempts);
        }
        warn!("chat backend gave up after {attempts} attempts: {last}");
        Err(Error::BackendUnavailable { attempts, reason: last })
    }
}

/// Builds the backend a config describes.
pub fn build_backend(config: &BackendConfig) -> Result<Box<dyn ChatBackend>> {
    config.validate()?;
    Ok(match config.kind {
        BackendKind::Scripted => Box::new(ScriptedBackend::new()),
        BackendKind::Remote => Box::new(RemoteBackend::new(config.clone())?),
    })
}

/// Sampling-temperature schedule for response generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureConfig {
    pub base: f64,
    pub high_confidence: f64,
    pub low_confidence: f64,
    pub crisis: f64,
    pub early: f64,
    pub high_threshold: f64,
    pub low_threshold: f64,
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        TemperatureConfig {
            base: 0.7,
            high_confidence: 0.5,
            low_confidence: 1.5,
            crisis: 0.7,
            early: 1.2,
            high_threshold: 0.7,
            low_threshold: 0.3,
        }
    }
}

impl TemperatureConfig {
    pub const MIN: f64 = 0.05;
    pub const MAX: f64 = 2.0;

    pub fn response_temperature(&self, confidence: f64, phase: Phase) -> f64 {
        let confidence = confidence.clamp(0.0, 1.0);
        let by_confidence = if confidence >= self.high_threshold {
            self.high_confidence
        } else if confidence <= self.low_threshold {
            self.low_confidence
        } else {
            1.0
        };
        let by_phase = match phase {
            Phase::Closing => self.crisis,
            Phase::Opening => self.early,
            _ => 1.0,
        };
        (self.base * by_confidence * by_phase).clamp(Self::MIN, Self::MAX)
    }
}

pub fn response_temperature(confidence: f64, phase: Phase) -> f64 {
    TemperatureConfig::default().response_temperature(confidence, phase)
}

/// Everything needed to produce one dialogue turn with a chat model.
#[derive(Clone, Debug)]
pub struct TurnPrompt<'a> {
    pub speaker: Party,
    pub round: u32,
    /// Role and scenario instructions.
    pub system: String,
    /// Prior turns, oldest first, starting with the opponent.
    pub history: &'a [(Party, String)],
    pub target_emotion: Option<Emotion>,
    /// Extra guidance appended to the instruction block.
    pub guidance: Option<String>,
    /// Upper bound on characters of history sent.
    pub history_budget: usize,
}

/// Drops the oldest opponent/negotiator pairs until the history fits `budget`.
/// The most recent pair (or lone trailing turn) is always kept.
pub fn truncate_history(history: &[(Party, String)], budget: usize) -> &[(Party, String)] {
    let mut start = 0;
    let chars = |h: &[(Party, String)]| h.iter().map(|(_, t)| t.len()).sum::<usize>();
    while chars(&history[start..]) > budget && history.len() - start > 2 {
        start += 2;
    }
    &history[start..]
}

/// The instruction block closing a generation prompt.
pub fn instruction_block(speaker: Party, target: Option<Emotion>, guidance: Option<&str>) -> String {
    let mut s = format!("Write the next message as the {speaker}.");
    if let Some(e) = target {
        s.push_str(&format!(" The emotional tone of this message must be: {}.", e.label()));
    }
    s.push_str(" Keep it under four sentences and state your current position as a number.");
    if let Some(g) = guidance {
        s.push(' ');
        s.push_str(g);
    }
    s
}

pub fn assemble_messages(prompt: &TurnPrompt<'_>) -> Vec<ChatMessage> {
    let mut messages = vec![ChatMessage::system(prompt.system.clone())];
    for (party, text) in truncate_history(prompt.history, prompt.history_budget) {
        if *party == prompt.speaker {
            messages.push(ChatMessage::assistant(text.clone()));
        } else {
            messages.push(ChatMessage::user(text.clone()));
        }
    }
    messages.push(ChatMessage::user(instruction_block(
        prompt.speaker,
        prompt.target_emotion,
        prompt.guidance.as_deref(),
    )));
    messages
}

/// Generates one turn, sampling at the schedule's temperature for the
/// selected emotion's confidence and the current phase.
pub fn generate_turn(
    prompt: &TurnPrompt<'_>,
    confidence: f64,
    phase: Phase,
    temperatures: &TemperatureConfig,
    backend: &dyn ChatBackend,
) -> Result<String> {
    let messages = assemble_messages(prompt);
    let caller = match prompt.speaker {
        Party::Opponent => Caller::Opponent,
        Party::Negotiator => Caller::Negotiator,
    };
    let temperature = temperatures.response_temperature(confidence, phase);
    backend.chat(&ChatRequest::new(caller, prompt.round, &messages, temperature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    fn req(messages: &[ChatMessage]) -> ChatRequest<'_> {
        ChatRequest::new(Caller::Opponent, 1, messages, 0.7)
    }

    #[test]
    fn scripted_queue_then_default() {
        let b = ScriptedBackend::from_replies(["hello"]);
        let m = [ChatMessage::user("hi")];
        assert_eq!(b.chat(&req(&m)).unwrap(), "hello");
        assert_eq!(b.chat(&req(&m)).unwrap(), ScriptedBackend::DEFAULT_REPLY);
        assert_eq!(b.chat(&req(&m)).unwrap(), "[EMO:neutral] I have nothing to add.");
        assert_eq!(b.calls(), 3);
    }

    #[test]
    fn scripted_rules_take_precedence() {
        let b = ScriptedBackend::from_replies(["queued"]).with_rule(Caller::Judge, 2, "CONTINUE");
        let m = [ChatMessage::user("x")];
        assert_eq!(b.chat(&ChatRequest::new(Caller::Judge, 2, &m, 0.0)).unwrap(), "CONTINUE");
        assert_eq!(b.chat(&ChatRequest::new(Caller::Judge, 3, &m, 0.0)).unwrap(), "queued");
    }

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        reply: HttpResponse,
    }

    impl Transport for Flaky {
        fn post_json(&self, _: &str, _: Option<&str>, _: &Value, _: Duration) -> std::result::Result<HttpResponse, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(TransportError::Timeout)
            } else {
                Ok(self.reply.clone())
            }
        }
    }

    fn ok_body(text: &str) -> HttpResponse {
        HttpResponse {
            status: 200,
            body: json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}).to_string(),
        }
    }

    fn remote_with(transport: Flaky, retries: u32) -> (RemoteBackend, *const Flaky) {
        let boxed = Box::new(transport);
        let ptr: *const Flaky = &*boxed;
        let cfg = BackendConfig {
            retries,
            backoff_ms: 0,
            ..BackendConfig::remote("http://localhost:1/v1/chat/completions", "test-model")
        };
        (RemoteBackend::with_transport(cfg, Some("sk-secret".into()), boxed).unwrap(), ptr)
    }

    #[test]
    fn retries_after_timeouts() {
        let (b, t) = remote_with(
            Flaky {
                failures: 2,
                calls: AtomicU32::new(0),
                reply: ok_body("recovered"),
            },
            3,
        );
        let m = [ChatMessage::user("hi")];
        assert_eq!(b.chat(&req(&m)).unwrap(), "recovered");
        // SAFETY: the transport lives inside `b`, which is still alive.
        assert_eq!(unsafe { &*t }.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn exhausted_retries_are_unavailable() {
        let (b, _) = remote_with(
            Flaky {
                failures: 10,
                calls: AtomicU32::new(0),
                reply: ok_body("never"),
            },
            2,
        );
        let m = [ChatMessage::user("hi")];
        match b.chat(&req(&m)) {
            Err(Error::BackendUnavailable { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (b, t) = remote_with(
            Flaky {
                failures: 0,
                calls: AtomicU32::new(0),
                reply: HttpResponse {
                    status: 401,
                    body: "bad key".into(),
                },
            },
            3,
        );
        let m = [ChatMessage::user("hi")];
        match b.chat(&req(&m)) {
            Err(Error::BackendRejected { status, .. }) => assert_eq!(status, 401),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(unsafe { &*t }.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn api_key_never_in_debug_output() {
        let (b, _) = remote_with(
            Flaky {
                failures: 0,
                calls: AtomicU32::new(0),
                reply: ok_body(""),
            },
            0,
        );
        let dbg = format!("{b:?}");
        assert!(!dbg.contains("sk-secret"));
        assert!(dbg.contains("<redacted>"));
        let body = b.request_body(&req(&[ChatMessage::user("hi")])).to_string();
        assert!(!body.contains("sk-secret"));
    }

    #[test]
    fn remote_config_validation() {
        assert!(BackendConfig::remote("", "m").validate().is_err());
        assert!(BackendConfig::remote("http://x", "").validate().is_err());
        let mut c = BackendConfig::remote("http://x", "m");
        c.timeout_secs = 0.0;
        assert!(c.validate().is_err());
        assert!(BackendConfig::scripted().validate().is_ok());
    }

    #[test]
    fn temperature_schedule() {
        assert!((response_temperature(0.9, Phase::Closing) - 0.245).abs() < 1e-12);
        assert!((response_temperature(0.5, Phase::Development) - 0.7).abs() < 1e-12);
        assert!((response_temperature(0.2, Phase::Opening) - 1.26).abs() < 1e-12);
    }

    #[test]
    fn temperature_monotone_in_confidence() {
        for phase in Phase::ALL {
            let mut prev = f64::INFINITY;
            for i in 0..=100 {
                let t = response_temperature(i as f64 / 100.0, phase);
                assert!(t <= prev + 1e-15);
                assert!((TemperatureConfig::MIN..=TemperatureConfig::MAX).contains(&t));
                prev = t;
            }
        }
    }

    #[test]
    fn instruction_names_target_once() {
        for e in Emotion::ALL {
            let block = instruction_block(Party::Negotiator, Some(e), None);
            let hits = block
                .split(|c: char| !c.is_ascii_alphabetic())
                .filter(|w| w.eq_ignore_ascii_case(e.label()))
                .count();
            assert_eq!(hits, 1, "{block}");
            for other in Emotion::ALL.into_iter().filter(|o| *o != e) {
                assert!(!block.split(|c: char| !c.is_ascii_alphabetic()).any(|w| w == other.label()));
            }
        }
    }

    #[test]
    fn truncation_drops_whole_pairs() {
        let history: Vec<(Party, String)> = (0..9)
            .map(|i| {
                let p = if i % 2 == 0 { Party::Opponent } else { Party::Negotiator };
                (p, "x".repeat(10))
            })
            .collect();
        let kept = truncate_history(&history, 35);
        assert_eq!(kept.len(), 3);
        assert_eq!(kept[0].0, Party::Opponent);
        assert_eq!(truncate_history(&history, 10_000).len(), 9);
        // budget too small: still keeps the last pair plus trailing turn boundary
        let kept = truncate_history(&history, 0);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].0, Party::Opponent);
    }

    #[test]
    fn generate_turn_passes_scripted_reply_through() {
        let b = ScriptedBackend::from_replies(["[EMO:joy] [OFFER:40] Deal soon?"]);
        let history = vec![(Party::Opponent, "[EMO:anger] [OFFER:90] No.".to_string())];
        let prompt = TurnPrompt {
            speaker: Party::Negotiator,
            round: 1,
            system: "You are a creditor.".into(),
            history: &history,
            target_emotion: Some(Emotion::Joy),
            guidance: None,
            history_budget: 4000,
        };
        let out = generate_turn(&prompt, 0.9, Phase::Opening, &TemperatureConfig::default(), &b).unwrap();
        assert_eq!(out, "[EMO:joy] [OFFER:40] Deal soon?");
        let msgs = assemble_messages(&prompt);
        assert_eq!(msgs.len(), 3);
        assert_eq!(msgs[1].role, ChatRole::User);
        assert!(msgs[2].content.contains("joy"));
    }
}
