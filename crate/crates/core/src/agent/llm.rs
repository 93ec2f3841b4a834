use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeSettings {
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl Default for DecodeSettings {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub agent_name: String,
    pub prompt: String,
    pub decode: DecodeSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub text: String,
    pub backend: BackendKind,
    pub latency: Duration,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request for {agent} has an empty prompt")]
    EmptyPrompt { agent: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("transcript exhausted: call {position} ({agent}) has no recorded response")]
    ReplayExhausted { agent: String, position: usize },
    #[error("transcript entry {position} was recorded for {expected}, but {actual} is calling")]
    AgentMismatch {
        position: usize,
        expected: String,
        actual: String,
    },
    #[error("prompt fingerprint mismatch at transcript entry {position} ({agent}): recorded {recorded}, rendered {rendered}")]
    FingerprintMismatch {
        agent: String,
        position: usize,
        recorded: String,
        rendered: String,
    },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("transcript {path}: {message}")]
    Transcript { path: PathBuf, message: String },
}

/// A completion provider. Implementations must tolerate concurrent calls.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for Box<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<T: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

/// Hex sha256 of the prompt text.
pub fn fingerprint(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub agent_name: String,
    pub prompt_fingerprint: String,
    pub response_text: String,
}

/// Reads a newline-delimited transcript; blank lines are ignored.
pub fn load_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, LlmError> {
    let err = |message: String| LlmError::Transcript {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    let mut entries = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", n + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Agent name and prompt fingerprint must both match.
    #[default]
    Strict,
    /// Only the agent name must match.
    Lenient,
}

/// Serves recorded responses in order.
pub struct ReplayBackend {
    entries: Vec<TranscriptEntry>,
    cursor: Mutex<usize>,
    mode: MatchMode,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>, mode: MatchMode) -> Self {
        Self {
            entries,
            cursor: Mutex::new(0),
            mode,
        }
    }

    pub fn from_file(path: &Path, mode: MatchMode) -> Result<Self, LlmError> {
        Ok(Self::new(load_transcript(path)?, mode))
    }

    /// Skips entries already consumed by an earlier, interrupted run.
    pub fn starting_at(self, position: usize) -> Self {
        *self.cursor.lock().expect("cursor lock") = position;
        self
    }

    pub fn position(&self) -> usize {
        *self.cursor.lock().expect("cursor lock")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let started = Instant::now();
        let mut cursor = self.cursor.lock().expect("cursor lock");
        let position = *cursor;
        let entry = self.entries.get(position).ok_or_else(|| LlmError::ReplayExhausted {
            agent: request.agent_name.clone(),
            position,
        })?;
        if entry.agent_name != request.agent_name {
            return Err(LlmError::AgentMismatch {
                position,
                expected: entry.agent_name.clone(),
                actual: request.agent_name.clone(),
            });
        }
        if self.mode == MatchMode::Strict {
            let rendered = fingerprint(&request.prompt);
            if rendered != entry.prompt_fingerprint {
                return Err(LlmError::FingerprintMismatch {
                    agent: request.agent_name.clone(),
                    position,
                    recorded: entry.prompt_fingerprint.clone(),
                    rendered,
                });
            }
        }
        *cursor += 1;
        Ok(LlmResponse {
            text: entry.response_text.clone(),
            backend: BackendKind::Replay,
            latency: started.elapsed(),
        })
    }
}

/// Forwards to an inner backend and appends each exchange to a transcript file.
pub struct RecordingBackend<B> {
    inner: B,
    sink: Mutex<BufWriter<File>>,
}

impl<B: LlmBackend> RecordingBackend<B> {
    /// Appends to `path`, creating it if needed.
    pub fn new(inner: B, path: &Path) -> Result<Self, LlmError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::Transcript {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        Ok(Self {
            inner,
            sink: Mutex::new(BufWriter::new(file)),
        })
    }
}

impl<B: LlmBackend> LlmBackend for RecordingBackend<B> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        // Hold the sink for the whole exchange so entries stay in call order.
        let mut sink = self.sink.lock().expect("sink lock");
        let response = self.inner.complete(request)?;
        let entry = TranscriptEntry {
            agent_name: request.agent_name.clone(),
            prompt_fingerprint: fingerprint(&request.prompt),
            response_text: response.text.clone(),
        };
        let write = serde_json::to_writer(&mut *sink, &entry)
            .map_err(std::io::Error::from)
            .and_then(|_| sink.write_all(b"\n"))
            .and_then(|_| sink.flush());
        write.map_err(|e| LlmError::Transcript {
            path: PathBuf::from("<recording>"),
            message: e.to_string(),
        })?;
        Ok(response)
    }
}

type Responder = dyn Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync;

/// Answers from a closure; reported as a live backend.
pub struct ScriptedBackend {
    respond: Box<Responder>,
}

impl ScriptedBackend {
    pub fn new(respond: impl Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync + 'static) -> Self {
        Self {
            respond: Box::new(respond),
        }
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let started = Instant::now();
        let text = (self.respond)(request)?;
        Ok(LlmResponse {
            text,
            backend: BackendKind::Live,
            latency: started.elapsed(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    /// Chat-completions URL.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer credential.
    pub api_key_env: String,
    pub request_timeout_secs: u64,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: String::new(),
            request_timeout_secs: 300,
            max_attempts: 3,
            initial_backoff_ms: 1000,
        }
    }
}

/// HTTP chat-completion client with bounded retries.
pub struct HttpBackend {
    config: LiveConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: LiveConfig) -> Result<Self, LlmError> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(LlmError::Config("live backend needs an endpoint and a model".into()));
        }
        if config.max_attempts == 0 {
            return Err(LlmError::Config("max_attempts must be at least 1".into()));
        }
        let api_key = if config.api_key_env.is_empty() {
            String::new()
        } else {
            std::env::var(&config.api_key_env)
                .map_err(|_| LlmError::Config(format!("environment variable {} is not set", config.api_key_env)))?
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }

    fn attempt(&self, request: &LlmRequest) -> Result<String, String> {
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.decode.temperature,
        });
        if let Some(max) = request.decode.max_tokens {
            body["max_tokens"] = json!(max);
        }
        let mut req = self.client.post(&self.config.endpoint).json(&body);
        if !self.api_key.is_empty() {
            req = req.bearer_auth(&self.api_key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        let payload: Value = resp.json().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("HTTP {status}: {payload}"));
        }
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let started = Instant::now();
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts {
            match self.attempt(request) {
                Ok(text) => {
                    return Ok(LlmResponse {
                        text,
                        backend: BackendKind::Live,
                        latency: started.elapsed(),
                    })
                }
                Err(e) => {
                    tracing::warn!(agent = %request.agent_name, attempt, error = %e, "live call failed");
                    last = e;
                }
            }
            if attempt < self.config.max_attempts {
                std::thread::sleep(backoff);
                backoff *= 2;
            }
        }
        Err(LlmError::Transport {
            attempts: self.config.max_attempts,
            message: last,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(agent: &str, prompt: &str) -> LlmRequest {
        LlmRequest {
            agent_name: agent.into(),
            prompt: prompt.into(),
            decode: DecodeSettings::default(),
        }
    }

    fn entry(agent: &str, prompt: &str, response: &str) -> TranscriptEntry {
        TranscriptEntry {
            agent_name: agent.into(),
            prompt_fingerprint: fingerprint(prompt),
            response_text: response.into(),
        }
    }

    #[test]
    fn fingerprint_is_sha256_hex() {
        assert_eq!(
            fingerprint("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn replay_pops_in_order() {
        let r = ReplayBackend::new(
            vec![entry("a", "p1", "R1"), entry("feedback_generation", "p2", "R")],
            MatchMode::Strict,
        );
        assert_eq!(r.complete(&req("a", "p1")).unwrap().text, "R1");
        let resp = r.complete(&req("feedback_generation", "p2")).unwrap();
        assert_eq!(resp.text, "R");
        assert_eq!(resp.backend, BackendKind::Replay);
        let err = r.complete(&req("x", "p3")).unwrap_err();
        assert!(matches!(err, LlmError::ReplayExhausted { position: 2, ref agent } if agent == "x"));
    }

    #[test]
    fn strict_mismatch_reports_both_fingerprints() {
        let r = ReplayBackend::new(vec![entry("a", "p1", "R1")], MatchMode::Strict);
        match r.complete(&req("a", "other")).unwrap_err() {
            LlmError::FingerprintMismatch {
                recorded, rendered, position, ..
            } => {
                assert_eq!(recorded, fingerprint("p1"));
                assert_eq!(rendered, fingerprint("other"));
                assert_eq!(position, 0);
            }
            e => panic!("unexpected {e}"),
        }
        // a failed call does not advance the cursor
        assert_eq!(r.position(), 0);
    }

    #[test]
    fn lenient_ignores_prompt_but_not_agent() {
        let r = ReplayBackend::new(vec![entry("a", "p1", "R1"), entry("b", "p2", "R2")], MatchMode::Lenient);
        assert_eq!(r.complete(&req("a", "edited")).unwrap().text, "R1");
        assert!(matches!(r.complete(&req("c", "p2")).unwrap_err(), LlmError::AgentMismatch { .. }));
    }

    #[test]
    fn offset_skips_consumed_entries() {
        let r = ReplayBackend::new(vec![entry("a", "p1", "R1"), entry("b", "p2", "R2")], MatchMode::Strict).starting_at(1);
        assert_eq!(r.complete(&req("b", "p2")).unwrap().text, "R2");
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let rec = RecordingBackend::new(
            ScriptedBackend::new(|r: &LlmRequest| Ok(format!("echo:{}", r.prompt))),
            &path,
        )
        .unwrap();
        let out = rec.complete(&req("a", "hello")).unwrap();
        let entries = load_transcript(&path).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].response_text, out.text);
        let replay = ReplayBackend::new(entries, MatchMode::Strict);
        assert_eq!(replay.complete(&req("a", "hello")).unwrap().text, "echo:hello");
    }

    #[test]
    fn transcript_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let entries = vec![entry("a", "p", "line1\nline2 {\"x\": 1}")];
        write_transcript(&path, &entries).unwrap();
        assert_eq!(load_transcript(&path).unwrap(), entries);
        std::fs::write(&path, "{bad\n").unwrap();
        assert!(load_transcript(&path).unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn live_transport_failure_counts_attempts() {
        // Bind then drop a listener to get a port with nothing behind it.
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let backend = HttpBackend::new(LiveConfig {
            endpoint: format!("http://127.0.0.1:{port}/v1/chat/completions"),
            model: "m".into(),
            initial_backoff_ms: 1,
            request_timeout_secs: 2,
            ..LiveConfig::default()
        })
        .unwrap();
        match backend.complete(&req("a", "p")).unwrap_err() {
            LlmError::Transport { attempts, .. } => assert_eq!(attempts, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn live_backend_parses_chat_completion() {
        use std::io::{Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 65536];
            let mut got = Vec::new();
            // read until the JSON body has arrived
            loop {
                let n = s.read(&mut buf).unwrap();
                got.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&got);
                if let Some(idx) = text.find("\r\n\r\n") {
                    let len: usize = text
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                        .unwrap_or(0);
                    if got.len() >= idx + 4 + len {
                        break;
                    }
                }
            }
            let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi there"}}]}"#;
            write!(
                s,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            String::from_utf8_lossy(&got).to_string()
        });
        std::env::set_var("SIMFORGE_TEST_KEY", "secret");
        let backend = HttpBackend::new(LiveConfig {
            endpoint: format!("http://{addr}/v1/chat/completions"),
            model: "test-model".into(),
            api_key_env: "SIMFORGE_TEST_KEY".into(),
            ..LiveConfig::default()
        })
        .unwrap();
        let out = backend.complete(&req("a", "prompt text")).unwrap();
        assert_eq!(out.text, "hi there");
        let seen = server.join().unwrap();
        assert!(seen.contains("Bearer secret"));
        assert!(seen.contains("\"temperature\":0.0"));
        assert!(seen.contains("prompt text"));
    }

    #[test]
    fn live_backend_requires_credential_variable() {
        let err = HttpBackend::new(LiveConfig {
            endpoint: "http://localhost/".into(),
            model: "m".into(),
            api_key_env: "SIMFORGE_SURELY_UNSET_VARIABLE".into(),
            ..LiveConfig::default()
        });
        assert!(matches!(err, Err(LlmError::Config(_))));
    }
}
