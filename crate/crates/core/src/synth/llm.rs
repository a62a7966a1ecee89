//! HTTP synthesizer speaking the common chat-completions wire format. One
//! request carries the rendered prompt; the reply's first fenced code block
//! is the program. Transport faults retry with backoff (separately from any
//! program-level retries the caller runs); a concurrency gate and a token
//! bucket keep request pressure bounded.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{render_prompt, SynthError, SynthesisRequest, SynthesisResult, Synthesizer};

/// Connection settings for the HTTP backend.
#[derive(Debug, Clone)]
pub struct HttpSynthesizerConfig {
    /// full URL of a chat-completions endpoint
    pub endpoint: String,
    pub model: String,
    /// bearer token; omitted entirely when `None` (local servers)
    pub api_key: Option<String>,
    /// per-request timeout
    pub timeout: Duration,
    /// total send attempts per synthesis on retryable transport faults
    pub attempts: usize,
    /// in-flight request ceiling
    pub max_concurrent: usize,
    /// sustained request rate
    pub requests_per_second: f64,
}

impl Default for HttpSynthesizerConfig {
    fn default() -> HttpSynthesizerConfig {
        HttpSynthesizerConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            timeout: Duration::from_secs(120),
            attempts: 3,
            max_concurrent: 4,
            requests_per_second: 2.0,
        }
    }
}

/// Counting semaphore: at most `width` holders at once.
pub(crate) struct Gate {
    width: usize,
    holders: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    pub(crate) fn new(width: usize) -> Gate {
        Gate { width: width.max(1), holders: Mutex::new(0), freed: Condvar::new() }
    }

    pub(crate) fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.holders.lock().expect("gate lock");
        while *n >= self.width {
            n = self.freed.wait(n).expect("gate wait");
        }
        *n += 1;
        GateGuard { gate: self }
    }
}

pub(crate) struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.gate.holders.lock().expect("gate lock");
        *n -= 1;
        self.gate.freed.notify_one();
    }
}

/// Token bucket over injected time: callers feed elapsed durations in, so
/// tests can drive it without sleeping.
pub(crate) struct TokenBucket {
    capacity: f64,
    tokens: f64,
    rate: f64,
}

impl TokenBucket {
    pub(crate) fn new(rate: f64, capacity: f64) -> TokenBucket {
        let rate = if rate > 0.0 { rate } else { f64::INFINITY };
        TokenBucket { capacity: capacity.max(1.0), tokens: capacity.max(1.0), rate }
    }

    /// Refill for `elapsed` of wall time.
    pub(crate) fn advance(&mut self, elapsed: Duration) {
        self.tokens = (self.tokens + elapsed.as_secs_f64() * self.rate).min(self.capacity);
    }

    /// Take one token, or say how long until one is available.
    pub(crate) fn try_take(&mut self) -> Result<(), Duration> {
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Ok(())
        } else {
            let deficit = 1.0 - self.tokens;
            Err(Duration::from_secs_f64(deficit / self.rate))
        }
    }
}

pub struct HttpSynthesizer {
    config: HttpSynthesizerConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
    bucket: Mutex<(TokenBucket, Instant)>,
}

impl HttpSynthesizer {
    pub fn new(config: HttpSynthesizerConfig) -> Result<HttpSynthesizer, SynthError> {
        if config.endpoint.is_empty() {
            return Err(SynthError::Config("endpoint URL is empty".to_string()));
        }
        if config.model.is_empty() {
            return Err(SynthError::Config("model name is empty".to_string()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| SynthError::Config(format!("http client: {e}")))?;
        let gate = Gate::new(config.max_concurrent);
        let bucket = Mutex::new((
            TokenBucket::new(config.requests_per_second, config.requests_per_second.max(1.0)),
            Instant::now(),
        ));
        Ok(HttpSynthesizer { config, client, gate, bucket })
    }

    fn take_token(&self) {
        loop {
            let wait = {
                let mut g = self.bucket.lock().expect("bucket lock");
                let now = Instant::now();
                let dt = now.duration_since(g.1);
                g.1 = now;
                g.0.advance(dt);
                g.0.try_take().err()
            };
            match wait {
                None => return,
                Some(w) => std::thread::sleep(w),
            }
        }
    }

    fn send_once(&self, body: &serde_json::Value) -> Result<String, Retry> {
        let mut req = self
            .client
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .json(body);
        if let Some(key) = &self.config.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let resp = req.send().map_err(|e| Retry::Yes(format!("request failed: {e}")))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| Retry::Yes(format!("reading response body: {e}")))?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(Retry::No(SynthError::Auth(format!(
                "endpoint returned {status}: {}",
                snippet(&text)
            ))));
        }
        if status.as_u16() == 408 || status.as_u16() == 429 || status.is_server_error() {
            return Err(Retry::Yes(format!("endpoint returned {status}")));
        }
        if !status.is_success() {
            return Err(Retry::No(SynthError::Protocol(format!(
                "endpoint returned {status}: {}",
                snippet(&text)
            ))));
        }
        Ok(text)
    }
}

enum Retry {
    /// transient: retry with backoff
    Yes(String),
    /// permanent: surface immediately
    No(SynthError),
}

fn snippet(text: &str) -> String {
    let t = text.trim();
    if t.len() <= 200 {
        t.to_string()
    } else {
        let mut end = 200;
        while !t.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &t[..end])
    }
}

/// First fenced code block of `content`, with any language tag dropped; the
/// text outside the block becomes commentary. `None` when no fence opens:
/// a fenceless reply is not a program.
pub fn extract_program(content: &str) -> Option<(String, String)> {
    let lines: Vec<&str> = content.lines().collect();
    let start = lines
        .iter()
        .position(|line| line.trim_start().starts_with("```"))?;
    let close = lines
        .iter()
        .enumerate()
        .skip(start + 1)
        .find(|(_, line)| line.trim() == "```")
        .map(|(i, _)| i);
    let Some(end) = close else {
        // unterminated fence: take everything after the opener
        let program = lines[start + 1..].join("\n");
        return Some((
            program.trim().to_string(),
            lines[..start].join("\n").trim().to_string(),
        ));
    };
    let program = lines[start + 1..end].join("\n");
    let commentary = lines[..start]
        .iter()
        .chain(lines[end + 1..].iter())
        .copied()
        .collect::<Vec<_>>()
        .join("\n");
    Some((program.trim().to_string(), commentary.trim().to_string()))
}

impl Synthesizer for HttpSynthesizer {
    fn synthesize(&self, request: &SynthesisRequest) -> Result<SynthesisResult, SynthError> {
        let system = format!(
            "You write programs in a small line-oriented table-transformation \
             language. Reply with exactly one fenced code block (```) holding a \
             complete `dslv1 {}` program; anything outside the block is read as \
             commentary.\n\n{}",
            request.kind.token(),
            crate::dsl::grammar_help(request.kind),
        );
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "seed": request.seed,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": render_prompt(request)},
            ],
        });
        let _slot = self.gate.acquire();
        let mut last_fault = String::new();
        for attempt in 1..=self.config.attempts.max(1) {
            if attempt > 1 {
                std::thread::sleep(Duration::from_millis(100 << (attempt - 2).min(4)));
            }
            self.take_token();
            match self.send_once(&body) {
                Ok(text) => {
                    let json: serde_json::Value = serde_json::from_str(&text)
                        .map_err(|e| SynthError::Protocol(format!("response not JSON: {e}")))?;
                    let content = json["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| {
                            SynthError::Protocol(
                                "response has no choices[0].message.content".to_string(),
                            )
                        })?;
                    let (program_text, commentary) =
                        extract_program(content).ok_or_else(|| {
                            SynthError::Extraction(
                                "no fenced code block in the reply".to_string(),
                            )
                        })?;
                    return Ok(SynthesisResult { program_text, commentary });
                }
                Err(Retry::No(e)) => return Err(e),
                Err(Retry::Yes(fault)) => last_fault = fault,
            }
        }
        Err(SynthError::Transport {
            attempts: self.config.attempts.max(1),
            message: last_fault,
        })
    }

    fn name(&self) -> &'static str {
        "llm"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn token_bucket_refills_with_injected_time() {
        let mut b = TokenBucket::new(2.0, 2.0);
        assert!(b.try_take().is_ok());
        assert!(b.try_take().is_ok());
        let wait = b.try_take().unwrap_err();
        assert!((wait.as_secs_f64() - 0.5).abs() < 1e-9, "{wait:?}");
        b.advance(Duration::from_millis(500));
        assert!(b.try_take().is_ok());
    }

    #[test]
    fn gate_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        use std::sync::Arc;
        let gate = Arc::new(Gate::new(2));
        let inside = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let gate = Arc::clone(&gate);
            let inside = Arc::clone(&inside);
            let peak = Arc::clone(&peak);
            handles.push(std::thread::spawn(move || {
                let _slot = gate.acquire();
                let now = inside.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(10));
                inside.fetch_sub(1, Ordering::SeqCst);
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn fence_extraction() {
        let (p, c) = extract_program("Here:\n```\ndslv1 select\nkeep a\n```\nDone.").unwrap();
        assert_eq!(p, "dslv1 select\nkeep a");
        assert_eq!(c, "Here:\nDone.");
        let (p, c) = extract_program("```text\ndslv1 select\nkeep a\n```").unwrap();
        assert_eq!(p, "dslv1 select\nkeep a");
        assert_eq!(c, "");
        // a fenceless reply is not a program
        assert!(extract_program("dslv1 select\nkeep a\n").is_none());
    }

    #[test]
    fn fenceless_reply_is_an_extraction_error() {
        let endpoint = stub_server(vec![(200, chat_reply("keep a, I guess?"))]);
        let synth = HttpSynthesizer::new(config(endpoint, 1)).unwrap();
        match synth.synthesize(&test_request()) {
            Err(SynthError::Extraction(_)) => {}
            other => panic!("expected extraction error, got {other:?}"),
        }
    }

    /// One-shot HTTP/1.1 stub: accepts `n` connections, replies from the
    /// script, returns the listening address.
    fn stub_server(script: Vec<(u16, String)>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status, body) in script {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = Vec::new();
                let mut tmp = [0u8; 4096];
                // read until the full body arrived per content-length
                let (mut header_end, mut content_length) = (None, 0usize);
                loop {
                    let n = stream.read(&mut tmp).unwrap();
                    if n == 0 {
                        break;
                    }
                    buf.extend_from_slice(&tmp[..n]);
                    if header_end.is_none() {
                        if let Some(pos) =
                            buf.windows(4).position(|w| w == b"\r\n\r\n")
                        {
                            header_end = Some(pos + 4);
                            let head = String::from_utf8_lossy(&buf[..pos]);
                            for line in head.lines() {
                                if let Some(v) =
                                    line.to_ascii_lowercase().strip_prefix("content-length:")
                                {
                                    content_length = v.trim().parse().unwrap();
                                }
                            }
                        }
                    }
                    if let Some(he) = header_end {
                        if buf.len() >= he + content_length {
                            break;
                        }
                    }
                }
                let reason = match status {
                    200 => "OK",
                    401 => "Unauthorized",
                    _ => "Error",
                };
                let resp = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}")
    }

    fn test_request() -> SynthesisRequest {
        use super::super::{ColumnInfo, RequestExtras};
        use crate::dsl::ProgramKind;
        use crate::table::Kind;
        SynthesisRequest {
            kind: ProgramKind::Select,
            node: "s1".into(),
            context: "test".into(),
            instruction: String::new(),
            main_schema: vec![ColumnInfo {
                name: "a".into(),
                kind: Kind::Numeric,
                missing_fraction: 0.0,
            }],
            main_profile: String::new(),
            aux_schema: None,
            aux_profile: None,
            join_keys: None,
            target_column: None,
            outputs: vec![],
            output_budget: 1,
            protected: vec![],
            parameters: vec![],
            feedback: vec![],
            extras: RequestExtras::default(),
            temperature: 1.0,
            seed: 1,
        }
    }

    fn config(endpoint: String, attempts: usize) -> HttpSynthesizerConfig {
        HttpSynthesizerConfig {
            endpoint,
            model: "test-model".into(),
            api_key: Some("test-key".into()),
            timeout: Duration::from_secs(5),
            attempts,
            max_concurrent: 2,
            requests_per_second: 1000.0,
            ..HttpSynthesizerConfig::default()
        }
    }

    fn chat_reply(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    #[test]
    fn synthesize_extracts_the_fenced_program() {
        let endpoint = stub_server(vec![(
            200,
            chat_reply("Sure.\n```\ndslv1 select\nkeep a\n```\nThat keeps everything."),
        )]);
        let synth = HttpSynthesizer::new(config(endpoint, 1)).unwrap();
        let out = synth.synthesize(&test_request()).unwrap();
        assert_eq!(out.program_text, "dslv1 select\nkeep a");
        assert!(out.commentary.contains("keeps everything"));
    }

    #[test]
    fn auth_failures_do_not_retry() {
        let endpoint = stub_server(vec![(401, "{\"error\":\"bad key\"}".to_string())]);
        let synth = HttpSynthesizer::new(config(endpoint, 3)).unwrap();
        match synth.synthesize(&test_request()) {
            Err(SynthError::Auth(msg)) => assert!(msg.contains("401"), "{msg}"),
            other => panic!("expected auth error, got {other:?}"),
        }
    }

    #[test]
    fn server_errors_retry_then_succeed() {
        let endpoint = stub_server(vec![
            (500, "{\"error\":\"boom\"}".to_string()),
            (500, "{\"error\":\"boom\"}".to_string()),
            (200, chat_reply("```\ndslv1 select\nkeep a\n```")),
        ]);
        let synth = HttpSynthesizer::new(config(endpoint, 3)).unwrap();
        let out = synth.synthesize(&test_request()).unwrap();
        assert_eq!(out.program_text, "dslv1 select\nkeep a");
    }

    #[test]
    fn transport_exhaustion_reports_attempts() {
        let endpoint = stub_server(vec![
            (500, "{}".to_string()),
            (500, "{}".to_string()),
        ]);
        let synth = HttpSynthesizer::new(config(endpoint, 2)).unwrap();
        match synth.synthesize(&test_request()) {
            Err(SynthError::Transport { attempts, .. }) => assert_eq!(attempts, 2),
            other => panic!("expected transport error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_configuration() {
        assert!(HttpSynthesizer::new(HttpSynthesizerConfig::default()).is_err());
    }
}
