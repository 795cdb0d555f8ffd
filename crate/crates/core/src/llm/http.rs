use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{check_messages, ChatMessage, CompletionParams, LlmBackend, LlmError};

pub(crate) const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Root of a chat-completions compatible API, e.g. `https://host/v1`.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model_id: String,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model_id: DEFAULT_MODEL.into(),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            timeout: Duration::from_secs(120),
        }
    }

    /// `LLM_BASE_URL` (required), `LLM_API_KEY`, `LLM_MODEL_ID`.
    pub fn from_env() -> Result<Self, LlmError> {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        let base = var("LLM_BASE_URL")
            .ok_or_else(|| LlmError::Unavailable("LLM_BASE_URL is not set".into()))?;
        let mut cfg = Self::new(base);
        cfg.api_key = var("LLM_API_KEY");
        if let Some(m) = var("LLM_MODEL_ID") {
            cfg.model_id = m;
        }
        Ok(cfg)
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .expect("http client");
        Self { config, client }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        let mut req = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = resp.status();
        if status == 401 || status == 403 {
            return Attempt::Fatal(LlmError::Auth(format!("{} returned {status}", self.endpoint())));
        }
        if status == 429 || status.is_server_error() {
            return Attempt::Retry(format!("{} returned {status}", self.endpoint()));
        }
        if !status.is_success() {
            return Attempt::Fatal(LlmError::Unavailable(format!("{} returned {status}", self.endpoint())));
        }
        match resp.json::<ChatResponse>() {
            Ok(r) => match r.choices.into_iter().next().and_then(|c| c.message.content) {
                Some(text) => Attempt::Done(text),
                None => Attempt::Fatal(LlmError::Unavailable("response has no choices[0].message.content".into())),
            },
            Err(e) => Attempt::Fatal(LlmError::Unavailable(format!("malformed response: {e}"))),
        }
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage], params: &CompletionParams) -> Result<String, LlmError> {
        check_messages(messages)?;
        let model = if params.model_id.is_empty() {
            &self.config.model_id
        } else {
            &params.model_id
        };
        let body = json!({
            "model": model,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut last = String::new();
        for retry in 0..=self.config.max_retries {
            if retry > 0 {
                std::thread::sleep(self.config.backoff_base * 2u32.pow(retry - 1));
            }
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => {
                    tracing::warn!(retry, %why, "transient LLM failure");
                    last = why;
                }
            }
        }
        Err(LlmError::Unavailable(format!(
            "gave up after {} retries: {last}",
            self.config.max_retries
        )))
    }

    fn name(&self) -> &str {
        &self.config.model_id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backend(url: &str) -> HttpBackend {
        let mut cfg = HttpConfig::new(url);
        cfg.backoff_base = Duration::from_millis(1);
        cfg.api_key = Some("k".into());
        HttpBackend::new(cfg)
    }

    fn ask(b: &HttpBackend) -> Result<String, LlmError> {
        b.complete(&[ChatMessage::user("hello")], &CompletionParams::default())
    }

    #[test]
    fn fixed_body_is_returned_verbatim() {
        let mut server = mockito::Server::new();
        let m = server
            .mock("POST", "/chat/completions")
            .match_header("authorization", "Bearer k")
            .match_body(mockito::Matcher::PartialJson(json!({"temperature": 0.0, "model": "gpt-4o"})))
            .with_status(200)
            .with_header("content-type", "application/json")
            .with_body(r#"{"choices":[{"message":{"role":"assistant","content":"query { get_applications_names }"}}]}"#)
            .create();
        assert_eq!(ask(&backend(&server.url())).unwrap(), "query { get_applications_names }");
        m.assert();
    }

    #[test]
    fn auth_failures_are_not_retried() {
        let mut server = mockito::Server::new();
        let m = server.mock("POST", "/chat/completions").with_status(401).expect(1).create();
        assert!(matches!(ask(&backend(&server.url())), Err(LlmError::Auth(_))));
        m.assert();
    }

    #[test]
    fn transient_failures_retry_three_times() {
        let mut server = mockito::Server::new();
        let m = server.mock("POST", "/chat/completions").with_status(503).expect(4).create();
        assert!(matches!(ask(&backend(&server.url())), Err(LlmError::Unavailable(_))));
        m.assert();
    }

    #[test]
    fn recovers_after_rate_limit() {
        let mut server = mockito::Server::new();
        let limited = server.mock("POST", "/chat/completions").with_status(429).expect(1).create();
        let ok = server
            .mock("POST", "/chat/completions")
            .with_status(200)
            .with_body(r#"{"choices":[{"message":{"content":"fine"}}]}"#)
            .create();
        // mockito serves the first matching mock until its expectation is met
        assert_eq!(ask(&backend(&server.url())).unwrap(), "fine");
        limited.assert();
        ok.assert();
    }

    #[test]
    fn unreachable_host_is_unavailable() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        drop(listener);
        assert!(matches!(ask(&backend(&url)), Err(LlmError::Unavailable(_))));
    }
}
