//! Chat requests, the provider abstraction and the HTTP client.

use std::env;
use std::fs;
use std::path::Path;
use std::thread;
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::prompts::TemplateId;
use super::LlmError;

/// Upper bound on uploaded inspiration images.
pub const MAX_IMAGE_BYTES: usize = 8 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageInput {
    pub mime: &'static str,
    pub bytes: Vec<u8>,
}

impl ImageInput {
    /// Sniffs the format from magic bytes and enforces the size cap.
    pub fn new(bytes: Vec<u8>) -> Result<ImageInput, LlmError> {
        if bytes.len() > MAX_IMAGE_BYTES {
            return Err(LlmError::ImageTooLarge { size: bytes.len(), limit: MAX_IMAGE_BYTES });
        }
        let mime = sniff_mime(&bytes).ok_or(LlmError::UnsupportedImage)?;
        Ok(ImageInput { mime, bytes })
    }

    pub fn data_url(&self) -> String {
        let encoded = base64::engine::general_purpose::STANDARD.encode(&self.bytes);
        format!("data:{};base64,{encoded}", self.mime)
    }
}

fn sniff_mime(bytes: &[u8]) -> Option<&'static str> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Some("image/png")
    } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
        Some("image/jpeg")
    } else if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        Some("image/gif")
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        Some("image/webp")
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub template: TemplateId,
    pub system: String,
    pub user: String,
    pub image: Option<ImageInput>,
    pub temperature: f64,
}

impl ChatRequest {
    /// Stable content hash used to key mock fixtures and transcripts.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.template.as_str().as_bytes());
        h.update([0]);
        h.update(self.system.as_bytes());
        h.update([0]);
        h.update(self.user.as_bytes());
        h.update([0]);
        if let Some(image) = &self.image {
            h.update(Sha256::digest(&image.bytes));
        }
        hex::encode(h.finalize())
    }
}

/// Anything that turns a chat request into response text.
///
/// Implementations must be callable from several threads at once.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;

    /// Sampling temperature callers should put on requests.
    fn temperature(&self) -> f64 {
        DEFAULT_TEMPERATURE
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }

    fn temperature(&self) -> f64 {
        (**self).temperature()
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmProviderConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for LlmProviderConfig {
    fn default() -> Self {
        LlmProviderConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            temperature: DEFAULT_TEMPERATURE,
            timeout_s: 60.0,
            max_retries: 3,
            backoff_ms: 500,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

impl LlmProviderConfig {
    pub fn load(path: &Path) -> Result<LlmProviderConfig, LlmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay: Duration::from_millis(self.backoff_ms),
        }
    }
}

/// Exponential backoff for transient upstream failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1 << retry.min(16))
    }

    /// Runs `op` until it succeeds, fails permanently, or retries run out.
    /// Exhausted transient failures become [`LlmError::Upstream`].
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T, LlmError>) -> Result<T, LlmError> {
        let mut retry = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() => {
                    if retry >= self.max_retries {
                        return Err(LlmError::Upstream { attempts: retry + 1, message: e.to_string() });
                    }
                    log::warn!("llm call failed ({e}), retrying");
                    thread::sleep(self.delay(retry));
                    retry += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpProvider {
    config: LlmProviderConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(config: LlmProviderConfig) -> Result<HttpProvider, LlmError> {
        let api_key = env::var(&config.api_key_env)
            .map_err(|_| LlmError::MissingApiKey(config.api_key_env.clone()))?;
        Ok(HttpProvider::with_key(config, api_key))
    }

    pub fn with_key(config: LlmProviderConfig, api_key: String) -> HttpProvider {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        HttpProvider { config, api_key, agent }
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let user = match &request.image {
            None => json!(request.user),
            Some(image) => json!([
                {"type": "text", "text": request.user},
                {"type": "image_url", "image_url": {"url": image.data_url()}},
            ]),
        };
        json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": user},
            ],
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, LlmError> {
        let mut response = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { code: status, body: truncate(&text, 300) });
        }
        extract_content(&text)
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let body = self.body(request);
        self.config.retry_policy().run(|| self.attempt(&body))
    }

    fn temperature(&self) -> f64 {
        self.config.temperature
    }
}

fn extract_content(text: &str) -> Result<String, LlmError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| LlmError::Malformed(format!("response body: {e}")))?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| LlmError::Malformed("no choices[0].message.content".into()))
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}…", &s[..i]),
        None => s.to_string(),
    }
}
