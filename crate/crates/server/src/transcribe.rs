//! Chord transcription boundary: request validation, key conversion, and
//! the mock and HTTP providers.

use std::env;
use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use keychord::chordlang::{parse_chord, render_chord, transpose_chords, Key, Mode, PitchClass};
use keychord::llmgate::{LlmError, RetryPolicy};
use serde::{Deserialize, Serialize};

/// Longest segment a client may submit, in seconds.
pub const MAX_SEGMENT_S: f64 = 30.0;
/// Symbol transcribers use for "no chord".
pub const NO_CHORD: &str = "N";

#[derive(Debug, thiserror::Error)]
pub enum TranscribeError {
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("invalid target key: {0}")]
    InvalidKey(String),
    #[error("transcription provider failed: {0}")]
    Provider(String),
    #[error("transcription provider returned unusable data: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AudioRef {
    FileId(String),
    VideoUrl(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetKey {
    pub key: String,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscribeRequest {
    pub audio: AudioRef,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub convert_to_key: Option<TargetKey>,
}

impl TranscribeRequest {
    pub fn validate(&self) -> Result<Option<(Key, Mode)>, TranscribeError> {
        let (s, e) = (self.start_s, self.end_s);
        if !(s.is_finite() && e.is_finite() && s >= 0.0 && s < e) {
            return Err(TranscribeError::InvalidSegment(format!("need 0 <= start < end, got {s}..{e}")));
        }
        if e - s > MAX_SEGMENT_S + 1e-9 {
            return Err(TranscribeError::InvalidSegment(format!(
                "segment is {:.3} s, the limit is {MAX_SEGMENT_S} s",
                e - s
            )));
        }
        self.convert_to_key
            .as_ref()
            .map(|t| {
                let key = t.key.parse::<Key>().map_err(|e| TranscribeError::InvalidKey(e.to_string()))?;
                let mode = t.mode.parse::<Mode>().map_err(|e| TranscribeError::InvalidKey(e.to_string()))?;
                Ok((key, mode))
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedChord {
    pub symbol: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcription {
    pub detected_key: String,
    pub detected_mode: String,
    pub chords: Vec<TimedChord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Converted {
    pub key: String,
    pub mode: String,
    pub chords: Vec<TimedChord>,
}

/// Moves every chord by the interval between the detected tonic and the
/// target tonic. No-chord markers pass through.
pub fn convert(t: &Transcription, key: Key, mode: Mode) -> Result<Converted, TranscribeError> {
    let from: PitchClass = t
        .detected_key
        .parse()
        .map_err(|_| TranscribeError::Malformed(format!("detected key {:?}", t.detected_key)))?;
    let chords = t
        .chords
        .iter()
        .map(|c| {
            if c.symbol == NO_CHORD {
                return Ok(c.clone());
            }
            let chord = parse_chord(&c.symbol)
                .map_err(|e| TranscribeError::Malformed(format!("chord {:?}: {e}", c.symbol)))?;
            let moved = transpose_chords(&[chord], from, key.root());
            Ok(TimedChord { symbol: render_chord(&moved[0]), ..c.clone() })
        })
        .collect::<Result<_, TranscribeError>>()?;
    Ok(Converted { key: key.to_string(), mode: mode.to_string(), chords })
}

pub trait TranscriptionProvider: Send + Sync {
    fn transcribe(&self, audio: &AudioRef, start_s: f64, end_s: f64) -> Result<Transcription, TranscribeError>;
}

/// Serves `<file_id>.json` from a fixture directory, else `default.json`.
pub struct MockTranscriber {
    dir: PathBuf,
}

impl MockTranscriber {
    pub fn new(dir: impl Into<PathBuf>) -> MockTranscriber {
        MockTranscriber { dir: dir.into() }
    }
}

impl TranscriptionProvider for MockTranscriber {
    fn transcribe(&self, audio: &AudioRef, start_s: f64, end_s: f64) -> Result<Transcription, TranscribeError> {
        let named = match audio {
            AudioRef::FileId(id) if !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') => {
                Some(self.dir.join(format!("{id}.json")))
            }
            _ => None,
        };
        let path = named.filter(|p| p.is_file()).unwrap_or_else(|| self.dir.join("default.json"));
        let text = fs::read_to_string(&path)
            .map_err(|e| TranscribeError::Provider(format!("{}: {e}", path.display())))?;
        let mut t: Transcription = serde_json::from_str(&text)
            .map_err(|e| TranscribeError::Malformed(format!("{}: {e}", path.display())))?;
        // keep the part of the fixture timeline that overlaps the window
        t.chords.retain(|c| c.end_s > start_s && c.start_s < end_s);
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpTranscriberConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Environment variable with the bearer token, if the service needs one.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

/// Posts `{audio, start_s, end_s}` and expects a [`Transcription`] back.
pub struct HttpTranscriber {
    config: HttpTranscriberConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTranscriber {
    pub fn new(config: HttpTranscriberConfig) -> Result<HttpTranscriber, TranscribeError> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                env::var(var).map_err(|_| TranscribeError::Provider(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(HttpTranscriber { config, api_key, agent })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, LlmError> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(LlmError::Status { code: status, body: text.chars().take(300).collect() });
        }
        Ok(text)
    }
}

impl TranscriptionProvider for HttpTranscriber {
    fn transcribe(&self, audio: &AudioRef, start_s: f64, end_s: f64) -> Result<Transcription, TranscribeError> {
        let body = serde_json::json!({"audio": audio, "start_s": start_s, "end_s": end_s});
        let policy = RetryPolicy { max_retries: self.config.max_retries, ..RetryPolicy::default() };
        let text = policy.run(|| self.attempt(&body)).map_err(|e| TranscribeError::Provider(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| TranscribeError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(start_s: f64, end_s: f64) -> TranscribeRequest {
        TranscribeRequest { audio: AudioRef::FileId("x".into()), start_s, end_s, convert_to_key: None }
    }

    #[test]
    fn segment_limits() {
        assert!(request(0.0, 30.0).validate().is_ok());
        assert!(request(10.0, 40.0).validate().is_ok());
        assert!(request(0.0, 31.0).validate().is_err());
        assert!(request(5.0, 5.0).validate().is_err());
        assert!(request(-1.0, 5.0).validate().is_err());
        assert!(request(0.0, f64::NAN).validate().is_err());
    }

    #[test]
    fn target_key_validation() {
        let mut r = request(0.0, 10.0);
        r.convert_to_key = Some(TargetKey { key: "G".into(), mode: "Maj".into() });
        assert_eq!(r.validate().unwrap(), Some(("G".parse().unwrap(), Mode::Maj)));
        r.convert_to_key = Some(TargetKey { key: "Gb".into(), mode: "Maj".into() });
        assert!(matches!(r.validate(), Err(TranscribeError::InvalidKey(_))));
    }

    #[test]
    fn conversion_shifts_by_tonic_interval() {
        let t = Transcription {
            detected_key: "Gb".into(),
            detected_mode: "Min".into(),
            chords: ["Gbm", "Db7", "N", "Cb"]
                .iter()
                .map(|s| TimedChord { symbol: s.to_string(), start_s: 0.0, end_s: 1.0 })
                .collect(),
        };
        let c = convert(&t, "G".parse().unwrap(), Mode::Maj).unwrap();
        let syms: Vec<_> = c.chords.iter().map(|c| c.symbol.as_str()).collect();
        assert_eq!(syms, vec!["Gm", "D7", "N", "C"]);
        assert_eq!((c.key.as_str(), c.mode.as_str()), ("G", "Maj"));
    }

    #[test]
    fn audio_ref_wire_format() {
        let r: TranscribeRequest =
            serde_json::from_str(r#"{"audio":{"video_url":"https://v"},"start_s":1,"end_s":2}"#).unwrap();
        assert_eq!(r.audio, AudioRef::VideoUrl("https://v".into()));
    }
}
